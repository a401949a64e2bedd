"""Domain and recording types, canonical CSV I/O, and the synthetic generator.

Class labels are 1-based integers. ``RESIDUAL`` (-1) is reserved for target
rows that did not receive a pseudo label.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataFormatError, ValidationError

RESIDUAL = -1
FLOAT_FORMAT = "{:.17g}"


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawRecording:
    """A timestamped multi-channel stream for one body position."""

    sample_rate: float
    channels: dict[str, np.ndarray]
    labels: np.ndarray
    position_id: str = ""
    dataset_id: str = ""

    def __post_init__(self):
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        labels = _frozen(self.labels, np.int64)
        n = labels.shape[0]
        if labels.ndim != 1 or n < 1:
            raise ValidationError("a recording needs at least one sample")
        chans = {}
        for name, series in self.channels.items():
            arr = _frozen(series, np.float64)
            if arr.shape != (n,):
                raise ValidationError(
                    f"channel {name!r} has length {arr.shape[0]}, labels have {n}"
                )
            chans[name] = arr
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "channels", chans)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def channel_names(self) -> list[str]:
        return list(self.channels)


@dataclass(frozen=True)
class Domain:
    """Feature matrix (rows = windows) with optional labels."""

    features: np.ndarray
    labels: np.ndarray | None = None
    position_id: str = ""
    dataset_id: str = ""

    def __post_init__(self):
        X = _frozen(self.features, np.float64)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValidationError(f"features must be a 2-D matrix with d >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            bad = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise ValidationError(f"non-finite feature value in row {bad}")
        object.__setattr__(self, "features", X)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.ndim != 1 or y.shape[0] != X.shape[0]:
                raise ValidationError(
                    f"{y.shape[0] if y.ndim == 1 else y.shape} labels for {X.shape[0]} rows"
                )
            if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValidationError("labels must be integers")
            y = _frozen(y, np.int64)
            if y.size and y.min() < 1:
                raise ValidationError(f"labels must be >= 1, found {int(y.min())}")
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def classes(self) -> np.ndarray:
        if self.labels is None:
            return np.array([], dtype=np.int64)
        return np.unique(self.labels)

    def check_num_classes(self, num_classes: int) -> None:
        if self.labels is not None and self.labels.size and self.labels.max() > num_classes:
            raise ValidationError(
                f"label {int(self.labels.max())} outside 1..{num_classes}"
            )

    def unlabeled(self) -> "Domain":
        return Domain(self.features, None, self.position_id, self.dataset_id)

    def subset(self, rows) -> "Domain":
        rows = np.asarray(rows, dtype=np.int64)
        y = None if self.labels is None else self.labels[rows]
        return Domain(self.features[rows], y, self.position_id, self.dataset_id)


def split_by_class(domain: Domain) -> dict[int, np.ndarray]:
    """Map each class id to the row indices of that class, in original order.

    Rows are returned as indices rather than copies so callers can recover
    both the feature block (``domain.features[idx]``) and positions.
    """
    if domain.labels is None:
        raise ValidationError("split_by_class needs a labeled domain")
    return {int(c): np.flatnonzero(domain.labels == c) for c in np.unique(domain.labels)}


# ---------------------------------------------------------------------------
# Canonical CSV formats
# ---------------------------------------------------------------------------

def _parse_float(cell: str, line: int, column: str, path) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(f"non-numeric value {cell!r} in column {column!r}", line, path) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value {cell!r} in column {column!r}", line, path)
    return value


def _parse_label(cell: str, line: int, path) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(f"non-numeric label {cell!r}", line, path) from None
    if not value.is_integer():
        raise DataFormatError(f"label {cell!r} is not an integer", line, path)
    return int(value)


def load_recording(
    path: str | os.PathLike,
    schema: Sequence[str],
    sample_rate: float | None = None,
    position_id: str = "",
    dataset_id: str = "",
) -> RawRecording:
    """Read a recording CSV (header ``t,<channels...>,label``).

    Channels are returned in ``schema`` order. When ``sample_rate`` is not
    given it is inferred from the median spacing of ``t``.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError("file does not exist", path=path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file", 1, path) from None
        missing = [c for c in ("t", *schema, "label") if c not in header]
        if missing:
            raise DataFormatError(f"missing column(s) {missing}", 1, path)
        t_idx = header.index("t")
        lab_idx = header.index("label")
        ch_idx = [header.index(c) for c in schema]
        times, labels = [], []
        values: list[list[float]] = [[] for _ in schema]
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, found {len(row)}", line, path
                )
            t = _parse_float(row[t_idx], line, "t", path)
            if times and t < times[-1]:
                raise DataFormatError("timestamps must be non-decreasing", line, path)
            times.append(t)
            for k, (name, i) in enumerate(zip(schema, ch_idx)):
                values[k].append(_parse_float(row[i], line, name, path))
            labels.append(_parse_label(row[lab_idx], line, path))
    if not labels:
        raise DataFormatError("empty file (header only)", 2, path)
    if sample_rate is None:
        dt = np.diff(times)
        dt = dt[dt > 0]
        if dt.size == 0:
            raise DataFormatError("cannot infer sample rate; pass it explicitly", path=path)
        sample_rate = 1.0 / float(np.median(dt))
    return RawRecording(
        sample_rate=sample_rate,
        channels={name: np.asarray(v) for name, v in zip(schema, values)},
        labels=np.asarray(labels),
        position_id=position_id,
        dataset_id=dataset_id,
    )


def save_recording(recording: RawRecording, path: str | os.PathLike, fmt: str = FLOAT_FORMAT) -> None:
    names = recording.channel_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names, "label"])
        cols = [recording.channels[n] for n in names]
        for i in range(len(recording)):
            t = i / recording.sample_rate
            w.writerow([fmt.format(t), *(fmt.format(c[i]) for c in cols), int(recording.labels[i])])


def load_features(
    path: str | os.PathLike, position_id: str = "", dataset_id: str = ""
) -> Domain:
    """Read a feature-matrix CSV (header ``f1..fd[,label]``)."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError("file does not exist", path=path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file", 1, path) from None
        has_label = bool(header) and header[-1] == "label"
        fcols = header[:-1] if has_label else header
        expected = [f"f{i + 1}" for i in range(len(fcols))]
        if not fcols or fcols != expected:
            raise DataFormatError(f"header must be f1..fd[,label], got {header}", 1, path)
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"expected {len(header)} fields, found {len(row)}", line, path)
            rows.append([_parse_float(c, line, name, path) for c, name in zip(row, fcols)])
            if has_label:
                labels.append(_parse_label(row[-1], line, path))
    if not rows:
        raise DataFormatError("empty file (header only)", 2, path)
    return Domain(np.asarray(rows), np.asarray(labels) if has_label else None, position_id, dataset_id)


def save_features(
    domain: Domain, path: str | os.PathLike, fmt: str = FLOAT_FORMAT, include_labels: bool = True
) -> None:
    with_labels = include_labels and domain.labels is not None
    header = [f"f{i + 1}" for i in range(domain.dim)] + (["label"] if with_labels else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, row in enumerate(domain.features):
            cells = [fmt.format(v) for v in row]
            if with_labels:
                cells.append(int(domain.labels[i]))
            w.writerow(cells)


# ---------------------------------------------------------------------------
# Synthetic cross-domain generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Class-conditional Gaussian domains sharing base means.

    Domain ``k`` draws class ``c`` around ``base_mean(c) + domain_shifts[k] *
    direction(c)``. By default all domains reuse one noise draw, so domains
    with equal shifts are identical; ``independent_noise`` gives each domain
    its own draw.
    """

    num_classes: int
    dim: int
    samples_per_class: int
    domain_shifts: tuple[float, ...]
    noise_scale: float
    seed: int
    class_separation: float = 3.0
    independent_noise: bool = False

    def __post_init__(self):
        object.__setattr__(self, "domain_shifts", tuple(float(s) for s in self.domain_shifts))
        if self.num_classes < 2:
            raise ValidationError("num_classes must be >= 2")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.samples_per_class < 2:
            raise ValidationError("samples_per_class must be >= 2")
        if not self.domain_shifts:
            raise ValidationError("domain_shifts must be non-empty")
        if not all(math.isfinite(s) and s >= 0 for s in self.domain_shifts):
            raise ValidationError("domain_shifts must be finite and non-negative")
        if not self.noise_scale > 0:
            raise ValidationError("noise_scale must be positive")


def random_unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((count, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def sample_class_gaussians(
    means: np.ndarray,
    samples_per_class: int | Sequence[int],
    noise_scale: float,
    rng: np.random.Generator,
    position_id: str = "",
    dataset_id: str = "synthetic",
) -> Domain:
    """Draw a labeled domain with class ``c`` (1-based) around ``means[c-1]``."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    C, d = means.shape
    counts = (
        [int(samples_per_class)] * C
        if np.isscalar(samples_per_class)
        else [int(k) for k in samples_per_class]
    )
    blocks, labels = [], []
    for c, k in enumerate(counts):
        blocks.append(means[c] + noise_scale * rng.standard_normal((k, d)))
        labels.append(np.full(k, c + 1))
    return Domain(np.vstack(blocks), np.concatenate(labels), position_id, dataset_id)


def generate_synthetic(spec: SyntheticSpec) -> list[Domain]:
    root = np.random.SeedSequence(spec.seed)
    struct_seq, noise_seq = root.spawn(2)
    struct_rng = np.random.default_rng(struct_seq)
    C, d, n = spec.num_classes, spec.dim, spec.samples_per_class
    base = spec.class_separation * struct_rng.standard_normal((C, d))
    directions = random_unit_vectors(struct_rng, C, d)

    if spec.independent_noise:
        noise_rngs = [np.random.default_rng(s) for s in noise_seq.spawn(len(spec.domain_shifts))]
        noises = [r.standard_normal((C, n, d)) for r in noise_rngs]
    else:
        shared = np.random.default_rng(noise_seq).standard_normal((C, n, d))
        noises = [shared] * len(spec.domain_shifts)

    labels = np.repeat(np.arange(1, C + 1), n)
    domains = []
    for k, (shift, z) in enumerate(zip(spec.domain_shifts, noises)):
        means = base + shift * directions
        X = (means[:, None, :] + spec.noise_scale * z).reshape(C * n, d)
        domains.append(Domain(X, labels, position_id=f"domain{k}", dataset_id="synthetic"))
    return domains
