"""Flat ``key = value`` run configuration shared by all CLI commands."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .errors import StratumError
from .features import WindowingConfig
from .kernels import MEDIAN_HEURISTIC, KernelSpec
from .sat import SatConfig
from .voting import ClassifierConfig

SEED_ENV = "STRATUM_SEED"


class ConfigError(StratumError, ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    window_seconds: float = 5.0
    overlap_fraction: float = 0.5
    label_rule: str = "majority-label"
    sds_kernel: str = "rbf"
    sds_bandwidth: str = MEDIAN_HEURISTIC
    kernel: str = "linear"
    bandwidth: str = MEDIAN_HEURISTIC
    num_dims: int = 30
    lam: float = 1.0
    max_iterations: int = 10
    convergence_fraction: float = 0.01
    voters: str = "knn:3,forest:30,svm:100"
    annotator: str = "knn:1"
    standardize: bool = True
    seed: int = 0

    def windowing(self) -> WindowingConfig:
        return WindowingConfig(self.window_seconds, self.overlap_fraction, self.label_rule)

    def sds_kernel_spec(self) -> KernelSpec:
        return _kernel(self.sds_kernel, self.sds_bandwidth)

    def sat_config(self) -> SatConfig:
        return SatConfig(
            num_dims=self.num_dims,
            lam=self.lam,
            kernel=_kernel(self.kernel, self.bandwidth),
            max_iterations=self.max_iterations,
            convergence_fraction=self.convergence_fraction,
            annotator=parse_classifier(self.annotator, self.seed),
            standardize=self.standardize,
        )

    def voter_configs(self) -> list[ClassifierConfig]:
        return [parse_classifier(item, self.seed) for item in self.voters.split(",") if item.strip()]

    def validate(self) -> "RunConfig":
        try:
            self.windowing()
            self.sds_kernel_spec()
            self.sat_config()
            if not self.voter_configs():
                raise ConfigError("voters must list at least one classifier")
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _kernel(kind: str, bandwidth: str) -> KernelSpec:
    if kind == "linear":
        return KernelSpec.linear()
    bw = bandwidth if bandwidth == MEDIAN_HEURISTIC else float(bandwidth)
    return KernelSpec(kind, bw)


def parse_classifier(text: str, seed: int = 0) -> ClassifierConfig:
    """``knn:K``, ``forest:TREES[:DEPTH]`` or ``svm:C``."""
    name, _, arg = text.strip().partition(":")
    try:
        if name == "knn":
            return ClassifierConfig.knn(int(arg or 3))
        if name == "forest":
            trees, _, depth = (arg or "30").partition(":")
            return ClassifierConfig.forest(int(trees), seed=seed, max_depth=int(depth) if depth else None)
        if name == "svm":
            return ClassifierConfig.svm(float(arg or 100.0))
    except ValueError as exc:
        raise ConfigError(f"bad classifier spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown classifier {name!r} (use knn, forest or svm)")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    if kind in ("bool", bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if kind in ("int", int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if kind in ("float", float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw.strip()


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return replace(base or RunConfig(), **values).validate()


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path: str | os.PathLike | None = None, env=None) -> RunConfig:
    """Defaults, then the file (if any), then ``STRATUM_SEED``."""
    cfg = RunConfig()
    if path is not None:
        with open(path) as fh:
            cfg = parse_config(fh.read(), cfg)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        cfg = replace(cfg, seed=_coerce("seed", env[SEED_ENV]))
    return cfg.validate()
