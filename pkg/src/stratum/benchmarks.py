"""Seeded synthetic tasks for transfer and source selection.

Parameters below were fixed during development and are part of the frozen
acceptance suite; changing them changes the reported thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Domain, SyntheticSpec, generate_synthetic, random_unit_vectors, sample_class_gaussians
from .sat import SatConfig

TRANSFER_SPEC = dict(num_classes=3, dim=10, samples_per_class=60, noise_scale=1.0, class_separation=3.0)
TRANSFER_SHIFT = 12.0
TRANSFER_SAT = SatConfig(num_dims=5)


def transfer_task(seed: int) -> tuple[Domain, Domain]:
    """3-class task whose target classes are each moved along their own direction."""
    spec = SyntheticSpec(
        domain_shifts=(0.0, TRANSFER_SHIFT), seed=seed, independent_noise=True, **TRANSFER_SPEC
    )
    source, target = generate_synthetic(spec)
    return (
        Domain(source.features, source.labels, "source", "synthetic"),
        Domain(target.features, target.labels, "target", "synthetic"),
    )


@dataclass(frozen=True)
class SelectionTask:
    target: Domain
    sources: list[Domain]
    truth: int
    classwise_shift: tuple[float, ...]
    """Mean over classes of each source's true class-mean displacement."""


SELECTION_CLASSES = 3
SELECTION_DIM = 10
SELECTION_SAMPLES = 50
SELECTION_NOISE = 1.0
SELECTION_SEPARATION = 3.0


def _layout(rng: np.random.Generator) -> np.ndarray:
    return SELECTION_SEPARATION * rng.standard_normal((SELECTION_CLASSES, SELECTION_DIM))


def _finish(rng, base, shifts: list[np.ndarray], truth: int) -> SelectionTask:
    target = sample_class_gaussians(base, SELECTION_SAMPLES, SELECTION_NOISE, rng, "target")
    sources = [
        sample_class_gaussians(base + s, SELECTION_SAMPLES, SELECTION_NOISE, rng, f"source{i}")
        for i, s in enumerate(shifts)
    ]
    classwise = tuple(float(np.linalg.norm(s, axis=1).mean()) for s in shifts)
    return SelectionTask(target, sources, truth, classwise)


def selection_task(seed: int) -> SelectionTask:
    """Three sources with independent per-class shifts; exactly one is small."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    base = _layout(rng)
    magnitudes = [rng.uniform(0.5, 1.5), rng.uniform(3.0, 5.0), rng.uniform(3.0, 5.0)]
    order = rng.permutation(3)
    shifts = [None] * 3
    for slot, k in enumerate(order):
        dirs = random_unit_vectors(rng, SELECTION_CLASSES, SELECTION_DIM)
        shifts[slot] = magnitudes[k] * dirs
    truth = int(np.flatnonzero(order == 0)[0])
    return _finish(rng, base, shifts, truth)


SCRAMBLE_TRANSLATION = 2.0
SCRAMBLE_GLOBAL_FRACTION = 0.6
SCRAMBLE_SPREAD = 3.0
SCRAMBLE_FAR = 6.0


def scrambled_selection_task(seed: int) -> SelectionTask:
    """A coherent source against a class-scrambled one of similar global shift.

    Source "coherent" translates every class by the same vector ``v``.
    Source "scrambled" moves the whole domain by ``0.6 v`` but adds per-class
    offsets that cancel on average, so its global displacement is slightly
    smaller while every class is farther from its target counterpart. A
    third, far source is a distractor. Source order is shuffled per seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    base = _layout(rng)
    v = SCRAMBLE_TRANSLATION * random_unit_vectors(rng, 1, SELECTION_DIM)[0]
    w = random_unit_vectors(rng, SELECTION_CLASSES, SELECTION_DIM)
    w -= w.mean(axis=0)
    w *= SCRAMBLE_SPREAD / np.linalg.norm(w, axis=1, keepdims=True)
    w -= w.mean(axis=0)
    coherent = np.tile(v, (SELECTION_CLASSES, 1))
    scrambled = SCRAMBLE_GLOBAL_FRACTION * v + w
    far = SCRAMBLE_FAR * random_unit_vectors(rng, SELECTION_CLASSES, SELECTION_DIM)
    kinds = [coherent, scrambled, far]
    order = rng.permutation(3)
    shifts = [kinds[k] for k in order]
    truth = int(np.flatnonzero(order == 0)[0])
    return _finish(rng, base, shifts, truth)


def scrambled_index(task: SelectionTask) -> int:
    """Position of the scrambled source (second-smallest class-wise shift)."""
    return int(np.argsort(task.classwise_shift)[1])
