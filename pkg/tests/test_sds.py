import math

import numpy as np
import pytest

import oracles
from stratum.benchmarks import scrambled_index, scrambled_selection_task, selection_task
from stratum.data import Domain, SyntheticSpec, generate_synthetic
from stratum.errors import NoCommonClassError, ValidationError
from stratum.kernels import KernelSpec, mmd_stratified, standardize
from stratum.sds import (
    UnreachableSourceWarning,
    rank_sources_global,
    select_source,
    stratified_distance,
    transfer_accuracies,
)
from stratum.voting import ClassifierConfig, default_voters, pseudo_label


def shifted_pair(seed=0, shifts=(0.0, 0.5, 5.0)):
    domains = generate_synthetic(
        SyntheticSpec(3, 4, 30, shifts, 1.0, seed=seed, independent_noise=True)
    )
    return domains[0], list(domains[1:])


class TestSelectSource:
    def test_single_source(self):
        target, sources = shifted_pair(shifts=(0.0, 5.0))
        assert select_source(sources, target.unlabeled()).selected == 0

    def test_nearer_source_selected(self):
        target, sources = shifted_pair()
        ranking = select_source(sources, target.unlabeled())
        assert ranking.selected == 0
        assert ranking.distances[0] < ranking.distances[1]
        assert ranking.order == [0, 1]

    def test_distances_confirmed_by_oracle(self):
        # recompute SD by brute force from the same pseudo labels
        target, sources = shifted_pair(seed=3)
        ranking = select_source(sources, target.unlabeled())
        for source, sd in zip(sources, ranking.distances):
            S, T = standardize(source.features, target.features)
            lab = pseudo_label(Domain(S, source.labels), T, default_voters())
            C, yc = T[lab.candidate_indices], lab.candidate_labels
            sigma = oracles.median_distance(np.vstack([S, C]))
            assert sd == pytest.approx(oracles.stratified_oracle(S, source.labels, C, yc, "rbf", sigma), abs=1e-10)

    def test_identical_sources_tie_to_lowest(self):
        target, sources = shifted_pair()
        ranking = select_source([sources[1], sources[1]], target.unlabeled())
        assert ranking.distances[0] == ranking.distances[1]
        assert ranking.selected == 0

    def test_permutation_invariance(self):
        target, sources = shifted_pair(shifts=(0.0, 4.0, 0.5, 2.0))
        base = select_source(sources, target.unlabeled())
        perm = [2, 0, 1]
        permuted = select_source([sources[i] for i in perm], target.unlabeled())
        assert perm[permuted.selected] == base.selected
        for j, i in enumerate(perm):
            assert permuted.distances[j] == pytest.approx(base.distances[i], abs=1e-12)

    def test_rbf_bounds(self):
        target, sources = shifted_pair()
        for d in select_source(sources, target.unlabeled()).distances:
            assert 0 <= d < 4

    def test_relabeling_invariance(self):
        # tie-free voters: kNN/forest ties resolve toward the lowest label id
        target, sources = shifted_pair()
        voters = [ClassifierConfig.knn(1), ClassifierConfig.svm(100.0)]
        perm = np.array([0, 3, 1, 2])
        relabeled = [Domain(s.features, perm[s.labels]) for s in sources]
        a = select_source(sources, target.unlabeled(), voters).distances
        b = select_source(relabeled, target.unlabeled(), voters).distances
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unreachable_source(self, monkeypatch):
        import stratum.sds as sds

        real = sds.stratified_distance

        def partial(source, *args, **kwargs):
            if source.n == 5:
                raise NoCommonClassError("none")
            return real(source, *args, **kwargs)

        monkeypatch.setattr(sds, "stratified_distance", partial)
        target, sources = shifted_pair(shifts=(0.0, 0.5))
        lone = Domain(sources[0].features[:5], sources[0].labels[:5])
        with pytest.warns(UnreachableSourceWarning):
            ranking = select_source([lone, sources[0]], target.unlabeled())
        assert ranking.distances[0] == math.inf
        assert ranking.selected == 1

    def test_all_unreachable(self, monkeypatch):
        import stratum.sds as sds

        def boom(*args, **kwargs):
            raise NoCommonClassError("none")

        monkeypatch.setattr(sds, "stratified_distance", boom)
        target, sources = shifted_pair(shifts=(0.0, 1.0))
        with pytest.warns(UnreachableSourceWarning), pytest.raises(NoCommonClassError):
            select_source(sources, target)

    def test_dimension_mismatch(self):
        target, sources = shifted_pair(shifts=(0.0, 1.0))
        with pytest.raises(ValidationError):
            select_source([Domain(np.zeros((4, 2)), np.array([1, 2, 1, 2]))], target)

    def test_no_sources(self):
        target, _ = shifted_pair(shifts=(0.0, 1.0))
        with pytest.raises(ValidationError):
            select_source([], target)

    def test_unlabeled_source(self):
        target, sources = shifted_pair(shifts=(0.0, 1.0))
        with pytest.raises(ValidationError):
            stratified_distance(sources[0].unlabeled(), target)


class TestGlobal:
    def test_identical_is_zero_and_first(self):
        target, sources = shifted_pair(shifts=(0.0, 3.0))
        ranking = rank_sources_global([sources[0], target], target)
        assert ranking.distances[1] == 0.0
        assert ranking.selected == 1

    def test_label_scramble_invisible_to_gd(self):
        # same rows, permuted class structure: GD cannot tell them apart, SD can
        target, sources = shifted_pair(shifts=(0.0, 0.0))
        s = sources[0]
        scrambled = Domain(s.features, np.array([2, 3, 1])[s.labels - 1])
        gd = rank_sources_global([s, scrambled], target, standardize=False).distances
        assert gd[0] == pytest.approx(gd[1], abs=1e-15)
        spec = KernelSpec.rbf()
        sd_coherent = mmd_stratified(s, target, spec)
        sd_scrambled = mmd_stratified(scrambled, target, spec)
        sigma = oracles.median_distance(np.vstack([s.features, target.features]))
        assert sd_scrambled == pytest.approx(
            oracles.stratified_oracle(scrambled.features, scrambled.labels, target.features, target.labels, "rbf",
                                      sigma), abs=1e-10)
        assert sd_coherent < 0.1 * sd_scrambled

    def test_matches_oracle(self):
        target, sources = shifted_pair()
        ranking = rank_sources_global(sources, target, KernelSpec.linear(), standardize=False)
        for s, d in zip(sources, ranking.distances):
            assert d == pytest.approx(oracles.mmd_double_sum(s.features, target.features, "linear"), abs=1e-10)


class TestBenchmarks:
    def test_selection_task_structure(self):
        task = selection_task(4)
        assert len(task.sources) == 3
        assert task.truth == int(np.argmin(task.classwise_shift))
        assert all(s.dim == task.target.dim for s in task.sources)

    def test_scrambled_task_structure(self):
        task = scrambled_selection_task(4)
        shifts = sorted(task.classwise_shift)
        assert task.classwise_shift[task.truth] == pytest.approx(2.0)
        assert shifts[0] == pytest.approx(2.0)
        assert scrambled_index(task) != task.truth

    def test_deterministic(self):
        a, b = selection_task(9), selection_task(9)
        for x, y in zip(a.sources, b.sources):
            assert x.features.tobytes() == y.features.tobytes()

    def test_transfer_accuracies(self):
        target, sources = shifted_pair(shifts=(0.0, 0.0, 50.0))
        accs = transfer_accuracies(sources, target, standardize=False)
        assert accs[0] > accs[1]
        assert all(0.0 <= a <= 1.0 for a in accs)
        assert not math.isnan(accs[1])
