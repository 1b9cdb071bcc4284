import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ontospace.config import TrainingConfig
from ontospace.extensional import (
    ExtensionalParams,
    clip_to_unit_ball,
    contains,
    init_extensional,
    score_instanceof_ext,
    score_relational,
    score_subclassof_ext,
)
from ontospace.intensional import (
    IntensionalParams,
    combine_instanceof,
    combine_subclassof,
    init_intensional,
    score_instanceof_int,
    score_subclassof_int,
    virtual_instance,
)
from ontospace.model import ModelState


def random_ext(rng, n_i=6, n_r=3, n_c=5, d=4):
    return ExtensionalParams(
        instances=clip_to_unit_ball(rng.normal(size=(n_i, d))),
        relations=rng.normal(size=(n_r, d)),
        centers=rng.normal(size=(n_c, d)),
        axes=rng.uniform(0.2, 2.0, size=(n_c, d)),
        radii=rng.uniform(0.1, 2.0, size=n_c),
    )


def random_int(rng, n_c=5, d=4, bridge=False):
    return IntensionalParams(
        concept_vecs=rng.normal(size=(n_c, d)),
        bridge=rng.normal(size=(d, d)) if bridge else None,
        init_mode="UNP",
    )


class TestInstanceOfExt:
    def test_center_inside(self):
        p = _fixed_params(instance=(0.0, 0.0), center=(0.0, 0.0), axes=(1.0, 1.0), radius=1.0)
        assert score_instanceof_ext(0, 0, p) == 0.0

    def test_outside_value(self):
        p = _fixed_params(instance=(2.0, 0.0), center=(0.0, 0.0), axes=(1.0, 1.0), radius=1.0)
        assert score_instanceof_ext(0, 0, p) == pytest.approx(3.0, abs=1e-12)

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = random_ext(rng)
            i = int(rng.integers(p.instances.shape[0]))
            c = int(rng.integers(p.centers.shape[0]))
            expected = oracles.instanceof_ext(p.instances[i], p.centers[c],
                                              p.axes[c], float(p.radii[c]))
            assert score_instanceof_ext(i, c, p) == pytest.approx(expected, abs=1e-10)


class TestSubClassOfExt:
    def test_nested_is_zero(self):
        p = _two_concepts(radii=(1.0, 2.0))
        assert score_subclassof_ext(0, 1, p) == 0.0

    def test_inverted_radii(self):
        p = _two_concepts(radii=(2.0, 1.0))
        assert score_subclassof_ext(0, 1, p) == pytest.approx(3.0, abs=1e-12)

    def test_matches_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            p = random_ext(rng)
            ci = int(rng.integers(p.centers.shape[0]))
            cj = int(rng.integers(p.centers.shape[0]))
            expected = oracles.subclassof_ext(
                p.centers[ci], p.axes[ci], float(p.radii[ci]),
                p.centers[cj], p.axes[cj], float(p.radii[cj]))
            assert score_subclassof_ext(ci, cj, p) == pytest.approx(expected, abs=1e-10)

    def test_growing_super_radius_never_increases_score(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            p = random_ext(rng)
            before = score_subclassof_ext(0, 1, p)
            p.radii[1] *= 2.0
            assert score_subclassof_ext(0, 1, p) <= before + 1e-12


class TestRelational:
    def test_exact_translation(self):
        p = _fixed_rel(h=(1.0, 0.0), r=(1.0, 1.0), t=(2.0, 1.0))
        assert score_relational(0, 0, 1, p) == 0.0

    def test_unit_residual(self):
        p = _fixed_rel(h=(0.0, 0.0), r=(0.0, 0.0), t=(1.0, 0.0))
        assert score_relational(0, 0, 1, p) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("norm", ["L1", "L2"])
    def test_matches_oracle(self, norm):
        rng = np.random.default_rng(14)
        for _ in range(50):
            p = random_ext(rng)
            h, t = (int(x) for x in rng.integers(p.instances.shape[0], size=2))
            r = int(rng.integers(p.relations.shape[0]))
            expected = oracles.relational(p.instances[h], p.relations[r],
                                          p.instances[t], norm=norm)
            assert score_relational(h, r, t, p, norm=norm) == pytest.approx(expected, abs=1e-10)


class TestContains:
    def test_center_and_far_point(self):
        p = _fixed_params(instance=(0.0, 0.0), center=(0.5, 0.5), axes=(1.0, 2.0), radius=1.0)
        assert contains(0, p.centers[0], p)
        far = p.centers[0] + np.array([2.0 * p.axes[0][0] * p.radii[0], 0.0])
        assert not contains(0, far, p)

    def test_agrees_with_zero_score(self):
        rng = np.random.default_rng(15)
        p = random_ext(rng, n_i=1)
        for _ in range(1000):
            point = rng.normal(scale=1.5, size=p.dim)
            p.instances[0] = point
            c = int(rng.integers(p.centers.shape[0]))
            assert (score_instanceof_ext(0, c, p) == 0.0) == contains(c, point, p)


class TestScoreSigns:
    def test_all_scores_nonnegative(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            p = random_ext(rng)
            i, t = (int(x) for x in rng.integers(p.instances.shape[0], size=2))
            r = int(rng.integers(p.relations.shape[0]))
            ci, cj = (int(x) for x in rng.integers(p.centers.shape[0], size=2))
            assert score_instanceof_ext(i, ci, p) >= 0.0
            assert score_subclassof_ext(ci, cj, p) >= 0.0
            assert score_relational(i, r, t, p) >= 0.0
            assert score_relational(i, r, t, p, norm="L1") >= 0.0


class TestNestingTransitivity:
    """Region nesting chains: when c1 truly nests in c2 and c2 in c3 (shared
    axes, center gap within the radius gap), the c1-in-c3 score is zero."""

    def test_contained_chains_score_zero(self):
        rng = np.random.default_rng(25)
        for _ in range(100):
            d = int(rng.integers(2, 6))
            axes = rng.uniform(0.3, 1.5, size=d)
            r1 = float(rng.uniform(0.2, 1.0))
            r2 = r1 + float(rng.uniform(0.1, 1.0))
            r3 = r2 + float(rng.uniform(0.1, 1.0))
            c1 = rng.normal(size=d)

            def step_center(base, gap):
                direction = rng.normal(size=d)
                direction /= np.linalg.norm(direction)
                # move at most `gap` in normalized coordinates
                return base + direction * gap * float(rng.uniform(0.0, 1.0)) * axes

            c2 = step_center(c1, r2 - r1)
            c3 = step_center(c2, r3 - r2)
            p = ExtensionalParams(
                instances=np.zeros((1, d)), relations=np.zeros((1, d)),
                centers=np.vstack([c1, c2, c3]),
                axes=np.vstack([axes, axes, axes]),
                radii=np.array([r1, r2, r3]),
            )
            assert score_subclassof_ext(0, 1, p) == 0.0
            assert score_subclassof_ext(1, 2, p) == 0.0
            assert score_subclassof_ext(0, 2, p) == 0.0

    def test_score_zero_alone_does_not_chain(self):
        # the zero-score condition (squared-radius budget) is weaker than
        # containment and admits non-transitive chains; pin one such case
        p = ExtensionalParams(
            instances=np.zeros((1, 2)), relations=np.zeros((1, 2)),
            centers=np.array([[0.0, 0.0], [1.5, 0.0], [3.0, 0.0]]),
            axes=np.ones((3, 2)),
            radii=np.array([1.0, 2.0, 2.5]),
        )
        assert score_subclassof_ext(0, 1, p) == 0.0
        assert score_subclassof_ext(1, 2, p) == 0.0
        assert score_subclassof_ext(0, 2, p) > 0.0


class TestInitExtensional:
    def test_deterministic(self):
        a = init_extensional(10, 3, 7, 16, seed=5)
        b = init_extensional(10, 3, 7, 16, seed=5)
        for x, y in zip(vars(a).values(), vars(b).values()):
            assert np.array_equal(x, y)

    def test_invariants_at_scale(self):
        p = init_extensional(39374, 39, 46110, 100, seed=1)
        p.check_invariants()

    def test_axes_positive_over_seeds(self):
        mins = [init_extensional(20, 4, 12, 8, seed=s).axes.min() for s in range(10)]
        assert min(mins) > 0

    def test_zero_sizes_rejected(self):
        from ontospace.errors import DataError

        with pytest.raises(DataError):
            init_extensional(0, 1, 1, 4, seed=0)
        with pytest.raises(DataError):
            init_extensional(1, 1, 1, 0, seed=0)


class TestVirtualInstance:
    def test_identity_passthrough_is_exact(self):
        rng = np.random.default_rng(16)
        ext = random_ext(rng)
        intp = random_int(rng, bridge=False)
        for i in range(ext.instances.shape[0]):
            out = virtual_instance(i, ext, intp)
            assert out is ext.instances[i] or np.array_equal(out, ext.instances[i])

    def test_scaled_identity(self):
        rng = np.random.default_rng(17)
        ext = random_ext(rng, d=2)
        ext.instances[0] = np.array([1.0, 0.0])
        intp = IntensionalParams(concept_vecs=np.ones((1, 2)),
                                 bridge=2.0 * np.eye(2), init_mode="UNP")
        assert np.allclose(virtual_instance(0, ext, intp), [2.0, 0.0])

    def test_matches_matvec_oracle(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            d = int(rng.integers(2, 8))
            ext = random_ext(rng, d=d)
            intp = random_int(rng, d=d, bridge=True)
            got = virtual_instance(0, ext, intp)
            expected = oracles.matvec(intp.bridge, ext.instances[0])
            np.testing.assert_allclose(got, expected, atol=1e-10)


class TestIntensionalScores:
    def test_parallel_orthogonal_antiparallel(self):
        ext = _fixed_rel(h=(1.0, 1.0), r=(0.0, 0.0), t=(1.0, 0.0))
        intp = IntensionalParams(
            concept_vecs=np.array([[1.0, 1.0], [0.0, 1.0], [-1.0, -1.0]]),
            bridge=None, init_mode="UNP")
        assert score_instanceof_int(0, 0, ext, intp) == pytest.approx(0.0, abs=1e-12)
        ext.instances[0] = np.array([1.0, 0.0])
        assert score_instanceof_int(0, 1, ext, intp) == pytest.approx(1.0, abs=1e-12)
        ext.instances[0] = np.array([1.0, 1.0])
        assert score_instanceof_int(0, 2, ext, intp) == pytest.approx(2.0, abs=1e-12)

    def test_subclassof_forced_arithmetic(self):
        intp = IntensionalParams(
            concept_vecs=np.array([[1.0, 0.0], [2.0, 0.0]]),
            bridge=None, init_mode="UNP")
        assert score_subclassof_int(0, 1, intp) == pytest.approx(-1.0, abs=1e-12)
        assert score_subclassof_int(1, 0, intp) == pytest.approx(1.0, abs=1e-12)
        assert score_subclassof_int(0, 0, intp) == pytest.approx(0.0, abs=1e-12)

    def test_matches_oracles(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            ext = random_ext(rng)
            intp = random_int(rng, bridge=bool(rng.integers(2)))
            i = int(rng.integers(ext.instances.shape[0]))
            ci, cj = (int(x) for x in rng.integers(intp.concept_vecs.shape[0], size=2))
            virt = virtual_instance(i, ext, intp)
            assert score_instanceof_int(i, ci, ext, intp) == pytest.approx(
                oracles.instanceof_int(virt, intp.concept_vecs[ci]), abs=1e-10)
            assert score_subclassof_int(ci, cj, intp) == pytest.approx(
                oracles.subclassof_int(intp.concept_vecs[ci], intp.concept_vecs[cj]),
                abs=1e-10)

    def test_zero_vector_neutral_with_counter(self):
        ext = _fixed_rel(h=(0.0, 0.0), r=(0.0, 0.0), t=(1.0, 0.0))
        intp = IntensionalParams(concept_vecs=np.array([[1.0, 1.0]]),
                                 bridge=None, init_mode="UNP")
        assert score_instanceof_int(0, 0, ext, intp) == 1.0
        assert intp.zero_cos_events == 1

    @given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
    @settings(max_examples=30)
    def test_cosine_scale_invariance(self, a, b):
        ext = _fixed_rel(h=(0.6, -0.3), r=(0.0, 0.0), t=(0.0, 0.0))
        intp = IntensionalParams(concept_vecs=np.array([[0.4, 1.2]]),
                                 bridge=None, init_mode="UNP")
        base = score_instanceof_int(0, 0, ext, intp)
        ext.instances[0] *= a
        intp.concept_vecs[0] *= b
        assert score_instanceof_int(0, 0, ext, intp) == pytest.approx(base, abs=1e-9)
        assert 0.0 <= base <= 2.0

    def test_norm_antisymmetry_identity(self):
        rng = np.random.default_rng(20)
        for _ in range(30):
            intp = random_int(rng, n_c=2)
            ab = score_subclassof_int(0, 1, intp)
            ba = score_subclassof_int(1, 0, intp)
            u, v = intp.concept_vecs
            expected = 2.0 * (1.0 - oracles.cos(u, v))
            assert ab + ba == pytest.approx(expected, abs=1e-10)


class TestCombine:
    def test_values(self):
        assert combine_instanceof(3.0, 1.0, 0.5) == 3.5
        assert combine_subclassof(0.0, 0.0, 7.0) == 0.0

    def test_alpha_zero_is_extensional_only(self):
        rng = np.random.default_rng(21)
        ext = random_ext(rng)
        intp = random_int(rng)
        cfg = TrainingConfig(d=4, alpha=0.0).validate()
        state = ModelState(extensional=ext, intensional=intp, config=cfg)
        for i in range(3):
            for c in range(3):
                assert state.score_instanceof(i, c) == score_instanceof_ext(i, c, ext)
                assert state.score_subclassof(i, c) == score_subclassof_ext(i, c, ext)


class TestInitIntensional:
    def test_unp_deterministic(self):
        a = init_intensional(7, 6, seed=3, bridge_mode="EYE")
        b = init_intensional(7, 6, seed=3, bridge_mode="EYE")
        assert np.array_equal(a.concept_vecs, b.concept_vecs)
        assert a.bridge is None

    def test_mat_bridge_starts_near_identity(self):
        p = init_intensional(4, 8, seed=9, bridge_mode="MAT")
        assert np.abs(p.bridge - np.eye(8)).max() < 0.1


class TestBatchScoringAgreesWithScalar:
    @pytest.mark.parametrize("bridge", [False, True])
    @pytest.mark.parametrize("alpha", [0.0, 0.5])
    def test_all_kinds(self, bridge, alpha):
        rng = np.random.default_rng(22)
        ext = random_ext(rng, n_i=8, n_r=4, n_c=6, d=5)
        intp = random_int(rng, n_c=6, d=5, bridge=bridge)
        cfg = TrainingConfig(d=5, alpha=alpha, bridge="MAT" if bridge else "EYE").validate()
        state = ModelState(extensional=ext, intensional=intp, config=cfg)

        rel = rng.integers(0, [8, 4, 8], size=(20, 3))
        ins = rng.integers(0, [8, 6], size=(20, 2))
        sub = rng.integers(0, [6, 6], size=(20, 2))
        np.testing.assert_allclose(
            state.score_batch("relational", rel),
            [state.score_relational(*map(int, row)) for row in rel], atol=1e-12)
        np.testing.assert_allclose(
            state.score_batch("instance_of", ins),
            [state.score_instanceof(*map(int, row)) for row in ins], atol=1e-12)
        np.testing.assert_allclose(
            state.score_batch("sub_class_of", sub),
            [state.score_subclassof(*map(int, row)) for row in sub], atol=1e-12)

    def test_candidate_sweeps(self):
        rng = np.random.default_rng(23)
        ext = random_ext(rng, n_i=10, n_r=3, d=4)
        intp = random_int(rng, d=4)
        cfg = TrainingConfig(d=4).validate()
        state = ModelState(extensional=ext, intensional=intp, config=cfg)
        heads = state.rel_scores_all_heads(1, 2)
        tails = state.rel_scores_all_tails(3, 1)
        for x in range(10):
            assert heads[x] == pytest.approx(state.score_relational(x, 1, 2), abs=1e-12)
            assert tails[x] == pytest.approx(state.score_relational(3, 1, x), abs=1e-12)


def _fixed_params(instance, center, axes, radius):
    return ExtensionalParams(
        instances=np.array([instance], dtype=np.float64),
        relations=np.zeros((1, len(instance))),
        centers=np.array([center], dtype=np.float64),
        axes=np.array([axes], dtype=np.float64),
        radii=np.array([radius], dtype=np.float64),
    )


def _two_concepts(radii, d=2):
    return ExtensionalParams(
        instances=np.zeros((1, d)),
        relations=np.zeros((1, d)),
        centers=np.zeros((2, d)),
        axes=np.ones((2, d)),
        radii=np.array(radii, dtype=np.float64),
    )


def _fixed_rel(h, r, t):
    return ExtensionalParams(
        instances=np.array([h, t], dtype=np.float64),
        relations=np.array([r], dtype=np.float64),
        centers=np.zeros((3, len(h))),
        axes=np.ones((3, len(h))),
        radii=np.ones(3),
    )
