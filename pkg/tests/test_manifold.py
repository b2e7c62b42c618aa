import numpy as np
import pytest

from conftest import rand_invertible, rand_orthogonal, rand_psd_rank, rand_spd
from spdreg import (
    DimensionMismatch,
    FactorMat,
    NonPositiveDiagonal,
    RankMismatch,
    SingularMatrix,
    SymMat,
    dist_geometric,
    dist_wasserstein,
    factorize,
    log_geometric,
    log_wasserstein,
    no_affine_invariance_witness,
    sym_func,
    vec_euclidean,
    vec_geometric,
    vec_logdiag,
    vec_wasserstein,
)
from spdreg.manifold import WITNESS_EPSILONS, Embedding, embed, feature_dim, fit_embedding


class TestDistGeometric:
    def test_zero_at_equal_arguments(self):
        rng = np.random.default_rng(0)
        s = rand_spd(rng, 3)
        assert dist_geometric(s, s) <= 1e-7

    def test_scaled_identity(self):
        # eigenvalues of s^-1 t are (e^2, e^2), so d = sqrt(4 + 4).
        s = SymMat(np.eye(2))
        t = SymMat(np.diag([np.e**2, np.e**2]))
        assert dist_geometric(s, t) == pytest.approx(2.8284271247461903, abs=1e-12)

    def test_affine_invariance(self):
        rng = np.random.default_rng(5)
        s, t = rand_spd(rng, 4), rand_spd(rng, 4)
        d = dist_geometric(s, t)
        for _ in range(10):
            w = rand_invertible(rng, 4)
            dw = dist_geometric(SymMat(w.T @ s.data @ w), SymMat(w.T @ t.data @ w))
            assert abs(dw - d) <= 1e-8 * (1.0 + d)

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        s, t = rand_spd(rng, 4), rand_spd(rng, 4)
        assert abs(dist_geometric(s, t) - dist_geometric(t, s)) <= 1e-10

    def test_rank_deficient_raises(self):
        full = SymMat(np.eye(2))
        flat = SymMat(np.diag([1.0, 0.0]))
        with pytest.raises(SingularMatrix):
            dist_geometric(flat, full)
        with pytest.raises(SingularMatrix):
            dist_geometric(full, flat)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            a, b, c = (rand_spd(rng, 3) for _ in range(3))
            assert dist_geometric(a, c) <= dist_geometric(a, b) + dist_geometric(b, c) + 1e-8


class TestDistWasserstein:
    def test_zero_at_equal_arguments(self):
        rng = np.random.default_rng(1)
        s = rand_spd(rng, 4)
        assert dist_wasserstein(s, s) <= 1e-7

    def test_commuting_scalars(self):
        # commuting case: d^2 = sum (sqrt(a) - sqrt(b))^2
        assert dist_wasserstein(SymMat([[4.0]]), SymMat([[1.0]])) == pytest.approx(
            1.0, abs=1e-10
        )

    def test_rank_deficient_pair(self):
        a = SymMat(np.diag([4.0, 0.0]))
        b = SymMat(np.diag([1.0, 0.0]))
        assert dist_wasserstein(a, b) == pytest.approx(1.0, abs=1e-7)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        s, t = rand_spd(rng, 4), rand_psd_rank(rng, 4, 2)
        assert abs(dist_wasserstein(s, t) - dist_wasserstein(t, s)) <= 1e-8

    def test_matches_literal_trace_formula(self):
        # oracle: tr(s) + tr(t) - 2 tr((s^1/2 t s^1/2)^1/2) assembled directly
        rng = np.random.default_rng(22)
        for _ in range(10):
            s, t = rand_spd(rng, 4), rand_spd(rng, 4)
            s12 = sym_func(s, "sqrt").data
            w = np.linalg.eigvalsh(s12 @ t.data @ s12)
            d2 = np.trace(s.data) + np.trace(t.data) - 2 * np.sum(
                np.sqrt(np.clip(w, 0.0, None))
            )
            assert dist_wasserstein(s, t) == pytest.approx(np.sqrt(d2), abs=1e-8)

    def test_orthogonal_invariance_including_rank_deficient(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            s = rand_psd_rank(rng, 4, 2)
            t = rand_psd_rank(rng, 4, 3)
            d = dist_wasserstein(s, t)
            q = rand_orthogonal(rng, 4)
            dq = dist_wasserstein(SymMat(q.T @ s.data @ q), SymMat(q.T @ t.data @ q))
            assert abs(dq - d) <= 1e-8 * (1.0 + d)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(14)
        for _ in range(25):
            a, b, c = (rand_psd_rank(rng, 3, 2) for _ in range(3))
            assert dist_wasserstein(a, c) <= (
                dist_wasserstein(a, b) + dist_wasserstein(b, c) + 1e-8
            )


class TestLogGeometric:
    def test_zero_at_base(self):
        rng = np.random.default_rng(4)
        s = rand_spd(rng, 3)
        np.testing.assert_allclose(log_geometric(s, s).data, np.zeros((3, 3)), atol=1e-10)

    def test_diagonal_case(self):
        out = log_geometric(SymMat(np.eye(2)), SymMat(np.diag([np.e, np.e**2])))
        np.testing.assert_allclose(out.data, np.diag([1.0, 2.0]), atol=1e-12)

    def test_exp_map_round_trip(self):
        rng = np.random.default_rng(6)
        base, s = rand_spd(rng, 5), rand_spd(rng, 5)
        xi = log_geometric(base, s)
        isq = sym_func(base, "inv_sqrt").data
        sq = sym_func(base, "sqrt").data
        inner = SymMat(isq @ xi.data @ isq)
        back = sq @ sym_func(inner, "exp").data @ sq
        assert np.linalg.norm(back - s.data) / np.linalg.norm(s.data) <= 1e-8


class TestVecGeometric:
    def test_zero_at_base(self):
        np.testing.assert_allclose(
            vec_geometric(SymMat(np.eye(2)), SymMat(np.eye(2))), np.zeros(3), atol=1e-12
        )

    def test_diagonal_ordering(self):
        # row-major upper triangle: (0,0), (0,1), (1,1)
        v = vec_geometric(SymMat(np.eye(2)), SymMat(np.diag([np.e, 1.0])))
        np.testing.assert_allclose(v, [1.0, 0.0, 0.0], atol=1e-12)

    def test_norm_equals_distance(self):
        rng = np.random.default_rng(7)
        base, s = rand_spd(rng, 4), rand_spd(rng, 4)
        d = dist_geometric(base, s)
        assert abs(np.linalg.norm(vec_geometric(base, s)) - d) <= 1e-8 * (1.0 + d)


class TestVecEuclidean:
    def test_zero_matrix(self):
        np.testing.assert_allclose(vec_euclidean(SymMat(np.zeros((2, 2)))), np.zeros(3))

    def test_diagonal_case(self):
        np.testing.assert_allclose(
            vec_euclidean(SymMat(np.diag([1.0, 2.0]))), [1.0, 0.0, 2.0]
        )

    def test_frobenius_isometry(self):
        rng = np.random.default_rng(9)
        s, t = rand_spd(rng, 5), rand_spd(rng, 5)
        gap = np.linalg.norm(vec_euclidean(s) - vec_euclidean(t))
        assert abs(gap - np.linalg.norm(s.data - t.data)) <= 1e-10


class TestVecLogdiag:
    def test_identity(self):
        np.testing.assert_allclose(vec_logdiag(SymMat(np.eye(4))), np.zeros(4))

    def test_diagonal_values(self):
        v = vec_logdiag(SymMat(np.diag([np.e, np.e**2])))
        np.testing.assert_allclose(v, [1.0, 2.0], atol=1e-14)

    def test_matches_scalar_log(self):
        rng = np.random.default_rng(10)
        s = rand_spd(rng, 4)
        np.testing.assert_allclose(vec_logdiag(s), np.log(np.diag(s.data)))

    def test_nonpositive_diagonal_raises(self):
        with pytest.raises(NonPositiveDiagonal):
            vec_logdiag(SymMat(np.diag([1.0, 0.0])))


class TestFactorize:
    def test_rank_one_diagonal(self):
        f = factorize(SymMat(np.diag([4.0, 0.0])), 1)
        np.testing.assert_allclose(f.y, [[2.0], [0.0]], atol=1e-12)

    def test_identity_full_rank(self):
        f = factorize(SymMat(np.eye(3)), 3)
        np.testing.assert_allclose(f.y, np.eye(3), atol=1e-12)

    def test_random_rank_two_reconstruction(self):
        rng = np.random.default_rng(9)
        s = rand_psd_rank(rng, 5, 2)
        f = factorize(s, 2)
        err = np.linalg.norm(f.y @ f.y.T - s.data) / np.linalg.norm(s.data)
        assert err <= 1e-8

    def test_rank_mismatch_raises(self):
        with pytest.raises(RankMismatch):
            factorize(SymMat(np.eye(3)), 2)


class TestLogWasserstein:
    def test_zero_at_same_factor(self):
        y = FactorMat(np.array([[1.0, 0.0], [0.0, 2.0], [0.5, 0.5]]))
        np.testing.assert_allclose(log_wasserstein(y, y), np.zeros((3, 2)), atol=1e-12)

    def test_collinear_rank_one(self):
        base = FactorMat(np.array([[1.0], [0.0]]))
        other = FactorMat(np.array([[2.0], [0.0]]))
        log = log_wasserstein(base, other)
        np.testing.assert_allclose(log, [[1.0], [0.0]], atol=1e-12)
        d = dist_wasserstein(
            SymMat(base.y @ base.y.T), SymMat(other.y @ other.y.T)
        )
        assert abs(np.linalg.norm(log) - d) <= 1e-10

    def test_norm_matches_distance_full_rank(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            s, t = rand_spd(rng, 3), rand_spd(rng, 3)
            log = log_wasserstein(factorize(s, 3), factorize(t, 3))
            d = dist_wasserstein(s, t)
            assert abs(np.linalg.norm(log) - d) <= 1e-6

    def test_norm_bounds_distance_low_rank(self):
        rng = np.random.default_rng(16)
        for _ in range(10):
            s, t = rand_psd_rank(rng, 5, 2), rand_psd_rank(rng, 5, 2)
            log = log_wasserstein(factorize(s, 2), factorize(t, 2))
            assert np.linalg.norm(log) >= dist_wasserstein(s, t) - 1e-6

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatch):
            log_wasserstein(
                FactorMat(np.ones((3, 1))), FactorMat(np.ones((3, 2)))
            )


class TestVecWasserstein:
    def test_identical_inputs(self):
        y = FactorMat(np.array([[1.0], [2.0]]))
        np.testing.assert_allclose(vec_wasserstein(y, y), np.zeros(2), atol=1e-12)

    def test_rank_one_case(self):
        v = vec_wasserstein(
            FactorMat(np.array([[1.0], [0.0]])), FactorMat(np.array([[2.0], [0.0]]))
        )
        np.testing.assert_allclose(v, [1.0, 0.0], atol=1e-12)

    def test_length_contract(self):
        rng = np.random.default_rng(18)
        s = rand_psd_rank(rng, 5, 3)
        t = rand_psd_rank(rng, 5, 3)
        v = vec_wasserstein(factorize(s, 3), factorize(t, 3))
        assert v.shape == (15,)


class TestWitness:
    def test_base_pair_is_distinct(self):
        a, b, _ = no_affine_invariance_witness()
        assert dist_wasserstein(a, b) > 0.1

    def test_sequence_strictly_decreasing(self):
        _, _, dists = no_affine_invariance_witness()
        assert len(dists) == len(WITNESS_EPSILONS)
        assert all(d1 > d2 for d1, d2 in zip(dists, dists[1:]))

    def test_limit_below_threshold(self):
        _, _, dists = no_affine_invariance_witness()
        assert dists[-1] < 1e-2


class TestEmbedding:
    def test_feature_dims(self):
        assert feature_dim("euclidean", 5) == 15
        assert feature_dim("geometric", 5) == 15
        assert feature_dim("wasserstein", 5, rank=3) == 15
        assert feature_dim("logdiag", 5) == 5

    def test_geometric_requires_full_rank_reference(self):
        with pytest.raises(SingularMatrix):
            Embedding(kind="geometric", reference=SymMat(np.diag([1.0, 0.0])))

    def test_wasserstein_reference_rank_checked(self):
        with pytest.raises(RankMismatch):
            Embedding(kind="wasserstein", reference=SymMat(np.eye(3)), rank=2)

    def test_embed_matches_single_sample_ops(self):
        rng = np.random.default_rng(20)
        mats = [rand_spd(rng, 4) for _ in range(6)]

        emb = fit_embedding(mats, "euclidean")
        rows = embed(emb, mats).rows
        for i, m in enumerate(mats):
            np.testing.assert_allclose(rows[i], vec_euclidean(m), atol=1e-12)

        emb = fit_embedding(mats, "geometric")
        rows = embed(emb, mats).rows
        for i, m in enumerate(mats):
            np.testing.assert_allclose(
                rows[i], vec_geometric(emb.reference, m), atol=1e-10
            )

        emb = fit_embedding(mats, "wasserstein", rank=4)
        base = factorize(emb.reference, 4)
        rows = embed(emb, mats).rows
        for i, m in enumerate(mats):
            np.testing.assert_allclose(
                rows[i], vec_wasserstein(base, factorize(m, 4)), atol=1e-10
            )

        emb = fit_embedding(mats, "logdiag")
        rows = embed(emb, mats).rows
        for i, m in enumerate(mats):
            np.testing.assert_allclose(rows[i], vec_logdiag(m), atol=1e-12)
