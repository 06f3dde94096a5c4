import numpy as np
import pytest

from geodesic_ecg import spd
from geodesic_ecg.errors import (
    DidNotConverge,
    DimensionMismatch,
    NotPositiveDefinite,
    ParameterOutOfRange,
)

from conftest import random_spd, random_spd_stack


class TestSymEig:
    def test_identity(self):
        w, v = spd.sym_eig(np.eye(3))
        assert np.allclose(w, 1.0)
        assert np.allclose(v @ v.T, np.eye(3))

    def test_diagonal_descending(self):
        w, v = spd.sym_eig(np.diag([1.0, 4.0]))
        assert np.allclose(w, [4.0, 1.0])
        # axis-aligned columns up to sign
        assert np.allclose(np.abs(v), [[0.0, 1.0], [1.0, 0.0]])

    def test_reconstruction_residual(self, rng):
        a = random_spd(rng, 5)
        w, v = spd.sym_eig(a)
        rec = v @ np.diag(w) @ v.T
        assert np.linalg.norm(rec - a) <= 1e-10 * np.linalg.norm(a)
        assert np.all(w > 0)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            spd.sym_eig(np.diag([1.0, -1.0]))

    def test_rejects_asymmetric(self):
        m = np.array([[1.0, 0.5], [0.1, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            spd.sym_eig(m)

    def test_rejects_near_singular(self):
        m = np.diag([1.0, 1e-18])
        with pytest.raises(NotPositiveDefinite):
            spd.check_spd(m)


class TestMatrixFunctions:
    def test_log_identity_is_zero(self):
        assert np.allclose(spd.logm(np.eye(4)), 0.0)

    def test_sqrt_diagonal(self):
        assert np.allclose(spd.sqrtm(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_exp_log_round_trip(self, rng):
        for n in (2, 5, 12):
            a = random_spd(rng, n)
            back = spd.expm(spd.logm(a))
            assert np.linalg.norm(back - a) <= 1e-9 * np.linalg.norm(a)

    def test_invsqrt_times_sqrt(self, rng):
        a = random_spd(rng, 4)
        assert np.allclose(spd.invsqrtm(a) @ spd.sqrtm(a), np.eye(4))

    def test_powm_matches_eigenvalue_power(self, rng):
        a = random_spd(rng, 3)
        w, v = spd.sym_eig(a)
        assert np.allclose(spd.powm(a, 0.3), v @ np.diag(w**0.3) @ v.T)

    def test_congruence_by_eigenvectors(self, rng):
        # f(V D V^T) = V f(D) V^T for each matrix function
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        d = np.diag(np.exp(rng.uniform(-1, 1, size=5)))
        m = q @ d @ q.T
        for fn, sfn in [
            (spd.logm, np.log),
            (spd.sqrtm, np.sqrt),
            (spd.invsqrtm, lambda x: 1 / np.sqrt(x)),
        ]:
            assert np.allclose(fn(m), q @ np.diag(sfn(np.diag(d))) @ q.T)

    def test_repeated_eigenvalues(self):
        m = np.diag([2.0, 2.0, 2.0])
        assert np.allclose(spd.sqrtm(m), np.sqrt(2.0) * np.eye(3))

    def test_batched_matches_loop(self, rng):
        stack = random_spd_stack(rng, 7, 4)
        batched = spd.logm(stack)
        for i in range(7):
            assert np.allclose(batched[i], spd.logm(stack[i]))


class TestDistance:
    def test_identity_zero(self):
        assert spd.airm_distance(np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_closed_form(self):
        # 1x1 case: d([a], [b]) = |log(a/b)|
        assert spd.airm_distance([[4.0]], [[1.0]]) == pytest.approx(np.log(4.0), rel=1e-12)

    def test_commuting_closed_form(self):
        a = np.diag([1.0, np.e**2])
        b = np.eye(2)
        assert spd.airm_distance(a, b) == pytest.approx(2.0, rel=1e-12)

    def test_symmetry_and_separation(self, rng):
        a, b = random_spd(rng, 4), random_spd(rng, 4)
        assert spd.airm_distance(a, b) == pytest.approx(spd.airm_distance(b, a), rel=1e-9)
        assert spd.airm_distance(a, b) > 0

    def test_affine_invariance(self, rng):
        for n in (2, 5, 12):
            a, b = random_spd(rng, n), random_spd(rng, n)
            w = rng.standard_normal((n, n))
            while abs(np.linalg.det(w)) < 1e-3:
                w = rng.standard_normal((n, n))
            d0 = spd.airm_distance(a, b)
            d1 = spd.airm_distance(w @ a @ w.T, w @ b @ w.T)
            assert d1 == pytest.approx(d0, rel=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spd.airm_distance(np.eye(2), np.eye(3))


class TestGeodesic:
    def test_endpoints(self, rng):
        a, b = random_spd(rng, 3), random_spd(rng, 3)
        assert np.allclose(spd.geodesic(a, b, 0.0), a)
        assert np.allclose(spd.geodesic(a, b, 1.0), b)

    def test_scalar_midpoint(self):
        # a^(1-t) b^t for 1x1 matrices
        mid = spd.geodesic([[1.0]], [[np.e**2]], 0.5)
        assert mid[0, 0] == pytest.approx(np.e, rel=1e-12)

    def test_commuting_closed_form(self, rng):
        d = np.exp(rng.uniform(-1, 1, size=4))
        t = 0.3
        g = spd.geodesic(np.eye(4), np.diag(d), t)
        assert np.allclose(g, np.diag(d**t))

    def test_arc_length_proportionality(self, rng):
        a, b = random_spd(rng, 5), random_spd(rng, 5)
        d_ab = spd.airm_distance(a, b)
        for t in (0.2, 0.5, 0.9):
            g = spd.geodesic(a, b, t)
            assert spd.airm_distance(a, g) == pytest.approx(t * d_ab, rel=1e-8)
            assert spd.airm_distance(g, b) == pytest.approx((1 - t) * d_ab, rel=1e-8)

    def test_parameter_out_of_range(self):
        with pytest.raises(ParameterOutOfRange):
            spd.geodesic(np.eye(2), np.eye(2), 1.5)

    def test_output_is_spd(self, rng):
        g = spd.geodesic(random_spd(rng, 4), random_spd(rng, 4), 0.7)
        spd.check_spd(g)


class TestLogExpMaps:
    def test_log_map_at_self_is_zero(self, rng):
        c = random_spd(rng, 3)
        assert np.allclose(spd.log_map(c, c), 0.0, atol=1e-12)

    def test_log_map_at_identity_is_matrix_log(self, rng):
        c = random_spd(rng, 4)
        assert np.allclose(spd.log_map(np.eye(4), c), spd.logm(c))

    def test_scalar_closed_form(self):
        assert spd.log_map([[1.0]], [[np.e**3]])[0, 0] == pytest.approx(3.0, rel=1e-12)

    def test_exp_map_of_zero(self, rng):
        c = random_spd(rng, 3)
        assert np.allclose(spd.exp_map(c, np.zeros((3, 3))), c)

    def test_round_trip(self, rng):
        for n in (2, 5, 12):
            base, x = random_spd(rng, n), random_spd(rng, n)
            back = spd.exp_map(base, spd.log_map(base, x))
            assert np.linalg.norm(back - x) <= 1e-9 * np.linalg.norm(x)


class TestMeanRiemann:
    def test_mean_of_duplicates(self, rng):
        a = random_spd(rng, 3)
        assert np.allclose(spd.mean_riemann(np.stack([a, a])), a)

    def test_scalar_geometric_mean(self):
        mats = np.array([[[1.0]], [[np.e**2]]])
        m = spd.mean_riemann(mats, closed_form_pairs=False)
        assert m[0, 0] == pytest.approx(np.e, rel=1e-8)

    def test_commuting_diagonals_closed_form(self, rng):
        # mean of commuting diagonals = exp(weighted arithmetic mean of logs)
        diags = np.exp(rng.uniform(-1, 1, size=(5, 4)))
        mats = np.stack([np.diag(d) for d in diags])
        w = rng.uniform(0.5, 2.0, size=5)
        expected = np.diag(np.exp(np.average(np.log(diags), axis=0, weights=w)))
        got = spd.mean_riemann(mats, weights=w)
        assert np.allclose(got, expected, atol=1e-7)

    def test_stationarity(self, rng):
        mats = random_spd_stack(rng, 6, 4)
        mean = spd.mean_riemann(mats, tol=1e-9)
        resid = np.mean([spd.log_map(mean, m) for m in mats], axis=0)
        assert np.linalg.norm(resid) <= 1e-8

    def test_two_samples_match_geodesic(self, rng):
        a, b = random_spd(rng, 3), random_spd(rng, 3)
        for alpha in (0.0, 0.25, 0.5, 0.9, 1.0):
            closed = spd.geodesic(a, b, alpha)
            iterated = spd.mean_riemann(
                np.stack([a, b]), weights=np.array([1 - alpha, alpha]),
                closed_form_pairs=False, tol=1e-12,
            )
            assert np.linalg.norm(iterated - closed) <= 1e-8 * np.linalg.norm(closed)

    def test_did_not_converge(self, rng):
        mats = random_spd_stack(rng, 4, 3)
        with pytest.raises(DidNotConverge):
            spd.mean_riemann(mats, max_iter=0)

    def test_zero_total_weight_rejected(self, rng):
        mats = random_spd_stack(rng, 2, 2)
        with pytest.raises(ValueError):
            spd.mean_riemann(mats, weights=np.zeros(2))


class TestTangentSpace:
    def test_zero_at_base(self):
        v = spd.tangent_space(np.eye(4), np.eye(4))
        assert v.shape == (10,)
        assert np.allclose(v, 0.0)

    def test_feature_length_12(self, rng):
        a = random_spd(rng, 12)
        assert spd.tangent_space(a, np.eye(12)).shape == (78,)

    def test_diagonal_closed_form(self):
        v = spd.tangent_space(np.diag([np.e**2, np.e**4]), np.eye(2))
        assert np.allclose(v, [2.0, 0.0, 4.0])

    def test_isometry_norm_equals_distance(self, rng):
        for n in (2, 5, 12):
            base, x = random_spd(rng, n), random_spd(rng, n)
            v = spd.tangent_space(x, base)
            assert np.linalg.norm(v) == pytest.approx(
                spd.airm_distance(base, x), rel=1e-8
            )

    def test_matches_literal_composition(self, rng):
        # upper(C^{-1/2} Log_C(C_i) C^{-1/2}) with the same triangular weighting
        base, x = random_spd(rng, 5), random_spd(rng, 5)
        isb = spd.invsqrtm(base)
        literal = isb @ spd.log_map(base, x) @ isb
        idx = np.triu_indices(5)
        coeffs = (np.sqrt(2) * np.triu(np.ones((5, 5)), 1) + np.eye(5))[idx]
        expected = coeffs * literal[idx]
        assert np.allclose(spd.tangent_space(x, base), expected, atol=1e-10)

    def test_round_trip(self, rng):
        base, x = random_spd(rng, 4), random_spd(rng, 4)
        v = spd.tangent_space(x, base)
        back = spd.untangent_space(v, base)
        assert np.linalg.norm(back - x) <= 1e-9 * np.linalg.norm(x)

    def test_zero_vector_maps_to_base(self, rng):
        base = random_spd(rng, 3)
        assert np.allclose(spd.untangent_space(np.zeros(6), base), base)

    def test_batched(self, rng):
        base = random_spd(rng, 3)
        stack = random_spd_stack(rng, 5, 3)
        vs = spd.tangent_space(stack, base)
        assert vs.shape == (5, 6)
        for i in range(5):
            assert np.allclose(vs[i], spd.tangent_space(stack[i], base))

    def test_length_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            spd.untangent_space(np.zeros(7), random_spd(rng, 3))


class TestCsvSerialization:
    def test_round_trip(self, tmp_path, rng):
        a = random_spd(rng, 4)
        path = tmp_path / "m.csv"
        spd.save_spd_csv(path, a)
        assert np.array_equal(spd.load_spd_csv(path), spd.check_spd(a))

    def test_load_rejects_asymmetric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,0.5\n0.1,1.0\n")
        with pytest.raises(NotPositiveDefinite):
            spd.load_spd_csv(path)
