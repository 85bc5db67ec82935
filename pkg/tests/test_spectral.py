import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from mellincalc.multipliers import builtin_catalog
from mellincalc.spectral import (SpectralModel, build_cycle_laplacian, build_diagonal,
                                 contraction_violation, cycle_laplacian_matrix, heat,
                                 imaginary_power, load_model, lp_norm, operator_norm_estimate,
                                 random_signals, signal_from_csv, signal_to_csv, spectral_apply,
                                 symbol_values)

from oracles import cycle_matrix, jacobi_eigh


def nonzero_spectrum(A):
    vals, _ = jacobi_eigh(A)
    return np.sort(vals[np.abs(vals) > 1e-9])


class TestCycle:
    @pytest.mark.parametrize("n,expected", [(4, [2, 2, 4]), (3, [3, 3])])
    def test_small_spectra(self, n, expected):
        model = build_cycle_laplacian(n)
        np.testing.assert_allclose(np.sort(model.eigenvalues), expected, atol=1e-12)
        np.testing.assert_allclose(nonzero_spectrum(cycle_matrix(n)), expected, atol=1e-12)

    @pytest.mark.parametrize("n", [3, 4, 5, 8, 9, 16])
    def test_matches_dense_oracle(self, n):
        model = build_cycle_laplacian(n)
        assert model.dim == n - 1 and model.npoints == n
        np.testing.assert_allclose(np.sort(model.eigenvalues),
                                   nonzero_spectrum(cycle_matrix(n)), atol=1e-11)
        assert model.eigenvalues.sum() == pytest.approx(2 * n, abs=1e-11)
        # each column is an eigenvector of the dense Laplacian
        L = cycle_matrix(n)
        np.testing.assert_allclose(L @ model.basis, model.basis * model.eigenvalues, atol=1e-12)

    def test_dense_matrix_helper(self):
        np.testing.assert_array_equal(cycle_laplacian_matrix(6), cycle_matrix(6))

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_cycle_laplacian(2)

    def test_constant_mode_removed(self):
        model = build_cycle_laplacian(8)
        assert np.allclose(model.project(np.ones(8)), 0, atol=1e-14)


class TestDiagonal:
    def test_one_point(self):
        model = build_diagonal([1.0], [1.0])
        assert model.dim == 1

    def test_square_root(self):
        model = build_diagonal([1.0, 4.0, 9.0])
        np.testing.assert_allclose(spectral_apply(model, np.sqrt, np.ones(3)), [1, 2, 3],
                                   atol=1e-15)

    def test_one_is_identity(self):
        rng = np.random.default_rng(3)
        model = build_diagonal(rng.uniform(0.1, 10, 7), rng.uniform(0.5, 2, 7))
        f = rng.standard_normal(7)
        np.testing.assert_allclose(spectral_apply(model, builtin_catalog("one"), f), f,
                                   atol=1e-14)

    @pytest.mark.parametrize("lam,w", [([1, 0], None), ([1, -2], None), ([1, 2], [1, 0]),
                                       ([1, 2], [1])])
    def test_invalid(self, lam, w):
        with pytest.raises(ValueError):
            build_diagonal(lam, w)

    def test_gram_validation(self):
        with pytest.raises(ValueError, match="orthonormal"):
            SpectralModel(np.array([1.0, 2.0]), np.array([[1.0, 1.0], [0.0, 1.0]]), np.ones(2))


class TestCalculus:
    model = build_cycle_laplacian(8)

    def signal(self, seed=0):
        return random_signals(self.model, 1, np.random.default_rng(seed))[:, 0]

    def test_heat_at_zero(self):
        f = self.signal()
        np.testing.assert_allclose(spectral_apply(self.model, builtin_catalog("heat"), f, t=0.0),
                                   f, atol=1e-14)

    def test_heat_against_expm(self):
        delta = np.zeros(8)
        delta[2] = 1.0
        ref = expm(-0.5 * cycle_matrix(8)) @ delta
        # the model lives on the mean-zero subspace; the constant mode is fixed by the heat flow
        ref_mean_zero = ref - delta.mean()
        np.testing.assert_allclose(heat(self.model, 0.5, delta), ref_mean_zero, atol=1e-10)

    def test_semigroup(self):
        f = self.signal(1)
        np.testing.assert_allclose(heat(self.model, 0.3, heat(self.model, 0.9, f)),
                                   heat(self.model, 1.2, f), atol=1e-10)

    def test_multiplicative(self):
        f = self.signal(2)
        m1, m2 = builtin_catalog("sheat"), builtin_catalog("bump")
        prod = lambda s: m1(s) * m2(s)
        np.testing.assert_allclose(spectral_apply(self.model, prod, f),
                                   spectral_apply(self.model, m1, spectral_apply(self.model, m2, f)),
                                   atol=1e-10)

    def test_linear(self):
        f, g = self.signal(3), self.signal(4)
        m = builtin_catalog("sheat")
        np.testing.assert_allclose(spectral_apply(self.model, m, 2 * f - 3j * g),
                                   2 * spectral_apply(self.model, m, f)
                                   - 3j * spectral_apply(self.model, m, g), atol=1e-12)

    def test_l2_contraction(self):
        f = self.signal(5)
        m = builtin_catalog("br_psi", [2])
        sup = np.max(np.abs(symbol_values(self.model, m)))
        assert np.linalg.norm(spectral_apply(self.model, m, f)) <= sup * np.linalg.norm(f) + 1e-14

    def test_mismatched_signal(self):
        with pytest.raises(ValueError, match="points"):
            spectral_apply(self.model, np.sqrt, np.ones(5))


class TestImaginaryPowers:
    model = build_cycle_laplacian(12)

    def test_zero_power(self):
        f = random_signals(self.model, 1, np.random.default_rng(0))[:, 0]
        np.testing.assert_allclose(imaginary_power(self.model, 0.0, f), f, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(u=st.floats(-1e3, 1e3), v=st.floats(-1e3, 1e3), seed=st.integers(0, 2**16))
    def test_unitary_and_group_law(self, u, v, seed):
        f = random_signals(self.model, 1, np.random.default_rng(seed), complex_valued=True)[:, 0]
        g = imaginary_power(self.model, u, f)
        assert np.linalg.norm(g) == pytest.approx(np.linalg.norm(f), abs=1e-12)
        np.testing.assert_allclose(imaginary_power(self.model, v, g),
                                   imaginary_power(self.model, u + v, f), atol=1e-11)

    def test_norm_estimate_at_least_one(self):
        rng = np.random.default_rng(7)
        phase = np.exp(1j * 5.0 * np.log(self.model.eigenvalues))
        for p in (1.5, 4.0):
            res = operator_norm_estimate(self.model, phase, p, rng)
            assert np.isfinite(res["estimate"]) and res["estimate"] >= 1 - 1e-12
            assert res["estimate"] >= res["sampled"]

    def test_identity_norm_is_one(self):
        res = operator_norm_estimate(self.model, np.ones(self.model.dim), 3.0,
                                     np.random.default_rng(1))
        assert res["estimate"] == pytest.approx(1.0, abs=1e-12)


class TestLpNorm:
    def test_examples(self):
        assert lp_norm(np.zeros(4), 3.0) == 0
        assert lp_norm(np.array([3.0, 4.0]), 2.0) == pytest.approx(5.0, abs=1e-15)

    @pytest.mark.parametrize("p", [1.0, 0.5, np.inf])
    def test_range(self, p):
        with pytest.raises(ValueError):
            lp_norm(np.ones(2), p)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_holder_monotone_on_probability_weights(self, seed):
        rng = np.random.default_rng(seed)
        w = rng.uniform(0.1, 1, 9)
        w /= w.sum()
        f = rng.standard_normal(9)
        norms = [lp_norm(f, p, w) for p in (1.1, 1.5, 2, 3, 6, 20)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_columnwise(self):
        F = np.array([[3.0, 1.0], [4.0, 0.0]])
        np.testing.assert_allclose(lp_norm(F, 2.0), [5.0, 1.0])


class TestContraction:
    @pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
    def test_cycle_heat_contracts(self, p):
        model = build_cycle_laplacian(16)
        f = random_signals(model, 50, np.random.default_rng(int(p * 10)))
        assert contraction_violation(model, np.logspace(-3, 2, 21), p, f) <= 1e-10


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        model = build_cycle_laplacian(5)
        d = json.loads(json.dumps(model.to_json_dict()))
        assert set(d) == {"dim", "eigenvalues", "weights", "basis"}
        back = SpectralModel.from_json_dict(d)
        np.testing.assert_array_equal(back.eigenvalues, model.eigenvalues)
        np.testing.assert_array_equal(back.basis, model.basis)
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"dim": 2, "eigenvalues": [1, 3], "weights": [2, 0.5]}))
        loaded = load_model(f"diagonal:{path}")
        np.testing.assert_allclose(spectral_apply(loaded, np.sqrt, np.ones(2)), [1, np.sqrt(3)])

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dim"):
            SpectralModel.from_json_dict({"dim": 3, "eigenvalues": [1, 2]})

    def test_signal_csv(self):
        f = np.array([1.5, -2j, 0.25 + 1e-17j])
        text = signal_to_csv(f)
        assert text.splitlines()[0] == "index,re,im"
        np.testing.assert_array_equal(signal_from_csv(text), f)

    def test_load_model_errors(self):
        with pytest.raises(ValueError):
            load_model("torus:4")
