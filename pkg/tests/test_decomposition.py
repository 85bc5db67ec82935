import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mellincalc.decomposition import (b_jk, b_tail_sums, block_coefficients, block_multiplier,
                                      build_partition, cjk_bounds_report, cjk_derivative,
                                      cjk_derivative_ibp, claim_decay_check,
                                      parseval_block_check)
from mellincalc.grids import LogGrid, UGrid
from mellincalc.mellin import mellin_transform
from mellincalc.multipliers import builtin_catalog

from oracles import central_difference, mellin_sheat, quad_complex, tau

ALPHA = 2
PART = build_partition()
UG = UGrid(128.0, 1.0 / 64.0)
DEEP_S = LogGrid(1e-30, 1e8, 256)


def h_oracle(u):
    if -math.pi <= u <= 0:
        return tau((u + math.pi) / math.pi)
    if 0 < u <= math.pi:
        return 1 - tau(u / math.pi)
    return 0.0


def quad_block(k, z, beta=0):
    """i^beta int h_k(u) Gamma(1-iu) u^beta e^{izu} du by adaptive quadrature."""
    f = lambda u: (1j) ** beta * h_oracle(u - math.pi * k) * mellin_sheat(u) * u**beta \
        * np.exp(1j * z * u)
    lo, hi = math.pi * (k - 1), math.pi * (k + 1)
    return quad_complex(f, lo, hi, points=[math.pi * k], epsabs=1e-13, epsrel=1e-12)


@pytest.fixture(scope="module")
def M_sheat():
    return mellin_transform(builtin_catalog("sheat"), DEEP_S, UG, derivatives=True)


@pytest.fixture(scope="module")
def M_br():
    return mellin_transform(builtin_catalog("br_psi", [ALPHA + 4]), DEEP_S, UG, derivatives=True)


@pytest.fixture(scope="module")
def M_zero():
    return mellin_transform(builtin_catalog("zero"), ugrid=UG, derivatives=True)


class TestPartition:
    def test_examples(self):
        assert PART.h(np.array([0.0]))[0] == 1.0
        ks = np.arange(-3, 4)
        assert sum(PART.h_k(np.array([0.37]), int(k))[0] for k in ks) == pytest.approx(1, abs=1e-12)
        ends = np.array([-math.pi, math.pi])
        np.testing.assert_allclose(PART.h(ends), 0, atol=1e-12)
        np.testing.assert_allclose(PART.h(ends, 1), 0, atol=1e-12)

    def test_outside_support(self):
        u = np.array([-10, -math.pi - 1e-9, math.pi + 1e-9, 7.0])
        assert np.all(PART.h(u) == 0)

    @settings(max_examples=200, deadline=None)
    @given(u=st.floats(-200, 200))
    def test_partition_of_unity(self, u):
        vals = [PART.h_k(np.array([u]), k)[0] for k in range(-70, 71)]
        assert sum(v != 0 for v in vals) <= 2
        assert sum(vals) == pytest.approx(1.0, abs=1e-12)
        active = PART.active(u)
        assert sum(PART.h_k(np.array([u]), k)[0] for k in active) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("u", [-2.9, -1.0, -0.2, 0.4, 1.7, 3.0])
    def test_against_direct_tau(self, u):
        assert PART.h(np.array([u]))[0] == pytest.approx(h_oracle(u), abs=1e-14)

    @pytest.mark.parametrize("u", [-2.5, -0.7, 0.9, 2.2])
    @pytest.mark.parametrize("order", [1, 2])
    def test_derivatives(self, u, order):
        hh = 1e-5 if order == 1 else 1e-4
        fd = central_difference(h_oracle, u, hh, order)
        assert PART.h(np.array([u]), order)[0] == pytest.approx(fd, abs=1e-6)

    def test_order_limit(self):
        with pytest.raises(ValueError):
            PART.h(np.zeros(1), 3)


class TestBlockCoefficients:
    def test_zero(self, M_zero):
        assert np.all(b_jk(M_zero, PART, 3, 0, [0.5, 2.0]).values == 0)

    def test_out_of_range(self, M_sheat):
        k = int(M_sheat.u_max / math.pi) + 1
        with pytest.raises(ValueError, match="block"):
            b_jk(M_sheat, PART, 0, k, [1.0])

    def test_b00_sheat(self, M_sheat):
        got = b_jk(M_sheat, PART, 0, 0, [1.0]).values[0, 0]
        assert abs(got - quad_block(0, 0.0)) < 1e-6

    @pytest.mark.parametrize("j,k,lam", [(2, 1, 3.0), (-1, -2, 0.2), (0, 5, 1.0)])
    def test_general_slices(self, M_sheat, j, k, lam):
        got = b_jk(M_sheat, PART, j, k, [lam]).values[0, 0]
        assert abs(got - quad_block(k, math.log(lam) - j)) < 1e-8

    def test_csv_columns(self, M_sheat):
        bc = block_coefficients(M_sheat, PART, 1, [-1, 0, 1], [0.5, 2.0])
        cols = bc.to_csv_columns()
        assert list(cols) == ["k", "j", "lambda", "re", "im"]
        assert all(len(v) == 6 for v in cols.values())
        assert bc.values.shape == (3, 2)

    def test_bounded_on_lambda_grid(self, M_br):
        lam = np.logspace(-4, 4, 200)
        bc = block_coefficients(M_br, PART, 2, np.arange(-8, 9), lam)
        assert np.all(np.isfinite(bc.values))
        # |b| <= int |h_k M| du
        bound = np.sum(np.abs(PART.h_k(M_br.u, 2) * M_br.values)) * M_br.du
        assert np.max(np.abs(bc.values)) <= bound * (1 + 1e-12)

    def test_c_matches_b(self, M_sheat):
        lam = np.array([0.3, 1.0, 7.0])
        b = b_jk(M_sheat, PART, 1, 0, lam).values[0]
        c = cjk_derivative(M_sheat, PART, 1, 0, 0, np.log(lam), alpha=ALPHA)
        np.testing.assert_array_equal(b, c)


class TestDerivatives:
    def test_zero(self, M_zero):
        assert np.all(cjk_derivative(M_zero, PART, 0, 0, 1, [0.0, 1.0], alpha=ALPHA) == 0)

    def test_beta_limit(self, M_sheat):
        with pytest.raises(ValueError):
            cjk_derivative(M_sheat, PART, 0, 0, ALPHA + 1, [0.0], alpha=ALPHA)

    @pytest.mark.parametrize("j,k,y", [(0, 0, 0.3), (1, 2, -0.4), (-2, -1, 1.1)])
    def test_finite_difference(self, M_sheat, j, k, y):
        h = 1e-4
        C = lambda t: cjk_derivative(M_sheat, PART, j, k, 0, [t], alpha=ALPHA)[0]
        d1 = cjk_derivative(M_sheat, PART, j, k, 1, [y], alpha=ALPHA)[0]
        assert abs(central_difference(C, y, h) - d1) < 1e-4
        d2 = cjk_derivative(M_sheat, PART, j, k, 2, [y], alpha=ALPHA)[0]
        D1 = lambda t: cjk_derivative(M_sheat, PART, j, k, 1, [t], alpha=ALPHA)[0]
        assert abs(central_difference(D1, y, h) - d2) < 1e-4

    @pytest.mark.parametrize("beta", [0, 1, 2])
    def test_integration_by_parts(self, M_sheat, beta):
        # j = 0, y = 5, k = 3
        direct = cjk_derivative(M_sheat, PART, 0, 3, beta, [5.0], alpha=ALPHA)[0]
        ibp = cjk_derivative_ibp(M_sheat, PART, 0, 3, beta, [5.0])[0]
        oracle = quad_block(3, 5.0, beta)
        assert abs(ibp - oracle) < 1e-8
        assert abs(direct - oracle) < 1e-8


class TestBoundsReport:
    def test_zero(self, M_zero):
        rep = cjk_bounds_report(M_zero, PART, (-2, 2), (-4, 4), ALPHA)
        assert rep.statistics["C_a"] == 0 and rep.statistics["C_b"] == 0 and rep.passed

    def test_br_psi_bounded_across_k(self, M_br):
        check = mellin_transform(builtin_catalog("br_psi", [ALPHA + 4]), DEEP_S,
                                 UGrid(128.0, 1.0 / 128.0))
        rep = cjk_bounds_report(M_br, PART, (-16, 16), (-16, 16), ALPHA, M_check=check)
        assert rep.passed
        assert rep.statistics["growth"] < 10
        assert rep.statistics["resolution_change"] < 0.1
        # the weighted block size decays away from the centre rather than growing
        qa, ks = rep.table["q_a"], rep.table["k"]
        assert np.max(qa) == np.max(qa[np.abs(ks) <= 1])


class TestParseval:
    def test_zero(self, M_zero):
        rep = parseval_block_check(M_zero, PART, 0, 1.0)
        assert rep.statistics["lhs"] == 0 and rep.statistics["rhs"] == 0 and rep.passed

    def test_sheat_block(self, M_sheat):
        rep = parseval_block_check(M_sheat, PART, 0, 1.0)
        lhs_oracle = quad_complex(lambda u: h_oracle(u) ** 2 * abs(mellin_sheat(u)) ** 2 + 0j,
                                  -math.pi, math.pi, points=[0.0], epsabs=1e-14).real
        assert rep.statistics["lhs"] == pytest.approx(lhs_oracle, rel=1e-9)
        assert rep.statistics["residual"] < 1e-4 and rep.passed
        # the (2 pi)^(-1/2) normalisation is off by a factor sqrt(2 pi)
        assert rep.statistics["rhs_printed"] / rep.statistics["rhs"] == pytest.approx(
            math.sqrt(2 * math.pi))
        assert rep.statistics["residual_printed"] > 1

    @pytest.mark.parametrize("k", [0, 1, 4])
    def test_lambda_invariance(self, M_sheat, k):
        lhs = [parseval_block_check(M_sheat, PART, k, lam).statistics["lhs"]
               for lam in (0.1, 10.0)]
        assert lhs[0] == lhs[1]
        res = [parseval_block_check(M_sheat, PART, k, lam).statistics["residual"]
               for lam in (0.1, 10.0)]
        # both at round-off level
        assert max(res) < 1e-10


class TestBlockMultiplier:
    lam = np.logspace(-3, 3, 61)

    def test_zero_coefficients(self, M_br):
        bm = block_multiplier(M_br, PART, 1, np.zeros(9), self.lam)
        assert np.all(bm.values == 0)

    def test_unit_vector(self, M_br):
        a = np.zeros(9)
        a[6] = 1.0                     # j = 2 with the default centring
        bm = block_multiplier(M_br, PART, 1, a, self.lam, alpha=ALPHA)
        np.testing.assert_array_equal(bm.values, b_jk(M_br, PART, 2, 1, self.lam).values[0])
        assert len(bm.log_derivatives) == ALPHA + 1

    def test_triangle_inequality(self, M_br):
        rng = np.random.default_rng(11)
        jv = np.arange(-16, 17)
        bc = block_coefficients(M_br, PART, 2, jv, self.lam)
        bound = np.sum(np.max(np.abs(bc.values), axis=1))
        for _ in range(10):
            a = rng.choice([-1.0, 1.0], jv.size)
            bm = block_multiplier(M_br, PART, 2, a, self.lam, j_start=-16)
            assert np.max(np.abs(bm.values)) <= bound * (1 + 1e-12)

    def test_rejects_large_coefficients(self, M_br):
        with pytest.raises(ValueError):
            block_multiplier(M_br, PART, 0, [0.5, 1.5], self.lam)


class TestClaim:
    def test_zero(self, M_zero):
        rep = claim_decay_check(M_zero, PART, ALPHA, (-2, 2), 32, seed=1)
        assert np.all(rep.table["Q_k"] == 0)

    def test_k0_vs_k8_and_reproducible(self, M_br):
        args = (M_br, PART, ALPHA, (0, 8), 32)
        rep = claim_decay_check(*args, seed=5)
        Q = dict(zip(rep.table["k"], rep.table["Q_k"]))
        ratio = Q[8] * 65 / Q[0]
        assert 0 < ratio < 100
        assert rep.statistics["stability"] < 0.1
        lo, hi = rep.statistics["mh_over_calpha_min"], rep.statistics["mh_over_calpha_max"]
        assert 0 < lo <= hi < np.inf
        again = claim_decay_check(*args, seed=5)
        assert again.to_json_dict() == rep.to_json_dict()
        np.testing.assert_array_equal(again.table["Q_k"], rep.table["Q_k"])

    def test_draw_minimum(self, M_br):
        with pytest.raises(ValueError):
            claim_decay_check(M_br, PART, ALPHA, (0, 1), 16, seed=0)


class TestTails:
    def test_b_tail_decreases(self, M_br):
        T = b_tail_sums(M_br, PART, 1, np.logspace(-1, 1, 21))
        assert T[16] <= T[8] / 2 and T[32] <= T[16] / 2
