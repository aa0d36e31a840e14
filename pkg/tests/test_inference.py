"""Coefficient-covariance diagonals against dense Kronecker oracles,
p-value pins against the normal CDF, and multiplicity-control behavior."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tenvreg.covariance import SeparableCovariance, dense
from tenvreg.estimators import make_basis
from tenvreg.inference import (
    PValueMap,
    bh_fdr,
    pvalue_map,
    sample_sigma_x,
    threshold_map,
    u_gamma,
    u_ols,
)
from tenvreg.optim import orthonormalize
from tenvreg.tensor_ops import kron


def rand_spd(r, seed, spread=1.0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((r, r))
    return a @ a.T + spread * np.eye(r)


def make_cov(dims, seed=0, tau=1.0):
    factors = []
    for k, r in enumerate(dims):
        f = rand_spd(r, seed + k)
        factors.append(f / np.linalg.norm(f))
    return SeparableCovariance(factors=tuple(factors), tau=tau)


class TestUOls:
    def test_scalar_identity_case(self):
        cov = SeparableCovariance(factors=(np.eye(3) / np.sqrt(3),), tau=np.sqrt(3.0))
        out = u_ols(np.array([[1.0]]), cov)
        assert np.allclose(out.diagonal_tensor(), np.ones((3, 1)), atol=1e-12)

    def test_dense_diagonal_oracle(self):
        cov = make_cov((2, 3), seed=1, tau=1.4)
        sigma_x = rand_spd(2, 5)
        out = u_ols(sigma_x, cov)
        full = kron([np.linalg.inv(sigma_x), dense(cov)])
        oracle = np.diag(full).reshape((2, 3, 2), order="F")
        assert np.max(np.abs(out.diagonal_tensor() - oracle)) <= 1e-12

    def test_predictor_scaling_rule(self):
        cov = make_cov((2, 2), seed=2)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 50))
        c = 3.0
        v1 = u_ols(sample_sigma_x(x), cov).diagonal_tensor()
        v2 = u_ols(sample_sigma_x(c * x), cov).diagonal_tensor()
        assert np.allclose(v2, v1 / c**2, atol=1e-12)


class TestUGamma:
    def test_full_basis_uses_omegas(self):
        basis = make_basis([np.eye(2), np.eye(3)])
        omegas = [rand_spd(2, 6), rand_spd(3, 7)]
        out = u_gamma(np.eye(1), basis, omegas)
        for f, om in zip(out.factors, omegas):
            assert np.allclose(f, om, atol=1e-12)

    def test_u_zero_gives_zero_covariance(self):
        basis = make_basis([np.zeros((3, 0))])
        out = u_gamma(np.eye(2), basis, [np.zeros((0, 0))])
        assert np.max(np.abs(out.diagonal_tensor())) == 0.0

    def test_dominated_by_u_ols_entrywise(self):
        rng = np.random.default_rng(8)
        gammas = [orthonormalize(rng.standard_normal((4, 2))), orthonormalize(rng.standard_normal((5, 2)))]
        basis = make_basis(gammas)
        omegas = [rand_spd(2, 9), rand_spd(2, 10)]
        omega0s = [rand_spd(2, 11), rand_spd(3, 12)]
        factors = []
        for g, g0, om, om0 in zip(gammas, basis.gamma0s, omegas, omega0s):
            factors.append(g @ om @ g.T + g0 @ om0 @ g0.T)
        cov = SeparableCovariance(
            factors=tuple(f / np.linalg.norm(f) for f in factors),
            tau=float(np.prod([np.linalg.norm(f) for f in factors])),
        )
        sigma_x = rand_spd(3, 13)
        d_env = u_gamma(sigma_x, basis, omegas).diagonal_tensor()
        d_ols = u_ols(sigma_x, cov).diagonal_tensor()
        assert np.all(d_env <= d_ols + 1e-10)


class TestPvalueMap:
    def test_zero_coefficient_all_ones(self):
        cov = u_ols(np.eye(1), make_cov((3, 3), seed=14))
        pmap = pvalue_map(np.zeros((3, 3, 1)), cov, n=50)
        assert np.all(pmap.pvalues == 1.0)
        assert np.all(pmap.zscores == 0.0)

    def test_pinned_normal_quantile(self):
        # |z| = 1.959964 must give p = 0.05 to 1e-6
        cov = u_ols(np.eye(1), SeparableCovariance(factors=(np.eye(1),), tau=1.0))
        n = 4
        b = np.array([[1.959964 / np.sqrt(n)]])
        pmap = pvalue_map(b, cov, n=n)
        assert abs(pmap.zscores[0, 0] - 1.959964) <= 1e-9
        assert abs(pmap.pvalues[0, 0] - 0.05) <= 1e-6

    def test_layout_invariance_under_mode_permutation(self):
        cov = make_cov((2, 3), seed=15, tau=1.2)
        sigma_x = rand_spd(2, 16)
        rng = np.random.default_rng(17)
        b = rng.standard_normal((2, 3, 2))
        p1 = pvalue_map(b, u_ols(sigma_x, cov), n=30).pvalues
        swapped = SeparableCovariance(factors=(cov.factors[1], cov.factors[0]), tau=cov.tau)
        p2 = pvalue_map(
            np.swapaxes(b, 0, 1), u_ols(sigma_x, swapped), n=30
        ).pvalues
        assert np.max(np.abs(np.swapaxes(p2, 0, 1) - p1)) <= 1e-12

    def test_rejects_shape_mismatch(self):
        cov = u_ols(np.eye(1), make_cov((2, 2), seed=18))
        with pytest.raises(ValueError):
            pvalue_map(np.zeros((3, 2, 1)), cov, n=10)


class TestThresholdAndBH:
    def pmap_from(self, p):
        p = np.asarray(p, dtype=np.float64)
        return PValueMap(pvalues=p, zscores=np.zeros_like(p), n=10)

    def test_threshold_extremes(self):
        pmap = self.pmap_from([[0.0, 0.5], [0.99, 1.0]])
        assert threshold_map(pmap, 0.999).sum() == 3
        with pytest.raises(ValueError):
            threshold_map(pmap, 0.0)
        with pytest.raises(ValueError):
            threshold_map(pmap, 1.0)

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=40),
        st.floats(min_value=0.01, max_value=0.5),
        st.floats(min_value=0.01, max_value=0.5),
    )
    def test_threshold_monotone(self, ps, a1, a2):
        lo, hi = sorted([a1, a2])
        pmap = self.pmap_from(ps)
        m_lo = threshold_map(pmap, lo)
        m_hi = threshold_map(pmap, hi)
        assert np.all(m_hi | ~m_lo)  # mask(lo) subset of mask(hi)

    def test_bh_all_zero_rejects_all(self):
        pmap = self.pmap_from(np.zeros((3, 3)))
        assert bh_fdr(pmap, 0.05).all()

    def test_bh_all_one_rejects_none(self):
        pmap = self.pmap_from(np.ones((3, 3)))
        assert not bh_fdr(pmap, 0.05).any()

    def test_bh_hand_instance(self):
        pmap = self.pmap_from([0.01, 0.02, 0.20, 0.90])
        mask = bh_fdr(pmap, 0.05)
        assert mask.tolist() == [True, True, False, False]

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=30),
        st.floats(min_value=0.01, max_value=0.4),
    )
    def test_bh_sandwich(self, ps, q):
        # strict-vs-nonstrict boundary ties are excluded: the containment
        # is a statement about continuous p-values
        n = len(ps)
        assume(all(p != q and p != q / n for p in ps))
        pmap = self.pmap_from(ps)
        bh = bh_fdr(pmap, q)
        bonf = pmap.pvalues < q / n
        raw = pmap.pvalues < q
        assert np.all(bh | ~bonf)  # bonferroni set inside BH set
        assert np.all(raw | ~bh)  # BH set inside raw set


def test_null_calibration_small():
    # B = 0 responses: empirical rejection near the nominal level
    from tenvreg.covariance import sample_matrix_normal
    from tenvreg.estimators import Dataset, ols_fit

    rng = np.random.default_rng(19)
    dims = (8, 8)
    cov = make_cov(dims, seed=20)
    hits, total = 0, 0
    for _ in range(30):
        n = 40
        x = np.zeros((1, n))
        x[0, : n // 2] = 1.0
        y = sample_matrix_normal(dims, cov, rng, n=n)
        data = Dataset(x=x, y=y)
        fit = ols_fit(data)
        cc = u_ols(sample_sigma_x(x - x.mean(axis=1, keepdims=True)), fit.cov)
        pmap = pvalue_map(fit.b, cc, n=n)
        hits += int((pmap.pvalues < 0.05).sum())
        total += pmap.pvalues.size
    rate = hits / total
    assert 0.02 <= rate <= 0.09
