"""Optimizer correctness against exhaustive grid-search oracles at low
dimension and against eigenstructure where the optimum is known."""

import numpy as np
import pytest

from tenvreg.optim import grassmann_minimize, orthonormalize, sphere_minimize


def rand_spd(r, seed, spread=1.0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((r, r))
    return a @ a.T + spread * np.eye(r)


def two_logdet(g, m, n_inv):
    return float(np.linalg.slogdet(g.T @ m @ g)[1] + np.linalg.slogdet(g.T @ n_inv @ g)[1])


def two_logdet_grad(g, m, n_inv):
    mg = m @ g
    cg = n_inv @ g
    return 2.0 * (mg @ np.linalg.inv(g.T @ mg) + cg @ np.linalg.inv(g.T @ cg))


def principal_angle(a, b):
    """Largest principal angle between equal-dimension subspaces."""
    qa, qb = orthonormalize(a), orthonormalize(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


class TestSphere:
    def test_identity_a_returns_leading_eigvec(self):
        b = rand_spd(5, 42)
        w = sphere_minimize(np.eye(5), b)
        vals, vecs = np.linalg.eigh(b)
        lead = vecs[:, -1]
        assert principal_angle(w[:, None], lead[:, None]) <= 1e-6

    def test_a_equals_b_matches_eigenvector_enumeration(self):
        a = rand_spd(4, 7)
        w = sphere_minimize(a, a)
        binv = np.linalg.inv(a)
        val = np.log(w @ a @ w) + np.log(w @ binv @ w)
        _, vecs = np.linalg.eigh(a)
        best = min(
            np.log(v @ a @ v) + np.log(v @ binv @ v) for v in vecs.T
        )
        assert val <= best + 1e-8
        assert val >= -1e-10  # objective is >= 0 with equality at eigenvectors

    def test_d2_grid_oracle(self):
        a = rand_spd(2, 3)
        b = rand_spd(2, 4)
        binv = np.linalg.inv(b)
        w = sphere_minimize(a, b)
        val = np.log(w @ a @ w) + np.log(w @ binv @ w)
        angles = np.deg2rad(np.arange(0.0, 180.0, 0.1))
        ws = np.stack([np.cos(angles), np.sin(angles)])
        grid = np.log(np.einsum("ij,ik,kj->j", ws, a, ws)) + np.log(
            np.einsum("ij,ik,kj->j", ws, binv, ws)
        )
        assert val <= grid.min() + 1e-8

    def test_returns_unit_vector(self):
        w = sphere_minimize(rand_spd(6, 1), rand_spd(6, 2))
        assert abs(np.linalg.norm(w) - 1.0) <= 1e-12


class TestGrassmann:
    def test_full_space_constant_objective(self):
        m = rand_spd(4, 5)
        n_inv = np.linalg.inv(rand_spd(4, 6))
        g = grassmann_minimize(
            lambda g: two_logdet(g, m, n_inv),
            lambda g: two_logdet_grad(g, m, n_inv),
            4,
            4,
            [np.eye(4)],
        )
        assert np.allclose(g.T @ g, np.eye(4), atol=1e-10)
        assert abs(two_logdet(g, m, n_inv) - two_logdet(np.eye(4), m, n_inv)) <= 1e-9

    def test_r3_u1_sphere_grid_oracle(self):
        m = rand_spd(3, 8)
        n_inv = np.linalg.inv(rand_spd(3, 9))
        rng = np.random.default_rng(10)
        starts = [orthonormalize(rng.standard_normal((3, 1))) for _ in range(4)]
        g = grassmann_minimize(
            lambda g: two_logdet(g, m, n_inv),
            lambda g: two_logdet_grad(g, m, n_inv),
            3,
            1,
            starts,
        )
        val = two_logdet(g, m, n_inv)
        # 1-degree grid over the sphere (hemisphere suffices, objective is even)
        best = np.inf
        for theta in np.deg2rad(np.arange(0, 180, 1.0)):
            for phi in np.deg2rad(np.arange(0, 360, 1.0)):
                w = np.array(
                    [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
                )[:, None]
                best = min(best, two_logdet(w, m, n_inv))
        assert val <= best + 1e-4

    def test_descent_from_given_start(self):
        m = rand_spd(5, 11)
        n_inv = np.linalg.inv(rand_spd(5, 12))
        start = orthonormalize(np.random.default_rng(13).standard_normal((5, 2)))
        g = grassmann_minimize(
            lambda g: two_logdet(g, m, n_inv),
            lambda g: two_logdet_grad(g, m, n_inv),
            5,
            2,
            [start],
        )
        assert two_logdet(g, m, n_inv) <= two_logdet(start, m, n_inv) + 1e-12

    def test_result_orthonormal(self):
        m = rand_spd(6, 14)
        n_inv = np.linalg.inv(rand_spd(6, 15))
        rng = np.random.default_rng(16)
        g = grassmann_minimize(
            lambda g: two_logdet(g, m, n_inv),
            lambda g: two_logdet_grad(g, m, n_inv),
            6,
            3,
            [orthonormalize(rng.standard_normal((6, 3)))],
        )
        assert np.allclose(g.T @ g, np.eye(3), atol=1e-10)

    def test_u_zero_returns_empty(self):
        g = grassmann_minimize(lambda g: 0.0, lambda g: g, 4, 0, [np.zeros((4, 0))])
        assert g.shape == (4, 0)

    def test_requires_start(self):
        with pytest.raises(ValueError):
            grassmann_minimize(lambda g: 0.0, lambda g: g, 3, 1, [])
