import numpy as np
import pytest

from srmg.grid import Box, Field, sample
from srmg.poisson import ProblemSpec, apply_operator, fill_bc_ghosts, residual, stencil_apply
from srmg.smooth import OPS, ChebConfig, SolverFailure, chebyshev, coarse_solve, spectral_bound


def _cube(n):
    return Box.from_shape((n, n, n))


def _smooth(u, f, dom, degree, interval=(0.1, 1.1)):
    chebyshev([u], [f], [dom], ChebConfig(degree, interval), lambda: fill_bc_ghosts(u, dom))


def _res_inf(u, f, dom):
    fill_bc_ghosts(u, dom)
    out = u.like()
    residual(u, f, out, dom)
    return float(np.max(np.abs(out.view(dom))))


@pytest.fixture(scope="module")
def eig8():
    """Dense eigendecomposition of -L_h on an 8^3 Dirichlet box."""
    n = 8
    dom, h = _cube(n), 1.0 / n

    def neg_l(v):
        f = Field(dom, 1, h)
        f.view(dom)[...] = v.reshape(dom.shape, order="F")
        fill_bc_ghosts(f, dom)
        return -stencil_apply(f.values, h).ravel(order="F")

    A = np.column_stack([neg_l(e) for e in np.eye(n**3)])
    lam, Q = np.linalg.eigh(A)
    return dom, h, A, lam, Q


def test_spectral_bound_examples():
    assert spectral_bound(1.0) == pytest.approx(16 / 3, abs=1e-15)
    assert spectral_bound(0.5) == pytest.approx(64 / 3, abs=1e-13)


def test_spectral_bound_dominates_power_iteration(eig8):
    dom, h, A, lam, _ = eig8
    assert np.allclose(A, A.T)
    v = np.random.default_rng(0).standard_normal(A.shape[0])
    for _ in range(300):
        v = A @ v
        v /= np.linalg.norm(v)
    rayleigh = v @ A @ v
    assert lam[0] > 0
    assert rayleigh == pytest.approx(lam[-1], rel=1e-6)
    assert lam[-1] <= spectral_bound(h)


@pytest.mark.parametrize("degree", [0, 1, 2, 5])
def test_operator_count_equals_degree(degree):
    dom = _cube(4)
    u, f = Field(dom, 1, 0.25), Field(dom, 1, 0.25)
    before = OPS.count
    _smooth(u, f, dom, degree)
    assert OPS.count - before == degree


def test_fixed_point():
    dom = _cube(8)
    u, f = Field(dom, 1, 0.125), Field(dom, 1, 0.125)
    sample(u, ProblemSpec(R=(1.0, 1.0, 1.0)).exact_u, dom)
    fill_bc_ghosts(u, dom)
    apply_operator(u, f, dom)
    before = u.values.copy()
    _smooth(u, f, dom, 2)
    assert np.max(np.abs(u.values - before)) < 1e-12


def test_degree_one_is_optimal_richardson():
    dom, h = _cube(6), 1.0 / 6
    rng = np.random.default_rng(4)
    u, f = Field(dom, 1, h), Field(dom, 1, h)
    u.view(dom)[...] = rng.standard_normal(dom.shape)
    f.view(dom)[...] = rng.standard_normal(dom.shape)
    ref = u.copy()
    fill_bc_ghosts(ref, dom)
    lu = ref.like()
    apply_operator(ref, lu, dom)
    lam = spectral_bound(h)
    omega = 2.0 / (0.1 * lam + 1.1 * lam)
    want = ref.view(dom) + omega * (lu.view(dom) - f.view(dom))
    _smooth(u, f, dom, 1)
    np.testing.assert_allclose(u.view(dom), want, rtol=1e-13, atol=1e-13)


def test_degree_two_reduces_residual():
    dom, h = _cube(16), 1.0 / 16
    rng = np.random.default_rng(5)
    u, f = Field(dom, 1, h), Field(dom, 1, h)
    u.view(dom)[...] = rng.standard_normal(dom.shape)
    r0 = _res_inf(u, f, dom)
    _smooth(u, f, dom, 2)
    assert _res_inf(u, f, dom) < 0.5 * r0


def test_high_frequency_reduction(eig8):
    dom, h, _, lam, Q = eig8
    lam_hat = spectral_bound(h)
    e = np.random.default_rng(6).standard_normal(lam.size)
    u, f = Field(dom, 1, h), Field(dom, 1, h)
    u.view(dom)[...] = e.reshape(dom.shape, order="F")
    _smooth(u, f, dom, 2)
    e2 = u.view(dom).ravel(order="F")
    hi = lam >= 0.5 * lam_hat
    c1, c2 = Q[:, hi].T @ e, Q[:, hi].T @ e2
    # every component in the target interval obeys the Chebyshev bound 1/T_2(1.2)
    bound = 1.0 / (2 * 1.2**2 - 1)
    assert np.max(np.abs(c2 / c1)) <= bound + 1e-10
    # and the whole upper-half band shrinks by nearly 2x in norm
    assert np.linalg.norm(c1) / np.linalg.norm(c2) > 1.85
    # two applications (pre + post smoothing) clear 2x per component with margin
    _smooth(u, f, dom, 2)
    c3 = Q[:, hi].T @ u.view(dom).ravel(order="F")
    assert np.max(np.abs(c3 / c1)) <= bound**2 + 1e-10 < 0.5


def test_coarse_solve_residual():
    dom = Box.from_shape((4, 2, 2))
    h = 0.5
    ex, f, u = Field(dom, 1, h), Field(dom, 1, h), Field(dom, 1, h)
    sample(ex, ProblemSpec().exact_u, dom)
    fill_bc_ghosts(ex, dom)
    apply_operator(ex, f, dom)
    it = coarse_solve(u, f, dom)
    assert it >= 1
    assert _res_inf(u, f, dom) <= 1e-10 * np.max(np.abs(f.view(dom)))
    np.testing.assert_allclose(u.view(dom), ex.view(dom), atol=1e-12)


def test_coarse_solve_zero_and_linearity():
    dom = Box.from_shape((4, 2, 2))
    rng = np.random.default_rng(7)
    u, f = Field(dom, 1, 0.5), Field(dom, 1, 0.5)
    u.values[...] = 5.0
    coarse_solve(u, f, dom)
    assert np.all(u.view(dom) == 0.0)
    f.view(dom)[...] = rng.standard_normal(dom.shape)
    coarse_solve(u, f, dom)
    u2, f2 = Field(dom, 1, 0.5), f.copy()
    f2.values *= -3.0
    coarse_solve(u2, f2, dom)
    np.testing.assert_allclose(u2.view(dom), -3.0 * u.view(dom), rtol=1e-9, atol=1e-12)


def test_coarse_solve_failure():
    dom = _cube(8)
    u, f = Field(dom, 1, 0.125), Field(dom, 1, 0.125)
    f.view(dom)[...] = np.random.default_rng(8).standard_normal(dom.shape)
    with pytest.raises(SolverFailure):
        coarse_solve(u, f, dom, maxiter=2)


def test_cheb_config_validation():
    with pytest.raises(ValueError):
        ChebConfig(-1)
    with pytest.raises(ValueError):
        ChebConfig(2, (1.1, 0.1))
