from itertools import product

import numpy as np
import pytest

from srmg.grid import Box, Field, grow, sample
from srmg.poisson import (
    ProblemSpec, apply_operator, domain_box, error_inf, exact_u, fill_bc_ghosts, interior, residual,
    rhs_f, stencil_apply, stencil_weights,
)
from srmg.smooth import coarse_solve


def brute_apply(U, h):
    w = stencil_weights(h)
    n = [s - 2 for s in U.shape]
    out = np.zeros(n)
    for o in product((-1, 0, 1), repeat=3):
        out += w[o[0] + 1, o[1] + 1, o[2] + 1] * U[1 + o[0]:1 + o[0] + n[0],
                                                    1 + o[1]:1 + o[1] + n[1],
                                                    1 + o[2]:1 + o[2] + n[2]]
    return out


def test_weights():
    w = stencil_weights(1.0)
    assert w[1, 1, 1] == pytest.approx(-8 / 3)
    assert w[0, 1, 1] == 0.0
    assert w[0, 0, 1] == pytest.approx(1 / 6)
    assert w[0, 0, 0] == pytest.approx(1 / 12)
    assert abs(w.sum()) < 1e-15
    assert np.array_equal(w, w[::-1, ::-1, ::-1])
    assert np.array_equal(w, w.transpose(1, 2, 0))


def test_factored_apply_matches_brute_force():
    rng = np.random.default_rng(1)
    U = rng.standard_normal((7, 6, 5))
    np.testing.assert_allclose(stencil_apply(U, 0.3), brute_apply(U, 0.3), rtol=1e-12, atol=1e-12)


def test_constant_gives_zero():
    U = np.full((5, 5, 5), 3.7)
    assert np.max(np.abs(stencil_apply(U, 0.1))) < 1e-12


@pytest.mark.parametrize("poly,lap", [
    (lambda x, y, z: x * x, 2.0),
    (lambda x, y, z: x * x + y * y + z * z, 6.0),
    (lambda x, y, z: x * y + 3 * y * z - z + 1.0, 0.0),
    (lambda x, y, z: 2 * z * z - x * z, 4.0),
])
def test_quadratic_exactness(poly, lap):
    f = Field(Box.from_shape((6, 5, 4)), 1, 0.25)
    sample(f, poly)
    out = f.like()
    apply_operator(f, out, f.box)
    np.testing.assert_allclose(out.view(f.box), lap, atol=1e-11)


def test_exact_u_examples():
    assert exact_u((0.0, 0.3, 0.7)) == 0.0
    assert exact_u((1.0, 0.5, 0.5)) == pytest.approx(-0.10546875, abs=1e-15)
    y = np.linspace(0, 1, 7)
    assert np.all(exact_u((2.0, y, y[::-1])) == 0.0)


def test_rhs_f_example():
    assert rhs_f((1.0, 0.5, 0.5)) == pytest.approx(1.265625, abs=1e-14)


def test_rhs_f_edge_term():
    # x = 0 and y = 0: only the term differentiating the x and y factors twice could survive, and it is 0 too
    assert rhs_f((0.0, 0.0, 0.4)) == 0.0
    # on one face only the normal second derivative survives
    x = (0.0, 0.3, 0.6)
    g = lambda t, R: t**4 - R * R * t * t
    assert rhs_f(x) == pytest.approx(-2 * 4.0 * g(0.3, 1) * g(0.6, 1), rel=1e-14)


def test_rhs_f_finite_difference_oracle():
    rng = np.random.default_rng(2)
    pts = rng.uniform((0, 0, 0), (2, 1, 1), size=(10, 3))
    for x in pts:
        errs = []
        for h in (1e-2, 5e-3):
            fd = 0.0
            for d in range(3):
                e = np.zeros(3)
                e[d] = h
                fd += (exact_u(x + e) - 2 * exact_u(x) + exact_u(x - e)) / h**2
            errs.append(abs(fd - rhs_f(x)))
        assert errs[1] < 1e-3
        if errs[0] > 1e-9:
            assert 3.0 < errs[0] / errs[1] < 5.0


def test_bc_ghost_examples():
    dom = Box.from_shape((4, 4, 4))
    u = Field(dom, 1, 1.0)
    u[(0, 2, 2)] = 3.0
    u[(0, 0, 0)] = 2.0
    fill_bc_ghosts(u, dom)
    assert u[(-1, 2, 2)] == -3.0
    assert u[(-1, -1, -1)] == -2.0
    assert u[(-1, -1, 0)] == 2.0


def test_bc_fill_leaves_process_ghosts():
    dom = Box.from_shape((8, 4, 4))
    u = Field(Box((0, 0, 0), (3, 3, 3)), 1, 1.0)
    u.values[...] = 9.0
    fill_bc_ghosts(u, dom)
    assert np.all(u.view(Box((4, 0, 0), (4, 3, 3))) == 9.0)
    assert np.all(u.view(Box((-1, 0, 0), (-1, 3, 3))) == -9.0)


def _boundary_truncation(n, fn, lap, region_fn):
    R = (2.0, 1.0, 1.0)
    dom = domain_box((2 * n, n, n))
    u = Field(dom, 1, R[1] / n)
    sample(u, fn, dom)
    fill_bc_ghosts(u, dom)
    out = u.like()
    apply_operator(u, out, dom)
    ref = u.like()
    sample(ref, lap, dom)
    r = region_fn(dom)
    return float(np.max(np.abs(out.view(r) - ref.view(r))))


def test_interior_truncation_second_order():
    e = [_boundary_truncation(n, ProblemSpec().exact_u, ProblemSpec().rhs_f, lambda d: interior(d, d))
         for n in (32, 64, 128)]
    for a, b in zip(e, e[1:]):
        assert 3.6 < a / b < 4.4


def test_second_order_up_to_boundary_for_odd_reflection_functions():
    s = lambda x, y, z: np.sin(np.pi * x / 2) * np.sin(np.pi * y) * np.sin(np.pi * z)
    ls = lambda x, y, z: -(np.pi**2) * 2.25 * s(x, y, z)
    e = [_boundary_truncation(n, s, ls, lambda d: d) for n in (16, 32, 64)]
    for a, b in zip(e, e[1:]):
        assert 3.6 < a / b < 4.4


def test_residual_zero_u_and_scaling():
    dom = domain_box((4, 2, 2))
    u, f, out = (Field(dom, 1, 0.5) for _ in range(3))
    sample(f, ProblemSpec().rhs_f, dom)
    residual(u, f, out, dom)
    np.testing.assert_array_equal(out.view(dom), f.view(dom))
    rng = np.random.default_rng(3)
    u.view(dom)[...] = rng.standard_normal(dom.shape)
    fill_bc_ghosts(u, dom)
    residual(u, f, out, dom)
    u2, f2, out2 = u.copy(), f.copy(), out.like()
    u2.values *= 2.5
    f2.values *= 2.5
    residual(u2, f2, out2, dom)
    np.testing.assert_allclose(out2.view(dom), 2.5 * out.view(dom), rtol=1e-13, atol=1e-13)


def test_residual_after_coarse_solve():
    dom = domain_box((4, 2, 2))
    u, f = Field(dom, 1, 0.5), Field(dom, 1, 0.5)
    ex = Field(dom, 1, 0.5)
    sample(ex, ProblemSpec().exact_u, dom)
    fill_bc_ghosts(ex, dom)
    apply_operator(ex, f, dom)
    coarse_solve(u, f, dom)
    out = u.like()
    residual(u, f, out, dom)
    assert np.max(np.abs(out.view(dom))) <= 1e-10 * np.max(np.abs(f.view(dom)))


def test_error_inf():
    dom = domain_box((8, 4, 4))
    u = Field(dom, 1, 0.25)
    sample(u, ProblemSpec().exact_u, dom)
    assert error_inf(u, dom) == 0.0
    z = Field(dom, 1, 0.25)
    brute = max(abs(exact_u(np.array(c) * 0.25 + 0.125)) for c in dom.cells())
    assert error_inf(z, dom) == pytest.approx(brute, rel=1e-14)
    sub = Box((0, 0, 0), (3, 1, 1))
    assert error_inf(z, sub) <= error_inf(z, dom)
