import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ltsdd.errors import InvalidRobinParameter
from ltsdd.geometry import build_mesh, decompose, uniform_coords
from ltsdd.interface import DDProblem
from ltsdd.mhfe import Coefficients, project_velocity
from ltsdd.optim import (InterfaceModel, convergence_factor, jacobi_residual, max_factor, optimize_parameters,
                         parameter_sweep, symbol_scale)
from ltsdd.timegrid import TimeGrid


def model(d=(0.02, 0.002), w=(1.0, 1.0), a=(0.5, -0.5), T=1.0, dt=0.01):
    return InterfaceModel.from_grids(d, w, a, T, dt)


def rho_scalar(d, w, a, a12, a21, k, b=(0.0, 0.0), xi=0.0):
    z = [(cmath.sqrt(a[i] ** 2 + 4 * d[i] * (1j * w[i] * k + d[i] * xi * xi + 1j * b[i] * xi)) - a[i]) / 2
         for i in range(2)]
    return abs((a12 - z[1]) * (a21 - z[0])) / abs((a12 + z[0]) * (a21 + z[1]))


def model2d(h=0.02):
    return InterfaceModel.from_grids((1.0, 0.1), (1.0, 0.5), (-0.02, 0.02), 1.0, 0.01, (-0.5, -0.05), 1.0, h)


def test_factor_matches_scalar_reimplementation():
    m = model()
    k = np.geomspace(m.band[0], m.band[1], 64)
    got = convergence_factor(m, 0.3, 1.7, k)
    ref = [rho_scalar(m.d, m.omega, m.a, 0.3, 1.7, kk) for kk in k]
    np.testing.assert_allclose(got, ref, rtol=1e-13)


def test_tangential_factor_matches_scalar_reimplementation():
    m = model2d()
    K, X = np.meshgrid(np.geomspace(*m.band, 16), m.wavenumbers(8))
    got = convergence_factor(m, 1.3, 40.0, K, X)
    ref = [[rho_scalar(m.d, m.omega, m.a, 1.3, 40.0, kk, m.tangential, xx) for kk, xx in zip(rk, rx)]
           for rk, rx in zip(K, X)]
    np.testing.assert_allclose(got, ref, rtol=1e-13)
    assert max_factor(m, 1.3, 40.0) == pytest.approx(
        max(rho_scalar(m.d, m.omega, m.a, 1.3, 40.0, kk, m.tangential, xx)
            for kk in m.frequencies() for xx in m.wavenumbers()), rel=1e-13)


def test_wavenumbers_cover_both_signs_and_reduce_to_1d():
    m = model2d(h=0.05)
    xi = m.wavenumbers(5)
    np.testing.assert_allclose(xi, np.concatenate([-np.geomspace(np.pi, 20 * np.pi, 5)[::-1],
                                                   np.geomspace(np.pi, 20 * np.pi, 5)]))
    flat = model(d=m.d, w=m.omega, a=m.a)
    assert flat.xi_band is None and np.array_equal(flat.wavenumbers(), [0.0])
    k = flat.frequencies()
    np.testing.assert_allclose(max_factor(flat, 0.7, 3.0), np.max(convergence_factor(flat, 0.7, 3.0, k)))
    with pytest.raises(ValueError):
        InterfaceModel((1.0, 1.0), (1.0, 1.0), (0.0, 0.0), (1.0, 2.0), xi_band=(3.0, 1.0))


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e2), st.floats(-5.0, 5.0), st.floats(1e-2, 1e4),
       st.floats(-1e3, 1e3))
def test_symmetric_factor_below_one_with_tangential_modes(alpha, d, b, k, xi):
    m = InterfaceModel((d, d), (1.0, 1.0), (0.0, 0.0), (1.0, 2.0), (b, b), (1.0, 2.0))
    assert convergence_factor(m, alpha, alpha, k, xi) < 1.0


def test_tangential_model_swap_and_optimality():
    m = model2d()
    a = optimize_parameters(m)
    b = optimize_parameters(m.swapped())
    assert b[0] == pytest.approx(a[1], rel=1e-4) and b[1] == pytest.approx(a[0], rel=1e-4)
    best = max_factor(m, *a)
    for f12 in (0.9, 1.1):
        for f21 in (0.9, 1.1):
            assert best <= max_factor(m, a[0] * f12, a[1] * f21) + 1e-10


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e2), st.floats(1e-2, 1e4))
def test_symmetric_pure_diffusion_factor_below_one(alpha, d, k):
    m = InterfaceModel((d, d), (1.0, 1.0), (0.0, 0.0), (1.0, 2.0))
    assert convergence_factor(m, alpha, alpha, k) < 1.0


def test_invalid_parameters():
    with pytest.raises(InvalidRobinParameter):
        convergence_factor(model(), 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        InterfaceModel((0.0, 1.0), (1.0, 1.0), (0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        InterfaceModel((1.0, 1.0), (1.0, 1.0), (0.0, 0.0), (2.0, 1.0))


def test_symmetric_model_gives_equal_pair():
    a12, a21 = optimize_parameters(model(d=(0.1, 0.1), a=(0.0, 0.0)))
    assert a12 == pytest.approx(a21, rel=1e-6)


def test_swap_swaps_pair_and_is_deterministic():
    m = model()
    a = optimize_parameters(m)
    b = optimize_parameters(m.swapped())
    assert a == optimize_parameters(m)
    assert b[0] == pytest.approx(a[1], rel=1e-4) and b[1] == pytest.approx(a[0], rel=1e-4)


def test_optimum_beats_scale_and_grid_neighbours():
    m = model()
    a12, a21 = optimize_parameters(m)
    best = max_factor(m, a12, a21)
    assert best < 1.0
    s = symbol_scale(m)
    assert best <= max_factor(m, s, s) + 1e-12
    for f12 in (0.9, 1.1):
        for f21 in (0.9, 1.1):
            assert best <= max_factor(m, a12 * f12, a21 * f21) + 1e-10


def test_symmetric_option():
    a, b = optimize_parameters(model(), symmetric=True)
    assert a == b
    assert max_factor(model(), a, a) >= max_factor(model(), *optimize_parameters(model())) - 1e-12


def test_shrinking_band_does_not_increase_minmax():
    vals = []
    for dt in (0.001, 0.01, 0.1, 0.5):
        m = model(dt=dt)
        vals.append(max_factor(m, *optimize_parameters(m)))
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def symmetric_problem():
    mesh = build_mesh(uniform_coords(0, 1, 4), uniform_coords(0, 1, 4))
    dec = decompose(mesh, [(0, 0.5, 0, 1), (0.5, 1, 0, 1)])
    n = mesh.n_elements
    cf = Coefficients(np.ones(n), np.full(n, 0.1), project_velocity(mesh, (0, 0)))
    return DDProblem(dec, cf, TimeGrid.uniform(0.5, 4))


def test_sweep_single_point_is_single_run():
    pb = symmetric_problem()
    g = [np.ones(z.shape) for z in pb.zero_robin()]
    sw = parameter_sweep(pb, [0.7], [1.1], 5, g=g)
    assert sw.residual.shape == (1, 1)
    assert sw.residual[0, 0] == jacobi_residual(pb, 0.7, 1.1, 5, g)


def test_sweep_symmetric_surface(tmp_path):
    pb = symmetric_problem()
    # mirror-symmetric initial guess
    z = [np.ones(z.shape) for z in pb.zero_robin()]
    vals = [0.3, 1.0, 3.0]
    sw = parameter_sweep(pb, vals, vals, 6, g=z)
    np.testing.assert_allclose(sw.residual, sw.residual.T, rtol=1e-8)
    sw.write_csv(tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 10
    a12, a21, r = sw.argmin()
    assert r == sw.residual.min()


def test_model_from_problem_uses_outward_normals():
    mesh = build_mesh(uniform_coords(0, 1, 4), uniform_coords(0, 1, 4))
    dec = decompose(mesh, [(0, 0.5, 0, 1), (0.5, 1, 0, 1)])
    n = mesh.n_elements
    cf = Coefficients(np.ones(n), np.where(dec.elem_sub == 0, 0.02, 0.002), project_velocity(mesh, (0.5, 1.0)))
    pb = DDProblem(dec, cf, [TimeGrid.uniform(1.0, 100), TimeGrid.uniform(1.0, 75)])
    m = InterfaceModel.from_problem(pb)
    assert m.d == (0.02, 0.002)
    assert m.a == pytest.approx((0.5, -0.5))
    assert m.tangential == pytest.approx((1.0, 1.0))
    assert m.band == pytest.approx((np.pi, np.pi / 0.01))
    assert m.xi_band == pytest.approx((np.pi, np.pi / 0.25))
