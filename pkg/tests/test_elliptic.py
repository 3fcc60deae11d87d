import math

import numpy as np
import pytest

import ms_stability as ms
from ms_stability.errors import CurveEscapesStrip

from conftest import drift_domain, flat_setup


def test_separated_drift_state_is_exact_at_nodes(unit_strip_state):
    # Data x+1 above / -x below with the flat cut: the solver must hit the
    # piecewise-linear equilibrium exactly (it lies in the discrete space).
    domain, curve, grid, state, stats = unit_strip_state
    x = curve.abscissae
    np.testing.assert_allclose(state.trace("upper"), x + 1.0, atol=1e-12)
    np.testing.assert_allclose(state.trace("lower"), -x, atol=1e-12)
    assert np.max(np.abs(state.w_upper - 1.0)) < 1e-12
    assert np.max(np.abs(state.w_lower)) < 1e-12
    assert stats.residual <= stats.rtol


def test_state_energy_is_exact_for_drift_data():
    for a, b in ((1.0, 1.0), (0.5, 2.0)):
        _, _, _, state, _ = flat_setup(a, b, 32)
        # |grad u| = 1 on both components, total area 2ab
        assert ms.dirichlet_energy(state) == pytest.approx(2.0 * a * b, rel=1e-13)
        assert ms.dirichlet_energy(state, "upper") == pytest.approx(a * b, rel=1e-13)
        assert ms.dirichlet_energy(state, "lower") == pytest.approx(a * b, rel=1e-13)


def test_wall_data_reproduced_exactly_at_nodes():
    domain = ms.StripDomain(
        1.0, 1.0,
        ms.BoundaryData(0.3, lambda x: np.cos(2 * np.pi * x) + 0.5),
        ms.BoundaryData(-0.7, lambda x: np.sin(4 * np.pi * x)),
    )
    curve = ms.sinusoidal_curve(1.0, 32, mode=1, amplitude=0.1)
    state, _ = ms.solve_state(domain, curve, ms.Grid(32, 32))
    x = curve.abscissae
    np.testing.assert_array_equal(state.w_upper[-1], np.cos(2 * np.pi * x) + 0.5)
    np.testing.assert_array_equal(state.w_lower[-1], np.sin(4 * np.pi * x))


def test_zero_data_gives_zero_field():
    domain = ms.StripDomain(1.0, 1.0, ms.BoundaryData(0.0), ms.BoundaryData(0.0))
    state, stats = ms.solve_state(domain, ms.flat_curve(1.0, 16), ms.Grid(16, 16))
    assert np.all(state.w_upper == 0.0)
    assert np.all(state.w_lower == 0.0)
    assert ms.dirichlet_energy(state) == 0.0
    assert stats.iterations == 0


def test_components_decouple():
    # The upper solve must not see the lower wall datum at all.
    top = ms.BoundaryData(0.2, lambda x: np.cos(2 * np.pi * x))
    curve = ms.sinusoidal_curve(1.0, 24, mode=1, amplitude=0.15)
    grid = ms.Grid(24, 24)
    state_a, _ = ms.solve_state(
        ms.StripDomain(1.0, 1.0, top, ms.BoundaryData(0.0)), curve, grid)
    state_b, _ = ms.solve_state(
        ms.StripDomain(1.0, 1.0, top, ms.BoundaryData(-3.0, lambda x: np.sin(2 * np.pi * x))),
        curve, grid)
    np.testing.assert_array_equal(state_a.w_upper, state_b.w_upper)
    assert np.max(np.abs(state_a.w_lower - state_b.w_lower)) > 0.1


def state_mode_error(n_grid, a=1.0, b=1.0):
    """Max nodal error against the separated cosh-profile reference.

    Wall datum cos(2 pi x / b) on top, zero below, flat cut: the upper
    solution is cos(kx) cosh(ky) / cosh(ka) (zero normal derivative on
    the cut), the lower solution vanishes.
    """
    k = 2.0 * math.pi / b
    domain = ms.StripDomain(
        a, b, ms.BoundaryData(0.0, lambda x: np.cos(k * x)), ms.BoundaryData(0.0))
    curve = ms.flat_curve(b, n_grid)
    grid = ms.Grid(n_grid, n_grid)
    state, _ = ms.solve_state(domain, curve, grid)
    x = curve.abscissae
    y = a * np.arange(grid.ny + 1) / grid.ny
    exact = np.cos(k * x)[None, :] * np.cosh(k * y)[:, None] / math.cosh(k * a)
    err_up = np.max(np.abs(state.w_upper - exact))
    err_low = np.max(np.abs(state.w_lower))
    return err_up, err_low


def test_state_solver_converges_at_second_order():
    errs = []
    for n in (32, 64, 128):
        err_up, err_low = state_mode_error(n)
        errs.append(err_up)
        assert err_low < 1e-9
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.8
    assert errs[-1] < 2e-4


def jump_mode_error(n_grid, a=1.0, b=1.0):
    """Max nodal error of the transport solve against the sinh-mode field."""
    domain = drift_domain(a, b)
    curve = ms.flat_curve(b, n_grid)
    grid = ms.Grid(n_grid, n_grid)
    state, _ = ms.solve_state(domain, curve, grid)
    phi = np.cos(2.0 * math.pi * curve.abscissae / b)
    field, _ = ms.solve_jump_source(state, phi)
    amp = 1.0 / math.cosh(2.0 * math.pi * a / b)
    ref = ms.strip_mode_field(2, amp, domain, grid)
    return max(
        np.max(np.abs(field.w_upper - ref.w_upper)),
        np.max(np.abs(field.w_lower - ref.w_lower)),
    )


def test_jump_solver_converges_at_second_order():
    errs = [jump_mode_error(n) for n in (32, 64, 128)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.8
    assert errs[-1] < 1e-3


def test_jump_solver_is_linear(unit_strip_state):
    _, curve, grid, state, _ = unit_strip_state
    rng = np.random.default_rng(3)
    phi1 = rng.standard_normal(curve.m)
    phi2 = rng.standard_normal(curve.m)
    f1, _ = ms.solve_jump_source(state, phi1)
    f2, _ = ms.solve_jump_source(state, phi2)
    f12, _ = ms.solve_jump_source(state, 2.0 * phi1 - 0.5 * phi2)
    combo = 2.0 * f1.w_upper - 0.5 * f2.w_upper
    scale = np.max(np.abs(combo)) + 1e-30
    assert np.max(np.abs(f12.w_upper - combo)) / scale < 1e-8


def test_constant_perturbation_gives_zero_transport_field(unit_strip_state):
    # The coupling load of a constant phi telescopes away; only the CG
    # noise of the state traces (~1e-14) survives in the load.
    _, curve, grid, state, _ = unit_strip_state
    field, _ = ms.solve_jump_source(state, np.ones(curve.m))
    assert np.max(np.abs(field.w_upper)) < 1e-9
    assert np.max(np.abs(field.w_lower)) < 1e-9


def test_energy_matches_stiffness_quadratic_form(unit_strip_state):
    # Quadrature energy of a zero-wall field equals v' A v by construction.
    _, curve, grid, state, _ = unit_strip_state
    phi = np.cos(2.0 * math.pi * curve.abscissae)
    field, _ = ms.solve_jump_source(state, phi)
    for side in ("upper", "lower"):
        comp = getattr(state.system, side)
        v = field.unknown_vector(side)
        assert ms.dirichlet_energy(field, side) == pytest.approx(
            float(v @ (comp.a_uu @ v)), rel=1e-12)


def test_energy_of_analytic_mode_matches_quadrature_oracle():
    # Compare the Gauss-rule energy of the interpolated sinh mode with an
    # adaptive-quadrature evaluation of the exact integral.
    import scipy.integrate

    a = b = 1.0
    k = 2.0 * math.pi / b
    domain = drift_domain(a, b)
    field = ms.strip_mode_field(2, 1.0, domain, ms.Grid(96, 96))

    def dens(y):
        # int over x of |grad v|^2 at height y, for v = sin(kx) sinh(k(a-y))
        return 0.5 * b * k * k * (math.cosh(2.0 * k * (a - y)))

    exact_half, err = scipy.integrate.quad(dens, 0.0, a, limit=200)
    assert err < 1e-9 * exact_half
    num = ms.dirichlet_energy(field)
    assert num == pytest.approx(2.0 * exact_half, rel=2e-3)


def test_solver_guards():
    domain = drift_domain()
    with pytest.raises(ValueError):
        ms.solve_state(domain, ms.flat_curve(1.0, 24), ms.Grid(32, 32))
    with pytest.raises(ValueError):
        ms.Grid(8, 32)
    tall = ms.GraphCurve(1.0, np.full(32, 1.5))
    with pytest.raises(CurveEscapesStrip):
        ms.solve_state(domain, tall, ms.Grid(32, 32))
    _, curve, grid, state, _ = flat_setup(n=16)
    with pytest.raises(ValueError):
        ms.solve_jump_source(state, np.ones(7))
    with pytest.raises(ValueError):
        ms.dirichlet_energy(state, "sideways")
