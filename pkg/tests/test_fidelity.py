import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holostab.connection import ConstantConnection, FourierConnection, PureGaugeConnection, conjugated, curvature_tensor
from holostab.errors import CompositionError, DimensionError, InvalidInputError, SelfCheckError
from holostab.fidelity import (
    FidelityValue,
    fidelity_exact,
    fidelity_of_error_loop,
    fidelity_rate,
    fidelity_taylor,
    linear_term,
    loglog_slope,
    parallelogram_fidelity,
    robustness_scan,
    scaling_experiment,
)
from holostab.geometry import (
    ParallelogramErrorModel,
    SmoothErrorModel,
    circle_loop,
    error_loop,
    perturb_loop,
    signed_areas,
    square_loop,
)
from holostab.holonomy import IntegratorConfig
from holostab.linalg import SIGMA_X, SIGMA_Y, matrix_exponential, maximally_mixed, pure_state, random_hermitian
from oracles import brute_force_transport

PAULI = ConstantConnection([SIGMA_X, SIGMA_Y])
FOURIER = FourierConnection(seed=7)
RHO0 = pure_state(0, 2)
TIGHT = IntegratorConfig(tolerance=1e-12)
E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


@st.composite
def density(draw, n=2):
    re = np.array([[draw(st.floats(-1, 1)) for _ in range(n)] for _ in range(n)])
    im = np.array([[draw(st.floats(-1, 1)) for _ in range(n)] for _ in range(n)])
    z = re + 1j * im
    rho = z @ z.conj().T + 1e-3 * np.eye(n)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


# --- exact fidelity -------------------------------------------------------------------


def test_identical_loops_give_one():
    loop = circle_loop([0.1, 0.1], 0.3, samples=40)
    fv = fidelity_exact(RHO0, FOURIER, loop, loop)
    assert abs(fv.f - 1) <= 1e-10
    assert fv.deviation == fv.f - 1 and fv.magnitude == abs(fv.f)


def test_zero_field_gives_one():
    loop = square_loop([0.0, 0.0], 0.5, per_side=4)
    other = perturb_loop(loop, SmoothErrorModel(seed=2), 0.1)
    assert fidelity_exact(RHO0, ConstantConnection.zero(2, 2), loop, other).f == 1


def test_fidelity_matches_fine_step_oracle():
    loop0 = square_loop([0.0, 0.0], 0.5, per_side=64)
    loop1 = perturb_loop(loop0, SmoothErrorModel(seed=3), 0.01)
    g0 = brute_force_transport(PAULI.evaluate, loop0.vertices, 1_000_000)
    g1 = brute_force_transport(PAULI.evaluate, loop1.vertices, 1_000_000)
    ref = np.trace(RHO0 @ np.linalg.inv(g1) @ g0)
    assert abs(fidelity_exact(RHO0, PAULI, loop0, loop1, TIGHT).f - ref) <= 1e-8


def test_two_forms_agree_on_fourier():
    loop0 = square_loop([0.3, 0.5], 0.4, per_side=4)
    loop1 = perturb_loop(loop0, SmoothErrorModel(seed=1), 0.05)
    cfg = IntegratorConfig(tolerance=1e-10)
    fv = fidelity_exact(RHO0, FOURIER, loop0, loop1, cfg)
    assert fv.self_check <= 10 * cfg.tolerance
    assert abs(fidelity_of_error_loop(RHO0, FOURIER, error_loop(loop0, loop1), cfg) - fv.f) <= 10 * cfg.tolerance


def test_base_point_mismatch():
    with pytest.raises(CompositionError):
        fidelity_exact(RHO0, PAULI, square_loop([0.0, 0.0], 1.0, per_side=1), square_loop([0.1, 0.0], 1.0, per_side=1))


def test_rho_dimension_mismatch():
    loop = square_loop([0.0, 0.0], 1.0, per_side=1)
    with pytest.raises(DimensionError):
        fidelity_exact(pure_state(0, 3), PAULI, loop, loop)


def test_fidelity_value_modulus_guard():
    with pytest.raises(SelfCheckError):
        FidelityValue(1.001 + 0j)


@settings(max_examples=10)
@given(density(), st.floats(0.0, 0.2))
def test_modulus_at_most_one(rho, eps):
    loop = square_loop([0.0, 0.0], 0.5, per_side=4)
    fv = fidelity_exact(rho, PAULI, loop, perturb_loop(loop, SmoothErrorModel(seed=4), eps))
    assert fv.magnitude <= 1 + 1e-9


def test_global_gauge_invariance():
    w = matrix_exponential(random_hermitian(2, np.random.default_rng(8)), 1j)
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    loop0 = square_loop([0.3, 0.5], 0.4, per_side=2)
    loop1 = perturb_loop(loop0, SmoothErrorModel(seed=6), 0.05)
    f = fidelity_exact(rho, FOURIER, loop0, loop1).f
    g = fidelity_exact(w @ rho @ w.conj().T, conjugated(FOURIER, w), loop0, loop1).f
    assert abs(f - g) <= 1e-10


# --- Taylor expansion ----------------------------------------------------------------


def test_taylor_zero_eps():
    t = fidelity_taylor(RHO0, FOURIER, [0.3, 0.5], E1, E2, 0.0)
    assert (t.order2, t.order3, t.order4) == (0, 0, 0)
    assert t.value == 1


def test_taylor_pauli_order2():
    eps = 0.013
    t = fidelity_taylor(RHO0, PAULI, [0.0, 0.0], E1, E2, eps)
    assert t.order2 == pytest.approx(2j * eps**2, abs=1e-15)
    assert t.partial_sums[1] == 1 + t.order2


@settings(max_examples=15)
@given(density(), st.floats(0.001, 0.05))
def test_taylor_order2_imaginary(rho, eps):
    t = fidelity_taylor(rho, FOURIER, [0.3, 0.5], E1, E2, eps)
    assert abs(t.order2.real) <= 1e-12 * max(abs(t.order2), 1e-300) + 1e-300


def test_taylor_warns_outside_regime():
    with pytest.warns(UserWarning):
        t = fidelity_taylor(RHO0, PAULI, [0.0, 0.0], E1, E2, 1.5)
    assert not t.regime_ok


@pytest.mark.parametrize("field,anchor", [(PAULI, [0.0, 0.0]), (FOURIER, [0.3, 0.5])])
def test_order2_residual_is_cubic_or_better(field, anchor):
    eps = np.array([0.02, 0.01, 0.005, 0.0025])
    resid = []
    for e in eps:
        t = fidelity_taylor(RHO0, field, anchor, E1, E2, e)
        f = parallelogram_fidelity(RHO0, field, anchor, e * E1, e * E2, TIGHT).f
        resid.append(abs(f - 1 - t.order2))
    assert loglog_slope(eps, resid) >= 2.7


# --- rate law ------------------------------------------------------------------


def test_rate_pure_gauge_flat():
    pts = np.random.default_rng(5).uniform(-2, 2, (5, 2))
    pg = PureGaugeConnection()
    for p in pts:
        assert fidelity_rate(RHO0, pg, p, (1, 0)).rate <= 1e-6


def test_rate_pauli_is_two():
    assert fidelity_rate(RHO0, PAULI, [0.0, 0.0], (1, 0)).rate == pytest.approx(2.0, abs=1e-14)


def test_rate_plane_validation():
    with pytest.raises(DimensionError):
        fidelity_rate(RHO0, PAULI, [0.0, 0.0], (0, 1))


def test_rate_small_parallelogram_finite_difference():
    eps = 1e-3
    f = parallelogram_fidelity(RHO0, PAULI, [0.0, 0.0], eps * E1, eps * E2, IntegratorConfig(tolerance=1e-13)).f
    assert abs((f - 1).imag) / eps**2 == pytest.approx(2.0, rel=1e-3)


def test_rate_report_finite_difference_field():
    rep = fidelity_rate(RHO0, FOURIER, [0.3, 0.5], (1, 0), area=1e-6, cfg=IntegratorConfig(tolerance=1e-13))
    assert rep.fd_estimate == pytest.approx(rep.rate, rel=1e-3)
    assert rep.error_area == 1e-6 and rep.rate >= 0


# --- robustness -------------------------------------------------------------------


def test_robustness_pure_gauge():
    assert robustness_scan(RHO0, PureGaugeConnection(), circle_loop([0.0, 0.0], 0.5), 32).robust


def test_robustness_pauli():
    rep = robustness_scan(RHO0, PAULI, circle_loop([0.0, 0.0], 0.5), 16)
    assert rep.max_curvature_norm == pytest.approx(2.0, abs=1e-12)
    assert not rep.robust


def test_robustness_matches_oversampling():
    loop = circle_loop([0.3, 0.5], 0.5)
    rep = robustness_scan(RHO0, FOURIER, loop, 64)
    dense = loop.point_at(np.arange(640) / 640)
    f = curvature_tensor(FOURIER, dense)[:, 0, 1]
    ref = np.linalg.norm(f, ord=2, axis=(-2, -1)).max()
    assert rep.max_curvature_norm == pytest.approx(ref, rel=0.05)


def test_robustness_needs_samples():
    with pytest.raises(InvalidInputError):
        robustness_scan(RHO0, PAULI, circle_loop([0.0, 0.0], 0.5), 1)


# --- scaling experiments -----------------------------------------------------------

GRID = [0.04, 0.02, 0.01, 0.005, 0.0025]


def test_scaling_zero_field_degenerate():
    loop = square_loop([0.0, 0.0], 0.5, per_side=4)
    rep = scaling_experiment(RHO0, ConstantConnection.zero(2, 2), loop, SmoothErrorModel(seed=3), GRID)
    assert rep.degenerate_dev and rep.degenerate_magnitude
    assert math.isnan(rep.slope_dev)


@pytest.mark.parametrize("grid", [[0.1, 0.05, 0.02], [0.02, 0.01, 0.005, 0.0025], [0.1, 0.05, -0.01, 0.001]])
def test_scaling_grid_validation(grid):
    loop = square_loop([0.0, 0.0], 0.5, per_side=4)
    with pytest.raises(InvalidInputError):
        scaling_experiment(RHO0, PAULI, loop, SmoothErrorModel(seed=3), grid)


def test_scaling_thread_count_does_not_change_results():
    loop = square_loop([0.0, 0.0], 0.5, per_side=8)
    m = SmoothErrorModel(seed=3)
    a = scaling_experiment(RHO0, PAULI, loop, m, GRID, threads=1)
    b = scaling_experiment(RHO0, PAULI, loop, m, GRID, threads=4)
    assert np.array_equal(a.f, b.f)


@pytest.mark.parametrize("field", [PAULI, FOURIER], ids=["pauli", "fourier"])
def test_small_error_loop_has_no_linear_term(field):
    """With an error loop of area eps**2 the fidelity deviation is quadratic."""
    anchor = [0.3, 0.5]
    loop = square_loop(anchor, 0.5, per_side=4)
    model = ParallelogramErrorModel(anchor, E1, E2)
    cfg = IntegratorConfig(tolerance=1e-12 if field is PAULI else 1e-10)
    rep = scaling_experiment(RHO0, field, loop, model, GRID, cfg)
    assert rep.slope_dev == pytest.approx(2.0, abs=0.2)
    lt = linear_term(RHO0, field, loop, model, 0.01, cfg)
    assert lt.ratio <= 1e-6


def test_magnitude_loss_is_quartic_for_small_error_loops():
    anchor = [0.3, 0.5]
    loop = square_loop(anchor, 0.5, per_side=4)
    model = ParallelogramErrorModel(anchor, E1, E2)
    rep = scaling_experiment(RHO0, FOURIER, loop, model, [0.08, 0.04, 0.02, 0.01, 0.005], IntegratorConfig(tolerance=1e-11))
    assert not rep.degenerate_magnitude
    assert rep.slope_magnitude >= 3.5


def test_smooth_displacement_error_area_is_linear_in_eps():
    """A smooth displacement of a finite loop changes its enclosed area at first order."""
    loop = square_loop([0.0, 0.0], 0.5, per_side=64)
    m = SmoothErrorModel(seed=3)
    eps = np.array([0.02, 0.01, 0.005, 0.0025])
    area = [abs(signed_areas(error_loop(loop, perturb_loop(loop, m, e)).vertices)[0, 1]) for e in eps]
    assert loglog_slope(eps, area) == pytest.approx(1.0, abs=0.1)


def test_linear_term_of_zero_field():
    loop = square_loop([0.0, 0.0], 0.5, per_side=4)
    lt = linear_term(RHO0, ConstantConnection.zero(2, 2), loop, SmoothErrorModel(seed=1), 0.01)
    assert lt.derivative == 0 and lt.ratio == 0


def test_maximally_mixed_state_accepted():
    loop = square_loop([0.0, 0.0], 0.5, per_side=4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fv = fidelity_exact(maximally_mixed(2), PAULI, loop, perturb_loop(loop, SmoothErrorModel(seed=3), 0.01))
    assert fv.magnitude <= 1
