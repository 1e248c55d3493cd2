import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holostab.connection import ConstantConnection, FourierConnection, LinearConnection, PureGaugeConnection
from holostab.errors import ConvergenceError, DimensionError, InvalidInputError
from holostab.fidelity import loglog_slope
from holostab.geometry import Loop, Path, circle_loop, compose, invert, span_surface, square_loop
from holostab.holonomy import (
    IntegratorConfig,
    convergence_study,
    holonomy,
    stokes_residual,
    surface_ordered_holonomy,
    transporter,
)
from holostab.linalg import SIGMA_X, SIGMA_Y, frobenius_distance, unitarity_defect
from oracles import brute_force_transport, su2_exp

PAULI = ConstantConnection([SIGMA_X, SIGMA_Y])
FOURIER = FourierConnection(seed=7)
ABELIAN = LinearConnection.abelian_uniform(1.0)
TIGHT = IntegratorConfig(tolerance=1e-12)


@st.composite
def small_polygon(draw):
    n = draw(st.integers(3, 6))
    c = np.array([draw(st.floats(-1, 1)), draw(st.floats(-1, 1))])
    r = np.array([draw(st.floats(0.05, 0.3)) for _ in range(n)])
    th = 2 * np.pi * (np.arange(n) + np.array([draw(st.floats(0, 0.8)) for _ in range(n)])) / n
    return Loop.from_vertices(c + np.c_[r * np.cos(th), r * np.sin(th)])


# --- transporters ----------------------------------------------------------------


def test_zero_field_gives_identity():
    path = Path(np.array([[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]]))
    assert np.array_equal(transporter(ConstantConnection.zero(2, 3), path), np.eye(3))


def test_abelian_constant_straight_path():
    a, length = 0.7, 2.5
    field = ConstantConnection([np.array([[a]]), np.array([[0.0]])])
    u = transporter(field, Path(np.array([[0.0, 0.0], [length, 0.0]])))
    assert u[0, 0] == pytest.approx(np.exp(1j * a * length), abs=1e-14)


@pytest.mark.parametrize("uv", [(0.3, -0.4), (1.2, 0.7), (-2.0, 0.1)])
def test_single_segment_closed_form(uv):
    u, v = uv
    got = transporter(PAULI, Path(np.array([[0.1, 0.2], [0.1 + u, 0.2 + v]])))
    np.testing.assert_allclose(got, su2_exp(u, v), atol=1e-13)


def test_unit_square_four_edge_oracle():
    loop = square_loop([0.0, 0.0], 1.0, per_side=1)
    ref = su2_exp(0, -1) @ su2_exp(-1, 0) @ su2_exp(0, 1) @ su2_exp(1, 0)
    assert frobenius_distance(holonomy(PAULI, loop), ref) <= 1e-10


def test_transporter_dimension_mismatch():
    with pytest.raises(DimensionError):
        transporter(PAULI, Path(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])))


def test_holonomy_needs_loop():
    with pytest.raises(InvalidInputError):
        holonomy(PAULI, Path(np.array([[0.0, 0.0], [1.0, 0.0]])))


def test_convergence_error_carries_estimate():
    cfg = IntegratorConfig(steps_per_segment=1, refinement=2, tolerance=1e-14)
    with pytest.raises(ConvergenceError) as info:
        holonomy(FOURIER, square_loop([0.0, 0.0], 1.0, per_side=1), cfg)
    assert info.value.estimate.shape == (2, 2)
    assert info.value.distance > 1e-14


def test_deterministic_bitwise():
    loop = circle_loop([0.1, 0.2], 0.4, samples=50)
    assert np.array_equal(holonomy(FOURIER, loop), holonomy(FOURIER, loop))


def test_fourier_matches_brute_force():
    loop = square_loop([0.3, 0.5], 0.5, per_side=1)
    ref = brute_force_transport(FOURIER.evaluate, loop.vertices, 200_000)
    got = holonomy(FOURIER, loop, IntegratorConfig(tolerance=1e-11))
    assert frobenius_distance(got, ref) <= 1e-9


def test_abelian_circle_phase():
    g = holonomy(ABELIAN, circle_loop([0.0, 0.0], 0.5, samples=32768))
    assert abs(np.angle(g[0, 0]) - math.pi * 0.25) <= 1e-8


def test_result_is_unitary_without_projection():
    cfg = IntegratorConfig(unitary_projection=False)
    g = holonomy(FOURIER, circle_loop([0.0, 0.0], 0.5, samples=32), cfg)
    assert unitarity_defect(g) <= 1e-10


def test_midpoint_convergence_order():
    steps, dist = convergence_study(FOURIER, square_loop([0.3, 0.5], 0.5, per_side=1), IntegratorConfig(steps_per_segment=8), levels=5)
    assert -loglog_slope(steps, dist) == pytest.approx(2.0, abs=0.2)


@settings(max_examples=8)
@given(small_polygon())
def test_reversal_gives_adjoint(loop):
    g = holonomy(FOURIER, loop)
    gi = holonomy(FOURIER, invert(loop))
    assert frobenius_distance(gi, g.conj().T) <= 1e-10


@settings(max_examples=8)
@given(small_polygon(), small_polygon())
def test_composition_law(l1, l2):
    # move l2 so that it shares l1's base point
    l2 = Loop(l2.vertices - l2.base_point + l1.base_point)
    both = compose(l1, l2)
    lhs = holonomy(FOURIER, both)
    rhs = holonomy(FOURIER, l2) @ holonomy(FOURIER, l1)
    assert frobenius_distance(lhs, rhs) <= 1e-10


def test_open_path_composition():
    p1 = Path(np.array([[0.0, 0.0], [0.4, 0.1]]))
    p2 = Path(np.array([[0.4, 0.1], [0.2, 0.6], [0.0, 0.3]]))
    lhs = transporter(FOURIER, compose(p1, p2))
    rhs = transporter(FOURIER, p2) @ transporter(FOURIER, p1)
    assert frobenius_distance(lhs, rhs) <= 1e-10


def test_pure_gauge_loop_is_identity():
    g = holonomy(PureGaugeConnection(), circle_loop([0.3, -0.2], 0.4, samples=64))
    assert frobenius_distance(g, np.eye(2)) <= 1e-8


# --- surface-ordered products -------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3])
def test_surface_zero_field_identity(n):
    mesh = span_surface(square_loop([0.0, 0.0], 1.0, per_side=1), n)
    assert np.array_equal(surface_ordered_holonomy(ConstantConnection.zero(2, 2), mesh), np.eye(2))


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_abelian_unit_square_exact_flux(n):
    loop = square_loop([0.0, 0.0], 1.0, per_side=1)
    s = surface_ordered_holonomy(ABELIAN, span_surface(loop, n))
    assert s[0, 0] == pytest.approx(np.exp(1j), abs=1e-10)
    assert stokes_residual(ABELIAN, loop, n) <= 1e-8


def test_pure_gauge_stokes_residual():
    loop = square_loop([0.1, 0.1], 0.4, per_side=1)
    assert stokes_residual(PureGaugeConnection(), loop, 3) <= 1e-8


def test_pauli_stokes_self_convergence():
    loop = square_loop([0.0, 0.0], 0.2, per_side=1)
    ns = [1, 2, 4, 8]
    res = [stokes_residual(PAULI, loop, n, TIGHT) for n in ns]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert loglog_slope(ns, res) <= -1
    assert res[-1] < res[0]


def test_surface_independence_under_refinement():
    loop = square_loop([0.3, 0.5], 0.3, per_side=1)
    gaps = []
    for n in (2, 4, 8):
        a = surface_ordered_holonomy(FOURIER, span_surface(loop, n, "coons"))
        b = surface_ordered_holonomy(FOURIER, span_surface(loop, n, "cone"))
        gaps.append(frobenius_distance(a, b))
    assert gaps[-1] < gaps[0]
    assert gaps[-1] < 1e-3


def test_fourier_stokes_converges():
    loop = square_loop([0.3, 0.5], 0.5, per_side=1)
    res = [stokes_residual(FOURIER, loop, n) for n in (2, 4, 8)]
    assert res[2] < res[1] < res[0]


def test_surface_product_is_unitary():
    mesh = span_surface(circle_loop([0.0, 0.0], 0.3, samples=24), 4)
    assert unitarity_defect(surface_ordered_holonomy(FOURIER, mesh)) <= 1e-10
