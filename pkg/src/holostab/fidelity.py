"""Stability of holonomic gates under control-parameter errors.

Fidelity here is the complex number f = tr(rho G1^-1 G0) comparing the
intended loop's holonomy G0 with the actual loop's G1. It is reported in
full; the modulus is only one view of it.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .connection import ConnectionField, curvature_tensor
from .errors import DimensionError, InvalidInputError, SelfCheckError
from .geometry import (
    Loop,
    ParallelogramErrorModel,
    SmoothErrorModel,
    as_point,
    centered_parallelogram_pair,
    displace_loop,
    error_loop,
    parallelogram_areas,
    parallelogram_pair,
    perturb_loop,
    regime_check,
)
from .holonomy import DEFAULT_CONFIG, IntegratorConfig, holonomy
from .linalg import anticommutator, commutator, density_matrix

log = logging.getLogger(__name__)

ROBUST_THRESHOLD = 1e-8


@dataclass(frozen=True)
class FidelityValue:
    f: complex
    self_check: float = 0.0  # |tr(rho G1^-1 G0) - tr(rho G_error_loop)|

    def __post_init__(self):
        if abs(self.f) > 1 + 1e-9:
            raise SelfCheckError(f"|f| = {abs(self.f):.15g} exceeds 1")

    @property
    def magnitude(self) -> float:
        return abs(self.f)

    @property
    def deviation(self) -> complex:
        return self.f - 1


def _check_rho(rho, field: ConnectionField) -> np.ndarray:
    rho = density_matrix(rho)
    if rho.shape[0] != field.code_dim:
        raise DimensionError(f"rho has dimension {rho.shape[0]}, connection acts on {field.code_dim}")
    return rho


def fidelity_exact(rho, field: ConnectionField, loop0: Loop, loop1: Loop, cfg: IntegratorConfig = DEFAULT_CONFIG) -> FidelityValue:
    """f = tr(rho G(loop1)^-1 G(loop0)), cross-checked against tr(rho G(error loop))."""
    rho = _check_rho(rho, field)
    dloop = error_loop(loop0, loop1)
    g0 = holonomy(field, loop0, cfg)
    g1 = holonomy(field, loop1, cfg)
    f = complex(np.trace(rho @ np.linalg.inv(g1) @ g0))
    f_loop = complex(np.trace(rho @ holonomy(field, dloop, cfg)))
    delta = abs(f - f_loop)
    if delta > 10 * cfg.tolerance:
        raise SelfCheckError(f"two-holonomy and error-loop fidelities differ by {delta:.3e} (> 10 x tolerance)")
    return FidelityValue(f=f, self_check=delta)


def fidelity_of_error_loop(rho, field: ConnectionField, loop: Loop, cfg: IntegratorConfig = DEFAULT_CONFIG) -> complex:
    rho = _check_rho(rho, field)
    return complex(np.trace(rho @ holonomy(field, loop, cfg)))


# --- small-error expansion ---------------------------------------------------


@dataclass(frozen=True)
class TaylorTerms:
    order0: complex
    order2: complex
    order3: complex
    order4: complex
    displacement: np.ndarray  # delta-lambda used in the cubic and quartic monomials
    areas: np.ndarray  # signed area table of the parallelogram
    regime_ok: bool

    @property
    def partial_sums(self) -> list[complex]:
        s0 = self.order0
        s2 = s0 + self.order2
        s3 = s2 + self.order3
        return [s0, s2, s3, s3 + self.order4]

    @property
    def value(self) -> complex:
        return self.partial_sums[-1]


def fidelity_taylor(rho, field: ConnectionField, anchor, a, b, eps: float) -> TaylorTerms:
    """Small-loop expansion of f for the parallelogram (eps*a, eps*b) at ``anchor``.

    The quadratic term is contracted with the parallelogram's signed areas.
    The cubic and quartic monomials use delta-lambda = eps * (a + b) with plane
    sums restricted to mu > nu. A and F are evaluated once at the anchor.
    """
    rho = _check_rho(rho, field)
    d = field.control_dim
    p = as_point(anchor, d)
    a = as_point(a, d)
    b = as_point(b, d)
    dl = eps * (a + b)
    areas = parallelogram_areas(eps * a, eps * b)
    regime_ok = True
    if eps != 0:
        report = regime_check(eps * np.maximum(np.abs(a), np.abs(b)), field, p)
        regime_ok = report.passed
        if not regime_ok:
            warnings.warn("control errors outside the small-error regime; expansion may not converge", stacklevel=2)
    conn = field.evaluate(p)
    f_std = curvature_tensor(field, p)

    def flabel(mu, nu):
        return f_std[nu, mu]

    def tr(x):
        return complex(np.trace(rho @ x))

    planes = [(mu, nu) for mu in range(d) for nu in range(mu)]
    order2 = 1j * sum(tr(flabel(mu, nu)) * areas[nu, mu] for mu, nu in planes)
    order3 = 0j
    for m in range(d):
        for chi, rho_ in planes:
            order3 -= tr(commutator(conn[m], flabel(chi, rho_))) * dl[m] * dl[chi] * dl[rho_]
    order4 = 0j
    for chi, rho_ in planes:
        fcr = flabel(chi, rho_)
        for mu, nu in planes:
            coef = (
                1j * tr(conn[mu] @ fcr @ conn[nu])
                - 0.5j * tr(anticommutator(fcr, conn[mu] @ conn[nu]))
                - 0.5 * tr(fcr @ flabel(mu, nu))
            )
            order4 += coef * dl[chi] * dl[rho_] * dl[mu] * dl[nu]
    return TaylorTerms(
        order0=1.0 + 0j,
        order2=complex(order2),
        order3=complex(order3),
        order4=complex(order4),
        displacement=dl,
        areas=areas,
        regime_ok=regime_ok,
    )


def parallelogram_fidelity(rho, field: ConnectionField, anchor, a, b, cfg: IntegratorConfig = DEFAULT_CONFIG) -> FidelityValue:
    """Exact fidelity for the loop pair whose error loop is the parallelogram (a, b)."""
    loop0, loop1 = parallelogram_pair(anchor, a, b)
    return fidelity_exact(rho, field, loop0, loop1, cfg)


# --- curvature rate -----------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    plane: tuple[int, int]
    rate: float
    error_area: float = math.nan
    fd_estimate: float = math.nan


def fidelity_rate(rho, field: ConnectionField, anchor, plane, area: float | None = None, cfg: IntegratorConfig = DEFAULT_CONFIG) -> RateReport:
    """|tr rho F| on the plane ``(mu, nu)``, mu > nu.

    With ``area`` given, also returns the finite-difference estimate
    |f - 1| / area from a square of that area oriented from axis nu to axis
    mu, centred on and based at the anchor (see centered_parallelogram_pair),
    which keeps the estimate's relative error at O(area).
    """
    rho = _check_rho(rho, field)
    d = field.control_dim
    mu, nu = plane
    if not (0 <= nu < mu < d):
        raise DimensionError(f"plane {plane} must satisfy 0 <= nu < mu < {d}")
    p = as_point(anchor, d)
    f = curvature_tensor(field, p)[nu, mu]
    rate = abs(complex(np.trace(rho @ f)))
    if area is None:
        return RateReport(plane=(mu, nu), rate=rate)
    if not area > 0:
        raise InvalidInputError("error area must be positive")
    side = math.sqrt(area)
    ea, eb = np.zeros(d), np.zeros(d)
    ea[nu], eb[mu] = side, side
    fv = fidelity_exact(rho, field, *centered_parallelogram_pair(p, ea, eb), cfg=cfg)
    return RateReport(plane=(mu, nu), rate=rate, error_area=area, fd_estimate=abs(fv.deviation) / area)


# --- robustness ---------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessReport:
    max_curvature_norm: float
    max_trace: float
    worst_point: np.ndarray
    worst_plane: tuple[int, int]
    samples: int
    robust: bool


def robustness_scan(rho, field: ConnectionField, loop: Loop, samples: int = 64) -> RobustnessReport:
    """Largest curvature (operator norm) and |tr rho F| at points sampled along the loop."""
    if samples < 2:
        raise InvalidInputError("robustness scan needs at least 2 samples")
    rho = _check_rho(rho, field)
    pts = loop.point_at(np.arange(samples) / samples)
    f = curvature_tensor(field, pts)  # (s, D, D, N, N)
    d = field.control_dim
    best_norm, best_tr, where, plane = 0.0, 0.0, pts[0], (1, 0) if d > 1 else (0, 0)
    for mu in range(d):
        for nu in range(mu):
            block = f[:, nu, mu]
            norms = np.linalg.norm(block, ord=2, axis=(-2, -1))
            traces = np.abs(np.einsum("ab,sba->s", rho, block))
            k = int(np.argmax(norms))
            if norms[k] > best_norm:
                best_norm, where, plane = float(norms[k]), pts[k], (mu, nu)
            best_tr = max(best_tr, float(traces.max()))
    robust = best_norm <= ROBUST_THRESHOLD and best_tr <= ROBUST_THRESHOLD
    return RobustnessReport(best_norm, best_tr, where, plane, samples, robust)


# --- scaling experiments -----------------------------------------------------


def actual_loop(loop0: Loop, model, eps: float) -> Loop:
    """Actual loop for a signed error magnitude ``eps``."""
    if eps >= 0:
        return perturb_loop(loop0, model, eps)
    if isinstance(model, SmoothErrorModel):
        return displace_loop(loop0, model, eps)
    if isinstance(model, ParallelogramErrorModel):
        mirrored = ParallelogramErrorModel(model.anchor, -model.a, -model.b)
        return perturb_loop(loop0, mirrored, -eps)
    raise InvalidInputError(f"unknown error model {model!r}")


def _fidelity_at(rho, field, loop0, model, eps, cfg) -> complex:
    return fidelity_exact(rho, field, loop0, actual_loop(loop0, model, eps), cfg).f


def _map(fn, items, threads: int | None):
    items = list(items)
    if threads is not None and threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass(frozen=True)
class ScalingReport:
    epsilons: np.ndarray
    f: np.ndarray
    abs_dev: np.ndarray = field(init=False)
    magnitude_loss: np.ndarray = field(init=False)
    slope_dev: float = field(init=False)
    slope_magnitude: float = field(init=False)
    degenerate_dev: bool = field(init=False)
    degenerate_magnitude: bool = field(init=False)
    floor: float = 0.0

    def __post_init__(self):
        dev = np.abs(self.f - 1)
        loss = 1 - np.abs(self.f)
        object.__setattr__(self, "abs_dev", dev)
        object.__setattr__(self, "magnitude_loss", loss)
        bad_dev = bool(np.any(dev <= self.floor))
        bad_mag = bool(np.any(loss <= self.floor))
        object.__setattr__(self, "degenerate_dev", bad_dev)
        object.__setattr__(self, "degenerate_magnitude", bad_mag)
        object.__setattr__(self, "slope_dev", math.nan if bad_dev else loglog_slope(self.epsilons, dev))
        object.__setattr__(self, "slope_magnitude", math.nan if bad_mag else loglog_slope(self.epsilons, loss))


def scaling_experiment(rho, field: ConnectionField, loop0: Loop, model, epsilons, cfg: IntegratorConfig = DEFAULT_CONFIG, threads: int | None = None) -> ScalingReport:
    """Fidelity against error magnitude, with log-log fits of |f - 1| and 1 - |f|.

    Fits whose data fall to the integrator noise floor (10 x tolerance) are
    flagged degenerate and report a NaN slope.
    """
    eps = np.asarray(epsilons, dtype=float)
    if eps.ndim != 1 or eps.size < 4 or np.any(eps <= 0):
        raise InvalidInputError("epsilon grid needs at least 4 positive values")
    if eps.max() / eps.min() < 10 * (1 - 1e-12):
        raise InvalidInputError("epsilon grid must span at least one decade")
    _check_rho(rho, field)
    vals = _map(lambda e: _fidelity_at(rho, field, loop0, model, float(e), cfg), eps, threads)
    return ScalingReport(epsilons=eps, f=np.array(vals, dtype=complex), floor=10 * cfg.tolerance)


@dataclass(frozen=True)
class LinearTermReport:
    eps: float
    derivative: complex  # Richardson-extrapolated df/deps at 0
    quadratic: complex  # estimated coefficient of eps**2
    ratio: float  # |derivative| / |quadratic|


def linear_term(rho, field: ConnectionField, loop0: Loop, model, eps: float, cfg: IntegratorConfig = DEFAULT_CONFIG, threads: int | None = None) -> LinearTermReport:
    """Estimate df/deps at eps = 0 from central differences at eps and eps/2.

    Central differences cancel even orders; Richardson (4 D(h/2) - D(h)) / 3
    removes the eps**2 error, leaving O(eps**4). The eps**2 coefficient comes
    from the second central difference, extrapolated the same way.
    """
    grid = [eps, -eps, eps / 2, -eps / 2]
    fp, fm, hp, hm = _map(lambda e: _fidelity_at(rho, field, loop0, model, e, cfg), grid, threads)
    d1 = (fp - fm) / (2 * eps)
    d2 = (hp - hm) / eps
    deriv = (4 * d2 - d1) / 3
    c1 = (fp + fm - 2) / (2 * eps**2)
    c2 = (hp + hm - 2) / (2 * (eps / 2) ** 2)
    quad = (4 * c2 - c1) / 3
    ratio = abs(deriv) / abs(quad) if quad != 0 else (0.0 if deriv == 0 else math.inf)
    return LinearTermReport(eps=eps, derivative=complex(deriv), quadratic=complex(quad), ratio=ratio)


__all__ = [
    "FidelityValue",
    "TaylorTerms",
    "RateReport",
    "RobustnessReport",
    "ScalingReport",
    "LinearTermReport",
    "fidelity_exact",
    "fidelity_of_error_loop",
    "fidelity_taylor",
    "parallelogram_fidelity",
    "fidelity_rate",
    "robustness_scan",
    "scaling_experiment",
    "linear_term",
    "actual_loop",
    "loglog_slope",
]
