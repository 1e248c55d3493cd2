"""Ordered-product integrators: transporters, loop holonomies, surface products.

Ordering convention used everywhere: a factor from later along the path
multiplies on the left, so transporting along ``first`` then ``second`` gives
``T(second) @ T(first)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .connection import ConnectionField, curvature_tensor
from .errors import ConvergenceError, DimensionError, InvalidInputError
from .geometry import MIN_SEGMENT, Loop, Path, SurfaceMesh, span_surface
from .linalg import dagger, frobenius_distance, ordered_product, project_unitary, unitary_step

log = logging.getLogger(__name__)

CHUNK = 1 << 15


@dataclass(frozen=True)
class IntegratorConfig:
    steps_per_segment: int = 64
    refinement: int = 12
    tolerance: float = 1e-10
    unitary_projection: bool = True

    def __post_init__(self):
        if self.steps_per_segment < 1:
            raise InvalidInputError("steps_per_segment must be >= 1")
        if self.refinement < 0:
            raise InvalidInputError("refinement must be >= 0")
        if not self.tolerance > 0:
            raise InvalidInputError("tolerance must be > 0")


DEFAULT_CONFIG = IntegratorConfig()


def _vertices(path) -> np.ndarray:
    if isinstance(path, Path):
        return path.vertices
    v = np.asarray(path, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1:
        raise InvalidInputError(f"path vertices must have shape (m, D), got {v.shape}")
    keep = np.ones(len(v), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(v, axis=0), axis=1) > MIN_SEGMENT
    return v[keep]


def midpoint_product(field: ConnectionField, vertices: np.ndarray, steps: int) -> np.ndarray:
    """Ordered product of exp(i A(mid) . dl) over ``steps`` equal subsegments per segment."""
    n = field.code_dim
    seg = np.diff(vertices, axis=0)
    if seg.shape[0] == 0:
        return np.eye(n, dtype=complex)
    delta = seg / steps
    frac = (np.arange(steps) + 0.5) / steps
    total = seg.shape[0] * steps
    # process in chunks of whole segments so memory stays bounded
    per_chunk = max(1, CHUNK // steps)
    partial = []
    for s0 in range(0, seg.shape[0], per_chunk):
        s1 = min(seg.shape[0], s0 + per_chunk)
        mids = vertices[s0:s1, None, :] + frac[None, :, None] * seg[s0:s1, None, :]
        a = field.evaluate(mids.reshape(-1, field.control_dim))  # (p, D, N, N)
        dl = np.repeat(delta[s0:s1], steps, axis=0)
        gen = np.einsum("pmab,pm->pab", a, dl)
        partial.append(ordered_product(unitary_step(gen)))
    del total
    return ordered_product(np.stack(partial))


def transporter(field: ConnectionField, path, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Path-ordered exponential of i A along ``path`` with step-doubling refinement."""
    v = _vertices(path)
    if v.shape[1] != field.control_dim:
        raise DimensionError(f"path dimension {v.shape[1]} does not match connection dimension {field.control_dim}")
    if v.shape[0] < 2:
        return np.eye(field.code_dim, dtype=complex)
    steps = cfg.steps_per_segment
    prev = midpoint_product(field, v, steps)
    dist = np.inf
    for _ in range(cfg.refinement):
        steps *= 2
        cur = midpoint_product(field, v, steps)
        dist = frobenius_distance(cur, prev)
        prev = cur
        if dist <= cfg.tolerance:
            return project_unitary(cur, cfg.unitary_projection)
    if cfg.refinement == 0:
        return project_unitary(prev, cfg.unitary_projection)
    raise ConvergenceError(
        f"transporter did not converge: step-doubling distance {dist:.3e} > {cfg.tolerance:.1e}",
        estimate=prev,
        distance=dist,
    )


def holonomy(field: ConnectionField, loop: Loop, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    if not isinstance(loop, Loop):
        raise InvalidInputError("holonomy needs a closed Loop")
    return transporter(field, loop, cfg)


def convergence_study(field: ConnectionField, path, cfg: IntegratorConfig = DEFAULT_CONFIG, levels: int = 6):
    """Step-doubling distances without early stopping.

    Returns ``(steps, distances)`` where ``distances[r]`` compares the product
    at ``steps[r]`` subsegments per segment with the one at half that count.
    """
    v = _vertices(path)
    steps = cfg.steps_per_segment
    prev = midpoint_product(field, v, steps)
    out_steps, out_dist = [], []
    for _ in range(levels):
        steps *= 2
        cur = midpoint_product(field, v, steps)
        out_steps.append(steps)
        out_dist.append(frobenius_distance(cur, prev))
        prev = cur
    return np.array(out_steps), np.array(out_dist)


def node_transporters(field: ConnectionField, mesh: SurfaceMesh, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Transporters from the base point to every mesh node along the comb.

    The comb climbs the left column of the mesh, then runs along each row.
    """
    n, nc = mesh.n, field.code_dim
    t = np.empty((n + 1, n + 1, nc, nc), dtype=complex)
    t[0, 0] = np.eye(nc)
    for j in range(1, n + 1):
        t[0, j] = transporter(field, mesh.v_edges[0][j - 1], cfg) @ t[0, j - 1]
    for j in range(n + 1):
        for i in range(1, n + 1):
            t[i, j] = transporter(field, mesh.h_edges[i - 1][j], cfg) @ t[i - 1, j]
    return t


def surface_ordered_holonomy(field: ConnectionField, mesh: SurfaceMesh, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Surface-ordered product of curvature fluxes conjugated back to the base point.

    Each plaquette contributes T(z -> x0) exp(i sum_{a<b} F_ab(z) dsigma_ab) T(x0 -> z)
    with z its centroid; plaquettes are multiplied in ``mesh.order`` (first
    entry rightmost).
    """
    if mesh.dim != field.control_dim:
        raise DimensionError("mesh and connection dimensions differ")
    t_nodes = node_transporters(field, mesh, cfg)
    f = curvature_tensor(field, mesh.centers)  # (n, n, D, D, N, N)
    flux = 0.5 * np.einsum("ijabxy,ijab->ijxy", f, mesh.areas)
    kick = unitary_step(flux)
    factors = []
    for i, j in mesh.order:
        c, z = mesh.nodes[i, j], mesh.centers[i, j]
        tz = transporter(field, np.array([c, z]), cfg) @ t_nodes[i, j]
        factors.append(dagger(tz) @ kick[i, j] @ tz)
    return project_unitary(ordered_product(np.stack(factors)), cfg.unitary_projection)


def stokes_residual(field: ConnectionField, loop: Loop, n: int, cfg: IntegratorConfig = DEFAULT_CONFIG, method: str = "coons") -> float:
    """Distance between the loop holonomy and its surface-ordered form on an n x n mesh."""
    line = holonomy(field, loop, cfg)
    surf = surface_ordered_holonomy(field, span_surface(loop, n, method), cfg)
    log.debug("stokes n=%d method=%s", n, method)
    return frobenius_distance(line, surf)
