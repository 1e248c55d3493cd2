"""Paths, loops and surfaces in the control manifold.

Curves are piecewise-linear vertex lists. Analytic curves (circles) are
sampled once at construction; accuracy is controlled by the sampling
density, not by the integrators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CompositionError, DimensionError, InvalidInputError, UnsupportedSurfaceError

MIN_SEGMENT = 1e-14
PLANARITY_TOL = 1e-10
DEFAULT_SAMPLES = 256


def as_point(x, dim: int | None = None) -> np.ndarray:
    p = np.array(x, dtype=float).reshape(-1)
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise InvalidInputError(f"control point must be finite and non-empty, got {x!r}")
    if dim is not None and p.size != dim:
        raise DimensionError(f"control point has dimension {p.size}, expected {dim}")
    return p


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Path:
    """Piecewise-linear curve through ``vertices`` (shape ``(m, D)``, m >= 2)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 1:
            raise InvalidInputError(f"path needs >= 2 vertices of shape (m, D), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("path vertices must be finite")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg <= MIN_SEGMENT):
            k = int(np.argmax(seg <= MIN_SEGMENT))
            raise InvalidInputError(f"consecutive vertices {k} and {k + 1} coincide")
        object.__setattr__(self, "vertices", _frozen(v))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def num_segments(self) -> int:
        return self.vertices.shape[0] - 1

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def arc_params(self) -> np.ndarray:
        """Normalized cumulative arc length at each vertex, from 0 to 1."""
        s = np.concatenate([[0.0], np.cumsum(self.segment_lengths())])
        return s / s[-1]

    def point_at(self, t) -> np.ndarray:
        """Points at normalized arc-length parameters ``t`` (vectorized)."""
        return _interp(self.vertices, self.arc_params(), np.asarray(t, dtype=float))

    def is_closed(self) -> bool:
        return bool(np.array_equal(self.vertices[0], self.vertices[-1]))

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.vertices, other.vertices)

    __hash__ = None


class Loop(Path):
    """Closed path; the first vertex is the base point."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_closed():
            raise InvalidInputError("loop endpoints must coincide exactly")
        if self.vertices.shape[0] < 3:
            raise InvalidInputError("loop needs at least two distinct vertices")

    @property
    def base_point(self) -> np.ndarray:
        return self.vertices[0]

    @classmethod
    def from_vertices(cls, vertices) -> "Loop":
        """Build a loop, appending an exact copy of the first vertex if needed."""
        v = np.array(vertices, dtype=float)
        if v.ndim == 2 and v.shape[0] >= 1 and not np.array_equal(v[0], v[-1]):
            v = np.vstack([v, v[:1]])
        return cls(v)


def _interp(vertices: np.ndarray, params: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    idx = np.searchsorted(params, t, side="right") - 1
    idx = np.clip(idx, 0, len(params) - 2)
    span = params[idx + 1] - params[idx]
    w = np.where(span > 0, (t - params[idx]) / np.where(span > 0, span, 1.0), 0.0)
    out = vertices[idx] + w[..., None] * (vertices[idx + 1] - vertices[idx])
    # exact endpoints
    out = np.where((t == 0.0)[..., None], vertices[0], out)
    out = np.where((t == 1.0)[..., None], vertices[-1], out)
    return out


def _as_path(vertices) -> Path:
    v = np.asarray(vertices, dtype=float)
    if np.array_equal(v[0], v[-1]) and v.shape[0] >= 3:
        return Loop(v)
    return Path(v)


def compose(first: Path, second: Path) -> Path:
    """Traverse ``first`` then ``second``; returns a Loop when the result closes."""
    if first.dim != second.dim:
        raise DimensionError("paths live in different dimensions")
    if not np.array_equal(first.end, second.start):
        raise CompositionError("end of the first path must equal the start of the second exactly")
    return _as_path(np.vstack([first.vertices, second.vertices[1:]]))


def invert(path: Path) -> Path:
    return type(path)(path.vertices[::-1].copy())


def error_loop(loop0: Loop, loop1: Loop) -> Loop:
    """The loop that runs ``loop0`` forward and then ``loop1`` backward."""
    if not (isinstance(loop0, Loop) and isinstance(loop1, Loop)):
        raise CompositionError("error_loop needs two closed loops")
    if loop0.dim != loop1.dim:
        raise DimensionError("loops live in different dimensions")
    if not np.array_equal(loop0.base_point, loop1.base_point):
        raise CompositionError("intended and actual loops must share the base point exactly")
    out = compose(loop0, invert(loop1))
    assert isinstance(out, Loop)
    return out


def signed_areas(vertices) -> np.ndarray:
    """Antisymmetric matrix S[a, b] of projected signed areas of a closed polygon.

    S[a, b] is the shoelace area of the projection onto the (x_a, x_b)
    coordinate plane, positive for counterclockwise traversal.
    """
    v = np.asarray(vertices, dtype=float)
    if not np.array_equal(v[0], v[-1]):
        v = np.vstack([v, v[:1]])
    x, y = v[:-1], v[1:]
    return 0.5 * (np.einsum("ka,kb->ab", x, y) - np.einsum("kb,ka->ab", x, y))


def plane_area(areas: np.ndarray, plane) -> float:
    """Signed area for a plane label ``(mu, nu)`` with mu > nu.

    The label denotes the oriented plane spanned by axis ``nu`` then axis
    ``mu``, so ``a = e_0, b = e_1`` gives +1 for label ``(1, 0)``.
    """
    mu, nu = plane
    return float(areas[nu, mu])


def parallelogram_loop(anchor, a, b) -> Loop:
    """anchor -> anchor+a -> anchor+a+b -> anchor+b -> anchor."""
    p = as_point(anchor)
    a = as_point(a, p.size)
    b = as_point(b, p.size)
    m = np.vstack([a, b])
    if np.linalg.matrix_rank(m, tol=1e-14 * max(1.0, float(np.abs(m).max()))) < 2:
        raise InvalidInputError("parallelogram edge vectors are parallel")
    return Loop(np.vstack([p, p + a, p + a + b, p + b, p]))


def parallelogram_areas(a, b) -> np.ndarray:
    """Signed area components of the parallelogram spanned by a then b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.outer(a, b) - np.outer(b, a)


def parallelogram_pair(anchor, a, b) -> tuple[Loop, Loop]:
    """Intended/actual loop pair whose error loop is the parallelogram (a, b).

    The intended loop goes along ``a`` then ``b`` and returns along the
    diagonal; the actual loop goes along ``b`` then ``a``. Their error loop is
    the parallelogram with the diagonal retraced.
    """
    p = as_point(anchor)
    a = as_point(a, p.size)
    b = as_point(b, p.size)
    parallelogram_loop(p, a, b)  # independence check
    loop0 = Loop(np.vstack([p, p + a, p + a + b, p]))
    loop1 = Loop(np.vstack([p, p + b, p + a + b, p]))
    return loop0, loop1


def centered_parallelogram_pair(center, a, b) -> tuple[Loop, Loop]:
    """Loop pair based at ``center`` whose error loop is a lasso around it.

    The error loop runs from ``center`` to the corner ``center - (a + b)/2``,
    around the parallelogram (a, b) centred on ``center``, and back, so the
    small loop is both positioned and based at ``center``.
    """
    p = as_point(center)
    a = as_point(a, p.size)
    b = as_point(b, p.size)
    parallelogram_loop(p, a, b)
    c = p - 0.5 * (a + b)
    loop0 = Loop(np.vstack([p, c, c + a, c + a + b, p]))
    loop1 = Loop(np.vstack([p, c, c + b, c + a + b, p]))
    return loop0, loop1


def _plane_axes(plane, dim):
    i, j = plane
    if not (0 <= i < dim and 0 <= j < dim) or i == j:
        raise DimensionError(f"plane {plane} invalid for dimension {dim}")
    return i, j


def square_loop(anchor, side: float, plane=(0, 1), per_side: int = 64) -> Loop:
    """Counterclockwise square in ``plane`` with the base point at ``anchor``."""
    p = as_point(anchor)
    i, j = _plane_axes(plane, p.size)
    if per_side < 1 or side == 0:
        raise InvalidInputError("square needs per_side >= 1 and non-zero side")
    ei = np.zeros(p.size)
    ej = np.zeros(p.size)
    ei[i] = side
    ej[j] = side
    corners = [p, p + ei, p + ei + ej, p + ej, p]
    t = np.arange(per_side) / per_side
    pts = [c0 + t[:, None] * (c1 - c0) for c0, c1 in zip(corners[:-1], corners[1:])]
    return Loop(np.vstack(pts + [p[None, :]]))


def circle_loop(center, radius: float, plane=(0, 1), samples: int = DEFAULT_SAMPLES) -> Loop:
    """Counterclockwise circle; base point at center + radius * e_plane[0]."""
    c = as_point(center)
    i, j = _plane_axes(plane, c.size)
    if samples < 3 or radius <= 0:
        raise InvalidInputError("circle needs samples >= 3 and radius > 0")
    theta = 2 * math.pi * np.arange(samples) / samples
    pts = np.tile(c, (samples + 1, 1))
    pts[:-1, i] += radius * np.cos(theta)
    pts[:-1, j] += radius * np.sin(theta)
    pts[-1] = pts[0]
    return Loop(pts)


def sample_loop(curve, samples: int = DEFAULT_SAMPLES) -> Loop:
    """Sample a closed parametric curve ``curve(t)``, t in [0, 1], into a Loop."""
    t = np.arange(samples) / samples
    pts = np.array([as_point(curve(float(s))) for s in t])
    return Loop.from_vertices(pts)


# --- control-error models -------------------------------------------------


@dataclass(frozen=True)
class SmoothErrorModel:
    """Seeded trigonometric displacement field d(t) = amplitude * sum_k c_k sin(pi k t) / k**2."""

    seed: int
    amplitude: float = 1.0
    cutoff: int = 3

    def __post_init__(self):
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise InvalidInputError("error amplitude must be finite and >= 0")
        if self.cutoff < 1:
            raise InvalidInputError("harmonic cutoff must be >= 1")

    def coefficients(self, dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.standard_normal((self.cutoff, dim))

    def displacement(self, t, dim: int) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.cutoff + 1)
        basis = np.sin(np.pi * t[..., None] * k) / k**2
        return self.amplitude * basis @ self.coefficients(dim)


@dataclass(frozen=True)
class ParallelogramErrorModel:
    """Small parallelogram excursion spanned by ``a`` and ``b`` at ``anchor``."""

    anchor: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        p = as_point(self.anchor)
        object.__setattr__(self, "anchor", _frozen(p))
        object.__setattr__(self, "a", _frozen(as_point(self.a, p.size)))
        object.__setattr__(self, "b", _frozen(as_point(self.b, p.size)))
        parallelogram_loop(p, self.a, self.b)

    def areas(self, eps: float = 1.0) -> np.ndarray:
        return parallelogram_areas(eps * self.a, eps * self.b)


ErrorModel = SmoothErrorModel | ParallelogramErrorModel


def displace_loop(loop: Loop, model: SmoothErrorModel, eps: float) -> Loop:
    """Displace interior vertices by eps * d(t); accepts signed eps."""
    if eps == 0:
        return loop
    t = loop.arc_params()
    v = loop.vertices.copy()
    v[1:-1] += eps * model.displacement(t[1:-1], loop.dim)
    return Loop(v)


def perturb_loop(loop: Loop, model: ErrorModel, eps: float) -> Loop:
    """Actual loop for control-error magnitude ``eps`` (same base point).

    Smooth models displace every interior vertex by ``eps * d(t)``. A
    parallelogram model anchored at the base point prepends the reversed
    parallelogram of size ``eps``, so that the error loop reduces to that
    parallelogram.
    """
    if not math.isfinite(eps) or eps < 0:
        raise InvalidInputError("error magnitude must be finite and >= 0")
    if isinstance(model, SmoothErrorModel):
        return displace_loop(loop, model, eps)
    if isinstance(model, ParallelogramErrorModel):
        if eps == 0:
            return loop
        if not np.array_equal(model.anchor, loop.base_point):
            raise CompositionError("parallelogram error model must be anchored at the loop base point")
        excursion = parallelogram_loop(model.anchor, eps * model.a, eps * model.b)
        out = compose(invert(excursion), loop)
        assert isinstance(out, Loop)
        return out
    raise InvalidInputError(f"unknown error model {model!r}")


# --- surfaces ---------------------------------------------------------------


def _polyline_cut(vertices: np.ndarray, params: np.ndarray, s0: float, s1: float) -> np.ndarray:
    """Sub-polyline between arc parameters s0 < s1, keeping interior vertices."""
    ends = _interp(vertices, params, np.array([s0, s1]))
    inner = vertices[(params > s0) & (params < s1)]
    return np.vstack([ends[:1], inner, ends[1:]])


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(points, axis=0), axis=1) > MIN_SEGMENT
    return points[keep]


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """n x n plaquette tiling of a planar surface spanned on a loop.

    Nodes ``nodes[i, j]`` sit at parameters (i/n, j/n) of a map from the unit
    square whose boundary (bottom, right, top reversed, left reversed) is the
    loop. Mesh edges are polylines: edges on the loop follow its vertices
    exactly, interior edges are straight (Coons) or scaled copies of the loop
    (cone). ``order`` lists plaquettes in the comb order used by the surface
    product: rows bottom to top, right to left within a row.
    """

    n: int
    method: str
    base_point: np.ndarray
    nodes: np.ndarray
    h_edges: list = field(repr=False)  # h_edges[i][j]: node(i, j) -> node(i+1, j)
    v_edges: list = field(repr=False)  # v_edges[i][j]: node(i, j) -> node(i, j+1)
    polygons: list = field(repr=False)  # polygons[i][j]: closed boundary of plaquette (i, j)
    areas: np.ndarray = field(repr=False)  # (n, n, D, D) projected signed areas
    centers: np.ndarray = field(repr=False)  # (n, n, D)
    order: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.base_point.size

    def corners(self, i: int, j: int) -> np.ndarray:
        nd = self.nodes
        return np.array([nd[i, j], nd[i + 1, j], nd[i + 1, j + 1], nd[i, j + 1]])

    def total_areas(self) -> np.ndarray:
        return self.areas.sum(axis=(0, 1))

    def boundary_polyline(self) -> np.ndarray:
        """Mesh boundary traversed from the base point, duplicates removed."""
        n = self.n
        parts = [self.h_edges[i][0] for i in range(n)]
        parts += [self.v_edges[n][j] for j in range(n)]
        parts += [self.h_edges[i][n][::-1] for i in reversed(range(n))]
        parts += [self.v_edges[0][j][::-1] for j in reversed(range(n))]
        return _dedupe(np.vstack(parts))


def plane_basis(points: np.ndarray, tol: float = PLANARITY_TOL):
    """Origin and orthonormal 2-frame of the affine plane through ``points``."""
    origin = points[0]
    centered = points - points.mean(axis=0)
    _, s, vh = np.linalg.svd(centered, full_matrices=False)
    scale = max(1.0, float(np.abs(points).max()))
    if s.size > 2 and s[2] > tol * scale * math.sqrt(len(points)):
        raise UnsupportedSurfaceError(f"loop is not planar (third singular value {s[2]:.3e})")
    basis = vh[:2] if vh.shape[0] >= 2 else np.vstack([vh[:1], np.zeros_like(vh[:1])])
    return origin, basis


def _centroid(polygon: np.ndarray, corners: np.ndarray, origin, basis) -> np.ndarray:
    uv = (polygon - origin) @ basis.T
    x, y = uv[:-1, 0], uv[:-1, 1]
    x1, y1 = uv[1:, 0], uv[1:, 1]
    cross = x * y1 - x1 * y
    a = 0.5 * cross.sum()
    scale = max(float(np.ptp(uv, axis=0).max()), 1e-300)
    if abs(a) <= 1e-12 * scale * scale:
        return corners.mean(axis=0)
    cx = ((x + x1) * cross).sum() / (6 * a)
    cy = ((y + y1) * cross).sum() / (6 * a)
    return origin + cx * basis[0] + cy * basis[1]


def _four_corners(loop: Loop) -> Loop:
    v = loop.vertices
    while v.shape[0] - 1 < 4:
        mids = 0.5 * (v[:-1] + v[1:])
        out = np.empty((2 * (v.shape[0] - 1) + 1, v.shape[1]))
        out[0::2] = v
        out[1::2] = mids
        v = out
    return Loop(v)


def _corner_indices(loop: Loop) -> list[int]:
    m = loop.num_segments
    if m == 4:
        return [0, 1, 2, 3, 4]
    s = loop.arc_params()
    idx = [0]
    for q in (1, 2, 3):
        lo = idx[-1] + 1
        hi = m - (3 - q) - 1
        k = lo + int(np.argmin(np.abs(s[lo : hi + 1] - q / 4)))
        idx.append(k)
    idx.append(m)
    return idx


def span_surface(loop: Loop, n: int, method: str = "coons") -> SurfaceMesh:
    """Plaquette mesh of the planar region bounded by ``loop``.

    ``method="coons"`` blends four boundary arcs (split at the loop's corners,
    or near quarter arc length) bilinearly; ``method="cone"`` sweeps straight
    rays from the base point to the loop.
    """
    if n < 1:
        raise InvalidInputError("mesh resolution must be >= 1")
    if method not in ("coons", "cone"):
        raise InvalidInputError(f"unknown mesh method {method!r}")
    origin, basis = plane_basis(loop.vertices)
    dim = loop.dim
    x0 = loop.base_point
    grid = np.arange(n + 1) / n
    nodes = np.empty((n + 1, n + 1, dim))
    h_edges = [[None] * (n + 1) for _ in range(n)]
    v_edges = [[None] * n for _ in range(n + 1)]

    if method == "coons":
        loop4 = _four_corners(loop)
        idx = _corner_indices(loop4)
        arcs = [loop4.vertices[idx[q] : idx[q + 1] + 1] for q in range(4)]
        params = []
        for arc in arcs:
            s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(arc, axis=0), axis=1))])
            params.append(s / s[-1])

        def on_arc(q, t):
            return _interp(arcs[q], params[q], np.asarray(t, dtype=float))

        c0, c1, c2, c3 = (arcs[q][0] for q in range(4))
        bottom, right = on_arc(0, grid), on_arc(1, grid)
        top, left = on_arc(2, 1 - grid), on_arc(3, 1 - grid)
        u = grid[:, None, None]
        w = grid[None, :, None]
        nodes[:] = (
            (1 - w) * bottom[:, None, :]
            + w * top[:, None, :]
            + (1 - u) * left[None, :, :]
            + u * right[None, :, :]
            - ((1 - u) * (1 - w) * c0 + u * (1 - w) * c1 + u * w * c2 + (1 - u) * w * c3)
        )
        nodes[:, 0], nodes[:, n] = bottom, top
        nodes[0, :], nodes[n, :] = left, right
        for i in range(n):
            for j in range(n + 1):
                if j == 0:
                    h_edges[i][j] = _polyline_cut(arcs[0], params[0], grid[i], grid[i + 1])
                elif j == n:
                    h_edges[i][j] = _polyline_cut(arcs[2], params[2], 1 - grid[i + 1], 1 - grid[i])[::-1]
                else:
                    h_edges[i][j] = np.array([nodes[i, j], nodes[i + 1, j]])
        for i in range(n + 1):
            for j in range(n):
                if i == n:
                    v_edges[i][j] = _polyline_cut(arcs[1], params[1], grid[j], grid[j + 1])
                elif i == 0:
                    v_edges[i][j] = _polyline_cut(arcs[3], params[3], 1 - grid[j + 1], 1 - grid[j])[::-1]
                else:
                    v_edges[i][j] = np.array([nodes[i, j], nodes[i, j + 1]])
        # pin shared endpoints bitwise to the node table
        for i in range(n):
            for j in range(n + 1):
                h_edges[i][j][0], h_edges[i][j][-1] = nodes[i, j], nodes[i + 1, j]
        for i in range(n + 1):
            for j in range(n):
                v_edges[i][j][0], v_edges[i][j][-1] = nodes[i, j], nodes[i, j + 1]
    else:
        lv, lp = loop.vertices, loop.arc_params()
        rim = _interp(lv, lp, grid)
        rim[0], rim[-1] = x0, x0
        nodes[:] = x0 + grid[:, None, None] * (rim[None, :, :] - x0)
        nodes[n] = rim
        for i in range(n + 1):
            for j in range(n):
                cut = _polyline_cut(lv, lp, grid[j], grid[j + 1])
                e = cut if i == n else x0 + grid[i] * (cut - x0)
                e[0], e[-1] = nodes[i, j], nodes[i, j + 1]
                v_edges[i][j] = e
        for i in range(n):
            for j in range(n + 1):
                h_edges[i][j] = np.array([nodes[i, j], nodes[i + 1, j]])

    polygons = [[None] * n for _ in range(n)]
    areas = np.empty((n, n, dim, dim))
    centers = np.empty((n, n, dim))
    for i in range(n):
        for j in range(n):
            poly = np.vstack(
                [
                    h_edges[i][j],
                    v_edges[i + 1][j][1:],
                    h_edges[i][j + 1][::-1][1:],
                    v_edges[i][j][::-1][1:],
                ]
            )
            polygons[i][j] = poly
            areas[i, j] = signed_areas(poly)
            corners = np.array([nodes[i, j], nodes[i + 1, j], nodes[i + 1, j + 1], nodes[i, j + 1]])
            centers[i, j] = _centroid(poly, corners, origin, basis)

    order = tuple((i, j) for j in range(n) for i in reversed(range(n)))
    return SurfaceMesh(
        n=n,
        method=method,
        base_point=_frozen(x0),
        nodes=_frozen(nodes),
        h_edges=h_edges,
        v_edges=v_edges,
        polygons=polygons,
        areas=_frozen(areas),
        centers=_frozen(centers),
        order=order,
    )


# --- small-error regime ------------------------------------------------------


@dataclass(frozen=True)
class RegimeReport:
    connection_norms: np.ndarray  # ||A_mu(lambda0)||
    curvature_norms: np.ndarray  # ||F_{mu nu}(lambda0)||, full antisymmetric table
    displacement_ok: np.ndarray  # |dl_mu| < 1/||A_mu||
    displacement_margin: np.ndarray  # 1/||A_mu|| - |dl_mu|
    area_ok: np.ndarray  # |dl_mu dl_nu| < 1/||F_{mu nu}||, mu > nu, lower triangle used
    area_margin: np.ndarray
    passed: bool


def regime_check(displacements, field, anchor) -> RegimeReport:
    """Check the small-error restrictions at ``anchor``.

    Requires |dl_mu| < 1/||A_mu|| for every mu and |dl_mu dl_nu| < 1/||F_{mu nu}||
    for every mu > nu, with operator norms evaluated at the anchor. A zero
    norm imposes no bound.
    """
    from .connection import curvature_tensor
    from .linalg import operator_norm

    anchor = as_point(anchor, field.control_dim)
    dl = as_point(displacements, field.control_dim)
    d = field.control_dim
    a = field.evaluate(anchor)
    f = curvature_tensor(field, anchor)
    a_norm = np.array([operator_norm(a[mu]) for mu in range(d)])
    f_norm = np.zeros((d, d))
    for mu in range(d):
        for nu in range(d):
            if mu != nu:
                f_norm[mu, nu] = operator_norm(f[mu, nu])
    with np.errstate(divide="ignore"):
        a_bound = np.where(a_norm > 0, 1.0 / np.where(a_norm > 0, a_norm, 1.0), np.inf)
        f_bound = np.where(f_norm > 0, 1.0 / np.where(f_norm > 0, f_norm, 1.0), np.inf)
    disp_margin = a_bound - np.abs(dl)
    prod = np.abs(np.outer(dl, dl))
    area_margin = f_bound - prod
    lower = np.tril(np.ones((d, d), dtype=bool), -1)
    area_ok = np.where(lower, area_margin > 0, True)
    disp_ok = disp_margin > 0
    return RegimeReport(
        connection_norms=a_norm,
        curvature_norms=f_norm,
        displacement_ok=disp_ok,
        displacement_margin=disp_margin,
        area_ok=area_ok,
        area_margin=np.where(lower, area_margin, np.inf),
        passed=bool(disp_ok.all() and area_ok.all()),
    )
