"""Matrix-valued connections on the control manifold and their curvature.

Every field evaluates on stacks of points: ``evaluate(points)`` maps an array
of shape ``(..., D)`` to ``(..., D, N, N)`` with Hermitian components
``A_mu``. Fields that know their derivatives return ``d[..., nu, mu]`` =
dA_mu/dlambda_nu from ``derivative``; the others fall back to central
differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyLostError, DimensionError, GaugeAlignmentError, InvalidInputError, SelfCheckError
from .geometry import as_point
from .linalg import as_matrix, dagger, gell_mann, hermitian_part, is_hermitian, nearest_unitary, random_hermitian

CURVATURE_STEP = 1e-5
ADIABATIC_STEP = 1e-4


class ConnectionField:
    """Base class; subclasses implement ``_evaluate`` on an ``(P, D)`` array."""

    control_dim: int
    code_dim: int

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 0 or pts.shape[-1] != self.control_dim:
            raise DimensionError(f"points must have trailing dimension {self.control_dim}, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("control points must be finite")
        flat = pts.reshape(-1, self.control_dim)
        out = self._evaluate(flat)
        return out.reshape(pts.shape[:-1] + out.shape[1:])

    def derivative(self, points) -> np.ndarray | None:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.control_dim:
            raise DimensionError(f"points must have trailing dimension {self.control_dim}")
        flat = pts.reshape(-1, self.control_dim)
        out = self._derivative(flat)
        if out is None:
            return None
        return out.reshape(pts.shape[:-1] + out.shape[1:])

    def _evaluate(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _derivative(self, pts: np.ndarray) -> np.ndarray | None:
        return None

    def __call__(self, point) -> np.ndarray:
        return self.evaluate(as_point(point, self.control_dim))


def eval_connection(field: ConnectionField, point) -> list[np.ndarray]:
    """Components ``[A_1, ..., A_D]`` at a single control point."""
    a = field(point)
    return [a[mu] for mu in range(field.control_dim)]


class ConstantConnection(ConnectionField):
    def __init__(self, matrices):
        m = as_matrix(np.stack([np.asarray(x, dtype=complex) for x in matrices]), "connection")
        if m.ndim != 3:
            raise InvalidInputError("constant connection needs a list of N x N matrices")
        for mu, a in enumerate(m):
            if not is_hermitian(a, atol=1e-12):
                raise InvalidInputError(f"component {mu} is not Hermitian")
        self.matrices = hermitian_part(m)
        self.matrices.flags.writeable = False
        self.control_dim, self.code_dim = m.shape[0], m.shape[1]

    @classmethod
    def zero(cls, control_dim: int, code_dim: int) -> "ConstantConnection":
        return cls(np.zeros((control_dim, code_dim, code_dim), dtype=complex))

    def _evaluate(self, pts):
        return np.broadcast_to(self.matrices, (pts.shape[0],) + self.matrices.shape).copy()

    def _derivative(self, pts):
        d, n = self.control_dim, self.code_dim
        return np.zeros((pts.shape[0], d, d, n, n), dtype=complex)


class LinearConnection(ConnectionField):
    """A_mu(lambda) = offset[mu] + sum_nu lambda_nu * slope[nu, mu]."""

    def __init__(self, offset, slope):
        offset = as_matrix(offset, "offset")
        slope = np.asarray(slope, dtype=complex)
        d, n = offset.shape[0], offset.shape[-1]
        if slope.shape != (d, d, n, n):
            raise DimensionError(f"slope must have shape {(d, d, n, n)}, got {slope.shape}")
        if not (is_hermitian(offset, atol=1e-12) and is_hermitian(slope, atol=1e-12)):
            raise InvalidInputError("linear connection coefficients must be Hermitian")
        self.offset = hermitian_part(offset)
        self.slope = hermitian_part(slope)
        self.control_dim, self.code_dim = d, n

    @classmethod
    def abelian_uniform(cls, strength: float = 1.0) -> "LinearConnection":
        """1x1 field A = strength * (-lambda_2/2, lambda_1/2): uniform curvature ``strength``."""
        slope = np.zeros((2, 2, 1, 1), dtype=complex)
        slope[1, 0, 0, 0] = -strength / 2
        slope[0, 1, 0, 0] = strength / 2
        return cls(np.zeros((2, 1, 1), dtype=complex), slope)

    def _evaluate(self, pts):
        return self.offset + np.einsum("pn,nmab->pmab", pts.astype(complex), self.slope)

    def _derivative(self, pts):
        return np.broadcast_to(self.slope, (pts.shape[0],) + self.slope.shape).copy()


def _wave_vectors(dim: int, cutoff: int, include_zero: bool) -> np.ndarray:
    ks = []
    for k in itertools.product(range(-cutoff, cutoff + 1), repeat=dim):
        nz = [c for c in k if c != 0]
        if not nz:
            if include_zero:
                ks.append(k)
        elif nz[0] > 0:
            ks.append(k)
    return np.array(ks, dtype=float).reshape(-1, dim)


class FourierConnection(ConnectionField):
    """Random smooth periodic field sum_k C_k cos(k.lambda) + S_k sin(k.lambda).

    Coefficients are seeded Hermitian matrices damped by 1/(1 + |k|^2).
    """

    def __init__(self, control_dim: int = 2, code_dim: int = 2, seed: int = 7, cutoff: int = 2, amplitude: float = 1.0):
        if control_dim < 1 or code_dim < 1 or cutoff < 0:
            raise InvalidInputError("invalid Fourier connection dimensions")
        self.control_dim, self.code_dim = control_dim, code_dim
        self.seed, self.cutoff, self.amplitude = seed, cutoff, amplitude
        rng = np.random.default_rng(seed)
        self.k = _wave_vectors(control_dim, cutoff, include_zero=True)
        damp = amplitude / (1.0 + np.sum(self.k**2, axis=1))
        nk = len(self.k)
        self.cos_coef = np.empty((nk, control_dim, code_dim, code_dim), dtype=complex)
        self.sin_coef = np.empty_like(self.cos_coef)
        for i in range(nk):
            for mu in range(control_dim):
                self.cos_coef[i, mu] = damp[i] * random_hermitian(code_dim, rng)
                self.sin_coef[i, mu] = damp[i] * random_hermitian(code_dim, rng)
        zero = np.all(self.k == 0, axis=1)
        self.sin_coef[zero] = 0

    def _phases(self, pts):
        ph = pts @ self.k.T
        return np.cos(ph), np.sin(ph)

    def _evaluate(self, pts):
        c, s = self._phases(pts)
        coef = np.concatenate([self.cos_coef, self.sin_coef]).reshape(2 * len(self.k), -1)
        out = np.concatenate([c, s], axis=1).astype(complex) @ coef
        return out.reshape((pts.shape[0],) + self.cos_coef.shape[1:])

    def _derivative(self, pts):
        c, s = self._phases(pts)
        kc = c[:, :, None] * self.k[None]  # (p, k, nu)
        ks = s[:, :, None] * self.k[None]
        return np.einsum("pkn,kmab->pnmab", kc, self.sin_coef) - np.einsum("pkn,kmab->pnmab", ks, self.cos_coef)


class PureGaugeConnection(ConnectionField):
    """Flat field A_mu = sign * i V^dag dV/dlambda_mu from a single-valued unitary V.

    V(lambda) = prod_j exp(i f_j(lambda) K_j) with seeded Hermitian K_j and
    periodic scalar functions f_j. The sign is chosen at construction by
    transporting around a fixed small loop and keeping the sign whose holonomy
    is the identity.
    """

    def __init__(self, control_dim: int = 2, code_dim: int = 2, seed: int = 11, cutoff: int = 1, factors: int = 3, amplitude: float = 1.0):
        if control_dim < 1 or code_dim < 1 or factors < 1:
            raise InvalidInputError("invalid pure-gauge dimensions")
        self.control_dim, self.code_dim = control_dim, code_dim
        self.seed, self.cutoff, self.factors, self.amplitude = seed, cutoff, factors, amplitude
        rng = np.random.default_rng(seed)
        self.k = _wave_vectors(control_dim, max(cutoff, 1), include_zero=False)
        nk = len(self.k)
        self.gen_vals, self.gen_vecs = [], []
        for _ in range(factors):
            w, q = np.linalg.eigh(random_hermitian(code_dim, rng))
            self.gen_vals.append(w)
            self.gen_vecs.append(q)
        damp = amplitude / (1.0 + np.sum(self.k**2, axis=1))
        self.fc = damp * rng.standard_normal((factors, nk))
        self.fs = damp * rng.standard_normal((factors, nk))
        self._kmats = [(q * w) @ q.conj().T for w, q in zip(self.gen_vals, self.gen_vecs)]
        self.sign = 1.0
        self.sign = self._pin_sign()

    def _scalars(self, pts):
        ph = pts @ self.k.T
        c, s = np.cos(ph), np.sin(ph)
        f = c @ self.fc.T + s @ self.fs.T  # (p, J)
        df = (c[:, None, :] * self.fs - s[:, None, :] * self.fc) @ self.k  # (p, J, D)
        return f, df

    def gauge_unitary(self, pts) -> np.ndarray:
        """V(lambda) = E_0 ... E_{J-1} with E_j = exp(i f_j(lambda) K_j)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        f, _ = self._scalars(pts)
        v = np.broadcast_to(np.eye(self.code_dim, dtype=complex), (pts.shape[0], self.code_dim, self.code_dim))
        for j in range(self.factors):
            q, w = self.gen_vecs[j], self.gen_vals[j]
            v = v @ ((q * np.exp(1j * f[:, j, None] * w[None, :])[:, None, :]) @ q.conj().T)
        return v

    def _evaluate(self, pts):
        # i V^dag dV = -sum_j df_j S_{j+1}^dag K_j S_{j+1}, with S_j = E_j ... E_{J-1};
        # the prefix factors cancel, so V itself is never formed.
        f, df = self._scalars(pts)
        p, n = pts.shape[0], self.code_dim
        terms = []
        tail = np.broadcast_to(np.eye(n, dtype=complex), (p, n, n))
        for j in reversed(range(self.factors)):
            terms.append(dagger(tail) @ self._kmats[j] @ tail)
            q, w = self.gen_vecs[j], self.gen_vals[j]
            tail = ((q * np.exp(1j * f[:, j, None] * w[None, :])[:, None, :]) @ q.conj().T) @ tail
        mids = np.stack(terms[::-1], axis=1).reshape(p, self.factors, n * n)
        a = -(np.swapaxes(df, 1, 2) @ mids).reshape(p, self.control_dim, n, n)
        return self.sign * hermitian_part(a)

    def _pin_sign(self) -> float:
        from .geometry import square_loop
        from .holonomy import IntegratorConfig, holonomy

        anchor = np.full(self.control_dim, 0.1)
        plane = (0, 1) if self.control_dim > 1 else None
        if plane is None:
            return 1.0  # one-dimensional loops retrace; every field is flat
        loop = square_loop(anchor, 0.3, plane, per_side=8)
        cfg = IntegratorConfig(tolerance=1e-11, unitary_projection=False)
        eye = np.eye(self.code_dim)
        for sign in (1.0, -1.0):
            self.sign = sign
            if np.linalg.norm(holonomy(self, loop, cfg) - eye) <= 1e-8:
                return sign
        raise SelfCheckError("pure-gauge self-test failed for both sign conventions")


# --- curvature ---------------------------------------------------------------


def connection_derivative(field: ConnectionField, points, h: float = CURVATURE_STEP) -> np.ndarray:
    """d[..., nu, mu] = dA_mu/dlambda_nu, analytic when available."""
    pts = np.asarray(points, dtype=float)
    d = field.derivative(pts)
    if d is not None:
        return d
    dim = field.control_dim
    shifts = h * np.eye(dim)
    plus = field.evaluate(pts[..., None, :] + shifts)  # (..., nu, mu, N, N)
    minus = field.evaluate(pts[..., None, :] - shifts)
    return (plus - minus) / (2 * h)


def curvature_tensor(field: ConnectionField, points, h: float = CURVATURE_STEP) -> np.ndarray:
    """Full antisymmetric table F[..., i, j] = d_i A_j - d_j A_i - i[A_i, A_j]."""
    pts = np.asarray(points, dtype=float)
    a = field.evaluate(pts)
    da = connection_derivative(field, pts, h)
    ai = a[..., :, None, :, :]
    aj = a[..., None, :, :, :]
    comm = ai @ aj - aj @ ai
    f = (da - np.swapaxes(da, -3, -4)) - 1j * comm
    return hermitian_part(f)


def curvature_error_estimate(field: ConnectionField, points, h: float = CURVATURE_STEP) -> float:
    """Step-halving difference of the finite-difference curvature."""
    return float(np.max(np.abs(curvature_tensor(field, points, h) - curvature_tensor(field, points, h / 2))))


@dataclass(frozen=True)
class CurvatureValue:
    point: np.ndarray
    plane: tuple[int, int]
    value: np.ndarray


def curvature(field: ConnectionField, point, plane, h: float = CURVATURE_STEP) -> CurvatureValue:
    """Curvature on the plane labelled ``(mu, nu)`` (0-based).

    For ``mu > nu`` the label is the plane oriented from axis ``nu`` to axis
    ``mu``; the value is d_nu A_mu - d_mu A_nu - i[A_nu, A_mu]. Swapping the
    label negates the value exactly.
    """
    p = as_point(point, field.control_dim)
    mu, nu = plane
    d = field.control_dim
    if not (0 <= mu < d and 0 <= nu < d) or mu == nu:
        raise DimensionError(f"plane {plane} out of range for control dimension {d}")
    f = curvature_tensor(field, p, h)
    return CurvatureValue(point=p, plane=(mu, nu), value=f[nu, mu])


# --- isospectral Hamiltonian families -----------------------------------------


@dataclass(frozen=True)
class GapReport:
    eigenvalues: np.ndarray
    cluster_width: float
    gap: float
    required_gap: float
    passed: bool


class HamiltonianFamily:
    """H(lambda) = U(lambda) H0 U(lambda)^dag with U = exp(i l_1 G_1) ... exp(i l_D G_D)."""

    def __init__(self, h0, generators, code_dim: int, level: float = 0.0):
        h0 = as_matrix(h0, "H0")
        if not np.allclose(h0, np.diag(np.diag(h0)), atol=0, rtol=0) or np.abs(np.diag(h0).imag).max() > 0:
            raise InvalidInputError("H0 must be real diagonal")
        diag = np.diag(h0).real
        hits = np.flatnonzero(diag == level)
        if hits.size != code_dim:
            raise InvalidInputError(f"H0 must have level {level} with multiplicity {code_dim}, found {hits.size}")
        others = diag[diag != level]
        if others.size == 0:
            raise InvalidInputError("H0 needs at least one level outside the code")
        self.h0 = h0
        self.level = float(level)
        self.code_dim = code_dim
        self.total_dim = h0.shape[0]
        self.gap = float(np.min(np.abs(others - level)))
        self.code_index = hits
        gens = [as_matrix(g, "generator") for g in generators]
        for g in gens:
            if g.shape != h0.shape or not is_hermitian(g, atol=1e-12):
                raise InvalidInputError("generators must be Hermitian and match H0")
        self.generators = gens
        self.control_dim = len(gens)
        self._eig = [np.linalg.eigh(hermitian_part(g)) for g in gens]
        ref = np.zeros((self.total_dim, code_dim), dtype=complex)
        ref[hits, np.arange(code_dim)] = 1.0
        self.reference_frame = ref

    @classmethod
    def su3_example(cls) -> "HamiltonianFamily":
        """H0 = diag(0, 0, 1) rotated by Gell-Mann generators lambda_4 and lambda_6."""
        return cls(np.diag([0.0, 0.0, 1.0]).astype(complex), [gell_mann(4), gell_mann(6)], code_dim=2)

    def unitary(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.control_dim:
            raise DimensionError(f"points must have trailing dimension {self.control_dim}")
        flat = pts.reshape(-1, self.control_dim)
        u = np.broadcast_to(np.eye(self.total_dim, dtype=complex), (flat.shape[0], self.total_dim, self.total_dim))
        for mu, (w, q) in enumerate(self._eig):
            ph = np.exp(1j * flat[:, mu, None] * w[None, :])
            u = u @ np.einsum("ab,pb,cb->pac", q, ph, q.conj())
        return u.reshape(pts.shape[:-1] + u.shape[1:])

    def hamiltonian(self, points) -> np.ndarray:
        u = self.unitary(points)
        return hermitian_part(u @ self.h0 @ dagger(u))

    def _code_spectrum(self, points):
        w, vecs = np.linalg.eigh(self.hamiltonian(points))
        order = np.argsort(np.abs(w - self.level), axis=-1, kind="stable")
        sel = np.sort(order[..., : self.code_dim], axis=-1)
        rest = order[..., self.code_dim :]
        code_w = np.take_along_axis(w, sel, axis=-1)
        other_w = np.take_along_axis(w, rest, axis=-1)
        frame = np.take_along_axis(vecs, sel[..., None, :], axis=-1)
        return w, code_w, other_w, frame

    def degeneracy_check(self, point) -> GapReport:
        p = as_point(point, self.control_dim)
        w, code_w, other_w, _ = self._code_spectrum(p)
        width = float(code_w.max() - code_w.min())
        gap = float(np.min(np.abs(other_w[:, None] - code_w[None, :])))
        passed = width <= 1e-9 and gap >= self.gap / 2
        return GapReport(eigenvalues=w, cluster_width=width, gap=gap, required_gap=self.gap / 2, passed=passed)

    def eigenframe(self, points) -> np.ndarray:
        """Gauge-fixed orthonormal frame of the code space at each point.

        The raw eigensolver frame is rotated within the code space onto the
        nearest frame to the fixed reference (the code basis of H0), which
        removes the solver's arbitrary phases and mixing.
        """
        _, code_w, other_w, frame = self._code_spectrum(points)
        width = code_w.max(axis=-1) - code_w.min(axis=-1)
        gap = np.min(np.abs(other_w[..., :, None] - code_w[..., None, :]), axis=(-1, -2))
        if np.any(width > 1e-9) or np.any(gap < self.gap / 2):
            raise DegeneracyLostError("code level split or gap below half the base gap")
        overlap = dagger(frame) @ self.reference_frame
        smin = np.linalg.svd(overlap, compute_uv=False)[..., -1]
        if np.any(smin < 1e-8):
            raise GaugeAlignmentError("code space is orthogonal to the reference frame")
        return frame @ nearest_unitary(overlap)


def degeneracy_check(family: HamiltonianFamily, point) -> GapReport:
    return family.degeneracy_check(point)


def adiabatic_connection_at(family: HamiltonianFamily, points, h: float = ADIABATIC_STEP) -> np.ndarray:
    """A_mu = -i Psi^dag dPsi/dlambda_mu by central differences of the gauge-fixed frame.

    Works on stacks of points; returns ``(..., D, N, N)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != family.control_dim:
        raise DimensionError(f"points must have trailing dimension {family.control_dim}")
    shifts = h * np.eye(family.control_dim)
    psi0 = family.eigenframe(pts)
    plus = family.eigenframe(pts[..., None, :] + shifts)
    minus = family.eigenframe(pts[..., None, :] - shifts)
    a = -1j * (dagger(psi0)[..., None, :, :] @ (plus - minus)) / (2 * h)
    return hermitian_part(a)


class AdiabaticConnection(ConnectionField):
    def __init__(self, family: HamiltonianFamily, h: float = ADIABATIC_STEP):
        self.family = family
        self.h = h
        self.control_dim = family.control_dim
        self.code_dim = family.code_dim

    def _evaluate(self, pts):
        return adiabatic_connection_at(self.family, pts, self.h)


def conjugated(field: ConnectionField, w) -> ConnectionField:
    """Field with every component replaced by W A W^dag (constant W)."""
    return _Conjugated(field, as_matrix(w, "W"))


class _Conjugated(ConnectionField):
    def __init__(self, inner, w):
        self.inner, self.w = inner, w
        self.control_dim, self.code_dim = inner.control_dim, inner.code_dim

    def _evaluate(self, pts):
        return self.w @ self.inner.evaluate(pts) @ dagger(self.w)

    def _derivative(self, pts):
        d = self.inner.derivative(pts)
        return None if d is None else self.w @ d @ dagger(self.w)


def hermitian_check(field: ConnectionField, points, rtol: float = 1e-12) -> bool:
    a = field.evaluate(points)
    return bool(np.all(np.linalg.norm(a - dagger(a), axis=(-1, -2)) <= rtol * np.linalg.norm(a, axis=(-1, -2)) + 1e-300))


__all__ = [
    "ConnectionField",
    "ConstantConnection",
    "LinearConnection",
    "FourierConnection",
    "PureGaugeConnection",
    "HamiltonianFamily",
    "AdiabaticConnection",
    "CurvatureValue",
    "GapReport",
    "eval_connection",
    "adiabatic_connection_at",
    "curvature",
    "curvature_tensor",
    "curvature_error_estimate",
    "connection_derivative",
    "degeneracy_check",
    "conjugated",
]
