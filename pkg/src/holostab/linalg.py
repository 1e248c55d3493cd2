"""Dense complex matrix kernels.

All routines accept stacks of matrices with shape ``(..., N, N)`` where that
makes sense, so that the integrators can push whole batches of subsegment
factors through numpy at once.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .errors import DimensionError, InvalidInputError

log = logging.getLogger(__name__)

UNITARITY_TOL = 1e-10
HERMITICITY_RTOL = 1e-12
DENSITY_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def gell_mann(k: int) -> np.ndarray:
    """Gell-Mann matrix lambda_k for k = 1..8."""
    m = np.zeros((3, 3), dtype=complex)
    if k == 1:
        m[0, 1] = m[1, 0] = 1
    elif k == 2:
        m[0, 1], m[1, 0] = -1j, 1j
    elif k == 3:
        m[0, 0], m[1, 1] = 1, -1
    elif k == 4:
        m[0, 2] = m[2, 0] = 1
    elif k == 5:
        m[0, 2], m[2, 0] = -1j, 1j
    elif k == 6:
        m[1, 2] = m[2, 1] = 1
    elif k == 7:
        m[1, 2], m[2, 1] = -1j, 1j
    elif k == 8:
        m[0, 0] = m[1, 1] = 1 / math.sqrt(3)
        m[2, 2] = -2 / math.sqrt(3)
    else:
        raise InvalidInputError(f"Gell-Mann index must be in 1..8, got {k}")
    return m


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite complex square matrix (or stack of them)."""
    a = np.asarray(x, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise InvalidInputError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def _same_shape(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[-2:] != y.shape[-2:]:
        raise DimensionError(f"dimension mismatch: {x.shape[-2:]} vs {y.shape[-2:]}")


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def identity_like(x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(x.shape[-1], dtype=complex), x.shape).copy()


def matrix_exponential(h, s: complex = 1.0) -> np.ndarray:
    """Return exp(s*h) by scaling and squaring around a truncated Taylor series.

    The Taylor degree is chosen from the largest 1-norm in the batch so the
    truncation term stays below double-precision roundoff; the scaling
    exponent keeps that norm at or below 1 before squaring back up.
    """
    h = as_matrix(h, "H")
    s = complex(s)
    if not math.isfinite(s.real) or not math.isfinite(s.imag):
        raise InvalidInputError("scale factor must be finite")
    x = s * h
    if x.size == 0:
        return x
    norm = float(np.max(np.sum(np.abs(x), axis=-2)))
    squarings = 0
    if norm > 1.0:
        squarings = int(math.ceil(math.log2(norm)))
        x = x / 2.0**squarings
        norm /= 2.0**squarings
    # smallest degree m with norm**(m+1)/(m+1)! below 2**-56
    degree, term = 1, norm
    while degree < 30:
        term *= norm / (degree + 1)
        if term <= 2.0**-56:
            break
        degree += 1
    eye = identity_like(x)
    out = eye.copy()
    for k in range(degree, 0, -1):
        out = eye + (x @ out) / k
    for _ in range(squarings):
        out = out @ out
    return out


def unitary_step(h: np.ndarray) -> np.ndarray:
    """exp(i*h) for a stack of Hermitian generators."""
    return matrix_exponential(h, 1j)


def operator_norm(b) -> float:
    """Largest singular value, sup over unit psi of sqrt(<psi|B^dag B|psi>)."""
    b = as_matrix(b, "B")
    return float(np.linalg.norm(b, 2))


def commutator(x, y) -> np.ndarray:
    x, y = as_matrix(x, "X"), as_matrix(y, "Y")
    _same_shape(x, y)
    return x @ y - y @ x


def anticommutator(x, y) -> np.ndarray:
    x, y = as_matrix(x, "X"), as_matrix(y, "Y")
    _same_shape(x, y)
    return x @ y + y @ x


def frobenius_distance(x, y) -> float:
    x, y = as_matrix(x, "X"), as_matrix(y, "Y")
    _same_shape(x, y)
    return float(np.linalg.norm(x - y))


def hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def unitarity_defect(u) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[-1])))


def is_unitary(u, tol: float = UNITARITY_TOL) -> bool:
    return unitarity_defect(u) <= tol


def is_hermitian(h, rtol: float = HERMITICITY_RTOL, atol: float = 0.0) -> bool:
    h = np.asarray(h, dtype=complex)
    return float(np.linalg.norm(h - dagger(h))) <= rtol * float(np.linalg.norm(h)) + atol


def nearest_unitary(x: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition (works on stacks)."""
    w, _, vh = np.linalg.svd(x)
    return w @ vh


def project_unitary(u: np.ndarray, enabled: bool = True) -> np.ndarray:
    if not enabled:
        return u
    defect = unitarity_defect(u)
    if defect > 1e-14:
        log.debug("polar projection: unitarity defect %.3e", defect)
    return nearest_unitary(u)


def ordered_product(factors: np.ndarray) -> np.ndarray:
    """Product F[m-1] @ ... @ F[1] @ F[0] of a stack of factors.

    Later factors multiply on the left. The reduction is a balanced pairwise
    tree, which is associative-exact and bit-deterministic for a given stack.
    """
    f = np.asarray(factors, dtype=complex)
    if f.shape[0] == 0:
        raise InvalidInputError("empty product")
    while f.shape[0] > 1:
        if f.shape[0] % 2:
            tail = f[-1:]
            f = f[:-1]
        else:
            tail = None
        f = f[1::2] @ f[0::2]
        if tail is not None:
            f = np.concatenate([f, tail])
    return f[0]


def density_matrix(rho, tol: float = DENSITY_TOL) -> np.ndarray:
    """Validate and return a read-only density matrix."""
    rho = as_matrix(rho, "rho")
    if rho.ndim != 2:
        raise InvalidInputError("rho must be a single matrix")
    if not is_hermitian(rho, rtol=tol, atol=tol):
        raise InvalidInputError("rho is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise InvalidInputError(f"rho must have unit trace, got {tr.real:.12g}")
    if np.min(np.linalg.eigvalsh(hermitian_part(rho))) < -tol:
        raise InvalidInputError("rho has negative eigenvalues")
    rho = rho.copy()
    rho.flags.writeable = False
    return rho


def pure_state(index: int, dim: int) -> np.ndarray:
    """|k><k| in a dim-dimensional code."""
    if not 0 <= index < dim:
        raise InvalidInputError(f"basis index {index} out of range for dim {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[index, index] = 1.0
    return density_matrix(rho)


def maximally_mixed(dim: int) -> np.ndarray:
    return density_matrix(np.eye(dim, dtype=complex) / dim)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * hermitian_part(z) / math.sqrt(dim)
