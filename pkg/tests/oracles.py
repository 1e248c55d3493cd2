"""Independent reference computations used as test oracles.

These deliberately avoid the library's own kernels: exponentials come from
power series or eigendecompositions, products are accumulated directly, and
areas are summed edge by edge.
"""

from __future__ import annotations

import math

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def expm_series(h, s=1.0, terms=200):
    """exp(s h) by summing the power series term by term."""
    x = s * np.asarray(h, dtype=complex)
    out = np.eye(x.shape[0], dtype=complex)
    term = np.eye(x.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ x / k
        out = out + term
    return out


def expm_hermitian(h, t=1.0):
    """exp(i t h) for Hermitian h (or a stack) via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * t * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def su2_exp(u, v):
    """Closed form of exp(i (u sx + v sy))."""
    r = math.hypot(u, v)
    if r == 0:
        return np.eye(2, dtype=complex)
    return math.cos(r) * np.eye(2) + 1j * math.sin(r) * (u * SX + v * SY) / r


def power_iteration_norm(b, iters=5000, seed=0):
    """Largest singular value from power iteration on B^dag B."""
    b = np.asarray(b, dtype=complex)
    m = b.conj().T @ b
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(b.shape[1]) + 1j * rng.standard_normal(b.shape[1])
    lam = 0.0
    for _ in range(iters):
        y = m @ x
        lam = np.linalg.norm(y)
        x = y / lam
    return math.sqrt(float(np.real(x.conj() @ m @ x) / np.real(x.conj() @ x)))


def frobenius_sum(x, y):
    total = 0.0
    for a, b in zip(np.ravel(x), np.ravel(y)):
        total += abs(a - b) ** 2
    return math.sqrt(total)


def shoelace(points, ax, bx):
    """Signed area of the closed polygon projected onto axes (ax, bx)."""
    p = np.asarray(points, dtype=float)
    total = 0.0
    for k in range(len(p) - 1):
        total += p[k, ax] * p[k + 1, bx] - p[k + 1, ax] * p[k, bx]
    if not np.array_equal(p[0], p[-1]):
        total += p[-1, ax] * p[0, bx] - p[0, ax] * p[-1, bx]
    return 0.5 * total


def left_product(factors):
    """F[m-1] ... F[1] F[0], accumulated in fixed-size blocks."""
    f = np.asarray(factors, dtype=complex)
    acc = np.eye(f.shape[-1], dtype=complex)
    block = 4096
    for s in range(0, len(f), block):
        chunk = f[s : s + block]
        while len(chunk) > 1:
            if len(chunk) % 2:
                chunk = np.concatenate([chunk, np.eye(f.shape[-1], dtype=complex)[None]])
            chunk = chunk[1::2] @ chunk[0::2]
        acc = chunk[0] @ acc
    return acc


def brute_force_transport(evaluate, vertices, total_steps):
    """Midpoint product with ``total_steps`` subsegments spread by length.

    ``evaluate`` maps points (p, D) to connection components (p, D, N, N).
    """
    v = np.asarray(vertices, dtype=float)
    seg = np.diff(v, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    counts = np.maximum(1, np.round(total_steps * lengths / lengths.sum()).astype(int))
    mats = []
    for start, d, c in zip(v[:-1], seg, counts):
        t = (np.arange(c) + 0.5) / c
        pts = start + t[:, None] * d
        a = evaluate(pts)
        gen = np.einsum("pmab,m->pab", a, d / c)
        mats.append(expm_hermitian(0.5 * (gen + np.conj(np.swapaxes(gen, -1, -2)))))
    return left_product(np.concatenate(mats))


def su3_frame(lam):
    """Code-space frame U(lambda) E of the SU(3) example, aligned to E."""
    l4 = np.zeros((3, 3), dtype=complex)
    l4[0, 2] = l4[2, 0] = 1
    l6 = np.zeros((3, 3), dtype=complex)
    l6[1, 2] = l6[2, 1] = 1
    u = expm_series(l4, 1j * lam[0], 60) @ expm_series(l6, 1j * lam[1], 60)
    e = np.zeros((3, 2), dtype=complex)
    e[0, 0] = e[1, 1] = 1
    psi = u @ e
    w, _, vh = np.linalg.svd(psi.conj().T @ e)
    return psi @ (w @ vh)


def su3_connection(lam, h):
    """Central-difference connection of the aligned SU(3) frame at step h."""
    lam = np.asarray(lam, dtype=float)
    psi0 = su3_frame(lam)
    out = []
    for mu in range(2):
        e = np.zeros(2)
        e[mu] = h
        d = (su3_frame(lam + e) - su3_frame(lam - e)) / (2 * h)
        a = -1j * psi0.conj().T @ d
        out.append(0.5 * (a + a.conj().T))
    return np.array(out)


def su3_connection_richardson(lam, h):
    """Richardson combination of step h and h/2 (removes the h**2 term)."""
    return (4 * su3_connection(lam, h / 2) - su3_connection(lam, h)) / 3
