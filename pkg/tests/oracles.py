"""Independent reference implementations used only by tests.

Nothing here may import from the package's numerical paths: the point
is a second route to the same answers. The eigensolver is a cyclic
Jacobi iteration, the variety pipeline is plain loops plus the stdlib
statistics module, and pass@k is exact rational arithmetic.
"""

from __future__ import annotations

import math
import statistics
from fractions import Fraction

import numpy as np


def jacobi_eigh(A: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted descending, with each
    eigenvector's largest-magnitude component made positive (first index
    wins ties) -- the same convention the package uses, so vectors are
    directly comparable.
    """
    A = np.array(A, dtype=np.float64, copy=True)
    d = A.shape[0]
    V = np.eye(d)
    scale = max(1.0, float(np.abs(A).max()))
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[p, q] ** 2 for p in range(d) for q in range(d) if p != q))
        if off <= 1e-15 * scale * d:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(A[p, q]) <= 1e-18 * scale:
                    continue
                # Rotation angle zeroing A[p, q]
                theta = 0.5 * math.atan2(2.0 * A[p, q], A[q, q] - A[p, p])
                c, s = math.cos(theta), math.sin(theta)
                for k in range(d):
                    apk, aqk = A[p, k], A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(d):
                    akp, akq = A[k, p], A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(d):
                    vkp, vkq = V[k, p], V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    V = V[:, order]
    for j in range(d):
        pivot = int(np.argmax(np.abs(V[:, j])))
        if V[pivot, j] < 0:
            V[:, j] = -V[:, j]
    return values, V


def brute_force_variety_ids(
    rows: list[list[float]], ids: list[str], reduced_dim: int, fraction: float
) -> set[str]:
    """Loop-based reimplementation of the full variety selection.

    Covariance through explicit sums, eigensolve through Jacobi, row
    variance through statistics.pvariance, selection through sorted().
    """
    n = len(rows)
    d = len(rows[0])
    k = min(reduced_dim, d)

    means = [sum(row[j] for row in rows) / n for j in range(d)]
    centered = [[row[j] - means[j] for j in range(d)] for row in rows]
    cov = [
        [
            sum(centered[i][a] * centered[i][b] for i in range(n)) / (n - 1)
            for b in range(d)
        ]
        for a in range(d)
    ]

    values, vectors = jacobi_eigh(np.array(cov))
    top = vectors[:, :k]

    projected = [
        [sum(centered[i][a] * top[a, j] for a in range(d)) for j in range(k)]
        for i in range(n)
    ]
    variances = [statistics.pvariance(row) for row in projected]

    m = math.ceil(fraction * n)
    ranked = sorted(range(n), key=lambda i: (-variances[i], ids[i]))
    return {ids[i] for i in ranked[:m]}


def binomial_pass_at_k(n: int, c: int, k: int) -> Fraction:
    """Exact 1 - C(n-c, k) / C(n, k) as a rational number."""
    if k > n - c:
        return Fraction(1)
    return 1 - Fraction(math.comb(n - c, k), math.comb(n, k))
