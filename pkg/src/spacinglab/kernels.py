"""Limiting bulk kernels and correlation functions.

The scalar sine kernel sin(pi(x-y))/(pi(x-y)) governs the unitary (beta=2)
bulk; the orthogonal (beta=1) and symplectic (beta=4) bulks are governed by a
2x2 matrix kernel whose entries are the sine kernel, its derivative, and its
antiderivative (with a sign correction for beta=1).  The k-point correlation
functions are determinants (beta=2) or Pfaffians (beta=1,4) built from these
entries; a brute-force cyclic-product expansion of the Pfaffian form is kept
as an independent oracle.

All functions here are pure; there is no shared mutable state.
"""

from __future__ import annotations

import itertools
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.special import sici

__all__ = [
    "CORR_ORDER_MAX",
    "EXPANSION_ORDER_MAX",
    "MatrixKernelValue",
    "corr_fn",
    "corr_fn_expansion",
    "matrix_kernel",
    "matrix_kernel_block",
    "pfaffian",
    "regularized_antideriv4",
    "sinc_antideriv",
    "sinc_deriv",
    "sine_kernel",
]

# Practical caps: the Pfaffian route costs O((2k)^3) per point but needs one
# antiderivative per entry; the expansion sums over set partitions, block
# bijections and 2^k index words and is only meant to cross-check small k.
CORR_ORDER_MAX = 8
EXPANSION_ORDER_MAX = 4


def sine_kernel(x, y):
    """Evaluate sin(pi(x-y))/(pi(x-y)) with the value 1 at coincidence."""
    return np.sinc(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))


def sinc_deriv(z):
    """Derivative of sin(pi z)/(pi z) in z, stable across z = 0.

    Near the origin the closed form suffers 0/0 cancellation, so a Taylor
    series (error below 1e-16 for |z| < 1e-2) takes over there.
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    q = (np.pi * zs) ** 2
    out[small] = -(np.pi**2) * zs / 3.0 * (1.0 - q / 10.0 + q * q / 280.0)
    zl = z[~small]
    out[~small] = (np.pi * zl * np.cos(np.pi * zl) - np.sin(np.pi * zl)) / (
        np.pi * zl * zl
    )
    return float(out[0]) if scalar else out


def sinc_antideriv(z):
    """Antiderivative of the sine kernel: integral of sinc over [0, z].

    Equals Si(pi z)/pi, which is the closed form of the oscillatory
    integral; scipy's sine integral is exact to machine precision, so no
    quadrature is needed on the hot path.
    """
    si, _ = sici(np.pi * np.asarray(z, dtype=float))
    return si / np.pi


class MatrixKernelValue(NamedTuple):
    """One 2x2 matrix-kernel evaluation: kernel value, derivative entry and
    antiderivative entry."""

    value: float
    deriv: float
    antideriv: float


def matrix_kernel(beta: int, x, y):
    """Entries of the 2x2 bulk matrix kernel at (x, y) for beta in {1, 4}.

    beta=1: (sinc(r), sinc'(r), Int_0^r sinc - sgn(r)/2) with r = x - y.
    beta=4: arguments doubled inside the sine kernel and no sign correction,
    i.e. (sinc(2r), 2 sinc'(2r), Int_0^r sinc(2t) dt).

    Returns a MatrixKernelValue of floats for scalar input, of arrays
    otherwise.  The value entry is symmetric in (x, y); the derivative and
    antiderivative entries are antisymmetric.  sgn(0) is taken as 0, making
    the beta=1 antiderivative vanish at coincidence.
    """
    if beta not in (1, 4):
        raise ValueError(f"matrix kernel is defined for beta in {{1, 4}}, got {beta}")
    r = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if beta == 1:
        s = np.sinc(r)
        d = sinc_deriv(r)
        i = sinc_antideriv(r) - 0.5 * np.sign(r)
    else:
        s = np.sinc(2.0 * r)
        d = 2.0 * np.asarray(sinc_deriv(2.0 * r))
        i = 0.5 * sinc_antideriv(2.0 * r)
    if np.ndim(r) == 0:
        return MatrixKernelValue(float(s), float(d), float(i))
    return MatrixKernelValue(s, d, i)


def regularized_antideriv4(u: float, v: float, x, y):
    """beta=4 antiderivative entry at shifted arguments, recentred to decay.

    Returns I4(x+u, y+v) - 1/4 for y < x and I4(x+u, y+v) + 1/4 for y >= x.
    The shift by -sgn(x-y)/4 removes the limits +-1/4 at x-y -> +-infinity,
    leaving an O(1/|x-y|) tail that is square integrable in x uniformly in y.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    base = matrix_kernel(4, x + u, y + v).antideriv
    out = np.where(y < x, base - 0.25, base + 0.25)
    return float(out) if np.ndim(out) == 0 else out


def pfaffian(a: np.ndarray) -> float:
    """Pfaffian of a real skew-symmetric matrix of even dimension.

    Skew-symmetric tridiagonalization by congruence (Parlett-Reid) with
    partial pivoting: O(n^3) work, the sign tracked exactly through the
    pivot swaps.  Satisfies pfaffian(a)**2 == det(a).
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("pfaffian requires a square matrix")
    n = a.shape[0]
    if n % 2:
        raise ValueError("odd-dimensional skew matrix")
    if n == 0:
        return 1.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        pivot = k + 1 + int(np.argmax(np.abs(a[k + 1 :, k])))
        if pivot != k + 1:
            a[[k + 1, pivot], :] = a[[pivot, k + 1], :]
            a[:, [k + 1, pivot]] = a[:, [pivot, k + 1]]
            pf = -pf
        if a[k + 1, k] == 0.0:
            return 0.0
        pf *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2 :] / a[k, k + 1]
            col = a[k + 2 :, k + 1]
            a[k + 2 :, k + 2 :] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def matrix_kernel_block(beta: int, points: Sequence[float]) -> np.ndarray:
    """Assemble the 2k x 2k block matrix of kernel evaluations at all pairs.

    Block (i, j) is the 2x2 kernel at (points[i], points[j]); multiplying by
    the block-diagonal symplectic unit on the right yields the skew matrix
    whose Pfaffian is the k-point correlation function.
    """
    pts = np.asarray(points, dtype=float)
    k = pts.size
    s, d, i = matrix_kernel(beta, pts[:, None], pts[None, :])
    m = np.empty((2 * k, 2 * k))
    m[0::2, 0::2] = s
    m[0::2, 1::2] = d
    m[1::2, 0::2] = i
    m[1::2, 1::2] = s
    return m


def _symplectic_unit(k: int) -> np.ndarray:
    j = np.zeros((2 * k, 2 * k))
    j[0::2, 1::2] = np.eye(k)
    j[1::2, 0::2] = -np.eye(k)
    return j


def corr_fn(beta: int, points: Sequence[float]) -> float:
    """Limiting k-point bulk correlation function at the given rescaled points.

    beta=2 evaluates the determinant of the sine-kernel Gram matrix; beta=1
    and beta=4 evaluate the Pfaffian of the 2k x 2k kernel block matrix times
    the block-diagonal symplectic unit.
    """
    pts = np.asarray(points, dtype=float)
    k = pts.size
    if k < 1:
        raise ValueError("at least one point is required")
    if k > CORR_ORDER_MAX:
        raise ValueError("correlation order too large")
    if beta == 2:
        return float(np.linalg.det(np.sinc(pts[:, None] - pts[None, :])))
    if beta not in (1, 4):
        raise ValueError(f"beta must be 1, 2 or 4, got {beta}")
    m = matrix_kernel_block(beta, pts)
    return pfaffian(m @ _symplectic_unit(k))


def _set_partitions(items: list) -> Iterator[list[list]]:
    """All partitions of ``items`` into non-empty unordered blocks."""
    if len(items) == 1:
        yield [items]
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1 :]
        yield [[head]] + part


def _permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _cycle_block_sum(beta: int, pts: np.ndarray, block: Sequence[int]) -> float:
    """Sum over all bijections of a block of the traced cyclic kernel product.

    For a block of size p this is (1/2p) * sum over orderings of
    tr(K(t_{s1},t_{s2}) K(t_{s2},t_{s3}) ... K(t_{sp},t_{s1})); the trace
    carries out the sum over the 2^p entry-index words of the chain.
    """
    p = len(block)
    acc = 0.0
    for order in itertools.permutations(block):
        chain = np.eye(2)
        for r in range(p):
            a, b = order[r], order[(r + 1) % p]
            s, d, i = matrix_kernel(beta, pts[a], pts[b])
            chain = chain @ np.array([[s, d], [i, s]])
        acc += chain[0, 0] + chain[1, 1]
    return acc / (2.0 * p)


def corr_fn_expansion(beta: int, points: Sequence[float]) -> float:
    """Brute-force evaluation of the k-point correlation function.

    For beta=1,4 this sums over all set partitions of the points, all
    bijections of each block and all entry-index words, forming cyclic
    products of matrix-kernel factors with sign (-1)^(k - #blocks); it is
    the combinatorial expansion underlying the Pfaffian formula and serves
    as the oracle for corr_fn.  For beta=2 the Leibniz sum over permutations
    of the sine-kernel determinant plays the same role.

    Cost is super-exponential in k, hence the small cap.
    """
    pts = np.asarray(points, dtype=float)
    k = pts.size
    if k < 1:
        raise ValueError("at least one point is required")
    if k > EXPANSION_ORDER_MAX:
        raise ValueError("correlation order too large")
    if beta == 2:
        total = 0.0
        for perm in itertools.permutations(range(k)):
            term = _permutation_sign(perm)
            for i in range(k):
                term *= np.sinc(pts[i] - pts[perm[i]])
            total += term
        return float(total)
    if beta not in (1, 4):
        raise ValueError(f"beta must be 1, 2 or 4, got {beta}")
    total = 0.0
    for partition in _set_partitions(list(range(k))):
        m = len(partition)
        prod = 1.0
        for block in partition:
            prod *= _cycle_block_sum(beta, pts, sorted(block))
        total += (-1.0) ** (k - m) * prod
    return total
