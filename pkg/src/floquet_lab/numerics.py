"""Dense linear algebra for small matrices.

Everything here is hand-rolled on top of plain numpy arrays: spectral norm by
power iteration, eigenvalues by Hessenberg reduction plus shifted QR,
determinant by LU with partial pivoting.  Matrices are ordinary 2-D float
arrays; eigenvalue spectra are complex 1-D arrays sorted by descending
modulus, with conjugate pairs adjacent for real inputs.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import DimensionError, DomainError, InvalidInputError, NumericalError

MAX_EIG_DIM = 16

# near convergence the Rayleigh error is ~10x the last increment, so the
# stopping increment sits two decades below the accuracy the bound-chain
# checks need (1e-12 slack on mathematically equal products)
_POWER_TOL = 1e-15
_POWER_MAX_ITER = 10_000
_QR_SWEEPS_PER_EIG = 80


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float array, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix has non-finite entries")
    return arr


def _require_square(a: np.ndarray) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def spectral_norm(a) -> float:
    """Largest singular value via power iteration on A^T A.

    Deterministic all-ones start vector, Rayleigh-quotient tolerance 1e-13,
    at most 10000 iterations.  If the iterate lands exactly in the null
    space, restarts on successive basis vectors.
    """
    arr = as_matrix(a)
    b = arr.T @ arr
    n = b.shape[0]
    if n == 0 or not b.any():
        return 0.0
    x = np.ones(n) / math.sqrt(n)
    lam = float(x @ b @ x)
    restarts = 0
    for _ in range(_POWER_MAX_ITER):
        y = b @ x
        ny = math.sqrt(float(y @ y))
        if ny == 0.0:
            if restarts >= n:
                return 0.0
            x = np.zeros(n)
            x[restarts] = 1.0
            restarts += 1
            lam = float(x @ b @ x)
            continue
        x = y / ny
        lam_new = float(x @ b @ x)
        if abs(lam_new - lam) <= _POWER_TOL * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


def matmul(a, b) -> np.ndarray:
    """Dimension-checked matrix product."""
    left = as_matrix(a)
    right = as_matrix(b)
    if left.shape[1] != right.shape[0]:
        raise DimensionError(
            f"inner dimensions do not agree: {left.shape} x {right.shape}"
        )
    return left @ right


def diag_sqrt(values) -> np.ndarray:
    """Diagonal matrix of elementwise square roots; entries must be > 0."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise DimensionError("diag_sqrt expects a 1-D sequence of diagonal values")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("diagonal values must be finite")
    if np.any(v <= 0.0):
        bad = int(np.argmin(v))
        raise DomainError(
            f"diag_sqrt requires strictly positive entries, got {v[bad]} at index {bad}"
        )
    return np.diag(np.sqrt(v))


def determinant(a) -> float:
    """Determinant by LU with partial pivoting."""
    arr = _require_square(as_matrix(a)).copy()
    n = arr.shape[0]
    sign = 1.0
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(arr[k:, k])))
        if arr[p, k] == 0.0:
            return 0.0
        if p != k:
            arr[[k, p]] = arr[[p, k]]
            sign = -sign
        arr[k + 1 :, k] /= arr[k, k]
        arr[k + 1 :, k + 1 :] -= np.outer(arr[k + 1 :, k], arr[k, k + 1 :])
    return float(sign * np.prod(np.diag(arr)))


def _eig2(a: complex, b: complex, c: complex, d: complex) -> tuple[complex, complex]:
    """Eigenvalues of [[a, b], [c, d]], cancellation-safe."""
    tr = a + d
    det = a * d - b * c
    sq = cmath.sqrt(tr * tr - 4.0 * det)
    lam1 = (tr - sq) / 2.0 if abs(tr - sq) > abs(tr + sq) else (tr + sq) / 2.0
    lam2 = det / lam1 if lam1 != 0 else (tr - sq) / 2.0
    return lam1, lam2


def _hessenberg(a: np.ndarray) -> np.ndarray:
    h = a.copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k]
        nx = math.sqrt(float(x @ x))
        if nx == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(nx, x[0]) if x[0] != 0.0 else nx
        nv = math.sqrt(float(v @ v))
        if nv == 0.0:
            continue
        v /= nv
        h[k + 1 :, :] -= 2.0 * np.outer(v, v @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v)
    return h


def _qr_shift_step(h: np.ndarray, lo: int, hi: int, shift: complex) -> None:
    """One explicit shifted QR sweep, in place, on the block h[lo:hi, lo:hi]."""
    for i in range(lo, hi):
        h[i, i] -= shift
    rotations = []
    for i in range(lo, hi - 1):
        a = h[i, i]
        b = h[i + 1, i]
        r = math.hypot(abs(a), abs(b))
        if r == 0.0:
            c, s = 1.0 + 0.0j, 0.0 + 0.0j
        else:
            c, s = a / r, b / r
        rotations.append((c, s))
        row_i = h[i, i:hi].copy()
        row_j = h[i + 1, i:hi].copy()
        h[i, i:hi] = np.conj(c) * row_i + np.conj(s) * row_j
        h[i + 1, i:hi] = -s * row_i + c * row_j
    for i, (c, s) in enumerate(rotations, start=lo):
        col_i = h[lo : hi, i].copy()
        col_j = h[lo : hi, i + 1].copy()
        h[lo : hi, i] = c * col_i + s * col_j
        h[lo : hi, i + 1] = -np.conj(s) * col_i + np.conj(c) * col_j
    for i in range(lo, hi):
        h[i, i] += shift


def _qr_eigenvalues(a: np.ndarray) -> list[complex]:
    n = a.shape[0]
    h = _hessenberg(a).astype(complex)
    eigs: list[complex] = []
    hi = n
    sweeps = 0
    budget = _QR_SWEEPS_PER_EIG * n
    stagnant = 0
    while hi > 0:
        # deflate negligible subdiagonals
        for m in range(1, hi):
            thresh = np.finfo(float).eps * (abs(h[m - 1, m - 1]) + abs(h[m, m]))
            if abs(h[m, m - 1]) <= thresh:
                h[m, m - 1] = 0.0
        if hi == 1 or h[hi - 1, hi - 2] == 0.0:
            eigs.append(complex(h[hi - 1, hi - 1]))
            hi -= 1
            stagnant = 0
            continue
        if hi == 2 or h[hi - 2, hi - 3] == 0.0:
            lam1, lam2 = _eig2(
                h[hi - 2, hi - 2], h[hi - 2, hi - 1], h[hi - 1, hi - 2], h[hi - 1, hi - 1]
            )
            eigs.extend([lam1, lam2])
            hi -= 2
            stagnant = 0
            continue
        lo = hi - 2
        while lo > 0 and h[lo, lo - 1] != 0.0:
            lo -= 1
        w1, w2 = _eig2(
            h[hi - 2, hi - 2], h[hi - 2, hi - 1], h[hi - 1, hi - 2], h[hi - 1, hi - 1]
        )
        shift = w1 if abs(w1 - h[hi - 1, hi - 1]) <= abs(w2 - h[hi - 1, hi - 1]) else w2
        if stagnant > 0 and stagnant % 12 == 0:
            # exceptional shift to break symmetric stalls
            shift = h[hi - 1, hi - 1] + 1.5 * abs(h[hi - 1, hi - 2])
        _qr_shift_step(h, lo, hi, shift)
        sweeps += 1
        stagnant += 1
        if sweeps > budget:
            raise NumericalError(
                f"QR iteration did not converge after {sweeps} sweeps",
                iterations=sweeps,
            )
    return eigs


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues with multiplicity, sorted by descending modulus.

    Closed form for dimension <= 2; Hessenberg reduction followed by shifted
    QR for 3 <= d <= 16.  For real inputs, conjugate pairs end up adjacent
    (positive imaginary part first).
    """
    arr = _require_square(as_matrix(a))
    n = arr.shape[0]
    if n > MAX_EIG_DIM:
        raise DimensionError(f"eigenvalues supports dimension <= {MAX_EIG_DIM}, got {n}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        vals = [complex(arr[0, 0])]
    elif n == 2:
        vals = list(_eig2(arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1]))
    else:
        vals = _qr_eigenvalues(arr)
    return _sort_spectrum(vals)


def _sort_spectrum(vals: list[complex]) -> np.ndarray:
    out = sorted(vals, key=lambda z: -abs(z))
    # group near-equal moduli, then order each group by descending imag so
    # conjugate pairs sit next to each other (+i before -i)
    result: list[complex] = []
    i = 0
    while i < len(out):
        j = i + 1
        while j < len(out) and abs(abs(out[j]) - abs(out[i])) <= 1e-8 * (1.0 + abs(out[i])):
            j += 1
        result.extend(sorted(out[i:j], key=lambda z: (-z.imag, -z.real)))
        i = j
    return np.asarray(result, dtype=complex)
