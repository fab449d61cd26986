"""Dense operator algebra and real vectorization of Hermitian matrices.

Operators are plain ``numpy`` complex arrays. Hermitian operators are
mapped to real coordinate vectors over a fixed orthonormal Hermitian basis,
so Hilbert-Schmidt inner products become Euclidean dot products and span
ranks / kernels reduce to real SVDs.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
RANK_TOL = 1e-10


class NotPositiveError(ValueError):
    """Raised when an operator that must be positive semidefinite is not."""


class DimensionError(ValueError):
    """Raised on incompatible operator dimensions."""


def as_operator(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    m = as_operator(a)
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def as_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``a`` as Hermitian (entrywise, absolute ``tol``) and return it."""
    m = as_operator(a)
    err = np.max(np.abs(m - m.conj().T))
    if err > tol:
        raise ValueError(f"operator is not Hermitian (max |A - A*| = {err:.3e})")
    return m


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def tensor_product(a, b) -> np.ndarray:
    return np.kron(as_operator(a), as_operator(b))


def hs_inner(a, b) -> float:
    """Hilbert-Schmidt inner product ``tr[a b]`` of two Hermitian operators."""
    a, b = as_operator(a), as_operator(b)
    _check_same_dim(a, b)
    # tr[ab] = sum_ij a_ij b_ji
    return float(np.real(np.sum(a * b.T)))


def eigen_hermitian(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvector columns of a Hermitian operator."""
    m = as_hermitian(a)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def sqrt_psd(a, tol: float = PSD_TOL, floor: float = 0.0) -> np.ndarray:
    """Unique PSD square root.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    raises :class:`NotPositiveError`. Eigenvalues up to ``floor`` times the
    largest one are also zeroed, which keeps rounding noise in a rank-deficient
    operator from turning into ``sqrt(eps)``-sized entries.
    """
    w, v = eigen_hermitian(a)
    if w[0] < -tol:
        raise NotPositiveError(f"operator has eigenvalue {w[0]:.3e} < -{tol:g}")
    w = np.where(w > floor * max(w[-1], 0.0), w, 0.0)
    root = np.sqrt(w)
    return (v * root) @ v.conj().T


@lru_cache(maxsize=None)
def _hermitian_unit_basis(d: int) -> np.ndarray:
    # diagonal units, then (E_jk + E_kj)/sqrt2 and i(E_kj - E_jk)/sqrt2 for j < k
    ops = []
    for j in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[j, j] = 1.0
        ops.append(m)
    s = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = s
            ops.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j * s
            m[k, j] = 1j * s
            ops.append(m)
    out = np.array(ops)
    out.setflags(write=False)
    return out


def hermitian_unit_basis(d: int) -> np.ndarray:
    """Orthonormal real basis of d x d Hermitian matrices, shape ``(d*d, d, d)``."""
    return _hermitian_unit_basis(int(d))


def vectorize(a) -> np.ndarray:
    """Real coordinates of a Hermitian operator over :func:`hermitian_unit_basis`."""
    m = as_operator(a)
    d = m.shape[0]
    iu = np.triu_indices(d, 1)
    out = np.empty(d * d)
    out[:d] = np.real(np.diag(m))
    upper = m[iu]
    # interleave symmetric / antisymmetric coordinates to match the basis order
    out[d::2] = np.sqrt(2.0) * upper.real
    out[d + 1::2] = -np.sqrt(2.0) * upper.imag
    return out


def devectorize(coords) -> np.ndarray:
    c = np.asarray(coords, dtype=float)
    d = int(round(np.sqrt(c.size)))
    if d * d != c.size:
        raise DimensionError(f"coordinate vector of length {c.size} is not a square")
    return np.tensordot(c, hermitian_unit_basis(d), axes=1)


def _stack(ops: Sequence) -> np.ndarray:
    mats = [as_operator(o) for o in ops]
    if not mats:
        raise ValueError("operator list is empty")
    for m in mats[1:]:
        _check_same_dim(mats[0], m)
    return np.array([vectorize(m) for m in mats])


def span_dimension(ops: Sequence, tol: float = RANK_TOL) -> int:
    """Dimension of the real linear span of Hermitian operators.

    Singular values below ``tol`` times the largest one count as zero.
    """
    s = np.linalg.svd(_stack(ops), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def perturbation_kernel(ops: Sequence, tol: float = RANK_TOL) -> list[np.ndarray]:
    """HS-orthonormal basis of traceless Hermitian operators orthogonal to ``ops``."""
    rows = _stack(ops)
    d = int(round(np.sqrt(rows.shape[1])))
    constraints = np.vstack([rows, vectorize(np.eye(d))])
    _, s, vt = np.linalg.svd(constraints)
    rank = int(np.sum(s > tol * s[0]))
    return [devectorize(v) for v in vt[rank:]]
