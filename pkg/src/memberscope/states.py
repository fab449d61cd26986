"""Density matrices, generalized Bloch vectors, fidelity and named states.

Basis convention: ``|0> = |H> = (1, 0)``, ``|1> = |V> = (0, 1)``; two-qubit
vectors are ordered ``|00>, |01>, |10>, |11>``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .linalg import (
    PSD_TOL,
    DimensionError,
    NotPositiveError,
    as_hermitian,
    sqrt_psd,
)

TRACE_TOL = 1e-10
NORM_TOL = 1e-12

_S = 1.0 / np.sqrt(2.0)

# Canonical names; aliases are resolved by _canonical_name.
NAMED_VECTORS = {
    "00": np.array([1, 0, 0, 0], dtype=complex),
    "01": np.array([0, 1, 0, 0], dtype=complex),
    "10": np.array([0, 0, 1, 0], dtype=complex),
    "11": np.array([0, 0, 0, 1], dtype=complex),
    "Phi-": np.array([_S, 0, 0, -_S], dtype=complex),
    "Phi+": np.array([_S, 0, 0, _S], dtype=complex),
    "Psi-": np.array([0, _S, -_S, 0], dtype=complex),
    "Psi+": np.array([0, _S, _S, 0], dtype=complex),
}
BELL_LABELS = ("Psi-", "Psi+", "Phi-", "Phi+")

_ALIASES = {
    "Ψ⁻": "Psi-", "Ψ⁺": "Psi+", "Φ⁻": "Phi-", "Φ⁺": "Phi+",
    "psi-": "Psi-", "psi+": "Psi+", "phi-": "Phi-", "phi+": "Phi+",
    "psi_minus": "Psi-", "psi_plus": "Psi+", "phi_minus": "Phi-", "phi_plus": "Phi+",
    "psi-minus": "Psi-", "psi-plus": "Psi+", "phi-minus": "Phi-", "phi-plus": "Phi+",
    "HH": "00", "HV": "01", "VH": "10", "VV": "11",
}


def _canonical_name(label: str) -> str:
    label = label.strip()
    if label in NAMED_VECTORS:
        return label
    for key in (label, label.lower()):
        if key in _ALIASES:
            return _ALIASES[key]
    raise ValueError(f"unknown state label {label!r}; known: {', '.join(NAMED_VECTORS)}")


def named_state(label: str) -> np.ndarray:
    """Two-qubit reference vector by name (``'Psi-'``, ``'Phi+'``, ``'01'``, ``'HV'``...)."""
    return NAMED_VECTORS[_canonical_name(label)].copy()


def canonical_label(label: str) -> str:
    return _canonical_name(label)


def bell_state(label: str) -> np.ndarray:
    name = _canonical_name(label)
    if name not in BELL_LABELS:
        raise ValueError(f"{label!r} is not a Bell state label")
    return NAMED_VECTORS[name].copy()


def as_pure_state(phi, tol: float = NORM_TOL) -> np.ndarray:
    v = np.asarray(phi, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state vector is not normalized (|phi| = {norm:.15f})")
    return v


def projector(phi) -> np.ndarray:
    v = np.asarray(phi, dtype=complex).ravel()
    return np.outer(v, v.conj())


def as_density(rho, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, eigenvalues >= -tol."""
    m = as_hermitian(rho)
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix has trace {tr:.12f}, expected 1")
    w = np.linalg.eigvalsh(m)
    if w[0] < -tol:
        raise NotPositiveError(f"density matrix has eigenvalue {w[0]:.3e}")
    return m


@lru_cache(maxsize=None)
def _gell_mann(d: int) -> np.ndarray:
    ops = []
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
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        ops.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    out = np.array(ops)
    out.setflags(write=False)
    return out


def gell_mann_basis(d: int = 4) -> np.ndarray:
    """Generalized Gell-Mann matrices scaled to HS-orthonormality, shape ``(d*d-1, d, d)``.

    Ordered as symmetric / antisymmetric pairs for each ``j < k``, followed by
    the ``d - 1`` diagonal elements.
    """
    return _gell_mann(int(d))


def bloch_to_density(b, check: bool = True) -> np.ndarray:
    """``rho = I/d + sum_i b_i Gamma_i``; raises NotPositiveError if not PSD."""
    b = np.asarray(b, dtype=float).ravel()
    d = int(round(np.sqrt(b.size + 1)))
    if d * d - 1 != b.size:
        raise DimensionError(f"Bloch vector length {b.size} is not d^2 - 1")
    rho = np.eye(d, dtype=complex) / d + np.tensordot(b, gell_mann_basis(d), axes=1)
    if check:
        w = np.linalg.eigvalsh(rho)
        if w[0] < -PSD_TOL:
            raise NotPositiveError(f"Bloch vector gives eigenvalue {w[0]:.3e}")
    return rho


def density_to_bloch(rho) -> np.ndarray:
    m = np.asarray(rho, dtype=complex)
    gammas = gell_mann_basis(m.shape[0])
    # b_i = tr[Gamma_i rho]
    return np.real(np.einsum("kab,ba->k", gammas, m))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``tr sqrt(sqrt(rho) sigma sqrt(rho))`` (not squared)."""
    rho = as_hermitian(rho, tol=1e-10)
    sigma = as_hermitian(sigma, tol=1e-10)
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    # trace norm of sqrt(rho) sqrt(sigma); avoids a second square root of a near-singular product
    cut = 4 * np.finfo(float).eps
    prod = sqrt_psd(rho, floor=cut) @ sqrt_psd(sigma, floor=cut)
    f = float(np.sum(np.linalg.svd(prod, compute_uv=False)))
    return min(max(f, 0.0), 1.0)


def overlap(rho, phi) -> float:
    """``<phi| rho |phi>``."""
    v = np.asarray(phi, dtype=complex).ravel()
    return float(np.real(v.conj() @ np.asarray(rho) @ v))


def fidelity_pure(rho, phi) -> float:
    return float(np.sqrt(min(max(overlap(rho, phi), 0.0), 1.0)))


def bures_distance(rho, sigma) -> float:
    return float(np.sqrt(max(2.0 - 2.0 * fidelity(rho, sigma), 0.0)))


def werner_state(p: float) -> np.ndarray:
    """``p |Psi-><Psi-| + (1 - p) I/4``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner weight must lie in [0, 1], got {p}")
    return p * projector(NAMED_VECTORS["Psi-"]) + (1.0 - p) * np.eye(4, dtype=complex) / 4


def maximally_mixed(d: int = 4) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def random_density(seed, rank: int = 4, d: int = 4) -> np.ndarray:
    """Random density matrix of the given rank (Ginibre construction)."""
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {rank}")
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(seed, d: int = 4) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)
