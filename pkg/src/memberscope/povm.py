"""Wave-plate optics, rotated two-photon projective bases and POVMs.

Outcome order inside every basis block is ``HH, HV, VH, VV``, i.e. the
coincidence pairs (H1,H2), (H1,V2), (V1,H2), (V1,V2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import DimensionError, as_operator, perturbation_kernel, span_dimension
from .states import as_density

OUTCOMES = ("HH", "HV", "VH", "VV")
POVM_TOL = 1e-10
PROB_TOL = 1e-9


def waveplate_matrix(mu: float, nu: float) -> np.ndarray:
    """Jones matrix of a retarder with fast axis at ``mu`` and retardance ``nu``.

    Equal to ``R(-mu) diag(1, e^{i nu}) R(mu)``; both off-diagonal entries
    carry ``(1 - e^{i nu})``, which keeps the matrix unitary for every ``nu``.
    """
    c, s = math.cos(mu), math.sin(mu)
    e = complex(math.cos(nu), math.sin(nu))
    off = 0.5 * (1.0 - e) * math.sin(2.0 * mu)
    return np.array([[c * c + e * s * s, off], [off, s * s + e * c * c]], dtype=complex)


def local_rotation(theta: float, phi: float) -> np.ndarray:
    """``W(phi, pi/2)^* W(theta, pi)^*``: quarter-wave at ``phi``, half-wave at ``theta``."""
    qwp = waveplate_matrix(phi, math.pi / 2)
    hwp = waveplate_matrix(theta, math.pi)
    return qwp.conj().T @ hwp.conj().T


@dataclass(frozen=True)
class BasisSetting:
    """Wave-plate angles (radians) for both photons."""

    theta1: float
    phi1: float
    theta2: float
    phi2: float
    name: str = ""

    def __post_init__(self):
        for key in ("theta1", "phi1", "theta2", "phi2"):
            if not math.isfinite(getattr(self, key)):
                raise ValueError(f"{key} must be finite")

    @property
    def angles(self) -> tuple[float, float, float, float]:
        return (self.theta1, self.phi1, self.theta2, self.phi2)

    def same_angles(self, other: "BasisSetting", tol: float = 1e-9) -> bool:
        return all(abs(a - b) <= tol for a, b in zip(self.angles, other.angles))


def rotated_basis(setting: BasisSetting) -> np.ndarray:
    """The four projectors ``P_ij`` of a setting, shape ``(4, 4, 4)``, order HH..VV."""
    u = np.kron(
        local_rotation(setting.theta1, setting.phi1),
        local_rotation(setting.theta2, setting.phi2),
    )
    # column k of u is the rotated product vector for outcome k
    return np.einsum("ak,bk->kab", u, u.conj())


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered POVM elements (weights folded in) with optional source settings."""

    elements: np.ndarray
    settings: tuple[BasisSetting, ...] | None = None
    name: str = ""
    _kernel: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        elems = np.asarray(self.elements, dtype=complex)
        if elems.ndim != 3 or elems.shape[1] != elems.shape[2] or len(elems) == 0:
            raise DimensionError(f"POVM elements must have shape (N, d, d), got {elems.shape}")
        for j, e in enumerate(elems):
            if np.max(np.abs(e - e.conj().T)) > POVM_TOL:
                raise ValueError(f"POVM element {j} is not Hermitian")
            if np.linalg.eigvalsh(e)[0] < -POVM_TOL:
                raise ValueError(f"POVM element {j} is not positive semidefinite")
        total = elems.sum(axis=0)
        err = np.max(np.abs(total - np.eye(elems.shape[1])))
        if err > POVM_TOL:
            raise ValueError(f"POVM elements do not sum to identity (max deviation {err:.3e})")
        elems.setflags(write=False)
        object.__setattr__(self, "elements", elems)
        if self.settings is not None:
            object.__setattr__(self, "settings", tuple(self.settings))

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def span_dimension(self) -> int:
        return span_dimension(list(self.elements))

    def is_informationally_complete(self) -> bool:
        return self.span_dimension() == self.dim**2

    def perturbations(self) -> list[np.ndarray]:
        if self._kernel is None:
            object.__setattr__(self, "_kernel", perturbation_kernel(list(self.elements)))
        return self._kernel


def assemble_povm(bases: Sequence, settings: Sequence[BasisSetting] | None = None,
                  name: str = "") -> Povm:
    """Join complete projective bases with uniform weight ``1/m``.

    Element ``j + 4k`` is outcome ``j`` of basis ``k`` (0-based).
    """
    bases = [np.asarray(b, dtype=complex) for b in bases]
    if not bases:
        raise ValueError("at least one basis is required")
    shape = bases[0].shape
    for b in bases[1:]:
        if b.shape != shape:
            raise DimensionError(f"basis shape mismatch: {shape} vs {b.shape}")
    m = len(bases)
    return Povm(np.concatenate(bases) / m, settings=settings, name=name)


def povm_from_settings(settings: Sequence[BasisSetting], name: str = "") -> Povm:
    settings = tuple(settings)
    return assemble_povm([rotated_basis(s) for s in settings], settings=settings, name=name)


def two_outcome_povm(phi, name: str = "") -> Povm:
    """``{|phi><phi|, I - |phi><phi|}``."""
    v = np.asarray(phi, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    p = np.outer(v, v.conj())
    return Povm(np.array([p, np.eye(len(v)) - p]), name=name)


def born_probabilities(povm: Povm, rho) -> np.ndarray:
    """``q_i = tr[E_i rho]``, tiny negatives clamped to zero."""
    rho = as_operator(rho)
    if rho.shape[0] != povm.dim:
        raise DimensionError(f"state dimension {rho.shape[0]} does not match POVM dimension {povm.dim}")
    q = np.real(np.einsum("kab,ba->k", povm.elements, rho))
    return np.where((q < 0) & (q >= -1e-12), 0.0, q)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Per-basis coincidence data.

    ``probabilities`` always holds the per-basis normalized distributions
    (shape ``(m, 4)``); ``counts`` is kept when the record came from counts.
    """

    settings: tuple[BasisSetting, ...]
    probabilities: np.ndarray
    counts: np.ndarray | None = None
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        settings = tuple(self.settings)
        if probs.ndim != 2 or probs.shape[1] != len(OUTCOMES):
            raise ValueError(f"each basis block needs {len(OUTCOMES)} outcomes, got shape {probs.shape}")
        if probs.shape[0] != len(settings):
            raise ValueError(f"{len(settings)} settings but {probs.shape[0]} probability blocks")
        if np.any(probs < 0):
            raise ValueError("negative probability in measurement record")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            raise ValueError(f"probability blocks must sum to 1 (got {sums.tolist()})")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "settings", settings)
        if self.counts is not None:
            counts = np.asarray(self.counts)
            if counts.shape != probs.shape:
                raise ValueError("counts and probabilities have different shapes")
            object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, settings: Sequence[BasisSetting], counts, **kwargs) -> "MeasurementRecord":
        c = np.asarray(counts)
        if c.ndim != 2 or c.shape[1] != len(OUTCOMES):
            raise ValueError(f"counts must have shape (m, 4), got {c.shape}")
        if np.any(c < 0):
            raise ValueError("negative coincidence count")
        totals = c.sum(axis=1)
        if np.any(totals <= 0):
            raise ValueError("basis block with zero total counts")
        return cls(tuple(settings), c / totals[:, None], counts=c, **kwargs)

    @property
    def n_bases(self) -> int:
        return len(self.settings)

    def distribution(self) -> np.ndarray:
        """All blocks concatenated with weight ``1/m``, matching :func:`povm_from_settings`."""
        return self.probabilities.ravel() / self.n_bases

    def matches(self, povm: Povm) -> bool:
        if povm.settings is None or len(povm.settings) != self.n_bases:
            return False
        return all(a.same_angles(b) for a, b in zip(self.settings, povm.settings))


def simulate_counts(rho, settings: Sequence[BasisSetting], shots_per_basis: int,
                    seed=None, label: str = "") -> MeasurementRecord:
    """Multinomial coincidence counts per basis; ``shots_per_basis == 0`` gives exact probabilities."""
    if shots_per_basis < 0:
        raise ValueError("shots_per_basis must be non-negative")
    rho = as_density(rho)
    settings = tuple(settings)
    exact = []
    for s in settings:
        q = np.real(np.einsum("kab,ba->k", rotated_basis(s), rho))
        q = np.clip(q, 0.0, None)
        exact.append(q / q.sum())
    exact = np.array(exact)
    if shots_per_basis == 0:
        return MeasurementRecord(settings, exact, label=label, metadata={"shots": 0})
    rng = np.random.default_rng(seed)
    counts = np.array([rng.multinomial(shots_per_basis, q) for q in exact])
    return MeasurementRecord.from_counts(settings, counts, label=label,
                                         metadata={"shots": int(shots_per_basis)})
