"""Fidelity membership problems: solvability of a POVM and data-driven decisions.

A partition is built from ``n`` pure reference states ``phi_k`` with
fidelity thresholds ``eps_k``. Each reference splits the state space into
``F(rho, phi_k) >= eps_k`` and ``F(rho, phi_k) < eps_k``; the ``2**n``
intersections are the segments. Because ``F(rho, phi)^2 = <phi|rho|phi>``,
every side is an affine constraint on ``rho`` and the per-segment fit is a
convex program.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .linalg import DimensionError, as_hermitian, sqrt_psd
from .optimizer import FitProblem, FitResult, LinearConstraint, Status, constrained_l1_fit
from .povm import MeasurementRecord, Povm, two_outcome_povm
from .states import as_pure_state, canonical_label, named_state, projector

SOLVABLE_TOL = 1e-10
FIT_TOL = 1e-7
REJECT_TOL = 1e-4
MAX_REFERENCES = 8


class UnsolvablePovmError(ValueError):
    """The POVM cannot conclusively separate the requested partition."""


class MalformedRecordError(ValueError):
    """Measurement data inconsistent with the POVM it should come from."""


# ---------------------------------------------------------------------------
# solvability

def _kernel_response(povm: Povm, sigma_root: np.ndarray) -> tuple[float, np.ndarray | None]:
    kernel = povm.perturbations()
    if not kernel:
        return 0.0, None
    # linear map Delta -> sqrt(sigma) Delta sqrt(sigma) on the kernel coordinates
    images = np.array([(sigma_root @ k @ sigma_root).ravel() for k in kernel]).T
    stacked = np.vstack([images.real, images.imag])
    _, s, vt = np.linalg.svd(stacked, full_matrices=False)
    worst = np.tensordot(vt[0], np.array(kernel), axes=1)
    return float(s[0]), worst


def worst_perturbation(povm: Povm, sigma) -> tuple[float, np.ndarray | None]:
    """Largest ``||sqrt(sigma) D sqrt(sigma)||_F`` over unit-norm perturbations ``D``.

    Returns the value and the maximizing perturbation (``None`` for an
    informationally complete POVM).
    """
    sigma = as_hermitian(sigma, tol=1e-10)
    if sigma.shape[0] != povm.dim:
        raise DimensionError("reference state and POVM dimensions differ")
    return _kernel_response(povm, sqrt_psd(sigma))


def solvable_general(povm: Povm, sigma, tol: float = SOLVABLE_TOL) -> tuple[bool, float]:
    value, _ = worst_perturbation(povm, sigma)
    return value <= tol, value


def pure_violation(povm: Povm, phi) -> tuple[float, np.ndarray | None]:
    """Largest ``|<phi|D|phi>|`` over unit-norm perturbations, with the maximizer."""
    phi = as_pure_state(phi, tol=1e-9)
    kernel = povm.perturbations()
    if not kernel:
        return 0.0, None
    values = np.array([np.real(phi.conj() @ k @ phi) for k in kernel])
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        return 0.0, kernel[0]
    return norm, np.tensordot(values / norm, np.array(kernel), axes=1)


def solvable_pure(povm: Povm, phi, tol: float = SOLVABLE_TOL) -> bool:
    return pure_violation(povm, phi)[0] <= tol


def bell_delta_conditions(delta, tol: float = SOLVABLE_TOL) -> tuple[bool, bool]:
    """Whether ``delta`` is invisible to the Psi- and Psi+ fidelity tests.

    ``minus_ok``: ``D22 + D33 - 2 Re D23 = 0``; ``plus_ok``: ``D22 + D33 + 2 Re D23 = 0``
    (1-based indices in the ``|00>, |01>, |10>, |11>`` basis).
    """
    m = as_hermitian(delta, tol=1e-10)
    if m.shape != (4, 4):
        raise DimensionError(f"expected a 4x4 operator, got {m.shape}")
    diag = (m[1, 1] + m[2, 2]).real
    cross = 2.0 * m[1, 2].real
    return abs(diag - cross) <= tol, abs(diag + cross) <= tol


def minimal_pure_povm(phi) -> Povm:
    phi = as_pure_state(phi, tol=1e-9)
    return two_outcome_povm(phi, name="minimal")


# ---------------------------------------------------------------------------
# partitions

class Side(str, enum.Enum):
    AT_LEAST = "at_least"
    BELOW = "below"

    @property
    def symbol(self) -> str:
        return ">=" if self is Side.AT_LEAST else "<"


@dataclass(frozen=True, eq=False)
class ReferenceSpec:
    name: str
    phi: np.ndarray
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"fidelity threshold must lie in [0, 1], got {self.epsilon}")
        object.__setattr__(self, "phi", as_pure_state(self.phi, tol=1e-9))

    @classmethod
    def named(cls, label: str, epsilon: float) -> "ReferenceSpec":
        return cls(canonical_label(label), named_state(label), float(epsilon))


Segment = tuple[Side, ...]


@dataclass(frozen=True)
class Partition:
    refs: tuple[ReferenceSpec, ...]

    def __post_init__(self):
        refs = tuple(self.refs)
        if not 1 <= len(refs) <= MAX_REFERENCES:
            raise ValueError(f"between 1 and {MAX_REFERENCES} references are supported, got {len(refs)}")
        dims = {len(r.phi) for r in refs}
        if len(dims) != 1:
            raise DimensionError("reference states have different dimensions")
        object.__setattr__(self, "refs", refs)

    @classmethod
    def of(cls, *pairs) -> "Partition":
        """``Partition.of(("Psi-", 0.5), ("Psi+", 0.5))``."""
        return cls(tuple(ReferenceSpec.named(name, eps) for name, eps in pairs))

    def __len__(self) -> int:
        return len(self.refs)

    def segments(self) -> Iterator[Segment]:
        return itertools.product((Side.AT_LEAST, Side.BELOW), repeat=len(self.refs))

    def label(self, segment: Segment) -> str:
        return " & ".join(f"F({r.name}){side.symbol}{r.epsilon:g}"
                          for r, side in zip(self.refs, segment))

    def classify(self, fidelities: Sequence[float]) -> Segment:
        return tuple(Side.AT_LEAST if f >= r.epsilon else Side.BELOW
                     for r, f in zip(self.refs, fidelities))


def quadrant(segment: Segment) -> str | None:
    """Position of a two-reference segment when the first reference is drawn on the
    horizontal axis and the second on the vertical axis."""
    if len(segment) != 2:
        return None
    horiz = "right" if segment[0] is Side.AT_LEAST else "left"
    vert = "top" if segment[1] is Side.AT_LEAST else "bottom"
    return f"{vert}-{horiz}"


def segment_linear_constraints(partition: Partition, segment: Segment) -> list[LinearConstraint]:
    """``<phi_k|rho|phi_k> >= eps_k^2`` for AtLeast sides and ``<= eps_k^2`` for Below.

    Below sides use the closed boundary, so a state exactly on a threshold
    satisfies both neighbouring segments.
    """
    if len(segment) != len(partition):
        raise ValueError("segment length does not match the partition")
    return [
        LinearConstraint(projector(r.phi), r.epsilon**2,
                         ">=" if side is Side.AT_LEAST else "<=",
                         label=f"F({r.name}){side.symbol}{r.epsilon:g}")
        for r, side in zip(partition.refs, segment)
    ]


# ---------------------------------------------------------------------------
# decisions

@dataclass(frozen=True, eq=False)
class SegmentFit:
    segment: Segment
    label: str
    fit: FitResult

    @property
    def residual(self) -> float:
        return self.fit.residual if self.fit.status is not Status.INFEASIBLE else math.inf


@dataclass(frozen=True, eq=False)
class MembershipDecision:
    partition: Partition
    fits: tuple[SegmentFit, ...]
    verdict: Segment | None
    fit_tol: float
    reject_tol: float
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def conclusive(self) -> bool:
        return self.verdict is not None

    @property
    def verdict_label(self) -> str:
        return "inconclusive" if self.verdict is None else self.partition.label(self.verdict)

    def residual_of(self, segment: Segment) -> float:
        for f in self.fits:
            if f.segment == segment:
                return f.residual
        raise KeyError(segment)


def _verdict(fits: Sequence[SegmentFit], fit_tol: float, reject_tol: float):
    ranked = sorted(fits, key=lambda f: f.residual)
    best = ranked[0]
    second = ranked[1].residual if len(ranked) > 1 else math.inf
    if best.residual > fit_tol:
        return None, "no segment reproduces the data within the fit tolerance"
    if second <= fit_tol:
        return None, "more than one segment reproduces the data (state near a boundary)"
    if second - best.residual < reject_tol:
        return None, "best and second-best residuals are not separated by the rejection margin"
    if not best.fit.converged:
        return None, f"best segment fit ended with status {best.fit.status.value}"
    return best.segment, ""


def _target(data, povm: Povm) -> np.ndarray:
    if isinstance(data, MeasurementRecord):
        if povm.settings is not None and not data.matches(povm):
            raise MalformedRecordError("measurement bases do not match the POVM settings")
        if povm.settings is None and 4 * data.n_bases != len(povm):
            raise MalformedRecordError("measurement record size does not match the POVM")
        return data.distribution()
    p = np.asarray(data, dtype=float).ravel()
    if p.size != len(povm):
        raise MalformedRecordError(f"distribution has {p.size} entries, POVM has {len(povm)}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise MalformedRecordError("distribution must be non-negative and sum to 1")
    return p


def check_solvable(povm: Povm, partition: Partition, tol: float = SOLVABLE_TOL) -> None:
    for r in partition.refs:
        value, _ = pure_violation(povm, r.phi)
        if value > tol:
            raise UnsolvablePovmError(
                f"POVM cannot conclusively decide F({r.name}) >= eps: a perturbation "
                f"with |<phi|D|phi>| = {value:.3e} is invisible to the measurement")


def decide(data, povm: Povm, partition: Partition, fit_tol: float = FIT_TOL,
           reject_tol: float = REJECT_TOL, check: bool = True) -> MembershipDecision:
    """Fit every segment and report the unique one reproducing the data, if any.

    ``data`` is a :class:`MeasurementRecord` or a distribution over the POVM
    elements. Raises :class:`UnsolvablePovmError` when ``check`` is set and
    the POVM cannot separate some reference's two sides.
    """
    if check:
        check_solvable(povm, partition)
    p = _target(data, povm)
    fits = []
    for segment in partition.segments():
        problem = FitProblem(p, povm, tuple(segment_linear_constraints(partition, segment)))
        fits.append(SegmentFit(segment, partition.label(segment), constrained_l1_fit(problem)))
    verdict, note = _verdict(fits, fit_tol, reject_tol)
    return MembershipDecision(partition, tuple(fits), verdict, fit_tol, reject_tol,
                              notes=(note,) if note else ())


def sweep(data, povm: Povm, eps_minus_grid: Sequence[float], eps_plus_grid: Sequence[float],
          references: tuple[str, str] = ("Psi-", "Psi+"), paired: bool = False,
          **kwargs) -> list[MembershipDecision]:
    """Decisions over threshold pairs.

    With ``paired=False`` every combination of the two grids is evaluated
    (first grid outermost); with ``paired=True`` the grids are zipped.
    """
    if paired:
        if len(eps_minus_grid) != len(eps_plus_grid):
            raise ValueError("paired grids must have equal length")
        pairs = list(zip(eps_minus_grid, eps_plus_grid))
    else:
        pairs = list(itertools.product(eps_minus_grid, eps_plus_grid))
    if kwargs.pop("check", True):
        check_solvable(povm, Partition.of(*((name, 0.5) for name in references)))
    return [decide(data, povm, Partition.of((references[0], a), (references[1], b)),
                   check=False, **kwargs) for a, b in pairs]


# ---------------------------------------------------------------------------
# correlator oracle for the three mutually unbiased product bases

def _correlator(block: np.ndarray) -> float:
    hh, hv, vh, vv = block
    return float(hh - hv - vh + vv)


def overlap_estimates(record: MeasurementRecord, settings: Sequence = None) -> dict[str, float]:
    """Bell fidelities from the ZZ, XX and YY correlators of a three-basis record.

    Needs bases equal (in angles) to ``settings`` in that order: computational,
    diagonal and circular product bases. In every one of them the HH and VV
    outcomes carry correlator sign +1.
    """
    if settings is None:
        from .io import builtin_settings
        settings = builtin_settings("table1")
    found = []
    for s in settings:
        idx = [i for i, r in enumerate(record.settings) if r.same_angles(s)]
        if not idx:
            raise MalformedRecordError(f"record is missing basis {s.name or s.angles}")
        found.append(record.probabilities[idx[0]])
    czz, cxx, cyy = (_correlator(b) for b in found)
    overlaps = {
        "Psi-": (1.0 - czz - cxx - cyy) / 4.0,
        "Psi+": (1.0 - czz + cxx + cyy) / 4.0,
        "Phi-": (1.0 + czz - cxx + cyy) / 4.0,
        "Phi+": (1.0 + czz + cxx - cyy) / 4.0,
    }
    return {k: math.sqrt(min(max(v, 0.0), 1.0)) for k, v in overlaps.items()}
