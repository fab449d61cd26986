"""Constrained l1 fitting of outcome distributions over Bloch-parametrized states.

The model distribution ``q(b) = tr[E_i rho(b)]`` is affine in the Bloch
vector ``b``, so minimizing ``sum_i |p_i - q_i(b)|`` subject to
``rho(b) >= 0`` and affine trace constraints is a convex program. Two
independent solvers are provided:

* :func:`constrained_l1_fit` writes the epigraph form as a conic program
  (nonnegative orthant + PSD cone of the real embedding of ``rho``) and
  solves it with the Clarabel interior-point solver.
* :func:`reference_l1_fit` solves the same epigraph LP over an outer
  polytope of the state space, refined with eigenvector cuts until the
  iterate is PSD. Slow but entirely separate code path.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from .linalg import as_hermitian
from .povm import Povm, born_probabilities
from .states import bloch_to_density, density_to_bloch, gell_mann_basis

FEAS_TOL = 1e-9
POLISH_BELOW = 1e-6


class Status(str, enum.Enum):
    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """``tr[operator rho] >= bound`` (``direction='>='``) or ``<= bound``."""

    operator: np.ndarray
    bound: float
    direction: str = ">="
    label: str = ""

    def __post_init__(self):
        if self.direction not in (">=", "<="):
            raise ValueError(f"direction must be '>=' or '<=', got {self.direction!r}")
        object.__setattr__(self, "operator", as_hermitian(self.operator, tol=1e-10))

    def value(self, rho) -> float:
        return float(np.real(np.sum(self.operator * np.asarray(rho).T)))

    def violation(self, rho) -> float:
        v = self.value(rho)
        gap = self.bound - v if self.direction == ">=" else v - self.bound
        return max(gap, 0.0)


@dataclass(frozen=True, eq=False)
class FitProblem:
    target: np.ndarray
    povm: Povm
    constraints: tuple[LinearConstraint, ...] = ()

    def __post_init__(self):
        p = np.asarray(self.target, dtype=float).ravel()
        if p.size != len(self.povm):
            raise ValueError(f"target has {p.size} entries but the POVM has {len(self.povm)} elements")
        if np.any(p < 0):
            raise ValueError("target distribution has negative entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"target distribution sums to {p.sum():.12f}, expected 1")
        object.__setattr__(self, "target", p)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for c in self.constraints:
            if c.operator.shape != (self.povm.dim, self.povm.dim):
                raise ValueError("constraint operator dimension does not match the POVM")


@dataclass(frozen=True, eq=False)
class FitResult:
    b_star: np.ndarray
    residual: float
    status: Status
    iterations: int
    min_eigenvalue: float = float("nan")
    max_violation: float = float("nan")
    solver: str = ""
    info: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def density(self) -> np.ndarray:
        return bloch_to_density(self.b_star, check=False)


def l1_distance(p, q) -> float:
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    return float(np.sum(np.abs(p - q)))


def _affine_maps(problem: FitProblem):
    """Coefficients so that ``q = q0 + M b`` and ``tr[A_k rho] = a0_k + G_k b``."""
    d = problem.povm.dim
    gammas = gell_mann_basis(d)
    elems = problem.povm.elements
    M = np.real(np.einsum("iab,kba->ik", elems, gammas))
    q0 = np.real(np.einsum("iaa->i", elems)) / d
    if problem.constraints:
        ops = np.array([c.operator for c in problem.constraints])
        G = np.real(np.einsum("iab,kba->ik", ops, gammas))
        a0 = np.real(np.einsum("iaa->i", ops)) / d
    else:
        G = np.zeros((0, len(gammas)))
        a0 = np.zeros(0)
    return M, q0, G, a0


def _constraint_rows(problem: FitProblem, G, a0):
    """Rows ``R b <= h`` for the affine constraints."""
    sign = np.array([-1.0 if c.direction == ">=" else 1.0 for c in problem.constraints])
    bounds = np.array([c.bound for c in problem.constraints])
    return sign[:, None] * G, sign * (bounds - a0)


def _certify(problem: FitProblem, b: np.ndarray):
    rho = bloch_to_density(b, check=False)
    lam = float(np.linalg.eigvalsh(rho)[0])
    viol = max((c.violation(rho) for c in problem.constraints), default=0.0)
    return rho, lam, viol


def _repair(b: np.ndarray, lam: float) -> np.ndarray:
    # mixing with I/d by weight s lifts the smallest eigenvalue to zero
    if lam >= 0.0:
        return b
    d = int(round(np.sqrt(b.size + 1)))
    s = -lam * d / (1.0 - lam * d)
    return (1.0 - s) * b


def _finish(problem: FitProblem, b, status: Status, iterations: int, solver: str, **info) -> FitResult:
    b = np.asarray(b, dtype=float)
    _, lam, _ = _certify(problem, b)
    if -FEAS_TOL <= lam < 0.0:
        b = _repair(b, lam)
    rho, lam, viol = _certify(problem, b)
    if status is Status.CONVERGED and (lam < -FEAS_TOL or viol > FEAS_TOL):
        status = Status.ITERATION_LIMIT
    residual = l1_distance(problem.target, born_probabilities(problem.povm, rho))
    return FitResult(b, residual, status, iterations, lam, viol, solver, dict(info))


def _pack(w: np.ndarray) -> np.ndarray:
    return np.concatenate([w.real.ravel(), w.imag.ravel()])


def _unpack(x: np.ndarray, d: int) -> np.ndarray:
    return (x[: d * d] + 1j * x[d * d:]).reshape(d, d)


def _factor_density(x: np.ndarray, d: int) -> np.ndarray:
    w = _unpack(x, d)
    rho = w @ w.conj().T
    return rho / np.trace(rho).real


def _factor_values(x: np.ndarray, ops, d: int):
    """Values ``tr[A_k rho(W)]`` and their Jacobian with respect to packed ``W``."""
    w = _unpack(x, d)
    z = np.vdot(w, w).real
    ops = np.asarray(ops)
    aw = np.einsum("kab,bc->kac", ops, w)
    vals = np.real(np.einsum("ab,kab->k", w.conj(), aw)) / z
    grad = 2.0 * (aw - vals[:, None, None] * w[None]) / z
    jac = np.hstack([grad.real.reshape(len(ops), -1), grad.imag.reshape(len(ops), -1)])
    return vals, jac


def _polish(problem: FitProblem, b: np.ndarray, iters: int = 30):
    """Gauss-Newton on ``rho = W W^*/tr`` to drive a near-zero residual to rounding level.

    Active inequality constraints are held as equalities. Returns the last
    Bloch vector; the caller decides whether it is an improvement.
    """
    d = problem.povm.dim
    rho = bloch_to_density(b, check=False)
    lam, vec = np.linalg.eigh(rho)
    x = _pack((vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.conj().T)
    active = [c for c in problem.constraints if abs(c.value(rho) - c.bound) <= 1e-6]
    ops = list(problem.povm.elements) + [c.operator for c in active]
    target = np.concatenate([problem.target, [c.bound for c in active]])
    for _ in range(iters):
        vals, jac = _factor_values(x, ops, d)
        r = vals - target
        if np.max(np.abs(r)) < 1e-15:
            break
        x = x - np.linalg.lstsq(jac, r, rcond=None)[0]
    polished = density_to_bloch(_factor_density(x, d))
    return polished


@lru_cache(maxsize=8)
def _psd_embedding(d: int):
    """``svec`` of the real embedding ``[[Re X, -Im X], [Im X, Re X]]`` for I/d and each Gamma."""
    n = 2 * d
    rows, cols = np.triu_indices(n)
    order = np.lexsort((rows, cols))  # column-major upper triangle
    rows, cols = rows[order], cols[order]
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))

    def svec(x):
        big = np.block([[x.real, -x.imag], [x.imag, x.real]])
        return big[rows, cols] * scale

    offset = svec(np.eye(d, dtype=complex) / d)
    cols_ = np.array([svec(g) for g in gell_mann_basis(d)]).T
    return offset, cols_, n


_CLARABEL_FAILED = {"PrimalInfeasible", "AlmostPrimalInfeasible"}
_CLARABEL_OK = {"Solved", "AlmostSolved"}


def constrained_l1_fit(problem: FitProblem, tol: float = 1e-10, max_iter: int = 5000) -> FitResult:
    """Globally minimize the l1 distance over feasible states (conic interior point).

    The reported residual is recomputed from the returned Bloch vector, not
    taken from the solver's objective.
    """
    M, q0, G, a0 = _affine_maps(problem)
    p = problem.target
    N, n = M.shape
    R, h = _constraint_rows(problem, G, a0)
    K = len(h)
    offset, psd_cols, size = _psd_embedding(problem.povm.dim)

    eye = np.eye(N)
    # s = rhs - A x >= 0 with x = (b, t)
    A_lin = np.vstack([
        np.hstack([M, -eye]),              # t >= q - p
        np.hstack([-M, -eye]),             # t >= p - q
        np.hstack([R, np.zeros((K, N))]),  # affine constraints
    ])
    rhs_lin = np.concatenate([p - q0, q0 - p, h])
    A_psd = np.hstack([-psd_cols, np.zeros((psd_cols.shape[0], N))])
    A = sp.csc_matrix(np.vstack([A_lin, A_psd]))
    rhs = np.concatenate([rhs_lin, offset])
    c = np.concatenate([np.zeros(n), np.ones(N)])
    P = sp.csc_matrix((n + N, n + N))
    cones = [clarabel.NonnegativeConeT(len(rhs_lin)), clarabel.PSDTriangleConeT(size)]

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = 1e-8
    solution = clarabel.DefaultSolver(P, c, A, rhs, cones, settings).solve()
    name = str(solution.status)
    b = np.asarray(solution.x[:n], dtype=float)
    if name in _CLARABEL_FAILED:
        return FitResult(np.zeros(n), float("inf"), Status.INFEASIBLE, solution.iterations,
                         solver="conic", info={"solver_status": name})
    status = Status.CONVERGED if name in _CLARABEL_OK else Status.ITERATION_LIMIT
    if not np.all(np.isfinite(b)):
        b = np.zeros(n)
        status = Status.ITERATION_LIMIT
    result = _finish(problem, b, status, solution.iterations, "conic",
                     solver_status=name, objective=float(solution.obj_val))
    if result.residual <= POLISH_BELOW:
        candidate = _finish(problem, _polish(problem, result.b_star), status,
                            solution.iterations, "conic", solver_status=name,
                            objective=float(solution.obj_val), polished=True)
        if (candidate.residual < result.residual and candidate.min_eigenvalue >= -FEAS_TOL
                and candidate.max_violation <= max(result.max_violation, 1e-12)):
            result = candidate
    return result


def reference_l1_fit(problem: FitProblem, starts: int = 4, seed: int = 0,
                     max_iter: int = 2000) -> FitResult:
    """SLSQP reference solver on a factorized state ``rho = W W^* / tr(W W^*)``.

    Positivity holds by construction, the l1 objective is put in epigraph
    form, and all constraints are smooth in ``W``. The program is nonconvex
    in ``W``, so several deterministic starts are tried and the best feasible
    end point is kept. Shares nothing with the conic route except the
    problem definition.
    """
    d = problem.povm.dim
    N = len(problem.povm)
    p = problem.target
    nw = 2 * d * d
    ops = list(problem.povm.elements)
    cons = problem.constraints
    signs = np.array([1.0 if c.direction == ">=" else -1.0 for c in cons])
    bounds_c = np.array([c.bound for c in cons])

    def objective(x):
        return float(np.sum(x[nw:]))

    def objective_grad(x):
        return np.concatenate([np.zeros(nw), np.ones(N)])

    def ineq(x):
        q, _ = _factor_values(x[:nw], ops, d)
        t = x[nw:]
        parts = [t - (p - q), t + (p - q)]
        if cons:
            g, _ = _factor_values(x[:nw], [c.operator for c in cons], d)
            parts.append(signs * (g - bounds_c))
        return np.concatenate(parts)

    def ineq_jac(x):
        _, Jq = _factor_values(x[:nw], ops, d)
        eye = np.eye(N)
        rows = [np.hstack([Jq, eye]), np.hstack([-Jq, eye])]
        if cons:
            _, Jg = _factor_values(x[:nw], [c.operator for c in cons], d)
            rows.append(np.hstack([signs[:, None] * Jg, np.zeros((len(cons), N))]))
        return np.vstack(rows)

    rng = np.random.default_rng(seed)
    inits = [np.eye(d, dtype=complex)]
    for _ in range(max(starts - 1, 0)):
        inits.append(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))

    best = None
    total_iter = 0
    for w0 in inits:
        w = _pack(w0 / np.linalg.norm(w0))
        q, _ = _factor_values(w, ops, d)
        x0 = np.concatenate([w, np.abs(p - q)])
        res = minimize(objective, x0, jac=objective_grad, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": ineq, "jac": ineq_jac}],
                       options={"ftol": 1e-15, "maxiter": max_iter})
        total_iter += int(res.nit)
        rho = _factor_density(res.x[:nw], d)
        b = density_to_bloch(rho)
        cand = _finish(problem, b, Status.CONVERGED, total_iter, "reference",
                       optimizer_message=str(res.message))
        if best is None or _better(cand, best):
            best = cand
    if best.max_violation > FEAS_TOL:
        # every start ended infeasible; the conic route certifies infeasibility properly
        best = FitResult(best.b_star, best.residual, Status.ITERATION_LIMIT, total_iter,
                         best.min_eigenvalue, best.max_violation, "reference", best.info)
    return FitResult(best.b_star, best.residual, best.status, total_iter,
                     best.min_eigenvalue, best.max_violation, "reference", best.info)


def _better(a: FitResult, b: FitResult) -> bool:
    a_ok, b_ok = a.max_violation <= FEAS_TOL, b.max_violation <= FEAS_TOL
    if a_ok != b_ok:
        return a_ok
    if not a_ok:
        return a.max_violation < b.max_violation
    return a.residual < b.residual


def fit(target, povm: Povm, constraints: Sequence[LinearConstraint] = (), **kwargs) -> FitResult:
    return constrained_l1_fit(FitProblem(target, povm, tuple(constraints)), **kwargs)
