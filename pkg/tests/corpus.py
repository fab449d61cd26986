"""Deterministic fit problems shared by the optimizer and acceptance tests."""
from __future__ import annotations

from memberscope.io import builtin_experiment, load_povm
from memberscope.membership import Partition, segment_linear_constraints
from memberscope.optimizer import FitProblem, LinearConstraint
from memberscope.povm import born_probabilities
from memberscope.states import named_state, overlap, projector, random_density, random_pure_state

PSI_MINUS = projector(named_state("Psi-"))
PSI_PLUS = projector(named_state("Psi+"))


def soundness_instances(n: int = 200):
    """``(problem, rho0)`` pairs where ``rho0`` is feasible and generates the target."""
    povm = load_povm("table1")
    for s in range(n):
        rho = random_density(s, 1 + s % 4)
        phi = random_pure_state(1000 + s)
        ov = overlap(rho, phi)
        minus = overlap(rho, named_state("Psi-"))
        constraints = (
            # every third instance puts rho0 exactly on the first boundary
            LinearConstraint(projector(phi), ov if s % 3 == 0 else ov - 0.01, ">="),
            LinearConstraint(PSI_MINUS, minus + (0.0 if s % 2 else 0.02), "<="),
        )
        yield FitProblem(born_probabilities(povm, rho), povm, constraints), rho


def reference_corpus():
    """Twenty problems: all segments of both measured preparations, plus
    synthetic targets with and without an excluded generating state."""
    povm = load_povm("table1")
    cases = []
    for name, eps in (("prep1", (0.7, 0.3)), ("prep2", (0.3, 0.7))):
        p = builtin_experiment(name).distribution()
        partition = Partition.of(("Psi-", eps[0]), ("Psi+", eps[1]))
        for seg in partition.segments():
            cases.append(FitProblem(p, povm, tuple(segment_linear_constraints(partition, seg))))
    for s in range(12):
        rho = random_density(500 + s, 1 + s % 4)
        q = born_probabilities(povm, rho)
        ov = overlap(rho, named_state("Psi-"))
        if s % 2:
            # target generated outside the feasible set
            cons = (LinearConstraint(PSI_MINUS, min(ov + 0.02 * (s + 1), 1.0), ">="),)
        else:
            cons = (LinearConstraint(PSI_MINUS, ov, ">="),
                    LinearConstraint(PSI_PLUS, overlap(rho, named_state("Psi+")) + 0.05, "<="))
        cases.append(FitProblem(q, povm, cons))
    assert len(cases) == 20
    return cases


