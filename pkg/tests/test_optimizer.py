from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memberscope.optimizer import (FitProblem, LinearConstraint, Status, constrained_l1_fit, fit,
                                   l1_distance, reference_l1_fit)
from memberscope.povm import born_probabilities
from memberscope.states import (bloch_to_density, named_state, overlap, projector, random_density,
                                werner_state)

from .corpus import PSI_MINUS, PSI_PLUS, reference_corpus, soundness_instances


def test_l1_distance_examples():
    assert l1_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert l1_distance([1, 0], [0, 1]) == 2.0
    assert l1_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        l1_distance([1.0], [0.5, 0.5])


def test_problem_validation(table1):
    with pytest.raises(ValueError):
        FitProblem(np.full(11, 1 / 11), table1)
    with pytest.raises(ValueError):
        FitProblem(np.r_[-0.1, np.full(11, 1.1 / 11)], table1)
    with pytest.raises(ValueError):
        FitProblem(np.full(12, 0.1), table1)
    with pytest.raises(ValueError):
        LinearConstraint(PSI_MINUS, 0.5, "==")


def test_constraint_value_and_violation():
    c = LinearConstraint(PSI_MINUS, 0.5, ">=")
    rho = werner_state(0.2)
    assert c.value(rho) == pytest.approx(0.4)
    assert c.violation(rho) == pytest.approx(0.1)
    assert LinearConstraint(PSI_MINUS, 0.5, "<=").violation(rho) == 0.0


def test_unconstrained_fit_of_realizable_target(table1):
    rho = random_density(3, 2)
    res = fit(born_probabilities(table1, rho), table1)
    assert res.status is Status.CONVERGED
    assert res.residual <= 1e-9


def test_singlet_target_with_large_plus_overlap(table1):
    # three correlators each shift by at least the amount forced by the overlap
    # bound: residual = (4/3) * 0.81 = 1.08
    p = born_probabilities(table1, projector(named_state("Psi-")))
    res = fit(p, table1, [LinearConstraint(PSI_PLUS, 0.81, ">=")])
    assert res.converged
    assert res.residual == pytest.approx(1.08, abs=1e-9)
    ref = reference_l1_fit(FitProblem(p, table1, (LinearConstraint(PSI_PLUS, 0.81, ">="),)))
    assert ref.residual == pytest.approx(1.08, abs=1e-7)


def test_brute_force_mixture_search_does_not_beat_the_fit(table1):
    p = born_probabilities(table1, projector(named_state("Psi-")))
    best = np.inf
    for a in np.linspace(0.81, 1.0, 200):
        rho = a * PSI_PLUS + (1 - a) * PSI_MINUS
        best = min(best, l1_distance(p, born_probabilities(table1, rho)))
    res = fit(p, table1, [LinearConstraint(PSI_PLUS, 0.81, ">=")])
    assert res.residual <= best + 1e-9
    assert best == pytest.approx(1.08, abs=1e-9)


def test_infeasible_constraints(table1):
    p = born_probabilities(table1, werner_state(0.5))
    res = fit(p, table1, [LinearConstraint(PSI_MINUS, 0.9, ">="),
                          LinearConstraint(PSI_PLUS, 0.2, ">=")])
    assert res.status is Status.INFEASIBLE
    assert res.residual == np.inf


def test_overlap_one_forces_the_reference(table1):
    p = born_probabilities(table1, werner_state(0.5))
    res = fit(p, table1, [LinearConstraint(PSI_PLUS, 1.0, ">=")])
    assert res.converged
    assert overlap(res.density(), named_state("Psi+")) == pytest.approx(1.0, abs=1e-8)


def test_prep1_passing_segment_residual(table1, prep1):
    cons = [LinearConstraint(PSI_MINUS, 0.25, ">="), LinearConstraint(PSI_PLUS, 0.25, "<=")]
    assert fit(prep1.distribution(), table1, cons).residual <= 1e-7


def test_residual_is_recomputed_from_witness(table1, prep1):
    cons = [LinearConstraint(PSI_MINUS, 0.95**2, ">="), LinearConstraint(PSI_PLUS, 0.04, ">=")]
    res = fit(prep1.distribution(), table1, cons)
    q = born_probabilities(table1, res.density())
    assert res.residual == l1_distance(prep1.distribution(), q)


def test_soundness_and_certificates():
    worst = 0.0
    for problem, rho0 in soundness_instances(40):
        res = constrained_l1_fit(problem)
        assert res.status is Status.CONVERGED
        assert res.min_eigenvalue >= -1e-9
        assert res.max_violation <= 1e-9
        worst = max(worst, res.residual)
    assert worst <= 1e-9


@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=1, max_value=4),
       st.floats(min_value=0.01, max_value=0.3))
def test_excluded_target_residual_lower_bound(table1, seed, rank, shortfall):
    # each correlator block costs at least its correlator change, and the singlet
    # overlap is (1 - czz - cxx - cyy)/4, so raising it by delta costs >= 4*delta/3
    rho = random_density(seed, rank)
    bound = overlap(rho, named_state("Psi-")) + shortfall
    if bound > 0.999:
        return
    res = fit(born_probabilities(table1, rho), table1, [LinearConstraint(PSI_MINUS, bound, ">=")])
    assert res.converged
    assert res.residual >= 4 * shortfall / 3 - 1e-9


def test_reference_solver_agrees_on_corpus():
    for problem in reference_corpus():
        a = constrained_l1_fit(problem)
        b = reference_l1_fit(problem)
        assert b.converged
        assert abs(a.residual - b.residual) <= 1e-6


def test_witness_is_a_state(table1, prep2):
    res = fit(prep2.distribution(), table1, [LinearConstraint(PSI_MINUS, 0.5, ">=")])
    w = np.linalg.eigvalsh(bloch_to_density(res.b_star, check=False))
    assert w[0] >= -1e-9
