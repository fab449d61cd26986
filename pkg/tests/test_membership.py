from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memberscope.io import builtin_settings, load_povm
from memberscope.membership import (MalformedRecordError, Partition, ReferenceSpec, Side,
                                    UnsolvablePovmError, bell_delta_conditions, decide,
                                    minimal_pure_povm, overlap_estimates, pure_violation, quadrant,
                                    segment_linear_constraints, solvable_general, solvable_pure,
                                    sweep, worst_perturbation)
from memberscope.povm import (BasisSetting, MeasurementRecord, born_probabilities,
                              povm_from_settings, simulate_counts)
from memberscope.states import (NAMED_VECTORS, fidelity_pure, maximally_mixed, named_state,
                                projector, random_density, random_pure_state, werner_state)

from .conftest import random_hermitian
from .known_operators import KERNEL_BASIS, PROJECTORS_CIRCULAR

AT, BELOW = Side.AT_LEAST, Side.BELOW
seeds = st.integers(min_value=0, max_value=2**32 - 1)
angle = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


@pytest.fixture(scope="module")
def two_basis_povm():
    return povm_from_settings(builtin_settings("table1")[:2], name="hv+diagonal")


# solvability --------------------------------------------------------------

@pytest.mark.parametrize("label", list(NAMED_VECTORS))
def test_three_basis_povm_solves_every_listed_reference(table1, label):
    assert solvable_pure(table1, named_state(label))
    assert solvable_general(table1, projector(named_state(label)))[0]


def test_informationally_complete_povm_is_vacuously_solvable():
    pauli = [BasisSetting(*a) for a in
             [(t1, p1, t2, p2) for (t1, p1) in [(0, 0), (math.pi / 8, math.pi / 4), (math.pi / 8, 0)]
              for (t2, p2) in [(0, 0), (math.pi / 8, math.pi / 4), (math.pi / 8, 0)]]]
    povm = povm_from_settings(pauli)
    assert povm.is_informationally_complete()
    assert povm.perturbations() == []
    assert solvable_general(povm, random_density(1)) == (True, 0.0)
    assert solvable_pure(povm, random_pure_state(1))


def test_missing_circular_basis_leaves_bell_overlaps_undetermined(two_basis_povm):
    for label in ("Psi-", "Psi+"):
        value, delta = pure_violation(two_basis_povm, named_state(label))
        assert value > 1e-3
        phi = named_state(label)
        assert abs(np.real(phi.conj() @ delta @ phi)) == pytest.approx(value)
        assert np.linalg.norm(delta) == pytest.approx(1.0)
        assert not solvable_pure(two_basis_povm, phi)


def test_replacement_basis_of_nine_basis_set_is_circular(table2):
    # the third basis of the nine-basis set is the circular product basis of the
    # three-basis set, so both Bell correlators remain measured
    got = table2.elements[8:12] * len(table2.settings)
    for g in got:
        assert sum(np.allclose(g, p, atol=1e-12) for p in PROJECTORS_CIRCULAR) == 1


def test_minimal_povm(table1):
    povm = minimal_pure_povm(named_state("Psi-"))
    assert povm.span_dimension() == 2
    assert np.allclose(povm.elements[0], projector(named_state("Psi-")))
    assert np.allclose(povm.elements[1], np.eye(4) - projector(named_state("Psi-")))
    assert solvable_pure(povm, named_state("Psi-"))
    assert not solvable_pure(povm, named_state("Psi+"))


@given(st.lists(st.tuples(angle, angle, angle, angle), min_size=1, max_size=4), seeds)
def test_pure_and_general_solvability_agree(angles, seed):
    povm = povm_from_settings([BasisSetting(*a) for a in angles])
    phi = random_pure_state(seed)
    general, worst = solvable_general(povm, projector(phi))
    value, _ = pure_violation(povm, phi)
    assert general == solvable_pure(povm, phi)
    assert worst == pytest.approx(value, abs=1e-10)


def test_worst_perturbation_dimension_check(table1):
    with pytest.raises(ValueError):
        worst_perturbation(table1, np.eye(2) / 2)


# Bell conditions -----------------------------------------------------------

@pytest.mark.parametrize("k", range(6))
def test_hand_entered_kernel_elements_satisfy_both_conditions(k):
    assert bell_delta_conditions(KERNEL_BASIS[k]) == (True, True)


def test_bell_conditions_examples():
    assert bell_delta_conditions(np.diag([0, 1, 0, -1])) == (False, False)
    assert bell_delta_conditions(np.diag([0, 1, -1, 0])) == (True, True)
    d = np.zeros((4, 4), dtype=complex)
    d[1, 2], d[2, 1] = 1j, -1j
    assert bell_delta_conditions(d) == (True, True)
    d = np.zeros((4, 4))
    d[1, 2] = d[2, 1] = 1.0
    assert bell_delta_conditions(d) == (False, False)


def test_bell_conditions_reject_wrong_size():
    with pytest.raises(ValueError):
        bell_delta_conditions(np.eye(2))


@given(seeds)
def test_bell_conditions_match_direct_evaluation(seed):
    rng = np.random.default_rng(seed)
    delta = random_hermitian(rng)
    # project half of the samples onto each condition so both branches are hit
    for label in ("Psi-", "Psi+")[: int(rng.integers(0, 3))]:
        phi = named_state(label)
        delta -= np.real(phi.conj() @ delta @ phi) * np.outer(phi, phi.conj())
    minus, plus = bell_delta_conditions(delta)
    for flag, label in ((minus, "Psi-"), (plus, "Psi+")):
        phi = named_state(label)
        assert flag == (abs(np.real(phi.conj() @ delta @ phi)) <= 0.5e-10)


# partitions ----------------------------------------------------------------

def test_reference_threshold_range():
    with pytest.raises(ValueError):
        ReferenceSpec.named("Psi-", 1.2)
    with pytest.raises(ValueError):
        ReferenceSpec("x", np.array([1, 1, 0, 0]), 0.5)


def test_partition_segments_are_exhaustive():
    part = Partition.of(("Psi-", 0.5), ("Psi+", 0.5), ("Phi+", 0.3))
    segs = list(part.segments())
    assert len(segs) == 8 == len(set(segs))
    assert part.label((AT, BELOW, AT)) == "F(Psi-)>=0.5 & F(Psi+)<0.5 & F(Phi+)>=0.3"


def test_eight_reference_partition_is_lazy():
    part = Partition.of(*((name, 0.5) for name in NAMED_VECTORS))
    assert sum(1 for _ in part.segments()) == 256
    with pytest.raises(ValueError):
        Partition.of(*((name, 0.5) for name in list(NAMED_VECTORS) + ["Psi-"]))


def test_quadrants():
    assert quadrant((AT, BELOW)) == "bottom-right"
    assert quadrant((BELOW, AT)) == "top-left"
    assert quadrant((AT, AT)) == "top-right"
    assert quadrant((BELOW, BELOW)) == "bottom-left"
    assert quadrant((AT,)) is None


def test_segment_constraints_square_the_threshold():
    part = Partition.of(("Psi-", 0.5), ("Psi+", 1.0))
    cons = segment_linear_constraints(part, (AT, BELOW))
    assert cons[0].bound == pytest.approx(0.25) and cons[0].direction == ">="
    assert cons[1].bound == pytest.approx(1.0) and cons[1].direction == "<="
    zero = segment_linear_constraints(Partition.of(("Psi-", 0.0)), (AT,))[0]
    assert zero.violation(maximally_mixed()) == 0.0


# decisions -----------------------------------------------------------------

def test_decide_prep1_half_half(table1, prep1):
    d = decide(prep1, table1, Partition.of(("Psi-", 0.5), ("Psi+", 0.5)))
    assert d.verdict == (AT, BELOW)
    assert d.residual_of((AT, BELOW)) <= 1e-7
    assert sorted(f.residual for f in d.fits)[1] >= 1e-4


def test_decide_prep2_half_half(table1, prep2):
    d = decide(prep2, table1, Partition.of(("Psi-", 0.5), ("Psi+", 0.5)))
    assert d.verdict == (BELOW, AT)


def test_decide_werner_exact(table1):
    p = born_probabilities(table1, werner_state(0.9))
    d = decide(p, table1, Partition.of(("Psi-", 0.5), ("Psi+", 0.5)))
    assert d.verdict == (AT, BELOW)
    assert d.verdict_label == "F(Psi-)>=0.5 & F(Psi+)<0.5"


def test_zero_thresholds_give_all_at_least(table1, prep1):
    d = decide(prep1, table1, Partition.of(("Psi-", 0.0), ("Psi+", 0.0)))
    assert d.verdict == (AT, AT)


def test_boundary_state_is_inconclusive(table1):
    # singlet overlap (3p + 1)/4 = 0.64 puts the state on the 0.8 threshold
    p = born_probabilities(table1, werner_state(0.52))
    d = decide(p, table1, Partition.of(("Psi-", 0.8), ("Psi+", 0.5)))
    assert not d.conclusive
    assert d.verdict_label == "inconclusive"


def test_decide_refuses_unsolvable_povm(two_basis_povm, prep1):
    rec = MeasurementRecord(two_basis_povm.settings, prep1.probabilities[:2])
    with pytest.raises(UnsolvablePovmError):
        decide(rec, two_basis_povm, Partition.of(("Psi-", 0.5), ("Psi+", 0.5)))


def test_decide_rejects_mismatched_record(table1, prep1):
    other = MeasurementRecord(tuple(reversed(prep1.settings)), prep1.probabilities)
    with pytest.raises(MalformedRecordError):
        decide(other, table1, Partition.of(("Psi-", 0.5)))
    with pytest.raises(MalformedRecordError):
        decide(np.full(6, 1 / 6), table1, Partition.of(("Psi-", 0.5)))


def test_sweep_product_grid_order(table1, prep1):
    out = sweep(prep1, table1, [0.5, 0.95], [0.2, 0.5])
    assert [(d.partition.refs[0].epsilon, d.partition.refs[1].epsilon) for d in out] == \
        [(0.5, 0.2), (0.5, 0.5), (0.95, 0.2), (0.95, 0.5)]
    with pytest.raises(ValueError):
        sweep(prep1, table1, [0.5], [0.5, 0.6], paired=True)


def test_single_cell_sweep_matches_decide(table1, prep2):
    cell = sweep(prep2, table1, [0.2], [0.95])[0]
    direct = decide(prep2, table1, Partition.of(("Psi-", 0.2), ("Psi+", 0.95)))
    assert cell.verdict == direct.verdict == (AT, BELOW)


def test_raising_first_threshold_crosses_once(table1, prep1):
    grid = list(np.round(np.linspace(0.05, 0.99, 12), 4))
    rows = sweep(prep1, table1, grid, [0.3])
    sides = [d.verdict[0] for d in rows if d.conclusive]
    assert len(sides) == len(rows)
    flips = sum(a != b for a, b in zip(sides, sides[1:]))
    assert flips == 1 and sides[0] is AT and sides[-1] is BELOW


def test_random_state_verdicts_match_direct_fidelities(table1):
    rng = np.random.default_rng(11)
    trials = 0
    while trials < 25:
        rank = int(rng.integers(1, 6))
        rho = werner_state(rng.uniform()) if rank == 5 else random_density(int(rng.integers(2**31)), rank)
        eps = rng.uniform(0.05, 0.95, 2)
        f = (fidelity_pure(rho, named_state("Psi-")), fidelity_pure(rho, named_state("Psi+")))
        if min(abs(f[0] - eps[0]), abs(f[1] - eps[1])) < 0.02:
            continue
        trials += 1
        part = Partition.of(("Psi-", eps[0]), ("Psi+", eps[1]))
        assert decide(born_probabilities(table1, rho), table1, part).verdict == part.classify(f)


# overlap oracle -------------------------------------------------------------

def test_overlap_estimates_singlet(table1):
    rec = simulate_counts(projector(named_state("Psi-")), table1.settings, 0)
    est = overlap_estimates(rec)
    assert est["Psi-"] == pytest.approx(1.0, abs=1e-12)
    assert est["Psi+"] == pytest.approx(0.0, abs=1e-6)


@given(seeds, st.integers(min_value=1, max_value=4))
def test_overlap_estimates_match_exact_fidelities(seed, rank):
    rho = random_density(seed, rank)
    rec = simulate_counts(rho, builtin_settings("table1"), 0)
    est = overlap_estimates(rec)
    for label in ("Psi-", "Psi+", "Phi-", "Phi+"):
        assert est[label] == pytest.approx(fidelity_pure(rho, named_state(label)), abs=1e-6)


def test_overlap_estimates_need_all_three_bases(prep1):
    rec = MeasurementRecord(prep1.settings[:2], prep1.probabilities[:2])
    with pytest.raises(MalformedRecordError):
        overlap_estimates(rec)
