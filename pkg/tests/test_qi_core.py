import numpy as np
import pytest

from qi_lab import pinem, qi_core
from qi_lab.errors import ValidationError

from conftest import matching_random_unitary, random_product_state

# frozen with scipy.special.jv: J_0(1)^2
J0_OF_1_SQUARED = 0.5855274995136641


def test_identity_single_eigenstate_is_certain():
    state = qi_core.ProductState([qi_core.SystemState.single(0)])
    op = qi_core.IdentityOperator([[0, 1, 2]])
    sel = qi_core.FinalSelector({0: 0})
    assert qi_core.direct_probability(state, op, sel) == pytest.approx(1.0, abs=1e-15)
    breakdown = qi_core.decompose(state, op, sel)
    assert breakdown.terms == {frozenset(): 1.0, frozenset({0}): 0.0}


def test_bessel_comb_identity_probe_hits_zero_rung():
    # comb C_n = J_n(1), probe coupling 0 (identity), final rung 0
    state = pinem.initial_amplitudes(pinem.ModulationParams(0.5))
    op = pinem.PinemLadderOperator(pinem.InteractionCoupling(0.0), 30)
    p = qi_core.direct_probability(
        qi_core.ProductState([state]), op, qi_core.FinalSelector({0: 0}))
    assert p == pytest.approx(J0_OF_1_SQUARED, abs=1e-12)


def test_uniform_two_level_swap_by_hand():
    # (1/2) sum_ab |ab> under swap; <01| picks C_1 C_0 = 1/2, squared 1/4
    u = qi_core.SystemState([0, 1], [2 ** -0.5, 2 ** -0.5])
    state = qi_core.ProductState([u, u])
    op = qi_core.swap_operator([0, 1])
    p = qi_core.direct_probability(state, op, qi_core.FinalSelector({0: 0, 1: 1}))
    assert p == pytest.approx(0.25, abs=1e-14)


def test_decompose_completeness_random_configs(rng):
    worst = 0.0
    for i in range(60):
        state = random_product_state(rng)
        op = matching_random_unitary(state, seed=1000 + i)
        fixed = {0: int(rng.integers(0, state.systems[0].dim))}
        sel = qi_core.FinalSelector(fixed)
        direct = qi_core.direct_probability(state, op, sel)
        total = qi_core.decompose(state, op, sel).total()
        worst = max(worst, abs(total - direct) / max(1.0, direct))
        assert -1e-12 <= direct <= 1.0 + op.truncation_tol + 1e-12
    assert worst < 1e-12


def test_three_systems_all_subsets_present(rng):
    state = random_product_state(rng, n_systems=3, max_dim=2)
    op = matching_random_unitary(state, seed=7)
    sel = qi_core.FinalSelector({0: 0, 1: 1, 2: 0})
    breakdown = qi_core.decompose(state, op, sel)
    assert len(breakdown.terms) == 8
    assert all(isinstance(v, float) for v in breakdown.terms.values())
    nontrivial = [d for d, v in breakdown.terms.items() if d and abs(v) > 1e-14]
    assert len(nontrivial) >= 5  # a generic unitary interferes on every subset


def test_single_eigenstate_systems_have_no_interference():
    systems = [qi_core.SystemState.single(0), qi_core.SystemState.single(1)]
    state = qi_core.ProductState(systems)
    op = qi_core.random_unitary_operator([[0, 1], [0, 1]], seed=3)
    sel = qi_core.FinalSelector({0: 1, 1: 0})
    breakdown = qi_core.decompose(state, op, sel)
    direct = qi_core.direct_probability(state, op, sel)
    for d, v in breakdown.terms.items():
        if d:
            assert v == 0.0
    assert breakdown.no_qi == pytest.approx(direct, abs=1e-15)


def test_unshaped_nullity_zero_amplitude_entries():
    # system 1 carries a second label with exactly zero amplitude
    shaped = qi_core.SystemState([0, 1], [2 ** -0.5, 2 ** -0.5])
    unshaped = qi_core.SystemState([0, 1], [1.0, 0.0])
    state = qi_core.ProductState([shaped, unshaped])
    op = qi_core.random_unitary_operator([[0, 1], [0, 1]], seed=5)
    breakdown = qi_core.decompose(state, op, qi_core.FinalSelector({0: 0}))
    assert breakdown.terms[frozenset({1})] == 0.0
    assert breakdown.terms[frozenset({0, 1})] == 0.0
    assert breakdown.terms[frozenset({0})] != 0.0


def test_no_qi_term_invariant_under_manual_phase_scramble(rng):
    state = random_product_state(rng, n_systems=2, max_dim=3)
    op = matching_random_unitary(state, seed=17)
    sel = qi_core.FinalSelector({0: 0})
    reference = qi_core.decompose(state, op, sel).no_qi
    target = state.systems[1]
    for _ in range(5):
        phases = rng.uniform(0, 2 * np.pi, size=target.dim)
        scrambled = np.asarray(target.amplitudes) * np.exp(1j * phases)
        new_state = qi_core.ProductState(
            [state.systems[0], qi_core.SystemState(target.labels, scrambled.tolist())])
        got = qi_core.decompose(new_state, op, sel).no_qi
        assert abs(got - reference) < 1e-15


def test_marginal_spectrum_identity_returns_populations(rng):
    amps = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    amps /= np.linalg.norm(amps)
    sys0 = qi_core.SystemState([0, 1, 2], amps.tolist())
    state = qi_core.ProductState([sys0, qi_core.SystemState.single(0)])
    op = qi_core.IdentityOperator([[0, 1, 2], [0]])
    spectrum = qi_core.marginal_spectrum(state, op, 0, [0, 1, 2])
    for label in (0, 1, 2):
        assert spectrum[label].total() == pytest.approx(sys0.population(label), abs=1e-14)
    assert sum(b.total() for b in spectrum.values()) == pytest.approx(1.0, abs=1e-12)


def test_marginal_spectrum_pinem_matches_module_spectrum():
    params = pinem.ModulationParams(0.5)
    coupling = pinem.InteractionCoupling(0.7)
    spec = pinem.spectrum(params, coupling)
    state = qi_core.ProductState([pinem.initial_amplitudes(params)])
    op = pinem.PinemLadderOperator(coupling, spec.half_width)
    labels = range(-10, 11)
    marginal = qi_core.marginal_spectrum(state, op, 0, labels)
    for n in labels:
        assert marginal[n].total() == pytest.approx(spec.with_qi_at(n), abs=1e-12)
        assert marginal[n].no_qi == pytest.approx(spec.without_qi_at(n), abs=1e-12)


def test_decompose_is_deterministic(rng):
    state = random_product_state(rng, n_systems=2)
    op = matching_random_unitary(state, seed=23)
    sel = qi_core.FinalSelector({1: 0})
    a = qi_core.decompose(state, op, sel)
    b = qi_core.decompose(state, op, sel)
    assert a.terms == b.terms


def test_matrix_operator_block_matches_scalar_amplitude(rng):
    op = qi_core.random_unitary_operator([[0, 1], [0, 1, 2]], seed=9)
    initials = np.asarray([[0, 0], [1, 2], [0, 1]])
    finals = np.asarray([[1, 0], [0, 2]])
    block = op.amplitude_block(initials, finals)
    for i, a in enumerate(initials):
        for j, f in enumerate(finals):
            assert block[i, j] == op.amplitude(tuple(a), tuple(f))


def test_operator_unitarity_defect_small(rng):
    op = qi_core.random_unitary_operator([[0, 1], [0, 1]], seed=2)
    assert op.unitarity_defect((0, 1)) < 1e-12
    pop = pinem.PinemLadderOperator(pinem.InteractionCoupling(0.7), 40)
    assert pop.unitarity_defect((0,)) < 1e-10


class TestValidation:
    def test_rejects_unnormalized_state(self):
        with pytest.raises(ValidationError, match="not normalized"):
            qi_core.SystemState([0, 1], [1.0, 1.0])

    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValidationError, match="distinct"):
            qi_core.SystemState([0, 0], [2 ** -0.5, 2 ** -0.5])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError, match="length"):
            qi_core.SystemState([0, 1], [1.0])

    def test_rejects_empty_product(self):
        with pytest.raises(ValidationError):
            qi_core.ProductState([])

    def test_rejects_initial_label_outside_window(self):
        state = qi_core.ProductState([qi_core.SystemState.single(5)])
        op = qi_core.IdentityOperator([[0, 1]])
        with pytest.raises(ValidationError, match="outside the operator window"):
            qi_core.direct_probability(state, op, qi_core.FinalSelector({0: 0}))

    def test_rejects_fixed_label_outside_window(self):
        state = qi_core.ProductState([qi_core.SystemState.single(0)])
        op = qi_core.IdentityOperator([[0, 1]])
        with pytest.raises(ValidationError, match="outside window"):
            qi_core.direct_probability(state, op, qi_core.FinalSelector({0: 9}))

    def test_rejects_system_count_mismatch(self):
        state = qi_core.ProductState([qi_core.SystemState.single(0)])
        op = qi_core.IdentityOperator([[0], [0]])
        with pytest.raises(ValidationError, match="systems"):
            qi_core.decompose(state, op, qi_core.FinalSelector())

    def test_dimension_cap_fails_fast(self):
        state = qi_core.ProductState(
            [qi_core.SystemState([0, 1], [2 ** -0.5, 2 ** -0.5])] * 2)
        op = qi_core.IdentityOperator([[0, 1], [0, 1]])
        with pytest.raises(ValidationError, match="cap"):
            qi_core.decompose(state, op, qi_core.FinalSelector(), cap=3)

    def test_selector_rejects_bad_index(self):
        with pytest.raises(ValidationError):
            qi_core.FinalSelector({-1: 0})
