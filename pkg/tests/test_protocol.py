import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bictele.protocol import (
    REGISTER,
    ChannelLayout,
    InputQubit,
    ProtocolError,
    ProtocolOutcome,
    all_outcomes,
    alice_unitary,
    bell_basis,
    bell_states,
    brown_state,
    measure_parties,
    outcome_probability,
    prepare_system,
    residual_after_bell,
    run_protocol,
)
from bictele.qsim import StateVector, ValidationError, apply, factorize_bipartite, fidelity, schmidt_coefficients

import oracles
from conftest import S

R = 1 / (2 * np.sqrt(2))


class TestConstants:
    def test_bell_orthonormal(self):
        vecs = np.array([s.amplitudes for s in bell_states()])
        np.testing.assert_allclose(vecs.conj() @ vecs.T, np.eye(4), atol=1e-15)
        assert abs(np.vdot(vecs[0], vecs[1])) < 1e-15

    def test_bell_three(self):
        np.testing.assert_allclose(bell_states()[2].amplitudes, [0, S, S, 0], atol=1e-15)

    def test_bell_basis_labels(self):
        assert bell_basis().labels == (1, 2, 3, 4)

    def test_brown_amplitudes_exact(self):
        psi = brown_state()
        assert psi.labels == ("A1", "A2", "B1", "B2", "C")
        for x in range(32):
            bits = format(x, "05b")
            assert psi.amplitude(bits) == pytest.approx(oracles.BROWN.get(bits, 0), abs=1e-15), bits

    def test_brown_named_terms(self):
        assert brown_state().amplitude("00101") == pytest.approx(R, abs=1e-15)
        assert brown_state().amplitude("00110") == pytest.approx(-R, abs=1e-15)
        assert np.sum(np.abs(brown_state().amplitudes) ** 2) == pytest.approx(1, abs=1e-14)

    @pytest.mark.parametrize("qubit", ["A1", "A2", "B1", "B2", "C"])
    def test_brown_single_qubit_marginals_maximally_mixed(self, qubit):
        c = schmidt_coefficients(brown_state(), [qubit])
        np.testing.assert_allclose(c**2, [0.5, 0.5], atol=1e-10)

    def test_brown_first_qubit_cut_not_product(self):
        # oracle: SVD of the raw 2x16 amplitude matrix
        m = np.zeros((2, 16))
        for bits, amp in oracles.BROWN.items():
            m[int(bits[0]), int(bits[1:], 2)] = amp
        expected = np.linalg.svd(m, compute_uv=False)
        split = factorize_bipartite(brown_state(), ["A1"])
        assert not split.is_product
        np.testing.assert_allclose(split.schmidt, expected, atol=1e-12)
        np.testing.assert_allclose(expected, [S, S], atol=1e-12)

    def test_alice_unitary_matrix(self):
        expected = [[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0]]
        u = alice_unitary()
        np.testing.assert_array_equal(u.matrix, expected)
        assert u.targets == ("A1", "A2")
        np.testing.assert_allclose(u.matrix @ u.matrix.conj().T, np.eye(4), atol=1e-15)

    def test_alice_unitary_determinant(self):
        # hand expansion: rows pick columns (1,2,3,0), a 4-cycle of sign -1,
        # times the entry product 1*1*1*(-1) = -1, so det = +1
        assert np.linalg.det(alice_unitary().matrix.real) == pytest.approx(1.0, abs=1e-12)

    def test_transformed_channel(self):
        out = apply(brown_state(), alice_unitary())
        for x in range(32):
            bits = format(x, "05b")
            assert out.amplitude(bits) == pytest.approx(oracles.TRANSFORMED.get(bits, 0), abs=1e-15), bits
        assert out.amplitude("00000") == pytest.approx(R)
        assert out.amplitude("11110") == pytest.approx(R)
        assert out.amplitude("11101") == pytest.approx(-R)

    def test_layout(self):
        assert ChannelLayout().positions == {"A1": 2, "A2": 3, "B1": 4, "B2": 5, "C": 6}
        with pytest.raises(ValidationError):
            ChannelLayout({"A1": 0, "A2": 0, "B1": 1, "B2": 2, "C": 3})


class TestInputs:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            InputQubit("Alice", 1, 1)

    def test_rejects_unknown_owner(self):
        with pytest.raises(ValidationError):
            InputQubit("Eve", 1, 0)

    def test_degenerate_inputs_allowed(self):
        assert InputQubit("Bob", 0, 1).c1 == 1

    def test_outcome_validation(self):
        with pytest.raises(ValidationError):
            ProtocolOutcome(0, 1, 0)
        with pytest.raises(ValidationError):
            ProtocolOutcome(1, 1, 2)
        assert ProtocolOutcome.parse("2,3,1") == ProtocolOutcome(2, 3, 1)
        assert len(set(all_outcomes())) == 32


class TestPrepareSystem:
    def test_register_and_golden_amplitude(self):
        s = prepare_system(InputQubit("Alice", 1, 0), InputQubit("Bob", 1, 0))
        assert s.labels == REGISTER
        assert s.amplitude("0000101") == pytest.approx(R, abs=1e-15)
        assert np.linalg.norm(s.amplitudes) == pytest.approx(1, abs=1e-12)

    def test_input_amplitude_factor(self, generic_pair):
        chi_a, chi_b = generic_pair
        s = prepare_system(chi_a, chi_b)
        assert s.amplitude("0000101") == pytest.approx(chi_a.c0 * chi_b.c0 * R, abs=1e-15)

    def test_a_is_unentangled(self, generic_pair):
        split = factorize_bipartite(prepare_system(*generic_pair), ["a"])
        assert split.is_product

    def test_owner_check(self):
        with pytest.raises(ValidationError):
            prepare_system(InputQubit("Bob", 1, 0), InputQubit("Bob", 1, 0))


class TestResiduals:
    @pytest.mark.parametrize("i,j", [(1, 1), (2, 3), (4, 2), (3, 4)])
    def test_bell_residual_matches_loop_oracle(self, generic_pair, i, j):
        chi_a, chi_b = generic_pair
        p, state = residual_after_bell(chi_a, chi_b, i, j)
        assert state.labels == ("A2", "B1", "C")
        ref = oracles.residual_a2_b1_c(chi_a.amplitudes, chi_b.amplitudes, i, j)
        vec = np.array([ref.get(format(x, "03b"), 0) for x in range(8)])
        assert p == pytest.approx(np.vdot(vec, vec).real, abs=1e-14)
        np.testing.assert_allclose(state.amplitudes * np.sqrt(p), vec, atol=1e-14)

    def test_residual_11_against_printed_expansion(self, generic_pair):
        """The printed (1,1) residual agrees except for the sign of the a1 b1 |011> term."""
        chi_a, chi_b = generic_pair
        a0, a1, b0, b1 = chi_a.c0, chi_a.c1, chi_b.c0, chi_b.c1
        printed = np.zeros(8, dtype=complex)
        for bits, coeff in [
            ("000", a0 * b0), ("101", a0 * b0),
            ("100", a0 * b1), ("001", -a0 * b1),
            ("010", a1 * b0), ("111", -a1 * b0),
            ("110", a1 * b1), ("011", -a1 * b1),
        ]:
            printed[int(bits, 2)] += coeff / (4 * np.sqrt(2))
        p, state = residual_after_bell(chi_a, chi_b, 1, 1)
        sim = state.amplitudes * np.sqrt(p)
        diff = np.flatnonzero(np.abs(sim - printed) > 1e-12)
        assert diff.tolist() == [0b011]
        assert sim[0b011] == pytest.approx(+a1 * b1 / (4 * np.sqrt(2)), abs=1e-14)

    def test_outcome_110_residual(self, generic_pair):
        chi_a, chi_b = generic_pair
        res = measure_parties(chi_a, chi_b, forced=ProtocolOutcome(1, 1, 0))
        expected = np.kron(chi_b.amplitudes, chi_a.amplitudes) / (4 * np.sqrt(2))
        np.testing.assert_allclose(res.state.amplitudes * np.sqrt(res.probability), expected, atol=1e-14)

    def test_outcome_111_residual(self, generic_pair):
        chi_a, chi_b = generic_pair
        a0, a1, b0, b1 = chi_a.c0, chi_a.c1, chi_b.c0, chi_b.c1
        res = measure_parties(chi_a, chi_b, forced=ProtocolOutcome(1, 1, 1))
        expected = np.kron([-b1, b0], [a0, -a1]) / (4 * np.sqrt(2))
        np.testing.assert_allclose(res.state.amplitudes * np.sqrt(res.probability), expected, atol=1e-14)


class TestOutcomeProbability:
    def test_basis_inputs_every_outcome(self):
        chi_a, chi_b = InputQubit("Alice", 1, 0), InputQubit("Bob", 1, 0)
        for o in all_outcomes():
            assert outcome_probability(chi_a, chi_b, o) == pytest.approx(1 / 32, abs=1e-12)

    @pytest.mark.parametrize(
        "a,b,o",
        [
            ((1, 0), (1, 0), (1, 1, 0)),
            ((1, 0), (1, 0), (4, 3, 1)),
            ((S, S), (S, S), (1, 1, 0)),
            ((S, 1j * S), (0, 1), (2, 4, 1)),
        ],
    )
    def test_against_projector_oracle(self, a, b, o):
        ref, proj = oracles.outcome_probability(np.array(a), np.array(b), *o)
        np.testing.assert_allclose(proj @ proj, proj, atol=1e-14)
        assert np.trace(proj).real == pytest.approx(4)
        assert ref == pytest.approx(1 / 32, abs=1e-14)
        got = outcome_probability(InputQubit("Alice", *a), InputQubit("Bob", *b), ProtocolOutcome(*o))
        assert got == pytest.approx(ref, abs=1e-14)

    def test_sum_is_one(self, generic_pair):
        total = sum(outcome_probability(*generic_pair, o) for o in all_outcomes())
        assert total == pytest.approx(1, abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), idx=st.integers(0, 31))
    def test_input_independent(self, seed, idx):
        rng = np.random.default_rng(seed)
        chi_a, chi_b = InputQubit.random("Alice", rng), InputQubit.random("Bob", rng)
        o = list(all_outcomes())[idx]
        assert outcome_probability(chi_a, chi_b, o) == pytest.approx(1 / 32, abs=1e-12)


class TestRunProtocol:
    def test_outcome_110(self, generic_pair):
        run = run_protocol(*generic_pair, forced=ProtocolOutcome(1, 1, 0))
        np.testing.assert_array_equal(run.correction_a2.matrix, np.eye(2))
        np.testing.assert_array_equal(run.correction_b1.matrix, np.eye(2))
        assert run.fidelity_b1 == pytest.approx(1, abs=1e-10)
        assert run.fidelity_a2 == pytest.approx(1, abs=1e-10)
        assert run.joint_probability == pytest.approx(1 / 32, abs=1e-12)

    def test_outcome_111(self, generic_pair):
        chi_a, chi_b = generic_pair
        run = run_protocol(chi_a, chi_b, forced=ProtocolOutcome(1, 1, 1))
        # pre-correction factors, compared up to phase
        assert fidelity(run.pre_a2, StateVector([-chi_b.c1, chi_b.c0], ["A2"])) == pytest.approx(1, abs=1e-12)
        assert fidelity(run.pre_b1, StateVector([chi_a.c0, -chi_a.c1], ["B1"])) == pytest.approx(1, abs=1e-12)
        np.testing.assert_array_equal(run.correction_b1.matrix, np.diag([1, -1]))
        np.testing.assert_array_equal(run.correction_a2.matrix, [[0, -1j], [1j, 0]])
        assert run.succeeded

    def test_sampled_mode_is_seeded(self, generic_pair):
        a = run_protocol(*generic_pair, seed=11)
        b = run_protocol(*generic_pair, seed=11)
        assert a.outcome == b.outcome
        assert a.succeeded

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_every_outcome_teleports(self, seed):
        rng = np.random.default_rng(seed)
        chi_a, chi_b = InputQubit.random("Alice", rng), InputQubit.random("Bob", rng)
        for o in all_outcomes():
            run = run_protocol(chi_a, chi_b, forced=o)
            assert run.fidelity_b1 >= 1 - 1e-10
            assert run.fidelity_a2 >= 1 - 1e-10

    def test_degenerate_inputs(self):
        for a in [(1, 0), (0, 1)]:
            for b in [(0, 1), (1, 0)]:
                for o in all_outcomes():
                    assert run_protocol(InputQubit("Alice", *a), InputQubit("Bob", *b), forced=o).succeeded

    def test_protocol_error_is_runtime_error(self):
        assert issubclass(ProtocolError, RuntimeError)
