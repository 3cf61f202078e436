import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqnegf.pauli import Dyad, OperatorSum, OperatorTerm, PauliString, build_AdagA, build_h0, to_dense
from vqnegf.qsim import (GATE_KINDS, Circuit, Gate, QState, apply_circuit, apply_gate_array,
                         apply_generator_array, apply_operator_sum, apply_shift, expectation, gate_matrix,
                         hadamard_array, rotation_matrix, transition_amplitude)

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0 + 0j, -1.0]),
}


def random_state(rng, n):
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return QState.normalized(a)


def embed(n, gate):
    """Dense ``2^n`` unitary of a gate by explicit basis enumeration (qubit 0 = MSB)."""
    u = gate_matrix(gate)
    N = 2**n
    out = np.zeros((N, N), dtype=complex)
    qs = gate.qubits()
    for col in range(N):
        bits = [(col >> (n - 1 - q)) & 1 for q in qs]
        sub = int("".join(map(str, bits)), 2)
        for r in range(len(u)):
            row = col
            for k, q in enumerate(qs):
                b = (r >> (len(qs) - 1 - k)) & 1
                row = row & ~(1 << (n - 1 - q)) | (b << (n - 1 - q))
            out[row, col] += u[r, sub]
    return out


def op(n, *terms):
    return OperatorSum(n, tuple(OperatorTerm(c, PauliString(p)) for c, p in terms))


# --- states and gates -----------------------------------------------------------------


def test_qstate_validation_and_immutability():
    with pytest.raises(ValueError):
        QState(np.ones(3))
    s = QState.zero(2)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 2
    assert s.n_qubits == 2 and s.norm == 1


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CRY", 0, angle=0.1)
    with pytest.raises(ValueError):
        Gate("CRZ", 1, control=1, angle=0.1)
    with pytest.raises(ValueError):
        Gate("RY", 0, control=1, angle=0.1)
    with pytest.raises(ValueError):
        Gate("RX", 0)
    with pytest.raises(ValueError):
        Gate("H", 0)
    with pytest.raises(ValueError):
        Circuit(2, (Gate("RY", 2, angle=1.0),))


def test_ry_pi_flips_zero():
    out = apply_circuit(QState.zero(1), Circuit(1, (Gate("RY", 0, angle=np.pi),)))
    np.testing.assert_allclose(out.amplitudes, [0, 1], atol=1e-15)


def test_empty_circuit_is_identity():
    s = random_state(np.random.default_rng(0), 3)
    np.testing.assert_array_equal(apply_circuit(s, Circuit(3)).amplitudes, s.amplitudes)


def test_crz_inactive_control():
    out = apply_circuit(QState.zero(2), Circuit(2, (Gate("CRZ", 1, control=0, angle=0.9),)))
    np.testing.assert_array_equal(out.amplitudes, [1, 0, 0, 0])


@pytest.mark.parametrize("kind,gen", [("RX", "X"), ("RY", "Y"), ("RZ", "Z")])
@pytest.mark.parametrize("phi", [0.0, 0.3, -1.7, np.pi, 5.0])
def test_rotation_convention(kind, gen, phi):
    expected = np.cos(phi / 2) * np.eye(2) - 1j * np.sin(phi / 2) * PAULI[gen]
    np.testing.assert_allclose(rotation_matrix(kind, phi), expected, atol=1e-12)


@pytest.mark.parametrize("kind,gen", [("CRY", "Y"), ("CRZ", "Z")])
def test_controlled_convention(kind, gen):
    phi = 0.77
    u = np.cos(phi / 2) * np.eye(2) - 1j * np.sin(phi / 2) * PAULI[gen]
    expected = np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), u]])
    np.testing.assert_allclose(gate_matrix(Gate(kind, 1, control=0, angle=phi)), expected, atol=1e-12)


gate_strategy = st.tuples(st.sampled_from(GATE_KINDS), st.integers(0, 3), st.integers(0, 3),
                          st.floats(-7, 7))


def _gate(spec, n):
    kind, t, c, a = spec
    t %= n
    if kind in ("CRY", "CRZ"):
        c = (t + 1 + c % (n - 1)) % n
        return Gate(kind, t, control=c, angle=a)
    return Gate(kind, t, angle=None if kind == "X" else a)


@given(st.lists(gate_strategy, max_size=12), st.integers(2, 4), st.integers(0, 1000))
def test_kernels_match_dense_embedding(specs, n, seed):
    gates = [_gate(s, n) for s in specs]
    psi = random_state(np.random.default_rng(seed), n)
    U = np.eye(2**n)
    for g in gates:
        U = embed(n, g) @ U
    out = apply_circuit(psi, Circuit(n, gates))
    np.testing.assert_allclose(out.amplitudes, U @ psi.amplitudes, atol=1e-12)


@settings(max_examples=100)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.just(n), st.lists(gate_strategy, max_size=50))),
       st.integers(0, 2**32 - 1))
def test_unitarity(nspecs, seed):
    n, specs = nspecs
    gates = [_gate(s, n) for s in specs if n > 1 or s[0] not in ("CRY", "CRZ")]
    out = apply_circuit(random_state(np.random.default_rng(seed), n), Circuit(n, gates))
    assert abs(out.norm - 1) < 1e-10


@given(st.sampled_from(("RX", "RY", "RZ", "CRY", "CRZ")), st.floats(-3, 3), st.integers(0, 100))
def test_adjoint_and_generator(kind, angle, seed):
    n = 3
    g = Gate(kind, 2, control=0 if kind.startswith("C") else None, angle=angle)
    psi = random_state(np.random.default_rng(seed), n).amplitudes
    back = apply_gate_array(apply_gate_array(psi, g, n), g, n, adjoint=True)
    np.testing.assert_allclose(back, psi, atol=1e-13)
    h = 1e-6
    up = apply_gate_array(psi, Gate(kind, 2, g.control, angle + h), n)
    dn = apply_gate_array(psi, Gate(kind, 2, g.control, angle - h), n)
    deriv = apply_gate_array(apply_generator_array(psi, g, n), g, n)
    np.testing.assert_allclose(deriv, (up - dn) / (2 * h), atol=1e-8)


def test_batched_application_matches_rows():
    rng = np.random.default_rng(5)
    batch = np.array([random_state(rng, 3).amplitudes for _ in range(4)])
    g = Gate("CRY", 0, control=2, angle=1.1)
    out = apply_gate_array(batch, g, 3)
    for row_in, row_out in zip(batch, out):
        np.testing.assert_allclose(apply_gate_array(row_in, g, 3), row_out)


def test_hadamard_array():
    out = hadamard_array(np.array([1, 0, 0, 0], dtype=complex), 2, (0, 1))
    np.testing.assert_allclose(out, [0.5] * 4)


# --- shifts ------------------------------------------------------------------------------


def test_shift_examples():
    np.testing.assert_array_equal(apply_shift(QState.basis(2, 3), 2).amplitudes, [1, 0, 0, 0])
    np.testing.assert_array_equal(apply_shift(QState.basis(2, 0), 2, adjoint=True).amplitudes, [0, 0, 0, 1])
    s = QState(np.array([1, 0, 1, 0]) / np.sqrt(2))
    np.testing.assert_allclose(apply_shift(s, 2).amplitudes, np.array([0, 1, 0, 1]) / np.sqrt(2))


def test_shift_window_validation():
    with pytest.raises(ValueError):
        apply_shift(QState.zero(2), 3)
    with pytest.raises(ValueError):
        apply_shift(QState.zero(3), 2, offset=2)


@given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n), st.integers(0, n - 1))),
       st.integers(0, 1000))
def test_shift_group_law(nmo, seed):
    n, m, off = nmo
    off = min(off, n - m)
    s = random_state(np.random.default_rng(seed), n)
    out = s
    for _ in range(2**m):
        out = apply_shift(out, m, offset=off)
    assert np.array_equal(out.amplitudes, s.amplitudes)
    back = apply_shift(apply_shift(s, m, offset=off), m, adjoint=True, offset=off)
    assert np.array_equal(back.amplitudes, s.amplitudes)


# --- operator sums ------------------------------------------------------------------------


def test_identity_operator():
    s = random_state(np.random.default_rng(1), 2)
    np.testing.assert_allclose(apply_operator_sum(s, op(2, (1.0, "II"))), s.amplitudes)


def test_projector_annihilates_one():
    out = apply_operator_sum(QState.basis(1, 1), op(1, (0.5, "I"), (0.5, "Z")))
    np.testing.assert_array_equal(out, [0, 0])


def test_h0_matvec():
    t0 = 0.8
    out = apply_operator_sum(QState.basis(2, 1), build_h0(2, t0))
    np.testing.assert_allclose(out, t0 * np.array([-1, 2, -1, 0]), atol=1e-15)


@given(st.integers(0, 1000), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_operator_sum_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    o = OperatorSum(3, (OperatorTerm(0.3 - 1j, PauliString("XYZ"), 2, 1),
                        OperatorTerm(2.0, PauliString("IIX"), 3, 0, Dyad(1, 2, 2, 1))))
    p1, p2 = random_state(rng, 3).amplitudes, random_state(rng, 3).amplitudes
    lhs = apply_operator_sum(QState(a * p1 + b * p2), o) if abs(a) + abs(b) > 0 else np.zeros(8)
    rhs = a * apply_operator_sum(QState(p1), o) + b * apply_operator_sum(QState(p2), o)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_operator_sum_matches_dense():
    rng = np.random.default_rng(2)
    o = build_h0(4, 1.1)
    s = random_state(rng, 4)
    np.testing.assert_allclose(apply_operator_sum(s, o), to_dense(o) @ s.amplitudes, atol=1e-13)


# --- expectations ------------------------------------------------------------------------


def test_z_expectations():
    z = op(1, (1.0, "Z"))
    assert expectation(QState.zero(1), z) == 1.0
    plus = QState(np.array([1, 1]) / np.sqrt(2))
    assert abs(expectation(plus, z.with_hint(True))) < 1e-15


def test_gram_expectation_matches_norm():
    n = 4
    rng = np.random.default_rng(4)
    pot = 0.1 * np.sin(np.linspace(0, 3, 16))
    sig = (-0.2 - 0.4j, -0.3 - 0.1j)
    G = build_AdagA(n, 0.3, 1e-3, 1.0, pot, sig)
    A = (0.3 + 1e-3j) * np.eye(16) - to_dense(build_h0(n, 1.0)) - np.diag(pot)
    A[0, 0] -= sig[0]
    A[-1, -1] -= sig[1]
    for _ in range(5):
        s = random_state(rng, n)
        val = expectation(s, G)
        assert isinstance(val, float)
        assert abs(val - np.linalg.norm(A @ s.amplitudes) ** 2) < 1e-10


def test_hermitian_flag_guards_imaginary_results():
    bad = OperatorSum(1, (OperatorTerm(1j, PauliString("Z")),), hermitian_hint=True)
    with pytest.raises(ArithmeticError):
        expectation(QState.zero(1), bad)
    assert expectation(QState.zero(1), bad.with_hint(False)) == 1j


def test_transition_amplitudes():
    I2 = op(1, (1.0, "I"))
    assert transition_amplitude(QState.zero(1), I2, QState.zero(1)) == 1
    assert transition_amplitude(QState.zero(1), I2, QState.basis(1, 1)) == 0
    with pytest.raises(ValueError):
        transition_amplitude(QState.zero(1), I2, QState.zero(2))


def test_transition_amplitude_row():
    rng = np.random.default_rng(8)
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    terms = tuple(OperatorTerm(M[r, c], PauliString("III"), dyad=Dyad(r, c, 3)) for r in range(8) for c in range(8))
    s = random_state(rng, 3)
    got = transition_amplitude(QState.zero(3), OperatorSum(3, terms), s)
    assert abs(got - (M @ s.amplitudes)[0]) < 1e-10
