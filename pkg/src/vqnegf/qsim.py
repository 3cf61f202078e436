"""Exact statevector simulation.

States are numpy vectors of length ``2**n`` with qubit 0 as the most
significant bit.  The public functions take and return immutable
:class:`QState` objects; the ``*_array`` kernels operate on raw arrays with an
optional leading batch axis and are what the optimizer calls in its inner loop.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from vqnegf.pauli import OperatorSum, OperatorTerm

GATE_KINDS = ("RX", "RY", "RZ", "CRY", "CRZ", "X")
_CONTROLLED = ("CRY", "CRZ")


@dataclass(frozen=True)
class QState:
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1 or len(a) == 0 or len(a) & (len(a) - 1):
            raise ValueError("amplitude vector length must be a power of two")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_qubits(self) -> int:
        return len(self.amplitudes).bit_length() - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def zero(cls, n: int) -> "QState":
        return cls.basis(n, 0)

    @classmethod
    def basis(cls, n: int, index: int) -> "QState":
        a = np.zeros(2**n, dtype=complex)
        a[index] = 1
        return cls(a)

    @classmethod
    def normalized(cls, amplitudes) -> "QState":
        a = np.asarray(amplitudes, dtype=complex)
        return cls(a / np.linalg.norm(a))


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in _CONTROLLED:
            if self.control is None:
                raise ValueError(f"{self.kind} needs a control qubit")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")
        if self.kind != "X" and self.angle is None:
            raise ValueError(f"{self.kind} needs an angle")

    @property
    def parameterized(self) -> bool:
        return self.kind != "X"

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits()):
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.n_qubits - 1}")


# --- gate matrices -----------------------------------------------------------

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_GENERATOR = {"RX": "X", "RY": "Y", "RZ": "Z", "CRY": "Y", "CRZ": "Z"}


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    """2x2 block ``exp(-i angle G / 2)`` acting on the target."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    g = _GENERATOR[kind]
    if g == "X":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if g == "Y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense 2x2 (or 4x4, control first) unitary of a gate."""
    u = _PAULI["X"] if gate.kind == "X" else rotation_matrix(gate.kind, gate.angle)
    if gate.control is None:
        return u
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


# --- array kernels -------------------------------------------------------------


@lru_cache(maxsize=None)
def _bit(n: int, qubit: int) -> np.ndarray:
    return ((np.arange(2**n) >> (n - 1 - qubit)) & 1).astype(bool)


@lru_cache(maxsize=None)
def _bit_float(n: int, qubit: int) -> np.ndarray:
    return _bit(n, qubit).astype(float)


def _split(vec: np.ndarray, n: int, target: int, control: int | None):
    """Views ``(a, b)`` of the target-0 / target-1 amplitudes (control = 1 only) and the reshaped copy."""
    lead = vec.shape[:-1]
    if control is None:
        v = vec.reshape(lead + (2**target, 2, 2 ** (n - target - 1)))
        return v, v[..., 0, :], v[..., 1, :], (Ellipsis, 0, slice(None)), (Ellipsis, 1, slice(None))
    lo, hi = sorted((control, target))
    v = vec.reshape(lead + (2**lo, 2, 2 ** (hi - lo - 1), 2, 2 ** (n - hi - 1)))
    if control < target:
        i0 = (Ellipsis, 1, slice(None), 0, slice(None))
        i1 = (Ellipsis, 1, slice(None), 1, slice(None))
    else:
        i0 = (Ellipsis, 0, slice(None), 1, slice(None))
        i1 = (Ellipsis, 1, slice(None), 1, slice(None))
    return v, v[i0], v[i1], i0, i1


def _apply_2x2(vec: np.ndarray, u: np.ndarray, n: int, target: int, control: int | None) -> np.ndarray:
    v, a, b, i0, i1 = _split(vec, n, target, control)
    out = v.copy()
    out[i0] = u[0, 0] * a + u[0, 1] * b
    out[i1] = u[1, 0] * a + u[1, 1] * b
    return out.reshape(vec.shape)


def _z_phase(n: int, gate: Gate, angle: float) -> np.ndarray:
    lo = cmath.exp(-0.5j * angle)
    ph = lo + (cmath.exp(0.5j * angle) - lo) * _bit_float(n, gate.target)
    if gate.control is not None:
        ph = 1 + (ph - 1) * _bit_float(n, gate.control)
    return ph


def apply_gate_array(vec: np.ndarray, gate: Gate, n: int, adjoint: bool = False) -> np.ndarray:
    if gate.kind == "X":
        return _apply_2x2(vec, _PAULI["X"], n, gate.target, None)
    angle = -gate.angle if adjoint else gate.angle
    if gate.kind in ("RZ", "CRZ"):
        return vec * _z_phase(n, gate, angle)
    return _apply_2x2(vec, rotation_matrix(gate.kind, angle), n, gate.target, gate.control)


@lru_cache(maxsize=None)
def _z_generator(n: int, target: int, control: int | None) -> np.ndarray:
    z = 1 - 2 * _bit_float(n, target)
    if control is not None:
        z = z * _bit_float(n, control)
    return -0.5j * z


def apply_generator_array(vec: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """``d U / d angle = (-i/2) (P1_control (x) G) U``; returns ``(-i/2)(P1 (x) G) vec``."""
    g = _GENERATOR[gate.kind]
    if g == "Z":
        return _z_generator(n, gate.target, gate.control) * vec
    v, a, b, i0, i1 = _split(vec, n, gate.target, gate.control)
    out = np.zeros_like(v)
    if g == "X":
        out[i0] = -0.5j * b
        out[i1] = -0.5j * a
    else:  # -i/2 Y = [[0, -1/2], [1/2, 0]]
        out[i0] = -0.5 * b
        out[i1] = 0.5 * a
    return out.reshape(vec.shape)


def run_circuit_array(vec: np.ndarray, circuit: Circuit) -> np.ndarray:
    n = circuit.n_qubits
    for g in circuit.gates:
        vec = apply_gate_array(vec, g, n)
    return vec


def shift_array(vec: np.ndarray, m: int, adjoint: bool = False, offset: int = 0) -> np.ndarray:
    """Cyclic increment ``|w> -> |w+1 mod 2^m>`` on qubits ``offset..offset+m-1``."""
    n = vec.shape[-1].bit_length() - 1
    if not 1 <= m or offset < 0 or offset + m > n:
        raise ValueError(f"shift width {m} at offset {offset} does not fit {n} qubits")
    lead = vec.shape[:-1]
    v = vec.reshape(lead + (2**offset, 2**m, 2 ** (n - offset - m)))
    return np.roll(v, -1 if adjoint else 1, axis=-2).reshape(vec.shape)


def _apply_term(vec: np.ndarray, term: OperatorTerm, n: int) -> np.ndarray:
    v = vec
    if term.shift_m:
        v = shift_array(v, term.shift_m, False, term.shift_offset)
    p = term.pauli
    if p.flip_mask or p.sign_mask:
        idx = np.arange(2**n)
        src = idx ^ p.flip_mask
        parity = np.bitwise_count((src & p.sign_mask).astype(np.uint64)) & 1
        v = v[..., src] * ((1 - 2 * parity.astype(float)) * (1j) ** p.n_y)
    d = term.dyad
    if d is not None:
        lo = n - d.offset - d.width
        wmask = ((1 << d.width) - 1) << lo
        idx = np.arange(2**n)
        hit = (idx & wmask) == (d.row << lo)
        src = (idx & ~wmask) | (d.col << lo)
        v = np.where(hit, v[..., src], 0)
    if term.shift_m:
        v = shift_array(v, term.shift_m, True, term.shift_offset)
    return term.coeff * v


def apply_operator_sum_array(vec: np.ndarray, op: OperatorSum) -> np.ndarray:
    """Term-by-term ``sum_k c_k T_k vec`` in ascending term order."""
    n = op.n_qubits
    if vec.shape[-1] != 2**n:
        raise ValueError("operator and state dimensions differ")
    out = np.zeros(vec.shape, dtype=complex)
    for t in op.terms:
        out += _apply_term(vec, t, n)
    return out


# --- public state-level API -------------------------------------------------------


def apply_circuit(state: QState, circuit: Circuit) -> QState:
    if state.n_qubits != circuit.n_qubits:
        raise ValueError("state and circuit qubit counts differ")
    return QState(run_circuit_array(state.amplitudes, circuit))


def apply_shift(state: QState, m: int, adjoint: bool = False, offset: int = 0) -> QState:
    return QState(shift_array(state.amplitudes, m, adjoint, offset))


def apply_operator_sum(state: QState, op: OperatorSum) -> np.ndarray:
    return apply_operator_sum_array(state.amplitudes, op)


def expectation(state: QState, op: OperatorSum) -> complex | float:
    """``<state|op|state>``; real-valued when ``op.hermitian_hint`` is set."""
    val = np.vdot(state.amplitudes, apply_operator_sum(state, op))
    if op.hermitian_hint:
        if abs(val.imag) > 1e-8 * max(1.0, abs(val)):
            raise ArithmeticError(f"Hermitian-flagged operator gave imaginary expectation {val.imag:.3e}")
        return float(val.real)
    return complex(val)


def transition_amplitude(bra: QState, op: OperatorSum, ket: QState) -> complex:
    if bra.n_qubits != ket.n_qubits:
        raise ValueError("bra and ket dimensions differ")
    return complex(np.vdot(bra.amplitudes, apply_operator_sum(ket, op)))


def hadamard_array(vec: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    for q in qubits:
        vec = _apply_2x2(vec, h, n, q, None)
    return vec
