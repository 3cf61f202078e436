"""Cost primitives, the five cost functions, the analytic scale factor and gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from vqnegf.device import AssembledSystem
from vqnegf.qsim import (Circuit, QState, _bit, apply_gate_array, apply_generator_array,
                         apply_operator_sum_array, expectation, hadamard_array, run_circuit_array,
                         transition_amplitude)

COST_KINDS = ("global", "local", "energy", "normalized_residual", "hybrid")
LOG_FLOOR = 1e-12
V_FLOOR = 1e-14


class DegenerateStateError(ArithmeticError):
    """``<psi|A^dag A|psi>`` vanished, so the ratio costs are undefined."""


@dataclass(frozen=True)
class CostPrimitives:
    """``u = <b|A|psi>``, ``v = <psi|A^dag A|psi>``, ``w = <psi|A^dag U_b Pbar U_b^dag A|psi>``.

    ``ub = <b|psi>`` and ``a = <psi|A|psi>`` feed the energy cost only.
    """

    u: complex
    v: float
    w: float
    ub: complex = 0j
    a: float = float("nan")


# --- U_b and the local projector ------------------------------------------------


def _cflip_perm(n: int, control: int, mask: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.where(_bit(n, control), idx ^ mask, idx)


class RhsPrep:
    """``U_b = CF . H^(hadamard) . X^(flip)`` with ``U_b |0> = |b>``.

    ``CF`` is an optional controlled bit-flip (block right-hand sides).
    """

    def __init__(self, system: AssembledSystem):
        n = system.n_qubits
        self.n = n
        self.flip = system.b_flip
        self.hadamard = tuple(system.b_hadamard)
        self.cperm = None if system.b_cflip is None else _cflip_perm(n, *system.b_cflip)
        idx = np.arange(2**n)
        self.xperm = idx ^ self.flip

    def apply(self, vec: np.ndarray) -> np.ndarray:
        v = vec[..., self.xperm]
        if self.hadamard:
            v = hadamard_array(v, self.n, self.hadamard)
        if self.cperm is not None:
            v = v[..., self.cperm]
        return v

    def apply_dagger(self, vec: np.ndarray) -> np.ndarray:
        v = vec
        if self.cperm is not None:
            v = v[..., self.cperm]
        if self.hadamard:
            v = hadamard_array(v, self.n, self.hadamard)
        return v[..., self.xperm]


def local_projector_diagonal(n: int) -> np.ndarray:
    """Diagonal of ``(1/n) sum_j |0_j><0_j| (x) I = I/2 + (1/2n) sum_j Z_j``."""
    return np.mean([~_bit(n, j) for j in range(n)], axis=0).astype(float)


# --- cost formulas ---------------------------------------------------------------


def _check_v(v: float) -> None:
    if not v > V_FLOOR:
        raise DegenerateStateError(f"<psi|A^dag A|psi> = {v:.3e} is too small for a ratio cost")


def evaluate_cost(kind: str, p: CostPrimitives, alpha: float = 0.7) -> float:
    if kind == "energy":
        if not p.a > 0:
            raise ValueError("energy cost needs a positive-definite A")
        return -2.0 * p.ub.real**2 / p.a
    _check_v(p.v)
    if kind == "global":
        return 1.0 - abs(p.u) ** 2 / p.v
    if kind == "local":
        return 1.0 - p.w / p.v
    if kind == "normalized_residual":
        return -p.u.real**2 / p.v
    if kind == "hybrid":
        if not 0 <= alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        c_nr = -p.u.real**2 / p.v
        c_l = 1.0 - p.w / p.v
        return alpha * c_nr + (1 - alpha) * np.log(max(c_l, LOG_FLOOR))
    raise ValueError(f"unknown cost kind {kind!r}")


def nr_cost_at(k: float, p: CostPrimitives) -> float:
    """``C_NR(k, theta) = k^2 v - 2 k Re(u)``."""
    return k * k * p.v - 2 * k * p.u.real


def k_star(p: CostPrimitives) -> float:
    """Minimizer of :func:`nr_cost_at` over real ``k``: ``Re(u) / v``."""
    if not p.v > 0:
        raise DegenerateStateError("k* needs v > 0")
    return p.u.real / p.v


def _cost_partials(kind: str, p: CostPrimitives, alpha: float) -> dict[str, complex]:
    """Partial derivatives of the cost in the primitives.

    Complex entries ``g`` for ``u``/``ub`` combine as ``Re(conj(g) du)``.
    """
    v = p.v
    if kind == "energy":
        return {"ub": -4.0 * p.ub.real / p.a, "a": 2.0 * p.ub.real**2 / p.a**2}
    if kind == "global":
        return {"u": -2.0 * p.u / v, "v": abs(p.u) ** 2 / v**2}
    if kind == "local":
        return {"w": -1.0 / v, "v": p.w / v**2}
    if kind == "normalized_residual":
        return {"u": -2.0 * p.u.real / v + 0j, "v": p.u.real**2 / v**2}
    if kind == "hybrid":
        c_l = 1.0 - p.w / v
        out = {"u": alpha * (-2.0 * p.u.real / v) + 0j, "v": alpha * p.u.real**2 / v**2, "w": 0.0}
        if c_l > LOG_FLOOR:
            s = (1 - alpha) / c_l
            out["w"] = -s / v
            out["v"] += s * p.w / v**2
        return out
    raise ValueError(f"unknown cost kind {kind!r}")


_NEEDS = {
    "global": ("u", "v"),
    "local": ("v", "w"),
    "normalized_residual": ("u", "v"),
    "hybrid": ("u", "v", "w"),
    "energy": ("ub", "a"),
}


# --- state-level evaluation (operator-sum path) --------------------------------------


def evaluate_primitives(system: AssembledSystem, state: QState) -> CostPrimitives:
    """Primitives from term-by-term operator-sum expectations."""
    if state.n_qubits != system.n_qubits:
        raise ValueError("state and system sizes differ")
    b = QState(system.b)
    u = transition_amplitude(b, system.A_sum, state)
    v = expectation(state, system.AdagA_sum)
    y = apply_operator_sum_array(state.amplitudes, system.A_sum)
    phi = RhsPrep(system).apply_dagger(y)
    w = float(np.sum(local_projector_diagonal(system.n_qubits) * np.abs(phi) ** 2))
    ub = complex(np.vdot(system.b, state.amplitudes))
    a = complex(np.vdot(state.amplitudes, y))
    return CostPrimitives(u, float(v), w, ub, a.real)


# --- fast path for optimization -----------------------------------------------------


class CostModel:
    """Compiled evaluator of one cost kind on one system.

    Operators are applied through their compiled sparse form; gradients come
    from one reverse sweep over the circuit carrying all needed bra vectors.
    """

    def __init__(self, system: AssembledSystem, kind: str = "hybrid", alpha: float = 0.7):
        if kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {kind!r}")
        if kind == "energy" and not system.A_sum.hermitian_hint:
            raise ValueError("energy cost requires a Hermitian positive-definite A")
        if not 0 <= alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        self.system = system
        self.kind = kind
        self.alpha = alpha
        self.n = system.n_qubits
        self.A = system.A_sum.sparse
        self.Adag = self.A.conj().T.tocsr()
        self.G = system.AdagA_sum.sparse
        self.b = np.asarray(system.b, dtype=complex)
        self.beta = self.Adag @ self.b
        self.prep = RhsPrep(system)
        self.pbar = local_projector_diagonal(self.n)
        self.zero = np.zeros(2**self.n, dtype=complex)
        self.zero[0] = 1

    def state(self, circuit: Circuit) -> np.ndarray:
        return run_circuit_array(self.zero, circuit)

    def primitives_of(self, psi: np.ndarray) -> tuple[CostPrimitives, dict[str, np.ndarray]]:
        y = self.A @ psi
        g = self.G @ psi
        phi = self.prep.apply_dagger(y)
        u = complex(np.vdot(self.beta, psi))
        v = float(np.vdot(psi, g).real)
        w = float(np.sum(self.pbar * np.abs(phi) ** 2))
        ub = complex(np.vdot(self.b, psi))
        a = float(np.vdot(psi, y).real)
        bras = {"u": self.beta, "v": g, "ub": self.b, "a": y}
        if "w" in _NEEDS[self.kind]:
            bras["w"] = self.Adag @ self.prep.apply(self.pbar * phi)
        return CostPrimitives(u, v, w, ub, a), bras

    def primitives(self, circuit: Circuit) -> CostPrimitives:
        return self.primitives_of(self.state(circuit))[0]

    def cost(self, circuit: Circuit) -> float:
        return evaluate_cost(self.kind, self.primitives(circuit), self.alpha)

    def cost_and_gradient(self, circuit: Circuit) -> tuple[float, np.ndarray, CostPrimitives]:
        psi = self.state(circuit)
        p, bras = self.primitives_of(psi)
        c = evaluate_cost(self.kind, p, self.alpha)
        partial = _cost_partials(self.kind, p, self.alpha)
        names = [k for k in _NEEDS[self.kind] if partial.get(k, 0) != 0]
        if not names:
            return c, np.zeros(sum(g.parameterized for g in circuit.gates)), p
        overlaps = adjoint_overlaps(circuit, psi, np.array([bras[k] for k in names]))
        grad = np.zeros(overlaps.shape[1])
        for row, k in zip(overlaps, names):
            if k in ("u", "ub"):
                grad += np.real(np.conj(partial[k]) * row)
            else:
                grad += np.real(partial[k]) * 2.0 * row.real
        return c, grad, p


def adjoint_overlaps(circuit: Circuit, psi: np.ndarray, bras: np.ndarray) -> np.ndarray:
    """``out[i, p] = <bras[i] | d psi / d theta_p>`` by one reverse sweep.

    Parameters follow the order of parameterized gates in the circuit.
    """
    n = circuit.n_qubits
    params = sum(g.parameterized for g in circuit.gates)
    out = np.empty((bras.shape[0], params), dtype=complex)
    stack = np.vstack([psi[None, :], bras])
    p = params
    for g in reversed(circuit.gates):
        if g.parameterized:
            p -= 1
            mu = apply_generator_array(stack[0], g, n)
            out[:, p] = stack[1:].conj() @ mu
        stack = apply_gate_array(stack, g, n, adjoint=True)
    return out


def central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray, step: float = 1e-6) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (f(theta + e) - f(theta - e)) / (2 * step)
    return g
