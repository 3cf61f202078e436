"""Hardware-efficient ansatz families and parameter initialization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vqnegf.qsim import Circuit, Gate

VARIANTS = ("crz_ry_circular", "crz_ry_linear", "ry_rx_cry_circular", "ry_rx_cry_linear")


@dataclass(frozen=True)
class AnsatzSpec:
    variant: str
    n_qubits: int
    layers: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown ansatz variant {self.variant!r}; expected one of {VARIANTS}")
        if self.n_qubits < 1 or self.layers < 1:
            raise ValueError("ansatz needs at least one qubit and one layer")

    @property
    def circular(self) -> bool:
        return self.variant.endswith("circular")

    @property
    def rotations(self) -> tuple[str, ...]:
        return ("RY",) if self.variant.startswith("crz") else ("RY", "RX")

    @property
    def entangler(self) -> str:
        return "CRZ" if self.variant.startswith("crz") else "CRY"

    def pairs(self) -> list[tuple[int, int]]:
        n = self.n_qubits
        out = [(j, j + 1) for j in range(n - 1)]
        if self.circular and n > 1:
            out.append((n - 1, 0))
        return out

    @property
    def params_per_layer(self) -> int:
        return len(self.rotations) * self.n_qubits + len(self.pairs())

    @property
    def n_params(self) -> int:
        return self.layers * self.params_per_layer


def init_params(spec: AnsatzSpec, seed: int | None = None) -> np.ndarray:
    """Arcsine-law draws ``pi * Beta(1/2, 1/2)`` via the inverse CDF ``sin^2(pi u / 2)``."""
    u = np.random.default_rng(seed).random(spec.n_params)
    return beta_half_inverse_cdf(u)


def beta_half_inverse_cdf(u) -> np.ndarray:
    return np.pi * np.sin(np.pi * np.asarray(u, dtype=float) / 2) ** 2


def build_ansatz(spec: AnsatzSpec, theta) -> Circuit:
    """``L`` blocks of [rotations on every qubit; entanglers over ``pairs()``]."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape}")
    it = iter(theta.tolist())
    gates = []
    for _ in range(spec.layers):
        for q in range(spec.n_qubits):
            for kind in spec.rotations:
                gates.append(Gate(kind, q, angle=next(it)))
        for c, t in spec.pairs():
            gates.append(Gate(spec.entangler, t, control=c, angle=next(it)))
    return Circuit(spec.n_qubits, tuple(gates))
