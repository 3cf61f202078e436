"""1D effective-mass tight-binding device and its NEGF linear systems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from vqnegf.pauli import OperatorSum, build_A, build_AdagA, build_h0, decompose_diagonal, gram_terms
from vqnegf.pauli import Dyad, OperatorTerm, PauliString

# hbar^2 / (2 m0) in eV nm^2
HBAR2_2M0 = constants.hbar**2 / (2 * constants.m_e) / constants.e * 1e18

BLOCK_MAX_AMPLITUDES = 2**20
DENSE_MAX_SITES = 4096


def hopping_energy(m_rel: float, a_nm: float) -> float:
    """``t0 = hbar^2 / (2 m* a^2)`` in eV."""
    if m_rel <= 0 or a_nm <= 0:
        raise ValueError("effective mass and grid spacing must be positive")
    return HBAR2_2M0 / (m_rel * a_nm**2)


def lead_self_energy(energy: float, onsite: float, t0: float) -> complex:
    """Retarded self-energy ``-t0 exp(i k a)`` of a semi-infinite 1D lead.

    ``E - U = 2 t0 (1 - cos ka)``; outside the band the decaying branch is
    taken, so the result is real there.
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    c = 1 - (energy - onsite) / (2 * t0)
    if c > 1:
        eika = c - np.sqrt(c * c - 1)
    elif c < -1:
        eika = c + np.sqrt(c * c - 1)
    else:
        eika = complex(c, np.sqrt(1 - c * c))
    return complex(-t0 * eika)


def broadening(sigma: complex) -> float:
    """``Gamma = i (Sigma - Sigma^dagger) = -2 Im Sigma``."""
    return -2.0 * float(np.imag(sigma))


def logistic(x):
    return 0.5 * (1 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def logistic_barrier(x_nm, height: float, x1: float, x2: float, width: float) -> np.ndarray:
    return height * (logistic((np.asarray(x_nm) - x1) / width) - logistic((np.asarray(x_nm) - x2) / width))


def build_potential(kind: str, n_sites: int, length_nm: float, **params) -> np.ndarray:
    """Potential profile sampled at site centres ``(i + 1/2) a``.

    kinds: ``flat`` (``value``), ``logistic_barrier`` (``height``, ``x1``,
    ``x2``, ``width``, lengths in nm), ``samples`` (``values``).
    """
    if kind == "flat":
        return np.full(n_sites, float(params.get("value", 0.0)))
    if kind == "logistic_barrier":
        w, x1, x2 = params["width"], params["x1"], params["x2"]
        if w <= 0:
            raise ValueError("barrier width must be positive")
        if x2 <= x1:
            raise ValueError("barrier needs x2 > x1")
        x = (np.arange(n_sites) + 0.5) * (length_nm / n_sites)
        return logistic_barrier(x, params["height"], x1, x2, w)
    if kind == "samples":
        v = np.asarray(params["values"], dtype=float)
        if v.shape != (n_sites,):
            raise ValueError(f"expected {n_sites} potential samples, got {v.shape}")
        return v
    raise ValueError(f"unknown potential kind {kind!r}")


def _is_pow2(k: int) -> bool:
    return k >= 1 and k & (k - 1) == 0


@dataclass(frozen=True)
class DeviceSpec:
    n_sites: int = 32
    length_nm: float = 10.0
    m_rel: float = 0.4
    potential: tuple[float, ...] | None = None
    contact_onsite: tuple[float, float] = (0.0, 0.0)
    eta_eV: float = 1e-4

    def __post_init__(self):
        if not _is_pow2(self.n_sites) or self.n_sites < 4:
            raise ValueError("n_sites must be a power of two, at least 4")
        if self.eta_eV <= 0:
            raise ValueError("eta must be positive")
        pot = self.potential
        if pot is None:
            pot = build_potential("logistic_barrier", self.n_sites, self.length_nm,
                                  height=0.2, x1=3.0, x2=7.0, width=0.5)
        pot = tuple(float(v) for v in pot)
        if len(pot) != self.n_sites:
            raise ValueError("potential length must equal n_sites")
        object.__setattr__(self, "potential", pot)
        object.__setattr__(self, "contact_onsite", tuple(float(v) for v in self.contact_onsite))

    @property
    def a_nm(self) -> float:
        return self.length_nm / self.n_sites

    @property
    def t0(self) -> float:
        return hopping_energy(self.m_rel, self.a_nm)

    @property
    def n_qubits(self) -> int:
        return self.n_sites.bit_length() - 1

    def sigmas(self, energy: float) -> tuple[complex, complex]:
        t0 = self.t0
        return (lead_self_energy(energy, self.contact_onsite[0], t0),
                lead_self_energy(energy, self.contact_onsite[1], t0))

    def diagonal(self, energy: float) -> np.ndarray:
        """``D``: potential plus the contact self-energies on the end sites."""
        s1, s2 = self.sigmas(energy)
        d = np.array(self.potential, dtype=complex)
        d[0] += s1
        d[-1] += s2
        return d

    def dense_hamiltonian(self) -> np.ndarray:
        N, t0 = self.n_sites, self.t0
        h = np.diag(np.full(N, 2 * t0)) - t0 * (np.eye(N, k=1) + np.eye(N, k=-1))
        return h + np.diag(self.potential)

    def dense_A(self, energy: float) -> np.ndarray:
        """Independent dense assembly of ``(E + i eta) I - H - Sigma_1 - Sigma_2``."""
        if self.n_sites > DENSE_MAX_SITES:
            raise ValueError("device too large for dense assembly")
        s1, s2 = self.sigmas(energy)
        a = (energy + 1j * self.eta_eV) * np.eye(self.n_sites) - self.dense_hamiltonian()
        a[0, 0] -= s1
        a[-1, -1] -= s2
        return a


@dataclass(frozen=True)
class EnergyGrid:
    energies: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))
        if not self.energies:
            raise ValueError("energy grid must not be empty")

    @classmethod
    def linspace(cls, start: float, stop: float, count: int) -> "EnergyGrid":
        return cls(tuple(np.linspace(start, stop, count)))

    def __len__(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class BlockLayout:
    """Index layout ``(energy, column, site)`` from most to least significant."""

    n_energies: int
    n_sites: int
    n_columns: int = 2

    def index(self, e: int, column: int, site: int) -> int:
        return (e * self.n_columns + column) * self.n_sites + site

    def slices(self, x: np.ndarray) -> np.ndarray:
        """``x`` reshaped to ``(energy, column, site)``."""
        return np.asarray(x).reshape(self.n_energies, self.n_columns, self.n_sites)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """A linear system ``A x = b_raw`` in operator-sum form.

    ``b`` is stored normalized; ``b_norm`` is the divisor applied to the raw
    right-hand side.  ``b_flip`` and ``b_hadamard`` define the preparation
    unitary ``U_b = X^(b_flip) . H^(b_hadamard)`` (controlled flips for the
    block pattern are given by ``b_cflip``).
    """

    n_qubits: int
    A_sum: OperatorSum
    AdagA_sum: OperatorSum
    b: np.ndarray = field(repr=False)
    b_norm: float
    energies: tuple[float, ...]
    columns: tuple[str, ...]
    b_flip: int = 0
    b_hadamard: tuple[int, ...] = ()
    b_cflip: tuple[int, int] | None = None  # (control qubit, flip mask) applied after the Hadamards
    A_dense: np.ndarray | None = field(default=None, repr=False)
    layout: BlockLayout | None = None

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def b_raw(self) -> np.ndarray:
        return self.b * self.b_norm


def _column_index(n_sites: int, column: str) -> int:
    if column == "source":
        return 0
    if column == "drain":
        return n_sites - 1
    raise ValueError(f"column must be 'source' or 'drain', not {column!r}")


def assemble_system(device: DeviceSpec, energy: float, column: str = "source",
                    rel_threshold: float = 1e-12, with_dense: bool = True) -> AssembledSystem:
    n = device.n_qubits
    k = _column_index(device.n_sites, column)
    sig = device.sigmas(energy)
    pot = np.array(device.potential)
    A = build_A(n, energy, device.eta_eV, build_h0(n, device.t0), pot, sig, rel_threshold)
    G = build_AdagA(n, energy, device.eta_eV, device.t0, pot, sig, rel_threshold)
    b = np.zeros(2**n, dtype=complex)
    b[k] = 1
    dense = device.dense_A(energy) if with_dense and n <= 12 else None
    return AssembledSystem(n, A, G, b, 1.0, (float(energy),), (column,), b_flip=k, A_dense=dense)


def assemble_block_system(device: DeviceSpec, grid: EnergyGrid, rel_threshold: float = 1e-12,
                          with_dense: bool = True) -> AssembledSystem:
    """Block-diagonal system over all energies and both injection columns."""
    NE, Nr = len(grid), device.n_sites
    if not _is_pow2(NE):
        raise ValueError("number of energies must be a power of two")
    dim = NE * 2 * Nr
    if dim > BLOCK_MAX_AMPLITUDES:
        raise ValueError(f"block system of dimension {dim} exceeds the size guard")
    ns = device.n_qubits
    n = dim.bit_length() - 1
    n_high = n - ns
    layout = BlockLayout(NE, Nr)
    E = np.array(grid.energies)
    pot = np.array(device.potential)

    # A = -H0_site - diag(dtilde); dtilde = potential - E - i eta + contact spikes
    smooth = (pot[None, None, :] - E[:, None, None] - 1j * device.eta_eV) * np.ones((1, 2, 1))
    smooth = smooth.reshape(-1)
    spikes: dict[int, complex] = {}
    for e, en in enumerate(E):
        s1, s2 = device.sigmas(en)
        for c in range(2):
            spikes[layout.index(e, c, 0)] = spikes.get(layout.index(e, c, 0), 0) + s1
            spikes[layout.index(e, c, Nr - 1)] = spikes.get(layout.index(e, c, Nr - 1), 0) + s2

    terms = list(build_h0(ns, device.t0).embedded(n_high).scaled(-1).terms)
    terms += decompose_diagonal(smooth, rel_threshold).op.scaled(-1).terms
    I = PauliString.identity(n)
    terms += [OperatorTerm(-v, I, dyad=Dyad(i, i, n)) for i, v in sorted(spikes.items()) if v != 0]
    A = OperatorSum(n, tuple(terms), False)
    G = gram_terms(n, device.t0, 0.0, smooth, spikes, n_high, rel_threshold)

    b = np.zeros(dim, dtype=complex)
    for e in range(NE):
        b[layout.index(e, 0, 0)] = 1
        b[layout.index(e, 1, Nr - 1)] = 1
    b_norm = float(np.sqrt(2 * NE))
    b /= b_norm

    dense = None
    if with_dense and dim <= 2**12:
        dense = np.zeros((dim, dim), dtype=complex)
        for e, en in enumerate(E):
            blk = device.dense_A(en)
            for c in range(2):
                s = layout.index(e, c, 0)
                dense[s:s + Nr, s:s + Nr] = blk
    col_qubit = n_high - 1
    return AssembledSystem(
        n, A, G, b, b_norm, tuple(float(x) for x in E), ("source", "drain"),
        b_hadamard=tuple(range(n_high)), b_cflip=(col_qubit, Nr - 1),
        A_dense=dense, layout=layout)


def assemble_dense_system(matrix: np.ndarray, b_index: int = 0, hermitian: bool | None = None) -> AssembledSystem:
    """Wrap an explicit matrix with ``b = e_{b_index}`` (tests and synthetic problems).

    Each nonzero entry becomes one dyad term.
    """
    m = np.asarray(matrix, dtype=complex)
    dim = m.shape[0]
    n = dim.bit_length() - 1
    if m.shape != (dim, dim) or 2**n != dim:
        raise ValueError("matrix must be square with power-of-two size")
    I = PauliString.identity(n)

    def dyads(mat):
        rows, cols = np.nonzero(mat)
        return tuple(OperatorTerm(complex(mat[r, c]), I, dyad=Dyad(int(r), int(c), n)) for r, c in zip(rows, cols))

    herm = bool(np.allclose(m, m.conj().T, rtol=0, atol=1e-14)) if hermitian is None else hermitian
    A = OperatorSum(n, dyads(m), herm)
    G = OperatorSum(n, dyads(m.conj().T @ m), True)
    b = np.zeros(dim, dtype=complex)
    b[b_index] = 1
    return AssembledSystem(n, A, G, b, 1.0, (), ("synthetic",), b_flip=b_index, A_dense=m)
