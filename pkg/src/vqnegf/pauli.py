"""Operators as linear combinations of shift-conjugated Pauli strings.

A term is ``coeff * S^dagger (D . P) S`` where ``P`` is a Pauli string on the
full register, ``D`` an optional dyad ``|r><c|`` on a contiguous qubit window
(identity elsewhere) and ``S`` the cyclic increment on another window.  Qubit 0
is the most significant bit of the basis index throughout.

The builders here produce the tight-binding Hamiltonian, its square, the NEGF
system matrix ``A`` and the Gram operator ``A^dagger A`` in that form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

DENSE_MAX_QUBITS = 12

_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

_MATRIX = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, ``symbols[0]`` acts on qubit 0."""

    symbols: str

    def __post_init__(self):
        if not set(self.symbols) <= set("IXYZ"):
            raise ValueError(f"invalid Pauli symbols {self.symbols!r}")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def single(cls, n: int, qubit: int, symbol: str) -> "PauliString":
        s = ["I"] * n
        s[qubit] = symbol
        return cls("".join(s))

    @classmethod
    def from_z_mask(cls, n: int, mask: int) -> "PauliString":
        """I/Z string whose Z positions are the set bits of ``mask`` (qubit 0 = MSB)."""
        return cls("".join("Z" if (mask >> (n - 1 - q)) & 1 else "I" for q in range(n)))

    @property
    def n_qubits(self) -> int:
        return len(self.symbols)

    @property
    def is_identity(self) -> bool:
        return set(self.symbols) <= {"I"}

    def _mask(self, chars: str) -> int:
        n = self.n_qubits
        m = 0
        for q, s in enumerate(self.symbols):
            if s in chars:
                m |= 1 << (n - 1 - q)
        return m

    @cached_property
    def flip_mask(self) -> int:
        return self._mask("XY")

    @cached_property
    def sign_mask(self) -> int:
        return self._mask("ZY")

    @cached_property
    def n_y(self) -> int:
        return self.symbols.count("Y")

    def __mul__(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        if self.n_qubits != other.n_qubits:
            raise ValueError("Pauli strings of different length")
        phase = 1 + 0j
        out = []
        for a, b in zip(self.symbols, other.symbols):
            p, s = _PRODUCT[a, b]
            phase *= p
            out.append(s)
        return phase, PauliString("".join(out))

    def padded(self, n_high: int = 0, n_low: int = 0) -> "PauliString":
        return PauliString("I" * n_high + self.symbols + "I" * n_low)

    def matrix(self) -> np.ndarray:
        out = np.eye(1, dtype=complex)
        for s in self.symbols:
            out = np.kron(out, _MATRIX[s])
        return out

    def __str__(self) -> str:
        return self.symbols


@dataclass(frozen=True)
class Dyad:
    """``|row><col|`` on qubits ``offset .. offset+width-1``, identity elsewhere.

    ``width == 0`` is the empty tensor factor (the scalar 1).
    """

    row: int
    col: int
    width: int
    offset: int = 0

    def __post_init__(self):
        if self.width < 0 or self.offset < 0:
            raise ValueError("dyad window must be nonnegative")
        if not (0 <= self.row < 2**self.width and 0 <= self.col < 2**self.width):
            raise ValueError("dyad index outside its window")


@dataclass(frozen=True)
class OperatorTerm:
    coeff: complex
    pauli: PauliString
    shift_m: int = 0
    shift_offset: int = 0
    dyad: Dyad | None = None

    def __post_init__(self):
        n = self.pauli.n_qubits
        if self.shift_m < 0 or self.shift_offset < 0 or self.shift_offset + self.shift_m > n:
            raise ValueError("shift window outside the register")
        if self.dyad is not None and self.dyad.offset + self.dyad.width > n:
            raise ValueError("dyad window outside the register")

    @property
    def n_qubits(self) -> int:
        return self.pauli.n_qubits

    def scaled(self, c: complex) -> "OperatorTerm":
        return OperatorTerm(self.coeff * c, self.pauli, self.shift_m, self.shift_offset, self.dyad)

    def adjoint(self) -> "OperatorTerm":
        if self.dyad is None:
            return OperatorTerm(np.conj(self.coeff), self.pauli, self.shift_m, self.shift_offset)
        # (D P)^dag = P D^dag; the window part of P folds into the dyad
        d = self.dyad
        sym = self.pauli.symbols
        win = PauliString(sym[d.offset:d.offset + d.width])
        rest = PauliString(sym[:d.offset] + "I" * d.width + sym[d.offset + d.width:])
        phase = _pauli_phase(win, d.col)
        new = Dyad(d.col ^ win.flip_mask, d.row, d.width, d.offset)
        return OperatorTerm(np.conj(self.coeff) * phase, rest, self.shift_m, self.shift_offset, new)

    def embedded(self, n_high: int) -> "OperatorTerm":
        """Same operator acting on the low qubits of a register with ``n_high`` extra top qubits."""
        dyad = None
        if self.dyad is not None:
            dyad = Dyad(self.dyad.row, self.dyad.col, self.dyad.width, self.dyad.offset + n_high)
        return OperatorTerm(self.coeff, self.pauli.padded(n_high), self.shift_m,
                            self.shift_offset + n_high, dyad)


def _pauli_phase(p: PauliString, j: int) -> complex:
    """Phase ``ph`` with ``P|j> = ph |j ^ flip_mask>``."""
    sign = -1 if bin(j & p.sign_mask).count("1") % 2 else 1
    return sign * (1j) ** p.n_y


@dataclass(frozen=True)
class OperatorSum:
    n_qubits: int
    terms: tuple[OperatorTerm, ...] = ()
    hermitian_hint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise ValueError("term register size does not match the sum")

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if self.n_qubits != other.n_qubits:
            raise ValueError("register size mismatch")
        return OperatorSum(self.n_qubits, self.terms + other.terms,
                           self.hermitian_hint and other.hermitian_hint)

    def __len__(self) -> int:
        return len(self.terms)

    def scaled(self, c: complex) -> "OperatorSum":
        herm = self.hermitian_hint and np.imag(c) == 0
        return OperatorSum(self.n_qubits, tuple(t.scaled(c) for t in self.terms), herm)

    def adjoint(self) -> "OperatorSum":
        return OperatorSum(self.n_qubits, tuple(t.adjoint() for t in self.terms), self.hermitian_hint)

    def embedded(self, n_high: int) -> "OperatorSum":
        return OperatorSum(self.n_qubits + n_high, tuple(t.embedded(n_high) for t in self.terms),
                           self.hermitian_hint)

    def with_hint(self, hermitian: bool) -> "OperatorSum":
        return OperatorSum(self.n_qubits, self.terms, hermitian)

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        """Compiled CSR matrix; the fast mat-vec path used by the optimizer."""
        return to_sparse(self)


def operator_sum(n: int, terms: Iterable[OperatorTerm], hermitian: bool = False) -> OperatorSum:
    return OperatorSum(n, tuple(terms), hermitian)


# --- dense and sparse realizations ------------------------------------------


def _shift_perm(n: int, m: int, offset: int) -> np.ndarray:
    """Index map ``i -> S i`` for the increment on qubits ``offset..offset+m-1``."""
    idx = np.arange(2**n)
    if m == 0:
        return idx
    lo = n - offset - m
    w = (idx >> lo) & ((1 << m) - 1)
    w2 = (w + 1) & ((1 << m) - 1)
    return idx ^ ((w ^ w2) << lo)


def shift_matrix(n: int, m: int | None = None, offset: int = 0) -> np.ndarray:
    """Dense cyclic increment on ``m`` qubits starting at ``offset``."""
    m = n if m is None else m
    s = np.zeros((2**m, 2**m))
    for i in range(2**m):
        s[(i + 1) % 2**m, i] = 1
    return np.kron(np.kron(np.eye(2**offset), s), np.eye(2 ** (n - offset - m)))


def _dyad_matrix(n: int, d: Dyad) -> np.ndarray:
    core = np.zeros((2**d.width, 2**d.width))
    core[d.row, d.col] = 1
    return np.kron(np.kron(np.eye(2**d.offset), core), np.eye(2 ** (n - d.offset - d.width)))


def term_dense(term: OperatorTerm) -> np.ndarray:
    n = term.n_qubits
    m = term.pauli.matrix()
    if term.dyad is not None:
        m = _dyad_matrix(n, term.dyad) @ m
    if term.shift_m:
        s = shift_matrix(n, term.shift_m, term.shift_offset)
        m = s.T @ m @ s
    return term.coeff * m


def to_dense(op: OperatorSum) -> np.ndarray:
    """Dense matrix built from explicit Kronecker products (verification path)."""
    if op.n_qubits > DENSE_MAX_QUBITS:
        raise ValueError(f"to_dense refuses {op.n_qubits} qubits (limit {DENSE_MAX_QUBITS})")
    out = np.zeros((2**op.n_qubits,) * 2, dtype=complex)
    for t in op.terms:
        out += term_dense(t)
    return out


def _term_coo(term: OperatorTerm) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = term.n_qubits
    cols = np.arange(2**n)
    fwd = _shift_perm(n, term.shift_m, term.shift_offset)
    inv = np.empty_like(fwd)
    inv[fwd] = cols
    j = fwd[cols]
    p = term.pauli
    parity = np.bitwise_count((j & p.sign_mask).astype(np.uint64)) & 1
    vals = (1 - 2 * parity.astype(float)) * (1j) ** p.n_y * term.coeff
    j = j ^ p.flip_mask
    if term.dyad is not None:
        d = term.dyad
        lo = n - d.offset - d.width
        wmask = ((1 << d.width) - 1) << lo
        keep = (j & wmask) == (d.col << lo)
        cols, j, vals = cols[keep], j[keep], vals[keep]
        j = (j & ~wmask) | (d.row << lo)
    return inv[j], cols, vals


def to_sparse(op: OperatorSum) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for t in op.terms:
        r, c, v = _term_coo(t)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    dim = 2**op.n_qubits
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim), dtype=complex)
    return m.tocsr()


# --- diagonal operators ------------------------------------------------------


def walsh_coefficients(d: Sequence[complex]) -> np.ndarray:
    """Coefficients ``c_s = 2^-n sum_i d_i (-1)^popcount(s & i)`` by fast Walsh-Hadamard transform."""
    a = np.array(d, dtype=complex)
    n = _log2_exact(len(a))
    h = 1
    for _ in range(n):
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    return a / len(a)


def _log2_exact(size: int) -> int:
    n = int(size).bit_length() - 1
    if size < 1 or 2**n != size:
        raise ValueError(f"length {size} is not a power of two")
    return n


@dataclass(frozen=True)
class DiagonalDecomposition:
    """Retained I/Z sum and its error.

    ``truncation_error`` is ``sum |c_s|`` over dropped strings: a bound on the
    max-norm error that grows monotonically with the threshold.
    ``max_error`` is the max-norm error itself.
    """

    op: OperatorSum
    truncation_error: float
    coefficients: np.ndarray = field(repr=False)
    max_error: float = 0.0


def decompose_diagonal(d: Sequence[complex], rel_threshold: float = 1e-12) -> DiagonalDecomposition:
    """I/Z-string expansion of ``diag(d)`` with relative coefficient truncation.

    Coefficients at the transform's roundoff level (``4 n eps max|d|``) count
    as zero even at threshold 0.
    """
    if not 0 <= rel_threshold < 1:
        raise ValueError("rel_threshold must lie in [0, 1)")
    d = np.asarray(d, dtype=complex)
    n = _log2_exact(len(d))
    c = walsh_coefficients(d)
    mag = np.abs(c)
    floor = 4 * max(n, 1) * np.finfo(float).eps * np.max(np.abs(d), initial=0.0)
    keep = (mag > floor) & (mag >= rel_threshold * mag.max(initial=0.0))
    kept = np.where(keep, c, 0)
    recon = walsh_coefficients(kept) * len(d)
    terms = tuple(OperatorTerm(complex(c[s]), PauliString.from_z_mask(n, s)) for s in np.flatnonzero(keep))
    herm = bool(np.all(np.imag(d) == 0))
    bound = float(np.sum(mag[~keep]))
    return DiagonalDecomposition(OperatorSum(n, terms, herm), bound, c,
                                 float(np.max(np.abs(recon - d), initial=0.0)))


def shift_conjugate_diagonal(d: Sequence[complex]) -> np.ndarray:
    """Diagonal of ``S D S^dagger``: ``d'_j = d_{(j-1) mod N}``."""
    d = np.asarray(d)
    _log2_exact(len(d))
    return np.roll(d, 1)


# --- tight-binding Hamiltonian ----------------------------------------------


def _xl(n: int) -> PauliString:
    return PauliString.single(n, n - 1, "X")


def build_h0(n: int, t0: float) -> OperatorSum:
    """Open-boundary tridiagonal chain ``t0 * tridiag(-1, 2, -1)`` in shift form."""
    if n < 2:
        raise ValueError("build_h0 needs n >= 2")
    I = PauliString.identity(n)
    XL = _xl(n)
    terms = (
        OperatorTerm(2 * t0, I),
        OperatorTerm(-t0, XL),
        OperatorTerm(-t0, XL, shift_m=n),
        OperatorTerm(t0, XL, shift_m=n, dyad=Dyad(0, 0, n - 1)),
    )
    return OperatorSum(n, terms, True)


def build_h0_squared(n: int, t0: float) -> OperatorSum:
    """Closed shift-operator form of ``H0^2``; uses ``S^(n-1)`` on the top ``n-1`` qubits."""
    if n < 2:
        raise ValueError("build_h0_squared needs n >= 2")
    t2 = t0 * t0
    I = PauliString.identity(n)
    XL = _xl(n)
    Xm = PauliString.single(n, n - 2, "X")
    terms = (
        OperatorTerm(6 * t2, I),
        OperatorTerm(-4 * t2, XL),
        OperatorTerm(-4 * t2, XL, shift_m=n),
        OperatorTerm(4 * t2, XL, shift_m=n, dyad=Dyad(0, 0, n - 1)),
        OperatorTerm(-t2, I, shift_m=n, dyad=Dyad(0, 0, n - 1)),
        OperatorTerm(t2, Xm, shift_m=n - 1),
        OperatorTerm(-t2, Xm, shift_m=n - 1, dyad=Dyad(0, 0, n - 2)),
        OperatorTerm(t2, Xm),
    )
    return OperatorSum(n, terms, True)


# --- NEGF system matrix -----------------------------------------------------


def _contact_dyads(n: int, spikes: dict[int, complex], coeff: complex = 1.0) -> list[OperatorTerm]:
    I = PauliString.identity(n)
    return [OperatorTerm(coeff * v, I, dyad=Dyad(i, i, n)) for i, v in sorted(spikes.items()) if v != 0]


def _spike_map(n: int, contact_sigma: tuple[complex, complex]) -> dict[int, complex]:
    out: dict[int, complex] = {}
    for idx, v in ((0, contact_sigma[0]), (2**n - 1, contact_sigma[1])):
        out[idx] = out.get(idx, 0) + complex(v)
    return out


def build_A(n: int, energy: float, eta: float, h0: OperatorSum, potential: Sequence[float],
            contact_sigma: tuple[complex, complex] = (0, 0), rel_threshold: float = 1e-12) -> OperatorSum:
    """``A = (E + i eta) I - H0 - D`` with ``D = diag(potential) + contact spikes``.

    The smooth potential goes through the Walsh expansion; the two contact
    self-energies are exact dyads on the first and last basis states.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    potential = np.asarray(potential, dtype=float)
    if len(potential) != 2**n or h0.n_qubits != n:
        raise ValueError("size mismatch between potential, h0 and n")
    I = PauliString.identity(n)
    terms = [OperatorTerm(complex(energy, eta), I)]
    terms += h0.scaled(-1).terms
    terms += decompose_diagonal(potential, rel_threshold).op.scaled(-1).terms
    terms += _contact_dyads(n, _spike_map(n, contact_sigma), -1)
    return OperatorSum(n, tuple(terms), False)


def gram_terms(n_total: int, t0: float, energy: float, smooth: np.ndarray, spikes: dict[int, complex],
               n_high: int = 0, rel_threshold: float = 1e-12) -> OperatorSum:
    """``A^dagger A`` for ``A = E I - H0_site - diag(smooth + spikes)``.

    ``H0_site`` acts on the lowest ``n_total - n_high`` qubits; ``smooth`` and
    ``spikes`` (basis index -> value) live on the whole register.  The
    imaginary regulator belongs inside ``smooth``.
    """
    n = n_total
    ns = n - n_high
    smooth = np.asarray(smooth, dtype=complex)
    full = smooth.copy()
    for i, v in spikes.items():
        full[i] += v

    h0 = build_h0(ns, t0).embedded(n_high)
    terms: list[OperatorTerm] = [OperatorTerm(energy**2, PauliString.identity(n))]
    terms += h0.scaled(-2 * energy).terms
    terms += build_h0_squared(ns, t0).embedded(n_high).terms

    # diagonal group: -E(D + D^dag) + D^dag D, plus the 2 t0 (D + D^dag) from H0 D + D^dag H0
    def g(x):
        return (2 * t0 - energy) * 2 * x.real + np.abs(x) ** 2

    diag_smooth = decompose_diagonal(g(smooth), rel_threshold).op
    terms += diag_smooth.terms
    resid = g(full) - g(smooth)
    terms += _contact_dyads(n, {i: complex(resid[i]) for i in sorted(spikes)})

    # cross terms: H0 D + D^dag H0 with the 2 t0 I parts already in the diagonal group
    XL = _xl(n)
    shifted_smooth = _site_shift(smooth, ns)
    shifted_full = _site_shift(full, ns)
    shifted_spikes = {}
    for i, v in spikes.items():
        j = _site_shift_index(i, n, ns)
        shifted_spikes[j] = shifted_spikes.get(j, 0) + v

    wal = decompose_diagonal(smooth, rel_threshold).op.terms
    wal_s = decompose_diagonal(shifted_smooth, rel_threshold).op.terms
    sm, so = ns, n_high
    for zt in wal:
        ph, p = XL * zt.pauli  # -t0 X_L D
        terms.append(OperatorTerm(-t0 * zt.coeff * ph, p))
        ph, p = zt.pauli * XL  # -t0 D^dag X_L
        terms.append(OperatorTerm(-t0 * np.conj(zt.coeff) * ph, p))
    for zt in wal_s:
        ph, p = XL * zt.pauli  # -t0 S^dag X_L D' S
        terms.append(OperatorTerm(-t0 * zt.coeff * ph, p, sm, so))
        ph, p = zt.pauli * XL  # -t0 S^dag D'^dag X_L S
        terms.append(OperatorTerm(-t0 * np.conj(zt.coeff) * ph, p, sm, so))
    I = PauliString.identity(n)
    for i, v in sorted(spikes.items()):
        if v == 0:
            continue
        terms.append(OperatorTerm(-t0 * v, I, dyad=Dyad(i ^ 1, i, n)))
        terms.append(OperatorTerm(-t0 * np.conj(v), I, dyad=Dyad(i, i ^ 1, n)))
    for j, v in sorted(shifted_spikes.items()):
        if v == 0:
            continue
        # the full-register dyads are conjugated by the site shift
        terms.append(OperatorTerm(-t0 * v, I, sm, so, Dyad(j ^ 1, j, n)))
        terms.append(OperatorTerm(-t0 * np.conj(v), I, sm, so, Dyad(j, j ^ 1, n)))
    # +t0 S^dag (I0 (x) X) D' S and its adjoint partner; the window dyad times D'
    # leaves the high-register diagonal of D' at site indices 0 and 1
    for site_row, site_col in ((0, 1), (1, 0)):
        col_diag = shifted_full.reshape(2**n_high, 2**ns)[:, site_col]
        row_diag = shifted_full.reshape(2**n_high, 2**ns)[:, site_row]
        for vals, conj in ((col_diag, False), (row_diag, True)):
            v = np.conj(vals) if conj else vals
            for zt in _high_diagonal_terms(v, n, n_high, rel_threshold):
                terms.append(OperatorTerm(t0 * zt[0], zt[1], sm, so, Dyad(site_row, site_col, ns, n_high)))
    return OperatorSum(n, tuple(terms), True)


def _high_diagonal_terms(v: np.ndarray, n: int, n_high: int, rel_threshold: float):
    """I/Z expansion of a diagonal living on the top ``n_high`` qubits, padded to ``n``."""
    if n_high == 0:
        return [(complex(v[0]), PauliString.identity(n))] if v[0] != 0 else []
    dec = decompose_diagonal(v, rel_threshold).op
    return [(t.coeff, t.pauli.padded(0, n - n_high)) for t in dec.terms]


def _site_shift(d: np.ndarray, ns: int) -> np.ndarray:
    """Diagonal of ``S_site D S_site^dagger`` with the shift on the low ``ns`` qubits."""
    return np.roll(d.reshape(-1, 2**ns), 1, axis=1).reshape(-1)


def _site_shift_index(i: int, n: int, ns: int) -> int:
    hi, lo = divmod(i, 2**ns)
    return hi * 2**ns + (lo + 1) % 2**ns


def build_AdagA(n: int, energy: float, eta: float, t0: float, potential: Sequence[float],
                contact_sigma: tuple[complex, complex] = (0, 0), rel_threshold: float = 1e-12) -> OperatorSum:
    """Hermitian-flagged ``A^dagger A`` for the single-energy system of :func:`build_A`.

    ``i eta`` is folded into the diagonal so that ``A = E I - H0 - (D - i eta I)``.
    ``eta = 0`` is accepted here for limiting-case checks.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    potential = np.asarray(potential, dtype=float)
    if len(potential) != 2**n:
        raise ValueError("potential length must be 2**n")
    smooth = potential - 1j * eta
    return gram_terms(n, t0, energy, smooth, _spike_map(n, contact_sigma), 0, rel_threshold)
