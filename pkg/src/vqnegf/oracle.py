"""Classical NEGF reference: dense solves and transport post-processing."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import constants

from vqnegf.device import DeviceSpec, EnergyGrid, broadening

KB_EV = constants.k / constants.e
# 2 q / h in A / eV
CONDUCTANCE_PREFACTOR = 2 * constants.e / constants.h * constants.e


class SingularSystemError(np.linalg.LinAlgError):
    pass


def solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU solve with partial pivoting; refuses pivots below ``1e-14 * max|pivot|``."""
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise ValueError("solve_dense needs a square matrix and a matching right-hand side")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularSystemError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    d = np.abs(np.diag(lu))
    if d.min() < 1e-14 * max(d.max(), np.abs(A).max()):
        raise SingularSystemError("matrix is singular to working tolerance")
    return sla.lu_solve((lu, piv), b)


def green_columns(device: DeviceSpec, energy: float) -> tuple[np.ndarray, np.ndarray]:
    """Source and drain columns ``G(:, 0)`` and ``G(:, N-1)``."""
    A = device.dense_A(energy)
    rhs = np.zeros((device.n_sites, 2), dtype=complex)
    rhs[0, 0] = 1
    rhs[-1, 1] = 1
    g = solve_dense(A, rhs)
    return g[:, 0], g[:, 1]


def transmission(g_drain: np.ndarray, gamma1: float, gamma2: float) -> float:
    """``T = Gamma_1 Gamma_2 |G(0, N-1)|^2``."""
    return float(gamma1 * gamma2 * abs(g_drain[0]) ** 2)


def ldos(g_source: np.ndarray, g_drain: np.ndarray, gamma1: float, gamma2: float) -> np.ndarray:
    """Injected spectral density per site, ``(G1 |G(x,0)|^2 + G2 |G(x,N-1)|^2) / 2 pi``."""
    return (gamma1 * np.abs(g_source) ** 2 + gamma2 * np.abs(g_drain) ** 2) / (2 * np.pi)


def fermi(energy, mu: float, temperature_K: float):
    """Fermi function; ``temperature_K = 0`` gives the step with value 1/2 at ``mu``."""
    x = np.asarray(energy, dtype=float) - mu
    if temperature_K == 0:
        return 0.5 * (1 - np.sign(x))
    return 0.5 * (1 - np.tanh(x / (2 * KB_EV * temperature_K)))


def current_spectrum(T, energies, mu1: float, mu2: float, temperature_K: float) -> tuple[np.ndarray, float]:
    """``J(E) = T(E) [f1 - f2]`` and the Landauer current ``(2q/h) sum J dE`` in amperes."""
    if temperature_K < 0:
        raise ValueError("temperature must be nonnegative")
    E = np.asarray(energies, dtype=float)
    J = np.asarray(T, dtype=float) * (fermi(E, mu1, temperature_K) - fermi(E, mu2, temperature_K))
    if len(E) > 1:
        total = float(np.trapezoid(J, E))
    else:
        total = 0.0
    return J, CONDUCTANCE_PREFACTOR * total


def mse(x, y) -> float:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError("mse needs equal-length vectors")
    return float(np.mean(np.abs(x - y) ** 2))


def relative_mse(x, y) -> float:
    """``||x - y||^2 / ||y||^2``, MSE in units of the reference solution's mean power."""
    y = np.asarray(y)
    return mse(x, y) / float(np.mean(np.abs(y) ** 2))


@dataclass
class TransportResult:
    energies: np.ndarray
    g_source: np.ndarray = field(repr=False)  # (N_E, N_r)
    g_drain: np.ndarray = field(repr=False)
    gamma1: np.ndarray = field(repr=False)
    gamma2: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)
    ldos: np.ndarray = field(repr=False)  # (N_E, N_r)
    J: np.ndarray = field(repr=False)
    current_A: float = 0.0


def transport_from_columns(device: DeviceSpec, energies, g_source, g_drain, mu1: float = 0.1,
                           mu2: float = 0.0, temperature_K: float = 300.0) -> TransportResult:
    """Post-process Green's function columns (oracle or variational) into observables."""
    E = np.asarray(energies, dtype=float)
    gs = np.asarray(g_source)
    gd = np.asarray(g_drain)
    gam = np.array([[broadening(s) for s in device.sigmas(e)] for e in E]).reshape(len(E), 2)
    T = np.array([transmission(gd[i], gam[i, 0], gam[i, 1]) for i in range(len(E))])
    L = np.array([ldos(gs[i], gd[i], gam[i, 0], gam[i, 1]) for i in range(len(E))])
    J, cur = current_spectrum(T, E, mu1, mu2, temperature_K)
    return TransportResult(E, gs, gd, gam[:, 0], gam[:, 1], T, L, J, cur)


def transport(device: DeviceSpec, grid: EnergyGrid, mu1: float = 0.1, mu2: float = 0.0,
              temperature_K: float = 300.0) -> TransportResult:
    cols = [green_columns(device, e) for e in grid.energies]
    gs = np.array([c[0] for c in cols])
    gd = np.array([c[1] for c in cols])
    return transport_from_columns(device, grid.energies, gs, gd, mu1, mu2, temperature_K)
