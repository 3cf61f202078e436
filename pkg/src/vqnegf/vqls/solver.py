"""Variational solve loop, solution recovery and restart statistics."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from vqnegf.device import AssembledSystem
from vqnegf.oracle import mse, relative_mse, solve_dense
from vqnegf.vqls.ansatz import AnsatzSpec, build_ansatz, init_params
from vqnegf.vqls.bfgs import minimize_bfgs
from vqnegf.vqls.cost import COST_KINDS, CostModel, DegenerateStateError, evaluate_cost, k_star

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VqlsConfig:
    cost: str = "hybrid"
    alpha: float = 0.7
    seed: int = 0
    max_iterations: int = 500
    gtol: float = 1e-8
    ftol: float = 1e-12
    restarts: int = 10

    def __post_init__(self):
        if self.cost not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.cost!r}")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.max_iterations < 0 or self.restarts < 1:
            raise ValueError("max_iterations must be >= 0 and restarts >= 1")


@dataclass
class RunResult:
    theta_opt: np.ndarray = field(repr=False)
    k_star: float
    cost_history: list[float] = field(repr=False)
    solution: np.ndarray = field(repr=False)
    mse_vs_oracle: float
    rel_mse: float
    converged: bool
    iterations: int
    seed: int
    final_cost: float
    local_cost: float
    message: str = ""


def reference_solution(system: AssembledSystem) -> np.ndarray:
    if system.A_dense is None:
        raise ValueError("system carries no dense matrix for a reference solve")
    return solve_dense(system.A_dense, system.b_raw)


def recover_solution(system: AssembledSystem, spec: AnsatzSpec, theta, k: float) -> np.ndarray:
    """``x = k* b_norm U(theta)|0>`` on the physical scale of the raw right-hand side."""
    if spec.n_qubits != system.n_qubits:
        raise ValueError("ansatz and system sizes differ")
    psi = CostModel(system, "normalized_residual").state(build_ansatz(spec, theta))
    return k * system.b_norm * psi


def optimize(system: AssembledSystem, spec: AnsatzSpec, config: VqlsConfig,
             reference: np.ndarray | None = None, model: CostModel | None = None) -> RunResult:
    """One BFGS run of the chosen cost from a seeded Beta(1/2, 1/2) start."""
    if spec.n_qubits != system.n_qubits:
        raise ValueError("ansatz and system sizes differ")
    if model is None:
        model = CostModel(system, config.cost, config.alpha)
    if reference is None and system.A_dense is not None:
        reference = reference_solution(system)

    def fg(theta):
        try:
            c, g, _ = model.cost_and_gradient(build_ansatz(spec, theta))
        except DegenerateStateError:
            return np.inf, np.zeros_like(theta)
        return c, g

    theta0 = init_params(spec, config.seed)
    res = minimize_bfgs(fg, theta0, config.max_iterations, config.gtol, config.ftol)
    circuit = build_ansatz(spec, res.x)
    psi = model.state(circuit)
    prims = model.primitives_of(psi)[0]
    k = k_star(prims)
    x = k * system.b_norm * psi
    m = mse(x, reference) if reference is not None else float("nan")
    rm = relative_mse(x, reference) if reference is not None else float("nan")
    return RunResult(res.x, k, res.history, x, m, rm, res.converged, res.iterations, config.seed,
                     res.fun, evaluate_cost("local", prims), res.message)


@dataclass
class RestartStats:
    mean: float
    median: float
    min: float
    runs: list[RunResult] = field(repr=False)
    failed: list[tuple[int, str]] = field(default_factory=list)

    @property
    def mses(self) -> np.ndarray:
        return np.array([r.mse_vs_oracle for r in self.runs])

    def relative(self) -> tuple[float, float, float]:
        r = np.array([x.rel_mse for x in self.runs])
        return float(np.mean(r)), float(np.median(r)), float(np.min(r))


def _run_one(args):
    system, spec, config, reference = args
    try:
        return optimize(system, spec, config, reference)
    except (ArithmeticError, ValueError) as exc:  # reported, not fatal
        return exc


def run_restarts(system: AssembledSystem, spec: AnsatzSpec, config: VqlsConfig, n_runs: int | None = None,
                 threads: int = 1, reference: np.ndarray | None = None) -> RestartStats:
    """Independent runs with seeds ``seed + 0 .. seed + n_runs - 1``, aggregated in seed order."""
    n_runs = config.restarts if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if reference is None and system.A_dense is not None:
        reference = reference_solution(system)
    jobs = [(system, spec, replace(config, seed=config.seed + i), reference) for i in range(n_runs)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_run_one, jobs))
    else:
        outs = [_run_one(j) for j in jobs]
    runs, failed = [], []
    for job, out in zip(jobs, outs):
        if isinstance(out, Exception):
            log.warning("run with seed %d failed: %s", job[2].seed, out)
            failed.append((job[2].seed, str(out)))
        else:
            runs.append(out)
    if not runs:
        raise RuntimeError("every restart failed")
    m = np.array([r.mse_vs_oracle for r in runs])
    return RestartStats(float(np.mean(m)), float(np.median(m)), float(np.min(m)), runs, failed)
