"""Variational quantum linear solver: ansatz, costs, optimizer, restarts."""
from vqnegf.vqls.ansatz import VARIANTS, AnsatzSpec, build_ansatz, init_params
from vqnegf.vqls.cost import (COST_KINDS, CostModel, CostPrimitives, evaluate_cost, evaluate_primitives,
                              k_star)
from vqnegf.vqls.solver import (RestartStats, RunResult, VqlsConfig, optimize, recover_solution,
                                reference_solution, run_restarts)

__all__ = [
    "VARIANTS", "AnsatzSpec", "build_ansatz", "init_params",
    "COST_KINDS", "CostModel", "CostPrimitives", "evaluate_cost", "evaluate_primitives", "k_star",
    "RestartStats", "RunResult", "VqlsConfig", "optimize", "recover_solution", "reference_solution",
    "run_restarts",
]
