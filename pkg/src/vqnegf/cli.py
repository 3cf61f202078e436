"""Experiment runner driven by a JSON configuration.

Usage::

    vqnegf <experiment> --config cfg.json [--out DIR] [--seed N] [--strict]
                        [--threads N] [--validate-only]
    vqnegf validate --config cfg.json

Experiments: ``solve_single``, ``compare_costs``, ``sweep_alpha``,
``compare_ansatz``, ``solve_parallel`` and ``oracle_sweep``.  Outputs are CSV
files with a header row and 17 significant digits; see ``README.md`` for the
configuration schema.

Exit status: 0 success, 2 invalid configuration, 3 I/O failure, 4 a
convergence gate failed under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from vqnegf.device import (BLOCK_MAX_AMPLITUDES, DeviceSpec, EnergyGrid, assemble_block_system,
                           assemble_system, build_potential)
from vqnegf.oracle import TransportResult, solve_dense, transport, transport_from_columns
from vqnegf.vqls import AnsatzSpec, RestartStats, VqlsConfig, run_restarts
from vqnegf.vqls.ansatz import VARIANTS
from vqnegf.vqls.cost import COST_KINDS

log = logging.getLogger("vqnegf")

EXPERIMENTS = ("solve_single", "compare_costs", "sweep_alpha", "compare_ansatz", "solve_parallel", "oracle_sweep")
SINGLE_ENERGY = ("solve_single", "compare_costs", "sweep_alpha", "compare_ansatz")
GRID_EXPERIMENTS = ("solve_parallel", "oracle_sweep")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_STRICT = 0, 2, 3, 4

_TOP_KEYS = {"experiment", "seed", "device", "energy", "energy_grid", "vqls", "transport", "output"}
_DEVICE_KEYS = {"n_sites", "length_nm", "m_rel", "potential", "contact_onsite", "eta_eV"}
_GRID_KEYS = {"start", "stop", "count"}
_VQLS_KEYS = {"cost", "alpha", "max_iterations", "gtol", "ftol", "restarts", "ansatz", "layers",
              "costs", "alphas", "ansatze", "strict_local_cost"}
_TRANSPORT_KEYS = {"mu1", "mu2", "temperature_K"}
_POTENTIAL_PARAMS = {"flat": {"value"}, "logistic_barrier": {"height", "x1", "x2", "width"}, "samples": {"values"}}


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


# --- configuration --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    device: DeviceSpec
    vqls: VqlsConfig = field(default_factory=VqlsConfig)
    seed: int = 0
    energy: float | None = None
    grid: EnergyGrid | None = None
    ansatz: str = "crz_ry_circular"
    layers: tuple[int, ...] = (3,)
    costs: tuple[str, ...] = ("global", "local", "normalized_residual", "hybrid")
    alphas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 0.9, 1.0)
    ansatze: tuple[str, ...] = VARIANTS
    strict_local_cost: float = 0.05
    mu1: float = 0.1
    mu2: float = 0.0
    temperature_K: float = 300.0
    output: str = "out"


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _unknown(block: dict, allowed: set[str], path: str) -> list[str]:
    return [f"{path}{k}: unknown key" for k in sorted(set(block) - allowed)]


def _device_violations(dev, out: list[str]) -> None:
    if not isinstance(dev, dict):
        out.append("device: must be an object")
        return
    out += _unknown(dev, _DEVICE_KEYS, "device.")
    n = dev.get("n_sites", 32)
    if not _int(n) or n < 4:
        out.append("device.n_sites: integer >= 4 required")
    elif n & (n - 1):
        out.append("device.n_sites: power of two required")
    for key in ("length_nm", "m_rel", "eta_eV"):
        if key in dev and not (_num(dev[key]) and dev[key] > 0):
            out.append(f"device.{key}: positive number required")
    co = dev.get("contact_onsite", [0.0, 0.0])
    if not (isinstance(co, list) and len(co) == 2 and all(_num(v) for v in co)):
        out.append("device.contact_onsite: list of two numbers required")
    pot = dev.get("potential")
    if pot is None:
        return
    if isinstance(pot, list):
        if not all(_num(v) for v in pot):
            out.append("device.potential: numbers required")
        elif _int(n) and len(pot) != n:
            out.append(f"device.potential: expected {n} samples, got {len(pot)}")
        return
    if not isinstance(pot, dict):
        out.append("device.potential: list, object or null required")
        return
    kind = pot.get("kind")
    if kind not in _POTENTIAL_PARAMS:
        out.append(f"device.potential.kind: one of {sorted(_POTENTIAL_PARAMS)} required")
        return
    out += _unknown(pot, _POTENTIAL_PARAMS[kind] | {"kind"}, "device.potential.")
    if kind == "logistic_barrier":
        for key in ("height", "x1", "x2", "width"):
            if not _num(pot.get(key)):
                out.append(f"device.potential.{key}: number required")
        if _num(pot.get("width")) and pot["width"] <= 0:
            out.append("device.potential.width: positive number required")
        if _num(pot.get("x1")) and _num(pot.get("x2")) and pot["x2"] <= pot["x1"]:
            out.append("device.potential: x2 > x1 required")
    elif kind == "flat" and "value" in pot and not _num(pot["value"]):
        out.append("device.potential.value: number required")
    elif kind == "samples":
        vals = pot.get("values")
        if not (isinstance(vals, list) and all(_num(v) for v in vals)):
            out.append("device.potential.values: list of numbers required")
        elif _int(n) and len(vals) != n:
            out.append(f"device.potential.values: expected {n} samples, got {len(vals)}")


def _list_violations(vq: dict, key: str, ok, what: str, out: list[str]) -> None:
    if key not in vq:
        return
    v = vq[key]
    if not isinstance(v, list) or not v:
        out.append(f"vqls.{key}: non-empty list required")
    elif not all(ok(x) for x in v):
        out.append(f"vqls.{key}: {what}")


def config_violations(raw, experiment: str | None = None) -> list[str]:
    """Schema violations of a parsed JSON config; empty means valid."""
    if not isinstance(raw, dict):
        return ["config: JSON object required"]
    out = _unknown(raw, _TOP_KEYS, "")
    kind = raw.get("experiment", experiment)
    if kind not in EXPERIMENTS:
        out.append(f"experiment: one of {list(EXPERIMENTS)} required")
    elif experiment is not None and kind != experiment:
        out.append(f"experiment: config names {kind!r} but {experiment!r} was requested")
    if "seed" in raw and not (_int(raw["seed"]) and raw["seed"] >= 0):
        out.append("seed: non-negative integer required")
    if "output" in raw and not isinstance(raw["output"], str):
        out.append("output: string required")

    if "device" not in raw:
        out.append("device: required")
    else:
        _device_violations(raw["device"], out)

    if kind in SINGLE_ENERGY:
        if "energy" not in raw:
            out.append("energy: required")
        elif not _num(raw["energy"]):
            out.append("energy: number required")
    if kind in GRID_EXPERIMENTS:
        g = raw.get("energy_grid")
        if g is None:
            out.append("energy_grid: required")
        elif not isinstance(g, dict):
            out.append("energy_grid: object required")
        else:
            out += _unknown(g, _GRID_KEYS, "energy_grid.")
            for key in ("start", "stop"):
                if not _num(g.get(key)):
                    out.append(f"energy_grid.{key}: number required")
            c = g.get("count")
            if not (_int(c) and c >= 1):
                out.append("energy_grid.count: positive integer required")
            elif kind == "solve_parallel":
                if c & (c - 1):
                    out.append("energy_grid.count: power of two required")
                dev = raw.get("device")
                n = dev.get("n_sites", 32) if isinstance(dev, dict) else None
                if _int(n) and 2 * c * n > BLOCK_MAX_AMPLITUDES:
                    out.append(f"energy_grid.count: block system exceeds {BLOCK_MAX_AMPLITUDES} amplitudes")

    vq = raw.get("vqls", {})
    if not isinstance(vq, dict):
        out.append("vqls: object required")
        vq = {}
    out += _unknown(vq, _VQLS_KEYS, "vqls.")
    if "cost" in vq and vq["cost"] not in COST_KINDS:
        out.append(f"vqls.cost: one of {list(COST_KINDS)} required")
    if "alpha" in vq and not (_num(vq["alpha"]) and 0 <= vq["alpha"] <= 1):
        out.append("vqls.alpha: number in [0, 1] required")
    if "max_iterations" in vq and not (_int(vq["max_iterations"]) and vq["max_iterations"] >= 0):
        out.append("vqls.max_iterations: non-negative integer required")
    if "restarts" in vq and not (_int(vq["restarts"]) and vq["restarts"] >= 1):
        out.append("vqls.restarts: positive integer required")
    for key in ("gtol", "ftol", "strict_local_cost"):
        if key in vq and not (_num(vq[key]) and vq[key] > 0):
            out.append(f"vqls.{key}: positive number required")
    if "ansatz" in vq and vq["ansatz"] not in VARIANTS:
        out.append(f"vqls.ansatz: one of {list(VARIANTS)} required")
    _list_violations(vq, "layers", lambda x: _int(x) and x >= 1, "positive integers required", out)
    _list_violations(vq, "costs", lambda x: x in COST_KINDS, f"entries must be in {list(COST_KINDS)}", out)
    _list_violations(vq, "alphas", lambda x: _num(x) and 0 <= x <= 1, "numbers in [0, 1] required", out)
    _list_violations(vq, "ansatze", lambda x: x in VARIANTS, f"entries must be in {list(VARIANTS)}", out)
    # the NEGF matrix is neither Hermitian nor positive definite
    if vq.get("cost") == "energy" or (kind == "compare_costs" and "energy" in (vq.get("costs") or [])):
        out.append("vqls: energy cost requires a Hermitian positive-definite system")

    tr = raw.get("transport", {})
    if not isinstance(tr, dict):
        out.append("transport: object required")
    else:
        out += _unknown(tr, _TRANSPORT_KEYS, "transport.")
        for key in ("mu1", "mu2"):
            if key in tr and not _num(tr[key]):
                out.append(f"transport.{key}: number required")
        if "temperature_K" in tr and not (_num(tr["temperature_K"]) and tr["temperature_K"] >= 0):
            out.append("transport.temperature_K: non-negative number required")
    return out


def _device_from(dev: dict) -> DeviceSpec:
    base = DeviceSpec.__dataclass_fields__
    n = dev.get("n_sites", base["n_sites"].default)
    length = float(dev.get("length_nm", base["length_nm"].default))
    pot = dev.get("potential")
    if isinstance(pot, dict):
        params = {k: v for k, v in pot.items() if k != "kind"}
        pot = tuple(build_potential(pot["kind"], n, length, **params))
    elif isinstance(pot, list):
        pot = tuple(float(v) for v in pot)
    return DeviceSpec(n_sites=n, length_nm=length, m_rel=float(dev.get("m_rel", base["m_rel"].default)),
                      potential=pot, contact_onsite=tuple(dev.get("contact_onsite", (0.0, 0.0))),
                      eta_eV=float(dev.get("eta_eV", base["eta_eV"].default)))


def parse_config(raw, experiment: str | None = None) -> ExperimentConfig:
    """Validated :class:`ExperimentConfig`; raises :class:`ConfigError`."""
    bad = config_violations(raw, experiment)
    if bad:
        raise ConfigError(bad)
    vq = raw.get("vqls", {})
    tr = raw.get("transport", {})
    seed = raw.get("seed", 0)
    vcfg = VqlsConfig(**{k: vq[k] for k in ("cost", "alpha", "max_iterations", "gtol", "ftol", "restarts") if k in vq},
                      seed=seed)
    grid = None
    if "energy_grid" in raw:
        g = raw["energy_grid"]
        grid = EnergyGrid.linspace(g["start"], g["stop"], g["count"])
    d = ExperimentConfig.__dataclass_fields__
    return ExperimentConfig(
        experiment=raw.get("experiment", experiment),
        device=_device_from(raw["device"]),
        vqls=vcfg,
        seed=seed,
        energy=float(raw["energy"]) if "energy" in raw else None,
        grid=grid,
        ansatz=vq.get("ansatz", d["ansatz"].default),
        layers=tuple(vq.get("layers", d["layers"].default)),
        costs=tuple(vq.get("costs", d["costs"].default)),
        alphas=tuple(float(a) for a in vq.get("alphas", d["alphas"].default)),
        ansatze=tuple(vq.get("ansatze", d["ansatze"].default)),
        strict_local_cost=float(vq.get("strict_local_cost", d["strict_local_cost"].default)),
        mu1=float(tr.get("mu1", d["mu1"].default)),
        mu2=float(tr.get("mu2", d["mu2"].default)),
        temperature_K=float(tr.get("temperature_K", d["temperature_K"].default)),
        output=raw.get("output", d["output"].default),
    )


def load_config(path) -> dict:
    """Parsed JSON; ``OSError`` if unreadable, ``ConfigError`` if not JSON."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc})"]) from None


def validate_config(path, experiment: str | None = None) -> list[str]:
    """Violations of the config at ``path`` without running anything."""
    try:
        raw = load_config(path)
    except ConfigError as exc:
        return exc.violations
    return config_violations(raw, experiment)


# --- CSV output ---------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


# --- experiments --------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    cost: str
    ansatz: str
    alpha: float
    layers: int

    def key(self) -> list:
        return [self.cost, self.ansatz, self.alpha if self.cost == "hybrid" else "", self.layers]


CELL_HEADER = ["cost_kind", "ansatz", "alpha", "layers"]


def experiment_cells(cfg: ExperimentConfig) -> list[Cell]:
    v = cfg.vqls
    if cfg.experiment == "compare_costs":
        return [Cell(c, cfg.ansatz, v.alpha, L) for c in cfg.costs for L in cfg.layers]
    if cfg.experiment == "sweep_alpha":
        return [Cell("hybrid", cfg.ansatz, a, L) for L in cfg.layers for a in cfg.alphas]
    if cfg.experiment == "compare_ansatz":
        return [Cell(v.cost, a, v.alpha, L) for a in cfg.ansatze for L in cfg.layers]
    if cfg.experiment in ("solve_single", "solve_parallel"):
        return [Cell(v.cost, cfg.ansatz, v.alpha, L) for L in cfg.layers]
    return []


@dataclass
class ExperimentOutcome:
    cells: list[tuple[Cell, RestartStats]] = field(default_factory=list)
    transport_oracle: TransportResult | None = None
    transport_vqls: TransportResult | None = None
    gate_failures: list[str] = field(default_factory=list)
    files: list[str] = field(default_factory=list)


def run_cells(system, cfg: ExperimentConfig, threads: int = 1) -> list[tuple[Cell, RestartStats]]:
    reference = solve_dense(system.A_dense, system.b_raw) if system.A_dense is not None else None
    out = []
    for cell in experiment_cells(cfg):
        spec = AnsatzSpec(cell.ansatz, system.n_qubits, cell.layers)
        vc = replace(cfg.vqls, cost=cell.cost, alpha=cell.alpha)
        log.info("cell %s: %d restarts", cell, vc.restarts)
        out.append((cell, run_restarts(system, spec, vc, threads=threads, reference=reference)))
    return out


def _best(runs, key):
    return min(runs, key=lambda r: (key(r), r.seed))


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> ExperimentOutcome:
    """Execute ``cfg`` and write its CSV artifacts into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = ExperimentOutcome()
    dev = cfg.device

    if cfg.experiment == "oracle_sweep":
        res.transport_oracle = transport(dev, cfg.grid, cfg.mu1, cfg.mu2, cfg.temperature_K)
    else:
        if cfg.experiment == "solve_parallel":
            system = assemble_block_system(dev, cfg.grid)
        else:
            system = assemble_system(dev, cfg.energy)
        res.cells = run_cells(system, cfg, threads)
        for cell, st in res.cells:
            if not any(r.local_cost < cfg.strict_local_cost for r in st.runs):
                res.gate_failures.append(f"{cell}: no restart reached C_L < {cfg.strict_local_cost:g}")
        _write_runs(res, out_dir)
        if cfg.experiment in ("solve_single", "solve_parallel"):
            all_runs = [r for _, st in res.cells for r in st.runs]
            if cfg.experiment == "solve_single":
                best = _best(all_runs, lambda r: r.mse_vs_oracle)
            else:
                # pick without looking at the oracle
                best = _best(all_runs, lambda r: r.local_cost)
            ref = solve_dense(system.A_dense, system.b_raw) if system.A_dense is not None else None
            write_csv(out_dir / "solution.csv", ["index", "re", "im", "oracle_re", "oracle_im"],
                      ([i, z.real, z.imag, *((ref[i].real, ref[i].imag) if ref is not None else ("", ""))]
                       for i, z in enumerate(best.solution)))
            res.files.append("solution.csv")
            if cfg.experiment == "solve_parallel":
                cols = system.layout.slices(best.solution)
                res.transport_vqls = transport_from_columns(dev, cfg.grid.energies, cols[:, 0, :], cols[:, 1, :],
                                                            cfg.mu1, cfg.mu2, cfg.temperature_K)
                res.transport_oracle = transport(dev, cfg.grid, cfg.mu1, cfg.mu2, cfg.temperature_K)

    if res.transport_oracle is not None:
        _write_transport(res, out_dir)
    return res


def _write_runs(res: ExperimentOutcome, out_dir: Path) -> None:
    write_csv(out_dir / "cost_history.csv", CELL_HEADER + ["run", "iteration", "cost"],
              ([*cell.key(), i, it, c]
               for cell, st in res.cells for i, r in enumerate(st.runs) for it, c in enumerate(r.cost_history)))
    write_csv(out_dir / "runs.csv",
              CELL_HEADER + ["run", "seed", "iterations", "converged", "final_cost", "local_cost", "k_star",
                             "mse", "relative_mse"],
              ([*cell.key(), i, r.seed, r.iterations, r.converged, r.final_cost, r.local_cost, r.k_star,
                r.mse_vs_oracle, r.rel_mse]
               for cell, st in res.cells for i, r in enumerate(st.runs)))
    write_csv(out_dir / "mse_stats.csv",
              CELL_HEADER + ["mean", "median", "min", "rel_mean", "rel_median", "rel_min", "runs", "failed"],
              ([*cell.key(), st.mean, st.median, st.min, *st.relative(), len(st.runs), len(st.failed)]
               for cell, st in res.cells))
    res.files += ["cost_history.csv", "runs.csv", "mse_stats.csv"]


def _write_transport(res: ExperimentOutcome, out_dir: Path) -> None:
    o, v = res.transport_oracle, res.transport_vqls
    blank = [""] * len(o.energies)
    tv = v.T if v is not None else blank
    jv = v.J if v is not None else blank
    write_csv(out_dir / "transport.csv", ["energy", "T_oracle", "T_vqls", "J_oracle", "J_vqls"],
              zip(o.energies, o.T, tv, o.J, jv))
    rows = []
    for e in range(len(o.energies)):
        for s in range(o.ldos.shape[1]):
            rows.append([s, o.energies[e], o.ldos[e, s], v.ldos[e, s] if v is not None else ""])
    write_csv(out_dir / "ldos.csv", ["site", "energy", "ldos_oracle", "ldos_vqls"], rows)
    res.files += ["transport.csv", "ldos.csv"]


def summary_table(res: ExperimentOutcome) -> str:
    lines = []
    if res.cells:
        lines.append(f"{'cost':<20} {'ansatz':<20} {'alpha':>5} {'L':>2} {'mean':>10} {'median':>10} {'min':>10}")
        for cell, st in res.cells:
            a = f"{cell.alpha:.2f}" if cell.cost == "hybrid" else "-"
            lines.append(f"{cell.cost:<20} {cell.ansatz:<20} {a:>5} {cell.layers:>2} "
                         f"{st.mean:10.3e} {st.median:10.3e} {st.min:10.3e}")
    if res.transport_oracle is not None:
        o = res.transport_oracle
        lines.append(f"oracle current {o.current_A:.6e} A over {len(o.energies)} energies")
        if res.transport_vqls is not None:
            v = res.transport_vqls
            err = np.linalg.norm(v.T - o.T) / max(np.linalg.norm(o.T), 1e-300)
            lines.append(f"variational current {v.current_A:.6e} A, relative T error {err:.3e}")
    return "\n".join(lines)


# --- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vqnegf", description="Variational NEGF transport experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS + ("validate",))
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--strict", action="store_true", help="exit 4 when a convergence gate fails")
    p.add_argument("--threads", type=int, default=1, help="worker processes for restarts")
    p.add_argument("--validate-only", action="store_true", help="check the config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = None if args.experiment == "validate" else args.experiment
    try:
        raw = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print("\n".join(exc.violations), file=sys.stderr)
        return EXIT_CONFIG
    if isinstance(raw, dict) and args.seed is not None:
        raw = {**raw, "seed": args.seed}
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    bad = config_violations(raw, kind)
    if bad:
        print("\n".join(bad), file=sys.stderr)
        return EXIT_CONFIG
    if args.experiment == "validate" or args.validate_only:
        print("config OK")
        return EXIT_OK
    try:
        cfg = parse_config(raw, kind)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.output
    try:
        res = run_experiment(cfg, out_dir, threads=args.threads)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(summary_table(res))
    print(f"wrote {', '.join(res.files)} to {os.fspath(out_dir)}")
    for msg in res.gate_failures:
        print(f"gate: {msg}", file=sys.stderr)
    if args.strict and res.gate_failures:
        return EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
