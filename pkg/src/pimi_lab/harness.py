"""Experiment plumbing: plain-text manifests, the four experiment families
(Max-Cut benchmark, SK benchmark, detection BER sweeps, flip-rate
diagnostics), file-based stage composition, reproducibility stamps, and
report generation.

A manifest fully determines every archive byte: all randomness flows from
the manifest seed through documented SeedSequence splits, no timestamps or
host details are written, and the worker count is a run-time argument that
never reaches the outputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ConfigError,
    IsingInstance,
    read_records_jsonl,
    write_records_jsonl,
)
from .instances import Family, GeneratorSpec, generate
from .metrics import (
    CostModel,
    CostModelKind,
    SuccessCriterion,
    log_space_std,
    neighbor_triggered_flip_rate,
    optimize_step_budget,
    success_curve,
)
from .mimo import DetectorConfig, ber, gen_scenario
from .oracle import OracleMethod, solve_ground_truth
from .solvers import (
    Quantization,
    SolverKind,
    run_batch,
    schedule_defaults_version,
    schedule_for_solver,
)

WORKERS_ENV_VAR = "PIMI_LAB_WORKERS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_UNSOLVED = 4

FAMILIES = ("maxcut-bench", "sk-bench", "mimo-ber", "flip-rate")

_COST_MODEL_FOR_SOLVER = {
    SolverKind.CONV_SEQUENTIAL: CostModelKind.SEQ,
    SolverKind.CONV_PARALLEL: CostModelKind.PAR,
    SolverKind.PIMI: CostModelKind.PIMI,
}


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be >= 1")
    return value


# ---------------------------------------------------------------------------
# Manifest parsing (plain-text key = value, schema version 1)

_COMMON_KEYS = {"schema_version", "family", "seed", "out"}
_FAMILY_KEYS = {
    "maxcut-bench": {"sizes", "instances", "trials", "steps_per_spin", "solvers",
                     "oracle", "grid_step", "threshold_fraction", "epsilon",
                     "edge_prob"},
    "sk-bench": {"sizes", "instances", "trials", "steps_per_spin", "solvers",
                 "oracle", "grid_step", "threshold_fraction", "epsilon"},
    "mimo-ber": {"nt", "nr", "qam", "ebn0", "scenarios", "detectors", "trials",
                 "steps", "quantized", "tanh_levels"},
    "flip-rate": {"problem", "n", "instance_seed", "trials", "steps", "xi",
                  "beta", "eta"},
}


@dataclass
class ExperimentManifest:
    """Parsed manifest: family plus family-specific options. The manifest is
    the unit of reproducibility; its canonical text hashes into the stamp."""

    family: str
    seed: int
    out_dir: str
    options: dict = field(default_factory=dict)
    schema_version: int = 1

    def canonical_text(self) -> str:
        lines = [f"schema_version = {self.schema_version}",
                 f"family = {self.family}",
                 f"seed = {self.seed}"]
        for key in sorted(self.options):
            lines.append(f"{key} = {self.options[key]}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def parse_manifest_text(text: str, out_dir: str | None = None) -> ExperimentManifest:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"manifest line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"manifest line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"manifest line {lineno}: duplicate key {key!r}")
        pairs[key] = value

    version = pairs.pop("schema_version", None)
    if version is None or int(version) != 1:
        raise ConfigError("manifest must declare schema_version = 1")
    family = pairs.pop("family", None)
    if family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {family!r}")
    seed = pairs.pop("seed", None)
    if seed is None:
        raise ConfigError("manifest must declare a seed")
    out = pairs.pop("out", out_dir)
    if out is None:
        raise ConfigError("manifest must declare out = <directory> (or pass one)")
    unknown = set(pairs) - _FAMILY_KEYS[family]
    if unknown:
        raise ConfigError(f"unknown manifest keys for {family}: {sorted(unknown)}")
    return ExperimentManifest(family=family, seed=int(seed), out_dir=str(out),
                              options=pairs)


def load_manifest(path) -> ExperimentManifest:
    return parse_manifest_text(Path(path).read_text())


def _opt_int(options, key, default):
    return int(options.get(key, default))


def _opt_float(options, key, default):
    return float(options.get(key, default))


def _opt_list(options, key, default, conv=str):
    raw = options.get(key, default)
    if isinstance(raw, str):
        return [conv(part.strip()) for part in raw.split(",") if part.strip()]
    return [conv(v) for v in raw]


def _float_grid(spec: str) -> list[float]:
    """Parse "start:stop:step" (inclusive stop) or a comma list."""
    if ":" in spec:
        start, stop, step = (float(v) for v in spec.split(":"))
        if step <= 0:
            raise ConfigError("grid step must be positive")
        out = []
        v = start
        while v <= stop + 1e-9:
            out.append(round(v, 10))
            v += step
        return out
    return [float(v) for v in spec.split(",")]


# ---------------------------------------------------------------------------
# Stages (file -> file; each stage reads only serialized outputs)


def instance_seed(base_seed: int, n: int, index: int) -> int:
    ss = np.random.SeedSequence([int(base_seed), int(n), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def stage_generate(family: Family, sizes, count: int, base_seed: int,
                   out_dir: Path, edge_prob: float = 0.5) -> list[Path]:
    """Write instance JSON files named <family>_n<N>_i<k>.json."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for n in sizes:
        for k in range(count):
            spec = GeneratorSpec(family, n, instance_seed(base_seed, n, k),
                                 edge_prob=edge_prob)
            inst, edges = generate(spec)
            payload = inst.to_json_dict()
            if edges is not None:
                payload["edge_count"] = edges
            path = out_dir / f"{family.value}_n{n}_i{k}.json"
            with open(path, "w") as f:
                json.dump(payload, f)
                f.write("\n")
            paths.append(path)
    return paths


def stage_oracle(instance_paths, method: OracleMethod, out_path: Path,
                 seed: int = 0, **kwargs) -> dict:
    """Ground truths for every instance file; gs.json maps filename ->
    {energy, method, effort}."""
    table = {}
    for path in instance_paths:
        inst = IsingInstance.load(path)
        res = solve_ground_truth(inst, method, seed=seed, **kwargs)
        table[Path(path).name] = {
            "energy": res.best_energy,
            "method": res.method.value,
            "effort": res.effort,
        }
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as f:
        json.dump(dict(sorted(table.items())), f, indent=1, sort_keys=True)
        f.write("\n")
    return table


def stage_solve(instance_paths, kind: SolverKind, family: str, t_steps: int,
                trials: int, base_seed: int, out_path: Path, workers: int = 1,
                quantization: Quantization | None = None,
                schedule_overrides: dict | None = None,
                record_trajectory: bool = False,
                record_states: bool = False) -> None:
    """Solve a set of instance files with one solver kind and write records
    (with instance / trial annotations) as JSON lines."""
    instances = [IsingInstance.load(p) for p in instance_paths]
    if not instances:
        write_records_jsonl(out_path, [])
        return
    n = instances[0].n
    if any(inst.n != n for inst in instances):
        raise ConfigError("stage_solve expects instances of equal size")
    sched = schedule_for_solver(kind, family, n, t_steps, schedule_overrides)
    results = run_batch(instances, kind, sched, trials, base_seed,
                        workers=workers, quantization=quantization,
                        record_trajectory=record_trajectory,
                        record_states=record_states)
    records, extras = [], []
    for path, recs in zip(instance_paths, results):
        for t_idx, rec in enumerate(recs):
            records.append(rec)
            extras.append({"instance": Path(path).name, "trial": t_idx,
                           "kind": kind.value, "t_steps": t_steps})
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_records_jsonl(out_path, records, keep_trajectory=record_trajectory,
                        keep_states=record_states, extra=extras)


def _fmt(value) -> str:
    """Deterministic CSV cell: shortest round-trip float, empty for non-finite."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return ""
        return repr(value)
    return str(value)


def stage_ccts(records_path, ground_path, model_kind: CostModelKind,
               grid, out_path: Path, threshold_fraction: float = 0.999,
               epsilon: float = 0.001):
    """Aggregate solver records into a CCTS landscape CSV with columns
    (T_steps, p_mean, p_logstd, n_trials, ccts). Returns the landscape."""
    records, extras = read_records_jsonl(records_path)
    if not records:
        raise ConfigError(f"no records in {records_path}")
    with open(ground_path) as f:
        ground = json.load(f)

    by_instance: dict[str, list] = {}
    for rec, extra in zip(records, extras):
        by_instance.setdefault(extra["instance"], []).append(rec)

    grid = [int(t) for t in grid]
    curves = []
    n = len(records[0].final_spins)
    for name, recs in sorted(by_instance.items()):
        if name not in ground:
            raise ConfigError(f"missing ground truth for {name}")
        crit = SuccessCriterion(float(ground[name]["energy"]),
                                threshold_fraction)
        curves.append(success_curve(recs, crit, grid))
    curves = np.array(curves)  # (instances, budgets)
    p_means = curves.mean(axis=0)
    p_stds = [log_space_std(curves[:, k]) for k in range(len(grid))]

    landscape = optimize_step_budget(n, CostModel(model_kind), grid, p_means,
                                     epsilon=epsilon, p_logstd=p_stds)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["T_steps", "p_mean", "p_logstd", "n_trials", "ccts"])
        for (t, p, trials, cost), std in zip(landscape.grid, landscape.p_logstd):
            writer.writerow([t, _fmt(float(p)), _fmt(std),
                             _fmt(float(trials)), _fmt(float(cost))])
    return landscape


def stage_flip_rate(records_path, instance_path, out_path: Path) -> np.ndarray:
    """Neighbor-triggered flip rate from state-recording records; CSV columns
    (step, p_nt), empty cell for steps with no conditioning events."""
    records, _ = read_records_jsonl(records_path)
    trajs = [rec.state_trajectory for rec in records if rec.state_trajectory is not None]
    if not trajs:
        raise ConfigError(f"{records_path} holds no state trajectories")
    inst = IsingInstance.load(instance_path)
    pnt = neighbor_triggered_flip_rate(trajs, inst)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "p_nt"])
        for t, v in enumerate(pnt):
            writer.writerow([t, _fmt(float(v))])
    return pnt


def stage_mimo_ber(nt: int, nr: int, qam: int, ebn0_values, n_scenarios: int,
                   detector_configs: dict, base_seed: int, out_path: Path) -> list:
    """BER sweep; CSV columns (ebn0_db, ber, scenario_count, detector)."""
    rows = []
    for ebn0 in ebn0_values:
        scen_seed_root = np.random.SeedSequence(
            [int(base_seed), int(round(ebn0 * 1000))])
        seeds = scen_seed_root.generate_state(n_scenarios, np.uint64)
        scenarios = [gen_scenario(nt, nr, qam, float(ebn0), int(s)) for s in seeds]
        for name, config in detector_configs.items():
            value = ber(scenarios, config, base_seed=base_seed)
            rows.append((float(ebn0), value, n_scenarios, name))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ebn0_db", "ber", "scenario_count", "detector"])
        for ebn0, value, count, name in rows:
            writer.writerow([_fmt(ebn0), _fmt(value), count, name])
    return rows


# ---------------------------------------------------------------------------
# Experiment families


_SOLVER_ALIASES = {
    "pimi": SolverKind.PIMI,
    "conv-seq": SolverKind.CONV_SEQUENTIAL,
    "conv-par": SolverKind.CONV_PARALLEL,
}


def _parse_solvers(names) -> list[SolverKind]:
    kinds = []
    for name in names:
        if name not in _SOLVER_ALIASES:
            raise ConfigError(f"unknown solver kind {name!r}")
        kinds.append(_SOLVER_ALIASES[name])
    return kinds


def _write_stamp(manifest: ExperimentManifest, out_dir: Path, status: int):
    stamp = {
        "manifest_hash": manifest.content_hash(),
        "family": manifest.family,
        "package_version": __version__,
        "schedule_defaults_version": schedule_defaults_version(),
        "status": status,
    }
    with open(out_dir / "stamp.json", "w") as f:
        json.dump(stamp, f, indent=1, sort_keys=True)
        f.write("\n")


def _run_bench(manifest: ExperimentManifest, workers: int) -> int:
    opts = manifest.options
    family = Family.MAXCUT_ER if manifest.family == "maxcut-bench" else Family.SK_ONE
    family_name = "maxcut" if family is Family.MAXCUT_ER else "sk1"
    sizes = _opt_list(opts, "sizes", "10,20", int)
    count = _opt_int(opts, "instances", 20)
    trials = _opt_int(opts, "trials", 256)
    steps_per_spin = _opt_int(opts, "steps_per_spin", 100)
    solver_names = _opt_list(opts, "solvers", "pimi,conv-seq,conv-par")
    kinds = _parse_solvers(solver_names)
    grid_step = _opt_int(opts, "grid_step", 10)
    threshold_fraction = _opt_float(opts, "threshold_fraction", 0.999)
    epsilon = _opt_float(opts, "epsilon", 0.001)
    edge_prob = _opt_float(opts, "edge_prob", 0.5)

    out = Path(manifest.out_dir)
    inst_dir = out / "instances"
    default_method = (OracleMethod.LOCAL_SEARCH if family is Family.MAXCUT_ER
                      else OracleMethod.SIM_ANNEAL)
    method = OracleMethod(opts.get("oracle", default_method.value))

    status = EXIT_OK
    for n in sizes:
        paths = stage_generate(family, [n], count, manifest.seed, inst_dir,
                               edge_prob=edge_prob)
        gs_path = out / f"gs_n{n}.json"
        stage_oracle(paths, method, gs_path, seed=manifest.seed)
        t_steps = steps_per_spin * n
        grid = list(range(grid_step, t_steps + 1, grid_step))
        for kind, name in zip(kinds, solver_names):
            records_path = out / f"records_{name}_n{n}.jsonl"
            stage_solve(paths, kind, family_name, t_steps, trials,
                        manifest.seed, records_path, workers=workers)
            landscape_path = out / f"landscape_{name}_n{n}.csv"
            landscape = stage_ccts(records_path, gs_path,
                                   _COST_MODEL_FOR_SOLVER[kind], grid,
                                   landscape_path,
                                   threshold_fraction=threshold_fraction,
                                   epsilon=epsilon)
            if not landscape.solved:
                status = EXIT_UNSOLVED
    return status


def _run_mimo_ber(manifest: ExperimentManifest, workers: int) -> int:
    opts = manifest.options
    nt = _opt_int(opts, "nt", 4)
    nr = _opt_int(opts, "nr", nt)
    qam = _opt_int(opts, "qam", 16)
    ebn0_values = _float_grid(opts.get("ebn0", "0:4:24"))
    n_scenarios = _opt_int(opts, "scenarios", 2000)
    detector_names = _opt_list(opts, "detectors", "mmse,pimi")
    trials = _opt_int(opts, "trials", 32)
    steps = opts.get("steps")
    quant = None
    if "quantized" in opts:
        quant = Quantization.parse(opts["quantized"],
                                   _opt_int(opts, "tanh_levels", 4))
    configs = {}
    for name in detector_names:
        if name != "mmse" and name not in _SOLVER_ALIASES:
            raise ConfigError(f"unknown detector {name!r}")
        configs[name] = DetectorConfig(
            kind=name, trials=trials,
            steps=None if steps is None else int(steps),
            quantization=None if name == "mmse" else quant)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage_mimo_ber(nt, nr, qam, ebn0_values, n_scenarios, configs,
                   manifest.seed, out / "ber.csv")
    return EXIT_OK


def _run_flip_rate(manifest: ExperimentManifest, workers: int) -> int:
    opts = manifest.options
    problem = opts.get("problem", "sk1")
    if problem not in ("sk1", "maxcut"):
        raise ConfigError("flip-rate problem must be sk1 or maxcut")
    family = Family.SK_ONE if problem == "sk1" else Family.MAXCUT_ER
    n = _opt_int(opts, "n", 50)
    trials = _opt_int(opts, "trials", 64)
    steps = _opt_int(opts, "steps", 100 * n)
    xis = _opt_list(opts, "xi", "0.0,0.9", float)

    out = Path(manifest.out_dir)
    inst_dir = out / "instances"
    paths = stage_generate(family, [n],
                           1, _opt_int(opts, "instance_seed", manifest.seed),
                           inst_dir)
    inst = IsingInstance.load(paths[0])
    from .core import Schedule, ScheduleKind

    summary_rows = []
    for xi in xis:
        if "beta" in opts or "eta" in opts:
            # fixed-drive diagnostic: constant beta and eta
            beta = _opt_float(opts, "beta", 2.0)
            eta = _opt_float(opts, "eta", 0.1)
            sched = Schedule(ScheduleKind.CUSTOM, np.full(steps, beta),
                             np.full(steps, eta), xi, steps)
        else:
            # default: the family's annealed run schedule with xi overridden
            sched = schedule_for_solver(SolverKind.PIMI, problem, n, steps,
                                        {"xi": xi})
        recs = run_batch([inst], SolverKind.PIMI, sched, trials, manifest.seed,
                         workers=workers, record_states=True)[0]
        records_path = out / f"traj_xi{xi}.jsonl"
        write_records_jsonl(records_path, recs, keep_states=True)
        pnt_path = out / f"pnt_xi{xi}.csv"
        pnt = stage_flip_rate(records_path, paths[0], pnt_path)
        summary_rows.append((xi, float(np.nanmean(pnt))))
    with open(out / "pnt_summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["xi", "mean_p_nt"])
        for xi, mean in summary_rows:
            writer.writerow([_fmt(xi), _fmt(mean)])
    return EXIT_OK


def run_experiment(manifest: ExperimentManifest, workers: int = 1) -> int:
    """Execute the manifest's pipeline; returns a process exit status.
    Outputs land in manifest.out_dir together with a reproducibility stamp."""
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if manifest.family in ("maxcut-bench", "sk-bench"):
        status = _run_bench(manifest, workers)
    elif manifest.family == "mimo-ber":
        status = _run_mimo_ber(manifest, workers)
    else:
        status = _run_flip_rate(manifest, workers)
    (out / "manifest.txt").write_text(manifest.canonical_text())
    _write_stamp(manifest, out, status)
    return status


def archive_hash(out_dir) -> str:
    """Hash of every archive file's bytes (sorted by name); pure function of
    the manifest when the pipeline is deterministic."""
    out = Path(out_dir)
    digest = hashlib.sha256()
    for path in sorted(p for p in out.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(out)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Reporting


def _read_landscape_csv(path):
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.append({
                "T_steps": int(row["T_steps"]),
                "p_mean": float(row["p_mean"]) if row["p_mean"] else math.nan,
                "p_logstd": float(row["p_logstd"]) if row["p_logstd"] else math.nan,
                "n_trials": float(row["n_trials"]) if row["n_trials"] else math.inf,
                "ccts": float(row["ccts"]) if row["ccts"] else math.inf,
            })
    return rows


def _landscape_optimum(rows):
    best = None
    for row in rows:
        if math.isfinite(row["ccts"]) and (best is None or row["ccts"] < best["ccts"]):
            best = row
    return best


def summarize(out_dir, report_path=None) -> str:
    """Digest an experiment archive into summary.csv plus a plain-text
    report. Empty archives produce an empty report and succeed."""
    out = Path(out_dir)
    report_path = Path(report_path) if report_path else out / "report.txt"
    lines = []
    summary_rows = []

    landscapes = sorted(out.glob("landscape_*_n*.csv"))
    by_size: dict[int, dict[str, dict]] = {}
    for path in landscapes:
        stem = path.stem[len("landscape_"):]
        name, n_part = stem.rsplit("_n", 1)
        n = int(n_part)
        rows = _read_landscape_csv(path)
        optimum = _landscape_optimum(rows)
        p_final = rows[-1]["p_mean"] if rows else math.nan
        by_size.setdefault(n, {})[name] = {"optimum": optimum, "p_final": p_final}

    for n in sorted(by_size):
        for name in sorted(by_size[n]):
            entry = by_size[n][name]
            opt = entry["optimum"]
            summary_rows.append({
                "n": n, "solver": name,
                "p_final": entry["p_final"],
                "t_opt": opt["T_steps"] if opt else None,
                "ccts_opt": opt["ccts"] if opt else None,
            })
            if opt is None:
                lines.append(f"n={n} {name}: unsolved at every budget")
            else:
                lines.append(
                    f"n={n} {name}: p(final)={entry['p_final']:.4f} "
                    f"T*={opt['T_steps']} CCTS*={opt['ccts']:.1f}")
        solvers_here = by_size[n]
        if "conv-seq" in solvers_here and "pimi" in solvers_here:
            a = solvers_here["conv-seq"]["optimum"]
            b = solvers_here["pimi"]["optimum"]
            if a and b:
                ratio = a["ccts"] / b["ccts"]
                summary_rows.append({"n": n, "solver": "speedup-conv-seq/pimi",
                                     "p_final": None, "t_opt": None,
                                     "ccts_opt": ratio})
                lines.append(f"n={n} speedup conv-seq/pimi: {ratio:.2f}x")

    ber_path = out / "ber.csv"
    if ber_path.exists():
        with open(ber_path, newline="") as f:
            for row in csv.DictReader(f):
                lines.append(
                    f"ebn0={row['ebn0_db']} dB {row['detector']}: "
                    f"BER={row['ber']} ({row['scenario_count']} scenarios)")

    pnt_summary = out / "pnt_summary.csv"
    if pnt_summary.exists():
        with open(pnt_summary, newline="") as f:
            for row in csv.DictReader(f):
                lines.append(f"xi={row['xi']}: mean neighbor-triggered flip rate "
                             f"= {row['mean_p_nt']}")

    if summary_rows:
        with open(out / "summary.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["n", "solver", "p_final", "t_opt", "ccts_opt"])
            for row in summary_rows:
                writer.writerow([row["n"], row["solver"], _fmt(row["p_final"]),
                                 _fmt(row["t_opt"]), _fmt(row["ccts_opt"])])

    text = "\n".join(lines) + ("\n" if lines else "")
    report_path.write_text(text)
    return text
