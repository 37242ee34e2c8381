"""The three spin-update dynamics (sequential, fully parallel, parallel with
inertia), the trial runner, and the deterministic batch runner.

Update rules, with I_i(t) = field_scale * sum_j J_ij s_j(t) + h_i:

    conv-seq   s_i(t+1) = sign[tanh(beta(t) I_i(t)) + eta(t) U(-1,1)],  i = t mod N
    conv-par   every spin updated from the pre-step state with the same rule
    pimi       s_i(t+1) = sign[tanh(beta(t) I_i(t)) + xi s_i(t) + eta(t) N(0,1)]

sign(0) is +1, fixed. In quantized mode every arithmetic intermediate is
truncated to the fixed-point grid and tanh goes through the lookup table;
recorded energies always use the raw couplings in full precision.

`run_trial` is the per-trial reference engine. `run_batch` runs trials in
fixed-size vectorized blocks (grouped trials, as the hardware kernels do);
block boundaries depend only on problem shape, never on the worker count,
so results are reproducible for any `workers`.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np

from .core import (
    ConfigError,
    DimensionError,
    IsingInstance,
    Schedule,
    ScheduleKind,
    SpinState,
    TrialRecord,
    as_spins,
    random_spins,
)
from .quantize import FixedPointFormat, TanhLut, lut_tanh, quantize


class SolverKind(str, Enum):
    CONV_SEQUENTIAL = "conv-seq"
    CONV_PARALLEL = "conv-par"
    PIMI = "pimi"


class NoiseDist(str, Enum):
    UNIFORM_PM1 = "uniform"
    STD_NORMAL = "normal"


@dataclass
class NoiseSource:
    """Seeded noise stream. A trial consumes draws in step order; identical
    (seed, distribution, mode) always reproduce the identical stream.

    mode: table_len None draws on the fly; an integer pre-generates a table
    of that length which is then consumed cyclically (mirroring pre-loaded
    hardware noise tables; the default is on-the-fly draws).
    """

    seed: int
    distribution: NoiseDist = NoiseDist.STD_NORMAL
    table_len: int | None = None

    def __post_init__(self):
        self._rng = np.random.default_rng(int(self.seed))
        self._table = None
        self._cursor = 0
        if self.table_len is not None:
            if self.table_len < 1:
                raise ConfigError("noise table length must be >= 1")
            self._table = self._draw(int(self.table_len))

    def _draw(self, count: int) -> np.ndarray:
        if self.distribution is NoiseDist.UNIFORM_PM1:
            return self._rng.uniform(-1.0, 1.0, count)
        return self._rng.standard_normal(count)

    def block(self, shape) -> np.ndarray:
        """Next draws of the stream, reshaped to `shape`."""
        count = int(np.prod(shape))
        if self._table is None:
            flat = self._draw(count)
        else:
            idx = (self._cursor + np.arange(count)) % len(self._table)
            flat = self._table[idx]
            self._cursor = (self._cursor + count) % len(self._table)
        return flat.reshape(shape)


@dataclass(frozen=True)
class Quantization:
    """Fixed-point format plus tanh LUT used by the quantized solver path."""

    fmt: FixedPointFormat
    lut: TanhLut

    @classmethod
    def parse(cls, fmt_name: str, tanh_levels: int = 4) -> "Quantization":
        return cls(FixedPointFormat.parse(fmt_name), TanhLut(int(tanh_levels)))


def default_noise_distribution(kind: SolverKind) -> NoiseDist:
    """Conventional dynamics draw U(-1,1); inertial dynamics draw N(0,1)."""
    if kind is SolverKind.PIMI:
        return NoiseDist.STD_NORMAL
    return NoiseDist.UNIFORM_PM1


def _sign_pm1(z):
    return np.where(np.asarray(z) >= 0.0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# Schedules


def _load_default_params() -> dict:
    text = resources.files("pimi_lab").joinpath("schedule_defaults.json").read_text()
    return json.loads(text)


_DEFAULTS_CACHE: dict | None = None


def schedule_defaults_version() -> int:
    global _DEFAULTS_CACHE
    if _DEFAULTS_CACHE is None:
        _DEFAULTS_CACHE = _load_default_params()
    return int(_DEFAULTS_CACHE["version"])


def default_schedule_params(kind: ScheduleKind, family: str | None = None,
                            n: int | None = None) -> dict:
    """Shipped default parameters for a schedule kind, resolved per problem
    family and size bucket (smallest n_max >= n wins; n_max null is open)."""
    global _DEFAULTS_CACHE
    if _DEFAULTS_CACHE is None:
        _DEFAULTS_CACHE = _load_default_params()
    table = _DEFAULTS_CACHE.get(kind.value)
    if table is None:
        raise ConfigError(f"no defaults for schedule kind {kind.value!r}")
    if isinstance(table, dict):
        if family is None or family not in table:
            raise ConfigError(
                f"schedule kind {kind.value!r} needs a problem family "
                f"among {sorted(table)}"
            )
        buckets = table[family]
    else:
        buckets = table
    chosen = None
    for bucket in buckets:
        n_max = bucket.get("n_max")
        if n_max is None or (n is not None and n <= n_max):
            chosen = bucket
            if n is not None and n_max is not None:
                break
    if chosen is None:
        chosen = buckets[-1]
    params = dict(chosen)
    params.pop("n_max", None)
    return params


def _require(params: dict, key: str, minimum=None, strict=False) -> float:
    if key not in params:
        raise ConfigError(f"schedule parameter {key!r} missing")
    value = float(params[key])
    if minimum is not None and (value <= minimum if strict else value < minimum):
        op = ">" if strict else ">="
        raise ConfigError(f"schedule parameter {key!r} must be {op} {minimum}")
    return value


def make_schedule(kind: ScheduleKind, params: dict, t_steps: int) -> Schedule:
    """Build a tabulated schedule of one of the four named shapes.

    pimi-bench: beta(t) = beta_scale * tanh(beta_init + delta_beta * t),
                eta(t) = sqrt(beta(t) / 5), constant xi.
    conv-bench: constant beta_scale, eta(t) = max(eta_scale/sqrt(t+1), eta_floor).
    pimi-mimo:  constant beta_scale, eta(t) = sqrt(1 / (5 gamma(t))) with
                gamma ramping linearly from gamma_init to gamma_final, xi = 2.
    conv-mimo:  constant beta_scale, eta(t) = 1 / sqrt((t+1) / 5).
    """
    if t_steps < 1:
        raise ConfigError("t_steps must be >= 1")
    t = np.arange(t_steps, dtype=np.float64)
    if kind is ScheduleKind.PIMI_BENCH:
        beta_scale = _require(params, "beta_scale", 0.0, strict=True)
        beta_init = _require(params, "beta_init", 0.0)
        delta_beta = _require(params, "delta_beta", 0.0)
        xi = _require(params, "xi", 0.0)
        beta = beta_scale * np.tanh(beta_init + delta_beta * t)
        eta = np.sqrt(beta / 5.0)
        return Schedule(kind, beta, eta, xi, t_steps)
    if kind is ScheduleKind.CONV_BENCH:
        beta_scale = _require(params, "beta_scale", 0.0, strict=True)
        eta_scale = _require(params, "eta_scale", 0.0, strict=True)
        eta_floor = _require(params, "eta_floor", 0.0)
        beta = np.full(t_steps, beta_scale)
        eta = np.maximum(eta_scale / np.sqrt(t + 1.0), eta_floor)
        return Schedule(kind, beta, eta, 0.0, t_steps)
    if kind is ScheduleKind.PIMI_MIMO:
        beta_scale = _require(params, "beta_scale", 0.0, strict=True)
        gamma_init = _require(params, "gamma_init", 0.0, strict=True)
        gamma_final = _require(params, "gamma_final", 0.0, strict=True)
        xi = _require(params, "xi", 0.0)
        if t_steps == 1:
            gamma = np.full(1, gamma_init)
        else:
            gamma = gamma_init + (gamma_final - gamma_init) * t / (t_steps - 1.0)
        eta = np.sqrt(1.0 / (5.0 * gamma))
        beta = np.full(t_steps, beta_scale)
        return Schedule(kind, beta, eta, xi, t_steps)
    if kind is ScheduleKind.CONV_MIMO:
        beta_scale = _require(params, "beta_scale", 0.0, strict=True)
        beta = np.full(t_steps, beta_scale)
        eta = 1.0 / np.sqrt((t + 1.0) / 5.0)
        return Schedule(kind, beta, eta, 0.0, t_steps)
    raise ConfigError(f"make_schedule cannot build kind {kind!r}; "
                      "build custom schedules with Schedule.from_functions")


def schedule_for_solver(kind: SolverKind, family: str, n: int,
                        t_steps: int, overrides: dict | None = None) -> Schedule:
    """Schedule of the matching shape for a solver kind with shipped defaults.

    Benchmark families ("maxcut", "sk1") map pimi -> pimi-bench and both
    conventional kinds -> conv-bench; family "mimo" maps to the mimo shapes.
    """
    if family == "mimo":
        sk = ScheduleKind.PIMI_MIMO if kind is SolverKind.PIMI else ScheduleKind.CONV_MIMO
        params = default_schedule_params(sk, None, n)
    else:
        sk = ScheduleKind.PIMI_BENCH if kind is SolverKind.PIMI else ScheduleKind.CONV_BENCH
        params = default_schedule_params(sk, family, n)
    if overrides:
        params.update(overrides)
    return make_schedule(sk, params, t_steps)


# ---------------------------------------------------------------------------
# Single-step operations (reference semantics)


def step_conv_sequential(inst: IsingInstance, s: SpinState, t: int,
                         sched: Schedule, noise: NoiseSource) -> SpinState:
    """One sequential update: only spin i = t mod N changes."""
    s = np.asarray(s, dtype=np.float64)
    i = t % inst.n
    acc = inst.j[i] @ s
    field = inst.field_scale * acc + inst.h[i]
    z = float(np.tanh(sched.beta[t] * field)) + sched.eta[t] * noise.block((1,))[0]
    out = s.copy()
    out[i] = 1.0 if z >= 0.0 else -1.0
    return out


def step_conv_parallel(inst: IsingInstance, s: SpinState, t: int,
                       sched: Schedule, noise: NoiseSource) -> SpinState:
    """One fully parallel update of all spins from the pre-step state."""
    s = np.asarray(s, dtype=np.float64)
    fields = inst.field_scale * (inst.j @ s) + inst.h
    z = np.tanh(sched.beta[t] * fields) + sched.eta[t] * noise.block((inst.n,))
    return _sign_pm1(z)


def step_pimi(inst: IsingInstance, s: SpinState, t: int,
              sched: Schedule, noise: NoiseSource,
              quantization: Quantization | None = None) -> SpinState:
    """One parallel update with the self-alignment term xi * s_i(t)."""
    s = np.asarray(s, dtype=np.float64)
    if quantization is not None:
        tables = _quantized_tables(inst, sched, quantization)
        draws = noise.block((inst.n,))
        return _quantized_parallel_update(s, t, tables, draws, with_inertia=True)
    fields = inst.field_scale * (inst.j @ s) + inst.h
    z = (np.tanh(sched.beta[t] * fields) + sched.xi * s
         + sched.eta[t] * noise.block((inst.n,)))
    return _sign_pm1(z)


# ---------------------------------------------------------------------------
# Quantized datapath

@dataclass(frozen=True)
class _QuantTables:
    jq: np.ndarray
    hq: np.ndarray
    scale_q: float
    beta_q: np.ndarray
    eta_q: np.ndarray
    xi_q: float
    fmt: FixedPointFormat
    lut: TanhLut
    apply_scale: bool
    add_bias: bool


def _quantized_tables(inst: IsingInstance, sched: Schedule,
                      quant: Quantization) -> _QuantTables:
    fmt = quant.fmt
    return _QuantTables(
        jq=quantize(inst.j, fmt),
        hq=quantize(inst.h, fmt),
        scale_q=quantize(inst.field_scale, fmt),
        beta_q=quantize(sched.beta, fmt),
        eta_q=quantize(sched.eta, fmt),
        xi_q=quantize(sched.xi, fmt),
        fmt=fmt,
        lut=quant.lut,
        apply_scale=inst.field_scale != 1.0,
        add_bias=bool(np.any(inst.h != 0.0)),
    )


def _quantized_parallel_update(s, t, q: _QuantTables, draws, with_inertia: bool):
    """All quantized intermediates share the format: the accumulated field,
    the post-scaling product, the bias add, beta*I, the LUT output, xi*s,
    the noise sample and its eta product, and each add of the final sum."""
    fmt = q.fmt
    field = quantize(s @ q.jq, fmt)  # J symmetric; also handles (B, n) blocks
    if q.apply_scale:
        field = quantize(q.scale_q * field, fmt)
    if q.add_bias:
        field = quantize(field + q.hq, fmt)
    drive = quantize(lut_tanh(quantize(q.beta_q[t] * field, fmt), q.lut), fmt)
    if with_inertia:
        drive = quantize(drive + quantize(q.xi_q * s, fmt), fmt)
    noise_term = quantize(q.eta_q[t] * quantize(draws, fmt), fmt)
    return _sign_pm1(quantize(drive + noise_term, fmt))


def _quantized_sequential_update(s, t, i, q: _QuantTables, draw):
    fmt = q.fmt
    field = quantize(q.jq[i] @ s, fmt)
    if q.apply_scale:
        field = quantize(q.scale_q * field, fmt)
    if q.add_bias:
        field = quantize(field + q.hq[i], fmt)
    drive = quantize(lut_tanh(quantize(q.beta_q[t] * field, fmt), q.lut), fmt)
    noise_term = quantize(q.eta_q[t] * quantize(draw, fmt), fmt)
    z = quantize(drive + noise_term, fmt)
    return 1.0 if z >= 0.0 else -1.0


# ---------------------------------------------------------------------------
# Trial runner (per-trial reference engine)


def run_trial(inst: IsingInstance, kind: SolverKind, sched: Schedule,
              init: SpinState, noise: NoiseSource,
              record_trajectory: bool = False,
              record_states: bool = False,
              quantization: Quantization | None = None,
              seed: int = 0) -> TrialRecord:
    """Execute t_steps updates from `init` and return the trial record.

    The energy trajectory holds the full-precision energy of the state after
    each update step (the initial state is not part of the trajectory);
    best_energy / best_step / improvements are derived from it. For
    conv-seq each step updates a single spin; for the parallel kinds each
    step is one full sweep.
    """
    s = as_spins(init).copy()
    if s.shape != (inst.n,):
        raise DimensionError("initial state does not match instance size")
    T = sched.t_steps
    if T < 1:
        raise ConfigError("schedule must have t_steps >= 1")
    n = inst.n
    j_raw = inst.j
    h = inst.h
    scale = inst.field_scale

    seq = kind is SolverKind.CONV_SEQUENTIAL
    draws = noise.block((T,)) if seq else noise.block((T, n))
    qt = _quantized_tables(inst, sched, quantization) if quantization else None

    traj = np.empty(T) if record_trajectory else None
    states = np.empty((T + 1, n), dtype=np.int8) if record_states else None
    if states is not None:
        states[0] = s
    improvements: list = []
    best = np.inf
    best_step = -1

    def note(t_idx: int, e: float):
        nonlocal best, best_step
        if traj is not None:
            traj[t_idx] = e
        if e < best:
            best = e
            best_step = t_idx
            improvements.append((t_idx, e))

    if seq:
        acc0 = j_raw @ s
        h_cur = -0.5 * (s @ acc0) - h @ s
        beta = sched.beta
        eta = sched.eta
        for t in range(T):
            i = t % n
            acc_i = j_raw[i] @ s
            if qt is None:
                # np.tanh keeps this path bit-identical to the block engine
                z = float(np.tanh(beta[t] * (scale * acc_i + h[i]))) + eta[t] * draws[t]
                new = 1.0 if z >= 0.0 else -1.0
            else:
                new = _quantized_sequential_update(s, t, i, qt, draws[t])
            if new != s[i]:
                h_cur += 2.0 * s[i] * (acc_i + h[i])
                s[i] = new
            if states is not None:
                states[t + 1] = s
            note(t, h_cur)
    else:
        with_inertia = kind is SolverKind.PIMI
        beta = sched.beta
        eta = sched.eta
        xi = sched.xi
        for t in range(T):
            if qt is None:
                acc = j_raw @ s
                if t > 0:
                    note(t - 1, float(-0.5 * (s @ acc) - h @ s))
                z = np.tanh(beta[t] * (scale * acc + h))
                if with_inertia:
                    z = z + xi * s
                s = _sign_pm1(z + eta[t] * draws[t])
            else:
                if t > 0:
                    note(t - 1, float(-0.5 * (s @ (j_raw @ s)) - h @ s))
                s = _quantized_parallel_update(s, t, qt, draws[t], with_inertia)
            if states is not None:
                states[t + 1] = s
        note(T - 1, float(-0.5 * (s @ (j_raw @ s)) - h @ s))

    return TrialRecord(
        best_energy=float(best),
        best_step=int(best_step),
        final_spins=s.copy(),
        seed=int(seed),
        improvements=improvements,
        energy_trajectory=traj,
        state_trajectory=states,
    )


# ---------------------------------------------------------------------------
# Batch runner


def derive_trial_seed(base_seed: int, instance_index: int, trial_index: int) -> int:
    """Per-trial seed from the documented hash-split of the base seed."""
    ss = np.random.SeedSequence([int(base_seed), int(instance_index), int(trial_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def trial_setup(n: int, trial_seed: int, distribution: NoiseDist,
                table_len: int | None = None):
    """Initial random spins and the NoiseSource for one trial, both derived
    deterministically from the trial seed."""
    init_ss, noise_ss = np.random.SeedSequence(int(trial_seed)).spawn(2)
    init = random_spins(n, np.random.default_rng(init_ss))
    noise_seed = int(noise_ss.generate_state(1, np.uint64)[0])
    return init, NoiseSource(noise_seed, distribution, table_len)


_BLOCK_TRIALS = 64
_BLOCK_NOISE_BYTES = 128 * 1024 * 1024


def _block_size(t_steps: int, n: int, parallel_kind: bool) -> int:
    per_trial = t_steps * (n if parallel_kind else 1) * 8
    cap = max(1, _BLOCK_NOISE_BYTES // max(per_trial, 1))
    return int(min(_BLOCK_TRIALS, cap))


def _run_block(inst: IsingInstance, kind: SolverKind, sched: Schedule,
               base_seed: int, instance_index: int, trial_indices,
               record_trajectory: bool, record_states: bool,
               quantization: Quantization | None,
               distribution: NoiseDist,
               init_state: np.ndarray | None = None,
               noise_table_len: int | None = None) -> list[TrialRecord]:
    """Vectorized engine: runs a block of trials of one instance together.

    Each trial's seed, initial state, and noise stream are identical to the
    per-trial machinery; only the arithmetic is grouped across trials.
    `init_state`, when given, replaces every trial's random initial spins
    with the same fixed configuration (noise streams stay per-trial).
    """
    n = inst.n
    T = sched.t_steps
    B = len(trial_indices)
    seq = kind is SolverKind.CONV_SEQUENTIAL

    seeds = [derive_trial_seed(base_seed, instance_index, k) for k in trial_indices]
    inits = np.empty((B, n))
    draws = np.empty((T, B) if seq else (T, B, n))
    for b, ts in enumerate(seeds):
        init, ns = trial_setup(n, ts, distribution, noise_table_len)
        inits[b] = init if init_state is None else as_spins(init_state)
        if seq:
            draws[:, b] = ns.block((T,))
        else:
            draws[:, b, :] = ns.block((T, n))

    S = inits.copy()
    j_raw = inst.j
    h = inst.h
    scale = inst.field_scale
    qt = _quantized_tables(inst, sched, quantization) if quantization else None
    beta, eta, xi = sched.beta, sched.eta, sched.xi

    traj = np.empty((T, B)) if record_trajectory else None
    states = np.empty((T + 1, B, n), dtype=np.int8) if record_states else None
    if states is not None:
        states[0] = S
    improvements: list[list] = [[] for _ in range(B)]
    best = np.full(B, np.inf)
    best_step = np.full(B, -1, dtype=np.int64)

    def note(t_idx: int, e: np.ndarray):
        if traj is not None:
            traj[t_idx] = e
        improved = e < best
        if improved.any():
            for b in np.nonzero(improved)[0]:
                improvements[b].append((t_idx, float(e[b])))
            best[improved] = e[improved]
            best_step[improved] = t_idx

    if seq:
        h_cur = -0.5 * np.einsum("bn,bn->b", S, S @ j_raw) - S @ h
        for t in range(T):
            i = t % n
            acc_i = S @ j_raw[i]
            if qt is None:
                z = np.tanh(beta[t] * (scale * acc_i + h[i])) + eta[t] * draws[t]
                new = _sign_pm1(z)
            else:
                new = _seq_block_quantized(S, t, i, qt, draws[t])
            flipped = new != S[:, i]
            h_cur = h_cur + np.where(flipped, 2.0 * S[:, i] * (acc_i + h[i]), 0.0)
            S[:, i] = new
            if states is not None:
                states[t + 1] = S
            note(t, h_cur)
    else:
        with_inertia = kind is SolverKind.PIMI
        for t in range(T):
            if qt is None:
                acc = S @ j_raw
                if t > 0:
                    note(t - 1, -0.5 * np.einsum("bn,bn->b", S, acc) - S @ h)
                z = np.tanh(beta[t] * (scale * acc + h))
                if with_inertia:
                    z = z + xi * S
                S = _sign_pm1(z + eta[t] * draws[t])
            else:
                if t > 0:
                    note(t - 1, -0.5 * np.einsum("bn,bn->b", S, S @ j_raw) - S @ h)
                S = _quantized_parallel_update(S, t, qt, draws[t], with_inertia)
            if states is not None:
                states[t + 1] = S
        note(T - 1, -0.5 * np.einsum("bn,bn->b", S, S @ j_raw) - S @ h)

    records = []
    for b in range(B):
        records.append(TrialRecord(
            best_energy=float(best[b]),
            best_step=int(best_step[b]),
            final_spins=S[b].copy(),
            seed=seeds[b],
            improvements=improvements[b],
            energy_trajectory=traj[:, b].copy() if traj is not None else None,
            state_trajectory=states[:, b, :].copy() if states is not None else None,
        ))
    return records


def _seq_block_quantized(S, t, i, qt: _QuantTables, draws_t):
    fmt = qt.fmt
    field = quantize(S @ qt.jq[i], fmt)
    if qt.apply_scale:
        field = quantize(qt.scale_q * field, fmt)
    if qt.add_bias:
        field = quantize(field + qt.hq[i], fmt)
    drive = quantize(lut_tanh(quantize(qt.beta_q[t] * field, fmt), qt.lut), fmt)
    noise_term = quantize(qt.eta_q[t] * quantize(draws_t, fmt), fmt)
    return _sign_pm1(quantize(drive + noise_term, fmt))


def _run_block_task(args):
    (inst_dict, kind, sched, base_seed, instance_index, trial_indices,
     record_trajectory, record_states, quantization, distribution,
     init_state, noise_table_len) = args
    inst = IsingInstance.from_json_dict(inst_dict)
    return _run_block(inst, kind, sched, base_seed, instance_index,
                      trial_indices, record_trajectory, record_states,
                      quantization, distribution, init_state, noise_table_len)


def run_batch(instances, kind: SolverKind, sched: Schedule, n_trials: int,
              base_seed: int, workers: int = 1,
              record_trajectory: bool = False,
              record_states: bool = False,
              quantization: Quantization | None = None,
              distribution: NoiseDist | None = None,
              init_state: np.ndarray | None = None,
              noise_table_len: int | None = None) -> list[list[TrialRecord]]:
    """Run n_trials per instance; returns records ordered by
    (instance index, trial index) regardless of worker scheduling.

    Trials are grouped into fixed-size blocks and the block tasks are
    consumed from a shared queue by the worker pool; per-trial seeds are
    derived from (base_seed, instance index, trial index), so the result
    set is independent of scheduling.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    instances = list(instances)
    if not instances:
        return []
    if distribution is None:
        distribution = default_noise_distribution(kind)

    block = _block_size(sched.t_steps, instances[0].n,
                        kind is not SolverKind.CONV_SEQUENTIAL)
    tasks = []
    for i_idx, inst in enumerate(instances):
        for start in range(0, n_trials, block):
            trial_indices = list(range(start, min(start + block, n_trials)))
            tasks.append((inst.to_json_dict(), kind, sched, base_seed, i_idx,
                          trial_indices, record_trajectory, record_states,
                          quantization, distribution, init_state,
                          noise_table_len))

    if workers == 1:
        chunks = [_run_block_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_block_task, tasks))

    results: list[list[TrialRecord]] = [[] for _ in instances]
    task_idx = 0
    for i_idx, _ in enumerate(instances):
        for _ in range(0, n_trials, block):
            results[i_idx].extend(chunks[task_idx])
            task_idx += 1
    return results
