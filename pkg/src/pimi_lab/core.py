"""Shared domain types: problem instances, spin states, schedules, trial records.

Energies and local fields are always evaluated in full float64 precision,
independently of any quantization applied inside a solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

SpinState = np.ndarray  # length-N float64 vector, entries exactly -1.0 or +1.0


class DimensionError(ValueError):
    """Raised when instance / state / schedule dimensions do not match."""


class ConfigError(ValueError):
    """Raised on invalid or incomplete configuration values."""


class NotMaxCutError(ValueError):
    """Raised when cut_value is applied to an instance that is not an
    un-normalized unweighted Max-Cut mapping."""


def as_spins(values: Sequence[float] | np.ndarray) -> SpinState:
    """Validate and return a spin vector with entries exactly +-1."""
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 1:
        raise DimensionError(f"spin state must be a vector, got shape {s.shape}")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("spin entries must be exactly -1 or +1")
    return s


@dataclass(frozen=True)
class IsingInstance:
    """A dense Ising problem: minimize -sum_{i<j} J_ij s_i s_j - sum_i h_i s_i.

    `field_scale` is solver-side metadata: the accumulated interaction term
    is multiplied by it during dynamics (it does not change the energy
    landscape used for evaluation, which always uses the raw couplings).
    """

    n: int
    j: np.ndarray
    h: np.ndarray
    label: str = ""
    field_scale: float = 1.0

    def __post_init__(self):
        j = np.asarray(self.j, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "h", h)
        if self.n < 1:
            raise DimensionError("instance size must be >= 1")
        if j.shape != (self.n, self.n):
            raise DimensionError(f"J must be {self.n}x{self.n}, got {j.shape}")
        if h.shape != (self.n,):
            raise DimensionError(f"h must have length {self.n}, got {h.shape}")
        if np.any(np.diag(j) != 0.0):
            raise ValueError("J must have a zero diagonal")
        if not np.array_equal(j, j.T):
            raise ValueError("J must be symmetric")
        j.setflags(write=False)
        h.setflags(write=False)

    def to_json_dict(self) -> dict:
        d = {
            "n": self.n,
            "j": self.j.tolist(),
            "h": self.h.tolist(),
            "label": self.label,
        }
        if self.field_scale != 1.0:
            d["field_scale"] = self.field_scale
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "IsingInstance":
        return cls(
            n=int(d["n"]),
            j=np.asarray(d["j"], dtype=np.float64),
            h=np.asarray(d["h"], dtype=np.float64),
            label=str(d.get("label", "")),
            field_scale=float(d.get("field_scale", 1.0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "IsingInstance":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


class ScheduleKind(str, Enum):
    PIMI_BENCH = "pimi-bench"
    CONV_BENCH = "conv-bench"
    PIMI_MIMO = "pimi-mimo"
    CONV_MIMO = "conv-mimo"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Schedule:
    """Per-step inverse temperature beta(t) and noise amplitude eta(t), plus a
    constant self-alignment strength xi. Tabulated over t = 0..t_steps-1 so a
    schedule is immutable and cheap to share across workers."""

    kind: ScheduleKind
    beta: np.ndarray
    eta: np.ndarray
    xi: float
    t_steps: int

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        eta = np.asarray(self.eta, dtype=np.float64)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "eta", eta)
        if self.t_steps < 1:
            raise ValueError("t_steps must be >= 1")
        if beta.shape != (self.t_steps,) or eta.shape != (self.t_steps,):
            raise DimensionError("beta/eta tables must have length t_steps")
        if np.any(eta < 0.0):
            raise ValueError("eta(t) must be >= 0")
        if self.xi < 0.0:
            raise ValueError("xi must be >= 0")
        if self.kind is ScheduleKind.PIMI_BENCH and np.any(np.diff(beta) < 0.0):
            raise ValueError("pimi-bench beta(t) must be non-decreasing")
        beta.setflags(write=False)
        eta.setflags(write=False)

    @classmethod
    def from_functions(
        cls,
        kind: ScheduleKind,
        beta_fn: Callable[[np.ndarray], np.ndarray],
        eta_fn: Callable[[np.ndarray], np.ndarray],
        xi: float,
        t_steps: int,
    ) -> "Schedule":
        t = np.arange(t_steps, dtype=np.float64)
        return cls(kind, np.asarray(beta_fn(t), dtype=np.float64),
                   np.asarray(eta_fn(t), dtype=np.float64), float(xi), t_steps)


@dataclass
class TrialRecord:
    """Outcome of one independent trial.

    `improvements` is the sparse best-so-far curve: (step, energy) pairs at
    every strict improvement, in step order. It is always recorded and is
    sufficient to evaluate success under any step budget; the dense energy
    trajectory is optional to bound memory on large sweeps. Step indices are
    0-based and refer to post-update states, so best_step < t_steps.
    """

    best_energy: float
    best_step: int
    final_spins: SpinState
    seed: int
    improvements: list = field(default_factory=list)
    energy_trajectory: np.ndarray | None = None
    state_trajectory: np.ndarray | None = None  # (t_steps+1, n) int8, incl. init

    def best_within(self, t_budget: int) -> float:
        """Best energy over the first t_budget update steps (prefix min)."""
        if t_budget < 1:
            raise ValueError("step budget must be >= 1")
        best = np.inf
        for step, e in self.improvements:
            if step >= t_budget:
                break
            best = e
        return best

    def to_json_dict(self, keep_trajectory: bool = False,
                     keep_states: bool = False) -> dict:
        d = {
            "best_energy": self.best_energy,
            "best_step": self.best_step,
            "final_spins": [int(v) for v in self.final_spins],
            "seed": int(self.seed),
            "improvements": [[int(t), float(e)] for t, e in self.improvements],
        }
        if keep_trajectory and self.energy_trajectory is not None:
            d["energy_trajectory"] = [float(e) for e in self.energy_trajectory]
        if keep_states and self.state_trajectory is not None:
            d["state_trajectory"] = self.state_trajectory.astype(int).tolist()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrialRecord":
        traj = d.get("energy_trajectory")
        states = d.get("state_trajectory")
        return cls(
            best_energy=float(d["best_energy"]),
            best_step=int(d["best_step"]),
            final_spins=as_spins(d["final_spins"]),
            seed=int(d["seed"]),
            improvements=[(int(t), float(e)) for t, e in d["improvements"]],
            energy_trajectory=None if traj is None else np.asarray(traj, dtype=np.float64),
            state_trajectory=None if states is None else np.asarray(states, dtype=np.int8),
        )


def energy(inst: IsingInstance, s: SpinState) -> float:
    """Ising energy -sum_{i<j} J_ij s_i s_j - h.s, full float64 precision."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (inst.n,):
        raise DimensionError(f"state length {s.shape} != instance size {inst.n}")
    return float(-0.5 * (s @ (inst.j @ s)) - inst.h @ s)


def energy_upper_triangle(inst: IsingInstance, s: SpinState) -> float:
    """Reference i<j form of the energy (independent of the quadratic form)."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (inst.n,):
        raise DimensionError(f"state length {s.shape} != instance size {inst.n}")
    iu, ju = np.triu_indices(inst.n, k=1)
    return float(-np.sum(inst.j[iu, ju] * s[iu] * s[ju]) - inst.h @ s)


def local_fields(inst: IsingInstance, s: SpinState) -> np.ndarray:
    """Raw local fields I_i = sum_j J_ij s_j + h_i (no solver-side scaling)."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (inst.n,):
        raise DimensionError(f"state length {s.shape} != instance size {inst.n}")
    return inst.j @ s + inst.h


def cut_value(inst: IsingInstance, s: SpinState, edge_count: int) -> int:
    """Number of cut edges for an un-normalized Max-Cut instance (J = -A).

    cut = (|E| - H(s)) / 2; a non-integer result means the instance was not
    a valid unweighted Max-Cut mapping.
    """
    h_val = energy(inst, s)
    cut = (edge_count - h_val) / 2.0
    rounded = round(cut)
    if abs(cut - rounded) > 1e-9:
        raise NotMaxCutError(
            f"(|E| - H)/2 = {cut} is not an integer; instance is not an "
            "unweighted Max-Cut mapping"
        )
    return int(rounded)


def random_spins(n: int, rng: np.random.Generator) -> SpinState:
    """Uniform random +-1 vector drawn from `rng`."""
    return rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0


def write_records_jsonl(path, records, keep_trajectory: bool = False,
                        keep_states: bool = False, extra=None) -> None:
    """Write TrialRecords as JSON lines. `extra` is an optional parallel list
    of dicts merged into each line (e.g. instance / trial indices)."""
    with open(path, "w") as f:
        for k, rec in enumerate(records):
            d = rec.to_json_dict(keep_trajectory=keep_trajectory,
                                 keep_states=keep_states)
            if extra is not None:
                d.update(extra[k])
            f.write(json.dumps(d))
            f.write("\n")


def read_records_jsonl(path):
    """Read TrialRecords from JSON lines; returns (records, extras)."""
    records, extras = [], []
    known = {"best_energy", "best_step", "final_spins", "seed",
             "improvements", "energy_trajectory", "state_trajectory"}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(TrialRecord.from_json_dict(d))
            extras.append({k: v for k, v in d.items() if k not in known})
    return records, extras
