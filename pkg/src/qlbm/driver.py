"""Time loop for the lid-driven cavity: quantum, classical or both side by side."""

from __future__ import annotations

import argparse
import json
import os
from dataclasses import asdict, dataclass, field, fields
import numpy as np

from . import circuits, lattice
from .lattice import FlowState, SimConfig

MODES = ("quantum", "classical", "both")
FIELD_NAMES = ("omega", "psi", "u", "v", "velocity_magnitude")
COMPARE_THRESHOLD = 1e-8


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    mode: str = "both"
    out: str | None = None
    dump_every: int = 100
    compare: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sim.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.dump_every < 0:
            raise ValueError("dump_every must be >= 0")
        if self.mode != "classical":
            for name, size in (("nx", self.sim.nx), ("ny", self.sim.ny)):
                if size & (size - 1):
                    raise ValueError(f"{name}={size} is not a power of two (required in {self.mode} mode)")
            if self.sim.eps != 1.0:
                raise ValueError("the quantum path requires eps = 1")
        if self.compare and self.mode != "both":
            raise ValueError("--compare needs --mode both")

    def dump_steps(self) -> list[int]:
        steps = self.sim.steps
        marks = set(range(self.dump_every, steps + 1, self.dump_every)) if self.dump_every else set()
        marks.add(steps)
        return sorted(marks)

    def echo(self) -> dict:
        # the output path is where results go, not part of what they depend on
        d = asdict(self)
        d["sim"] = asdict(self.sim)
        del d["out"]
        return d


_SIM_KEYS = {f.name for f in fields(SimConfig)}
_RUN_KEYS = {"mode", "out", "dump_every", "compare"}

# CLI flag dest -> SimConfig field
_FLAG_TO_SIM = {"nx": "nx", "ny": "ny", "steps": "steps", "lid_velocity": "U"}


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with SimConfig/RunConfig keys; flags override it")
    parser.add_argument("--nx", type=int, help="nodes along x (default 16)")
    parser.add_argument("--ny", type=int, help="nodes along y (default 16)")
    parser.add_argument("--steps", type=int, help="time steps (default 500)")
    parser.add_argument("--lid-velocity", type=float, help="lid velocity U (default 1.0)")
    parser.add_argument("--mode", choices=MODES, help="which solver(s) to run (default both)")
    parser.add_argument("--out", help="output directory for CSV fields and report.json")
    parser.add_argument("--dump-every", type=int, help="dump cadence in steps; 0 dumps the last step only")
    parser.add_argument("--compare", action="store_true", default=None,
                        help=f"exit 2 if quantum/classical L-inf error exceeds {COMPARE_THRESHOLD:g}")


def load_config(args=None, config_file: str | None = None) -> RunConfig:
    """Build a RunConfig from parsed args (or an argv list) and an optional JSON file.

    Precedence: defaults < JSON file < explicit flags.
    """
    if args is None or isinstance(args, (list, tuple)):
        parser = argparse.ArgumentParser(prog="qlbm run")
        add_run_arguments(parser)
        args = parser.parse_args(args or [])
    config_file = config_file or getattr(args, "config", None)

    sim_kw, run_kw = {}, {}
    if config_file:
        with open(config_file) as fh:
            data = json.load(fh)
        data = {**data.pop("sim", {}), **data}
        unknown = set(data) - _SIM_KEYS - _RUN_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        sim_kw = {k: v for k, v in data.items() if k in _SIM_KEYS}
        run_kw = {k: v for k, v in data.items() if k in _RUN_KEYS}

    for flag, key in _FLAG_TO_SIM.items():
        val = getattr(args, flag, None)
        if val is not None:
            sim_kw[key] = val
    for key in _RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            run_kw[key] = val
    return RunConfig(sim=SimConfig(**sim_kw), **run_kw)


def compare_fields(a, b):
    """(L-inf, L2) error of ``a`` relative to ``b``, with a 1e-300 floor on the scale."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    linf = float(np.max(np.abs(diff))) / max(float(np.max(np.abs(b))), 1e-300) if b.size else 0.0
    l2 = float(np.linalg.norm(diff)) / max(float(np.linalg.norm(b)), 1e-300)
    return linf, l2


@dataclass
class ComparisonReport:
    config: dict
    per_step: list = field(default_factory=list)
    final_errors: dict = field(default_factory=dict)
    max_linf: float = 0.0
    residual: dict = field(default_factory=dict)
    probabilities: list = field(default_factory=list)
    stage_probabilities: dict = field(default_factory=dict)
    gate_counts: dict = field(default_factory=dict)
    dumped_steps: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.max_linf <= COMPARE_THRESHOLD

    def as_dict(self) -> dict:
        d = asdict(self)
        del d["snapshots"]
        d["passed"] = self.passed if self.per_step else None
        return d


def _snapshot(state: FlowState) -> dict:
    return {
        "omega": state.omega.copy(),
        "psi": state.psi.copy(),
        "u": state.u.copy(),
        "v": state.v.copy(),
        "velocity_magnitude": np.hypot(state.u, state.v),
    }


def _quantum_step(state: FlowState, cfg: SimConfig):
    omega, psi, reports = circuits.run_timestep(state.omega, state.psi, state.u, state.v, cfg)
    u, v = lattice.velocity_from_stream(psi, cfg)
    return FlowState(omega, psi, u, v, t=state.t + 1), reports


def _residual(prev: FlowState, cur: FlowState) -> dict:
    return {
        "omega": float(np.max(np.abs(cur.omega - prev.omega))),
        "psi": float(np.max(np.abs(cur.psi - prev.psi))),
    }


def run_simulation(cfg: RunConfig) -> ComparisonReport:
    """Run the time loop, dump fields at the configured cadence, and report."""
    sim = cfg.sim
    report = ComparisonReport(config=cfg.echo())
    dumps = set(cfg.dump_steps())
    snaps = {"quantum": {}, "classical": {}}

    q = FlowState.initial(sim) if cfg.mode != "classical" else None
    c = FlowState.initial(sim) if cfg.mode != "quantum" else None
    last_reports = []
    for t in range(1, sim.steps + 1):
        if q is not None:
            q_prev = q
            q, last_reports = _quantum_step(q, sim)
            report.probabilities.append(last_reports[-1].probability)
        if c is not None:
            c_prev = c
            c = lattice.step(c, sim)
        if q is not None and c is not None:
            errs = {}
            for name in ("omega", "psi", "u", "v"):
                linf, l2 = compare_fields(getattr(q, name), getattr(c, name))
                errs[name] = {"linf_rel": linf, "l2_rel": l2}
            report.per_step.append({"step": t, **errs})
            report.max_linf = max(report.max_linf, *(e["linf_rel"] for e in errs.values()))
            report.final_errors = errs
        if t in dumps:
            if q is not None:
                snaps["quantum"][t] = _snapshot(q)
            if c is not None:
                snaps["classical"][t] = _snapshot(c)

    if q is not None:
        report.residual["quantum"] = _residual(q_prev, q)
        report.stage_probabilities = {r.stage: r.probability for r in last_reports}
        report.gate_counts = {r.stage: dict(sorted(r.gate_counts.items())) for r in last_reports}
    if c is not None:
        report.residual["classical"] = _residual(c_prev, c)
    report.dumped_steps = sorted(dumps)

    if cfg.out:
        emit_outputs({k: v for k, v in snaps.items() if v}, report, cfg)
    report.snapshots = {k: v for k, v in snaps.items() if v}
    return report


def emit_outputs(fields_by_path: dict, report: ComparisonReport, cfg: RunConfig) -> list[str]:
    """Write <field>_<step>.csv per dump and report.json; returns written paths.

    With one solver the CSVs go straight into the output directory; in
    both-mode they go into quantum/ and classical/ subdirectories.
    """
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    written = []
    for path_name, by_step in fields_by_path.items():
        target = os.path.join(out, path_name) if len(fields_by_path) > 1 else out
        os.makedirs(target, exist_ok=True)
        for t, snap in sorted(by_step.items()):
            for name in FIELD_NAMES:
                fname = os.path.join(target, f"{name}_{t:04d}.csv")
                lattice.write_field_csv(fname, snap[name])
                written.append(fname)
    rpath = os.path.join(out, "report.json")
    with open(rpath, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(rpath)
    return written
