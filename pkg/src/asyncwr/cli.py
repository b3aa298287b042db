"""Command-line experiment runner.

Runs the WR methods on the coupled heat benchmark and writes one CSV row
per iteration (``method,k,update_norm,interface_error,wall_time``) followed
by one ``summary:<method>`` row per run.  Exit status 0 means every
requested run converged.

Settings come from flags or from a ``key = value`` config file (``#``
starts a comment); flags win.  Examples::

    asyncwr --materials water-steel --method jacobi --method async --schedule seeded --seed 3
    asyncwr --relax-table --materials air-steel --dx 1/513 --dt 5
    asyncwr --theorem1 --materials air-water
"""
from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import analysis
from .model import MATERIAL_PAIRS, MATERIALS, HeatProblemConfig, splitting
from .relaxopt import RelaxTable, relax_table
from .rma import ReplayMismatch, RMAError, Trace
from .timeint import implicit_euler, trapezoidal
from .wr import METHODS, WRConfig, WRProblem, WRResult, compute_reference, run

__all__ = ["ExperimentConfig", "main", "parse_config_file", "run_experiment", "print_relax_table",
           "write_svg"]

SCHEDULES = ("free", "lockstep", "p0-ahead", "p1-ahead", "seeded")
_MODE = {"p0-ahead": "process0_ahead", "p1-ahead": "process1_ahead"}
CSV_HEADER = "method,k,update_norm,interface_error,wall_time"


def _fraction(text) -> float:
    return float(Fraction(str(text).strip()))


def material_pair(name: str):
    """``air-steel`` style names; any two of the known materials, or ``same`` (water on both sides)."""
    name = name.strip().lower()
    if name == "same":
        return (MATERIALS["water"], MATERIALS["water"])
    if name in MATERIAL_PAIRS:
        return MATERIAL_PAIRS[name]
    parts = name.split("-")
    if len(parts) == 2 and all(p in MATERIALS for p in parts):
        return (MATERIALS[parts[0]], MATERIALS[parts[1]])
    raise ValueError(f"unknown material pair {name!r}")


@dataclass
class ExperimentConfig:
    materials: str = "air-steel"
    dimension: int = 1
    dx: float = 1.0 / 64
    steps: int = 50
    steps_w: Optional[int] = None
    Tf: float = 1.0e4
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    tol: float = 1e-10
    kmax: int = 50
    schedule: str = "seeded"
    seed: int = 0
    delay_factor: float = 0.5
    variant: str = "variable"
    termination: str = "interface"
    theta: Optional[float] = None
    no_relax: bool = False
    integrator: str = "trapezoidal"
    out: Optional[str] = None
    plot: bool = False
    trace: Optional[str] = None
    replay: Optional[str] = None
    repeat: int = 1

    def __post_init__(self):
        material_pair(self.materials)
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.termination not in ("interface", "exchanged"):
            raise ValueError("termination must be interface or exchanged")
        if self.integrator not in ("trapezoidal", "implicit-euler"):
            raise ValueError("integrator must be trapezoidal or implicit-euler")
        if self.repeat < 1:
            raise ValueError("repeat must be at least 1")
        if not self.tol > 0 or self.kmax < 1 or self.steps < 1:
            raise ValueError("tol, kmax and steps must be positive")


_CONVERTERS = {
    "materials": str, "dimension": int, "dx": _fraction, "steps": int,
    "steps_w": int, "Tf": float, "tol": float, "kmax": int, "schedule": str, "seed": int,
    "delay_factor": float, "variant": str, "termination": str, "theta": float, "integrator": str, "out": str,
    "trace": str, "replay": str, "repeat": int,
}
_BOOL_KEYS = ("plot", "no_relax")


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_file(text: str) -> dict:
    """Parse ``key = value`` lines into config keyword arguments."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in ("method", "methods"):
            out["methods"] = [m.strip() for m in value.split(",") if m.strip()]
        elif key in _BOOL_KEYS:
            out[key] = _to_bool(value)
        elif key in _CONVERTERS:
            out[key] = _CONVERTERS[key](value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return out


def _problem(cfg: ExperimentConfig) -> WRProblem:
    hp = HeatProblemConfig(dimension=cfg.dimension, dx=cfg.dx, materials=material_pair(cfg.materials),
                           Tf=cfg.Tf, Nv=cfg.steps, Nw=cfg.steps_w or cfg.steps)
    integrator = trapezoidal() if cfg.integrator == "trapezoidal" else implicit_euler()
    return WRProblem.from_config(hp, integrator)


def _relax(cfg: ExperimentConfig):
    if cfg.no_relax:
        return None
    if cfg.theta is not None:
        return RelaxTable.uniform(cfg.theta)
    return relax_table(material_pair(cfg.materials), cfg.Tf / cfg.steps, cfg.dx)


def _fmt(x: float) -> str:
    return f"{x:.17e}"


def _rows(label: str, res: WRResult) -> List[str]:
    rows = [f"{label},{r.k},{_fmt(r.update_norm)},{_fmt(r.interface_error)},{_fmt(r.wall_time)}"
            for r in res.records]
    last = res.records[-1]
    rows.append(f"summary:{label},{res.iterations},{_fmt(last.update_norm)},"
                f"{_fmt(last.interface_error)},{_fmt(last.wall_time)}")
    return rows


def run_experiment(cfg: ExperimentConfig, stream=None):
    """Run every requested method and write the CSV.

    Returns ``(exit_status, results)`` where ``results`` maps a run label to
    its :class:`~asyncwr.wr.WRResult`.
    """
    problem = _problem(cfg)
    relax = _relax(cfg)
    reference = compute_reference(problem, relax)
    replay = Trace.load(cfg.replay) if cfg.replay else None
    schedule = cfg.schedule
    lines = [CSV_HEADER]
    results = {}
    for method in cfg.methods:
        repeats = cfg.repeat if method == "async" else 1
        iters = []
        for r in range(repeats):
            seed = cfg.seed + r
            wc = WRConfig(method, relax, cfg.tol, cfg.kmax, schedule, seed, cfg.variant,
                          cfg.delay_factor, replay if method == "async" else None, cfg.termination)
            res = run(problem, wc, reference=reference)
            label = method if repeats == 1 else f"{method}@seed={seed}"
            results[label] = res
            lines += _rows(label, res)
            iters.append(res.iterations)
            if method == "async" and cfg.trace and res.trace is not None:
                path = cfg.trace if repeats == 1 else f"{cfg.trace}.{seed}"
                res.trace.save(path)
        if repeats > 1:
            lines.append(f"summary:{method},{np.mean(iters):.17e},nan,nan,nan")
    text = "\n".join(lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        (stream or sys.stdout).write(text)
    if cfg.plot:
        target = Path(cfg.out).with_suffix(".svg") if cfg.out else Path("asyncwr.svg")
        target.write_text(write_svg(results))
    status = 0 if all(r.converged for r in results.values()) else 1
    return status, results


def print_relax_table(materials: str, dx: float, dt: float, stream=None) -> RelaxTable:
    """Print ``S1``, ``S2``, the optimal parameters and the Jacobi rate."""
    tab = relax_table(material_pair(materials), dt, dx)
    out = stream or sys.stdout
    out.write(f"materials = {materials}\n")
    out.write(f"dx = {dx:.17e}\ndt = {dt:.17e}\n")
    for key in ("S1", "S2", "theta_jacobi", "theta_gs_dn", "theta_gs_nd", "rho_jacobi"):
        out.write(f"{key} = {getattr(tab, key):.17e}\n")
    return tab


def print_theorem1(cfg: ExperimentConfig, stream=None) -> bool:
    """Key/value report of the diagonal-block norms for the three constant shapes."""
    problem = _problem(cfg)
    relax = _relax(cfg)
    out = stream or sys.stdout
    dt = problem.grid_v.dt
    weights = analysis.interface_weights(problem.system, problem.partition, problem.method, dt)
    ok = True
    for kind in ("jacobi", "gs-dn", "gs-nd"):
        s = splitting(problem.system, problem.partition, kind, relax)
        blocks = analysis.blocks_from_splitting(s, problem.method, dt, problem.grid_v.N)
        plain = analysis.theorem1_check(blocks)
        weighted = analysis.theorem1_check(blocks, weights=weights)
        out.write(plain.to_text(f"{kind}.plain.") + "\n")
        out.write(weighted.to_text(f"{kind}.interface.") + "\n")
        ok = ok and weighted.passed
    return ok


# ---------------------------------------------------------------------------
# SVG output
# ---------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _panel(series, xlabel, x0, width=360, height=260):
    """One log-scale panel; ``series`` is a list of (label, xs, ys)."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if y > 0 and math.isfinite(y)]
    if not pts:
        return ""
    xmax = max(x for x, _ in pts) or 1.0
    lmin = math.floor(min(math.log10(y) for _, y in pts))
    lmax = math.ceil(max(math.log10(y) for _, y in pts))
    if lmax == lmin:
        lmax += 1
    left, top, w, h = x0 + 50, 20, width - 70, height - 60

    def px(x):
        return left + w * x / xmax

    def py(y):
        return top + h * (lmax - math.log10(y)) / (lmax - lmin)

    parts = [f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>']
    for e in range(lmin, lmax + 1):
        y = top + h * (lmax - e) / (lmax - lmin)
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" font-size="10" text-anchor="end">1e{e}</text>')
    parts.append(f'<text x="{left + w / 2}" y="{top + h + 30}" font-size="12" text-anchor="middle">{xlabel}</text>')
    for i, (label, xs, ys) in enumerate(series):
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys) if y > 0 and math.isfinite(y))
        color = _COLORS[i % len(_COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(f'<text x="{left + w - 4}" y="{top + 14 + 13 * i}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{label}</text>')
    return "\n".join(parts)


def write_svg(results) -> str:
    """Interface error against iteration count and against wall time."""
    by_k = [(lbl, [r.k for r in res.records], [r.interface_error for r in res.records])
            for lbl, res in results.items()]
    by_t = [(lbl, [r.wall_time for r in res.records], [r.interface_error for r in res.records])
            for lbl, res in results.items()]
    body = _panel(by_k, "k", 0) + "\n" + _panel(by_t, "wall time [s]", 370)
    return ('<svg xmlns="http://www.w3.org/2000/svg" width="740" height="270">\n'
            f"{body}\n</svg>\n")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncwr", description="Waveform relaxation experiments "
                                "on the coupled heat benchmark.")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--method", action="append", help="jacobi, gs-dn, gs-nd or async; "
                   "repeat or comma-separate for several (default: all)")
    p.add_argument("--materials", help="material pair, e.g. air-steel, air-water, water-steel, same")
    p.add_argument("--dimension", type=int, choices=(1, 2))
    p.add_argument("--dx", type=_fraction, help="mesh width, e.g. 1/64")
    p.add_argument("--steps", type=int, help="time steps per side")
    p.add_argument("--steps-w", type=int, dest="steps_w", help="time steps of the second side")
    p.add_argument("--dt", type=float, help="time step for --relax-table (default Tf/steps)")
    p.add_argument("--tol", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("--schedule", choices=SCHEDULES)
    p.add_argument("--seed", type=int)
    p.add_argument("--delay-factor", type=float, dest="delay_factor")
    p.add_argument("--variant", choices=("variable", "constant"))
    p.add_argument("--termination", choices=("interface", "exchanged"),
                   help="stop on the uG(Tf) update alone, or on uG and q together")
    p.add_argument("--theta", type=float, help="one relaxation parameter for every shape")
    p.add_argument("--no-relax", action="store_true", default=None, dest="no_relax")
    p.add_argument("--integrator", choices=("trapezoidal", "implicit-euler"))
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--plot", action="store_true", default=None, help="also write an SVG plot")
    p.add_argument("--trace", help="record the asynchronous schedule to this file")
    p.add_argument("--replay", help="replay a recorded schedule")
    p.add_argument("--repeat", type=int, help="run async R times with seeds seed..seed+R-1")
    p.add_argument("--full-scale", action="store_true", help="dx = 1/513 and 200 steps")
    p.add_argument("--relax-table", action="store_true", help="print optimal relaxation and exit")
    p.add_argument("--theorem1", action="store_true", help="print the convergence condition report and exit")
    return p


def _build_config(args) -> ExperimentConfig:
    kwargs = {}
    if args.config:
        kwargs.update(parse_config_file(Path(args.config).read_text()))
    if args.full_scale:
        kwargs.update(dx=1.0 / 513, steps=200)
    for f in fields(ExperimentConfig):
        name = f.name
        if name == "methods":
            continue
        val = getattr(args, name, None)
        if val is not None:
            kwargs[name] = val
    if args.method:
        kwargs["methods"] = [m.strip() for item in args.method for m in item.split(",") if m.strip()]
    if args.replay and args.schedule is None and "schedule" not in kwargs:
        mode = Trace.load(args.replay).mode
        kwargs["schedule"] = {v: k for k, v in _MODE.items()}.get(mode, mode)
    return ExperimentConfig(**kwargs)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.relax_table:
            dt = args.dt if args.dt is not None else cfg.Tf / cfg.steps
            print_relax_table(cfg.materials, cfg.dx, dt)
            return 0
        if args.theorem1:
            return 0 if print_theorem1(cfg) else 1
        status, _ = run_experiment(cfg)
        return status
    except (ValueError, OSError, ReplayMismatch, RMAError) as exc:
        print(f"asyncwr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
