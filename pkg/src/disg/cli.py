"""Command-line driver: JSON config in, CSV/JSON/SVG artifacts out.

    disg validate --config cfg.json
    disg solve    --config cfg.json --out runs/a
    disg sweep    --config cfg.json --out runs/b --grid 100
    disg plot     --input runs/b/sweep.csv --out runs/b

Exit status: 0 on success, 1 on configuration errors, 2 when a value
iteration fails to converge (tainted ItRA). Errors are also written to
stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .equilibrium import absorbing_box, itra
from .errors import ConfigError, DisgError, EnumerationTooLarge, UnsupportedDimension
from .model import MarkovModel, bsc_channel
from .reward import GameParams
from .sim import estimate_value, finite_horizon_bruteforce, simulate
from .strategy import Region, build_grid, read_regions_csv, write_region_rows

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2


# --- config --------------------------------------------------------------

@dataclass
class ItraBlock:
    k: int = 50
    agent: int = 1


@dataclass
class SimulateBlock:
    horizon: int = 50
    rollouts: int = 0
    seed: int = 0
    prior: Optional[List[float]] = None
    profile: List = field(default_factory=lambda: ["itra", "itra"])


@dataclass
class BoundBlock:
    epsilon_tilde: Optional[float] = None


@dataclass
class FiniteCheckBlock:
    T: int = 2
    prior: Optional[List[float]] = None


@dataclass
class SweepEntry:
    cost: float
    p1: float
    p2: float
    label: Optional[str] = None


@dataclass
class ExperimentConfig:
    model: MarkovModel
    params: GameParams
    resolution: int = 200
    itra: ItraBlock = field(default_factory=ItraBlock)
    simulate: SimulateBlock = field(default_factory=SimulateBlock)
    bound: BoundBlock = field(default_factory=BoundBlock)
    finite_check: FiniteCheckBlock = field(default_factory=FiniteCheckBlock)
    sweep: List[SweepEntry] = field(default_factory=list)


def _expect(obj, kind, where):
    if not isinstance(obj, kind):
        raise ConfigError(f"{where}: expected {kind.__name__ if isinstance(kind, type) else kind}, got {type(obj).__name__}")
    return obj


def _strict_keys(obj: dict, allowed, where: str, required=()):
    _expect(obj, dict, where)
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{where}: missing field(s) {missing}")


def _block(cls, raw, where):
    """Build a dataclass from a dict, rejecting unknown keys."""
    if raw is None:
        return cls()
    names = [f.name for f in dataclasses.fields(cls)]
    required = [f.name for f in dataclasses.fields(cls)
                if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    _strict_keys(raw, names, where, required)
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _channel(spec, num_states: int, where: str) -> np.ndarray:
    if isinstance(spec, dict):
        _strict_keys(spec, ("type", "p"), where, ("type", "p"))
        if spec["type"] != "bsc":
            raise ConfigError(f"{where}: unknown channel type {spec['type']!r}")
        if num_states != 2:
            raise ConfigError(f"{where}: a bsc channel needs num_states=2, got {num_states}")
        try:
            return bsc_channel(float(spec["p"]))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return np.asarray(_expect(spec, list, where), dtype=float)


def parse_model(raw: dict) -> MarkovModel:
    _strict_keys(raw, ("num_states", "transition", "channels"), "model", ("num_states", "transition", "channels"))
    d = raw["num_states"]
    if not isinstance(d, int) or d < 2:
        raise ConfigError(f"model.num_states must be an integer >= 2, got {d!r}")
    channels = _expect(raw["channels"], list, "model.channels")
    if len(channels) != 2:
        raise ConfigError("model.channels must list one channel per agent")
    try:
        transition = np.asarray(raw["transition"], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("model.transition must be a numeric matrix") from None
    mats = tuple(_channel(c, d, f"model.channels[{i}]") for i, c in enumerate(channels))
    # structural errors (rows, signs, shapes) surface as ModelError subclasses
    return MarkovModel(transition, mats)


def parse_params(raw: Optional[dict]) -> GameParams:
    raw = raw or {}
    _strict_keys(raw, ("delta", "cost", "vi_tolerance", "max_iterations"), "params")
    kw = dict(raw)
    if "cost" in kw:
        c = kw["cost"]
        kw["cost"] = (c, c) if isinstance(c, (int, float)) else tuple(c)
    try:
        return GameParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from None


def parse_config(raw: dict) -> ExperimentConfig:
    top = ("schema_version", "model", "params", "grid", "itra", "simulate", "bound", "finite_check", "sweep")
    _strict_keys(raw, top, "config", ("schema_version", "model"))
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {raw['schema_version']!r}; expected {SCHEMA_VERSION}")
    model = parse_model(raw["model"])
    grid = raw.get("grid", {})
    _strict_keys(grid, ("resolution",), "grid")
    resolution = grid.get("resolution", 200)
    if not isinstance(resolution, int) or resolution < 1:
        raise ConfigError(f"grid.resolution must be a positive integer, got {resolution!r}")
    itra_block = _block(ItraBlock, raw.get("itra"), "itra")
    if not isinstance(itra_block.k, int) or itra_block.k < 1 or itra_block.agent not in (1, 2):
        raise ConfigError(f"itra: need k >= 1 and agent in {{1, 2}}, got {itra_block}")
    sim_block = _block(SimulateBlock, raw.get("simulate"), "simulate")
    if not isinstance(sim_block.horizon, int) or sim_block.horizon < 1:
        raise ConfigError(f"simulate.horizon must be a positive integer, got {sim_block.horizon!r}")
    sweep = [_block(SweepEntry, e, f"sweep[{i}]") for i, e in enumerate(_expect(raw.get("sweep", []), list, "sweep"))]
    return ExperimentConfig(
        model=model,
        params=parse_params(raw.get("params")),
        resolution=resolution,
        itra=itra_block,
        simulate=sim_block,
        bound=_block(BoundBlock, raw.get("bound"), "bound"),
        finite_check=_block(FiniteCheckBlock, raw.get("finite_check"), "finite_check"),
        sweep=sweep,
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw)


# --- plotting ------------------------------------------------------------

def emit_region_plot(regions: Sequence[Tuple[str, Region]], width: int = 640) -> str:
    """SVG chart with one horizontal band per region over the pi(X=0) axis."""
    if not regions:
        raise ValueError("nothing to plot")
    grid = regions[0][1].grid
    for _, r in regions:
        grid.check_same(r.grid)
    if grid.num_states != 2:
        raise UnsupportedDimension(f"band plots need two states, got {grid.num_states}")
    left, right, top, band, gap = 140, 20, 20, 24, 12
    axis_w = width - left - right
    height = top + len(regions) * (band + gap) + 40
    R = grid.resolution
    x0 = grid.points[:, 0]

    def px(v):
        return left + axis_w * min(max(v, 0.0), 1.0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for row, (label, region) in enumerate(regions):
        y = top + row * (band + gap)
        out.append(f'<text x="{left - 8}" y="{y + band / 2 + 4:.1f}" text-anchor="end">{_escape(label)}</text>')
        out.append(f'<rect x="{left}" y="{y}" width="{axis_w}" height="{band}" fill="none" stroke="#888"/>')
        for lo, hi in _index_runs(region.mask):
            a = px((x0[lo] * R - 0.5) / R)
            b = px((x0[hi] * R + 0.5) / R)
            out.append(f'<rect x="{a:.2f}" y="{y}" width="{b - a:.2f}" height="{band}" fill="#3a6ea5"/>')
    axis_y = top + len(regions) * (band + gap)
    out.append(f'<line x1="{left}" y1="{axis_y}" x2="{left + axis_w}" y2="{axis_y}" stroke="black"/>')
    for tick in np.linspace(0.0, 1.0, 5):
        tx = px(tick)
        out.append(f'<line x1="{tx:.2f}" y1="{axis_y}" x2="{tx:.2f}" y2="{axis_y + 5}" stroke="black"/>')
        out.append(f'<text x="{tx:.2f}" y="{axis_y + 18}" text-anchor="middle">{tick:g}</text>')
    out.append(f'<text x="{left + axis_w / 2:.1f}" y="{axis_y + 34}" text-anchor="middle">π(X=0)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _index_runs(mask: np.ndarray):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts.tolist(), ends.tolist()))


def _escape(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# --- commands ------------------------------------------------------------

def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_to_builtin) + "\n"


def _to_builtin(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _itra_for(cfg: ExperimentConfig, model: MarkovModel, params: GameParams):
    grid = build_grid(model.num_states, cfg.resolution)
    return itra(model, params, cfg.itra.k, grid=grid, agent=cfg.itra.agent)


def cmd_validate(cfg: ExperimentConfig, out: Path, args) -> int:
    report = {
        "ok": True,
        "num_states": cfg.model.num_states,
        "num_obs": [cfg.model.num_obs(1), cfg.model.num_obs(2)],
        "delta": cfg.params.delta,
        "cost": list(cfg.params.cost),
        "grid_points": build_grid(cfg.model.num_states, cfg.resolution).size,
    }
    sys.stdout.write(_json(report))
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig, out: Path, args) -> int:
    rep = _itra_for(cfg, cfg.model, cfg.params)
    _write(out, "region.csv", rep.region.to_csv())
    _write(out, "itra.json", _json(rep.to_json()))
    return EXIT_NOT_CONVERGED if rep.tainted else EXIT_OK


def cmd_bound(cfg: ExperimentConfig, out: Path, args) -> int:
    eps = cfg.bound.epsilon_tilde if cfg.bound.epsilon_tilde is not None else cfg.params.delta
    grid = build_grid(cfg.model.num_states, cfg.resolution)
    try:
        rep = absorbing_box(cfg.model, cfg.params, eps, grid=grid)
    except ValueError as exc:
        raise ConfigError(f"bound: {exc}") from None
    payload = rep.to_json()
    payload["epsilon_tilde"] = eps
    _write(out, "absorbing.json", _json(payload))
    return EXIT_OK


def _profile_region(spec, cfg: ExperimentConfig, grid, itra_region, where) -> Region:
    if spec == "itra":
        return itra_region()
    if spec == "full":
        return Region.full(grid)
    if spec == "empty":
        return Region.empty(grid)
    if isinstance(spec, list) and len(spec) == 2 and grid.num_states == 2:
        return Region.band(grid, float(spec[0]), float(spec[1]))
    raise ConfigError(f"{where}: expected 'itra', 'full', 'empty' or a [lo, hi] band, got {spec!r}")


def cmd_simulate(cfg: ExperimentConfig, out: Path, args) -> int:
    sc = cfg.simulate
    seed = args.seed if args.seed is not None else sc.seed
    if sc.prior is None:
        raise ConfigError("simulate.prior is required")
    if len(sc.profile) != 2:
        raise ConfigError("simulate.profile must name one region per agent")
    grid = build_grid(cfg.model.num_states, cfg.resolution)
    cache = {}
    status = EXIT_OK

    def itra_region():
        nonlocal status
        if "r" not in cache:
            rep = _itra_for(cfg, cfg.model, cfg.params)
            status = EXIT_NOT_CONVERGED if rep.tainted else EXIT_OK
            cache["r"] = rep.region
        return cache["r"]

    profile = tuple(
        _profile_region(s, cfg, grid, itra_region, f"simulate.profile[{i}]") for i, s in enumerate(sc.profile)
    )
    rec = simulate(cfg.model, profile, cfg.params, sc.prior, sc.horizon, seed)
    _write(out, "trajectory.csv", rec.to_csv())
    if sc.rollouts >= 2:
        rows = io.StringIO()
        w = csv.writer(rows, lineterminator="\n")
        w.writerow(["agent", "mean", "stderr", "truncation_bound"])
        for agent in (1, 2):
            mean, se, tb = estimate_value(cfg.model, profile, cfg.params, sc.prior, agent, sc.rollouts, sc.horizon, seed)
            w.writerow([agent, repr(mean), repr(se), repr(tb)])
        _write(out, "value.csv", rows.getvalue())
    return status


def cmd_finite_check(cfg: ExperimentConfig, out: Path, args) -> int:
    fc = cfg.finite_check
    if fc.T not in (1, 2, 3):
        raise ConfigError(f"finite_check.T must be 1, 2 or 3, got {fc.T}")
    try:
        verdict = finite_horizon_bruteforce(cfg.model, cfg.params, fc.T, prior=fc.prior)
    except EnumerationTooLarge as exc:
        raise ConfigError(f"finite_check: {exc}") from None
    _write(out, "finite_check.json", _json(verdict.to_json()))
    return EXIT_OK


def _sweep_model(cfg: ExperimentConfig, entry: SweepEntry) -> MarkovModel:
    if cfg.model.num_states != 2:
        raise ConfigError("sweep entries set BSC parameters and need num_states=2")
    try:
        return MarkovModel(cfg.model.transition, (bsc_channel(entry.p1), bsc_channel(entry.p2)))
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None


def cmd_sweep(cfg: ExperimentConfig, out: Path, args) -> int:
    if not cfg.sweep:
        raise ConfigError("sweep: no entries")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    reports = []
    status = EXIT_OK
    labelled = []
    for i, entry in enumerate(cfg.sweep):
        label = entry.label or f"c={entry.cost:g} p1={entry.p1:g} p2={entry.p2:g}"
        model = _sweep_model(cfg, entry)
        try:
            params = dataclasses.replace(cfg.params, cost=(entry.cost, entry.cost))
        except ValueError as exc:
            raise ConfigError(f"sweep[{i}]: {exc}") from None
        rep = _itra_for(cfg, model, params)
        write_region_rows(w, rep.region, label=label, header=(i == 0))
        reports.append({"label": label, "cost": entry.cost, "p1": entry.p1, "p2": entry.p2, **rep.to_json()})
        labelled.append((label, rep.region))
        if rep.tainted:
            status = EXIT_NOT_CONVERGED
    _write(out, "sweep.csv", buf.getvalue())
    _write(out, "sweep.json", _json(reports))
    _write(out, "sweep.svg", emit_region_plot(labelled))
    return status


def cmd_plot(args) -> int:
    if args.input is None:
        raise ConfigError("plot needs --input REGION_CSV")
    try:
        regions = read_regions_csv(Path(args.input).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from None
    items = [(label if label is not None else Path(args.input).stem, r) for label, r in regions.items()]
    try:
        svg = emit_region_plot(items)
    except UnsupportedDimension as exc:
        _error(exc)
        return EXIT_OK
    _write(Path(args.out), Path(args.input).stem + ".svg", svg)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "finite-check": cmd_finite_check,
    "sweep": cmd_sweep,
}


def _error(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    where = getattr(exc, "where", None)
    if where is not None:
        payload["where"] = where
    sys.stderr.write(json.dumps(payload, default=_to_builtin) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="disg", description="Cooperation regions for the dynamic information sharing game.")
    ap.add_argument("command", choices=sorted([*COMMANDS, "plot"]))
    ap.add_argument("--config", help="experiment config (JSON)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override simulate.seed")
    ap.add_argument("--grid", type=int, default=None, help="override grid.resolution")
    ap.add_argument("--input", help="region CSV for the plot command")
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            return cmd_plot(args)
        if args.config is None:
            raise ConfigError(f"{args.command} needs --config PATH")
        cfg = load_config(args.config)
        if args.grid is not None:
            if args.grid < 1:
                raise ConfigError("--grid must be positive")
            cfg.resolution = args.grid
        return COMMANDS[args.command](cfg, Path(args.out), args)
    except DisgError as exc:
        _error(exc)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
