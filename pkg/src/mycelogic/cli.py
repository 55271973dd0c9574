"""Command-line entry point: reproducible runs driven by a TOML config.

Every run writes `manifest.json` echoing the fully resolved configuration,
the master seed and all derived seeds; two runs with equal manifests produce
byte-identical result files. Outputs are written atomically.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from . import excitable, experiments, funcmine, rcnet, spikegates, substrate, svgplot
from .util import atomic_write_bytes, atomic_write_text, child_seed

SEED_ROLES = {
    "substrate": 0,
    "placement": 1,
    "stimulus": 2,
    "rc": 3,
    "schedule": 4,
    "z_jitter": 5,
}


class CliError(RuntimeError):
    pass


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _sanitize(dataclasses.asdict(obj))
    return obj


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n")


def _write_manifest(out_dir: Path, command: str, seed: int, threads: int, resolved: dict) -> None:
    manifest = {
        "command": command,
        "seed": seed,
        "threads": threads,
        "derived_seeds": {role: child_seed(seed, idx) for role, idx in SEED_ROLES.items()},
        "config": _sanitize(resolved),
    }
    _write_json(out_dir / "manifest.json", manifest)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {path}")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"bad config {path}: {exc}") from exc


def _apply(dc, table: dict):
    """Override dataclass fields from a config table; unknown keys error."""
    names = {f.name for f in dataclasses.fields(dc)}
    for key, value in table.items():
        if key not in names:
            raise CliError(f"unknown config key {key!r} for {type(dc).__name__}")
        setattr(dc, key, value)
    return dc


# ---------------------------------------------------------------------------
# Substrate resolution shared by several subcommands


@dataclasses.dataclass
class SubstrateSource:
    kind: str = "synth"          # synth | pgm | graph
    path: str = ""
    threshold: float = 0.5
    width: int = 128
    height: int = 128
    branch_rate: float = 0.05
    steps: int = 2500
    thickness: int = 1
    initial_tips: int = 4
    straight_bias: float = 0.8
    z_jitter: float = 8.0
    contract: bool = True


def _resolve_template(src: SubstrateSource, seed: int) -> substrate.GridTemplate:
    if src.kind == "synth":
        return substrate.synthesize_colony(
            child_seed(seed, SEED_ROLES["substrate"]),
            src.width,
            src.height,
            src.branch_rate,
            src.steps,
            straight_bias=src.straight_bias,
            thickness=src.thickness,
            initial_tips=src.initial_tips,
        )
    if src.kind == "pgm":
        return substrate.load_template(Path(src.path).read_bytes(), src.threshold)
    raise CliError(f"substrate kind {src.kind!r} does not yield a grid template")


def _resolve_graph(src: SubstrateSource, seed: int) -> substrate.ColonyGraph:
    if src.kind == "graph":
        return substrate.load_colony_graph(Path(src.path).read_text())
    template = _resolve_template(src, seed)
    return substrate.graph_from_template(
        template,
        z_jitter=src.z_jitter,
        seed=child_seed(seed, SEED_ROLES["z_jitter"]),
        contract_chains=src.contract,
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth_colony(config: dict, seed: int, out: Path, threads: int) -> None:
    src = _apply(SubstrateSource(), config.get("substrate", {}))
    if src.kind != "synth":
        raise CliError("synth-colony requires substrate.kind = 'synth'")
    template = _resolve_template(src, seed)
    graph = substrate.graph_from_template(
        template, z_jitter=src.z_jitter, seed=child_seed(seed, SEED_ROLES["z_jitter"]), contract_chains=src.contract
    )
    atomic_write_bytes(out / "colony.pgm", substrate.save_template(template))
    atomic_write_text(out / "colony.graph", substrate.save_colony_graph(graph))
    _write_manifest(out, "synth-colony", seed, threads, {"substrate": src})


@dataclasses.dataclass
class FhnRunConfig:
    iterations: int = 20000
    sample_every: int = 10
    snapshot_every: int = 0


def cmd_simulate_fhn(config: dict, seed: int, out: Path, threads: int) -> None:
    src = _apply(SubstrateSource(), config.get("substrate", {}))
    params = _apply_params(excitable.FhnParams, config.get("fhn", {}))
    runc = _apply(FhnRunConfig(), config.get("run", {}))
    template = _resolve_template(src, seed)

    electrodes = [
        substrate.Electrode(center=(int(e["center"][0]), int(e["center"][1])), radius=float(e.get("radius", 2.0)))
        for e in config.get("electrodes", [])
    ]
    if not electrodes:
        raise CliError("simulate-fhn needs at least one [[electrodes]] entry")
    entries = [
        excitable.StimulusEntry(
            electrode=substrate.Electrode(
                center=(int(s["center"][0]), int(s["center"][1])), radius=float(s.get("radius", 2.0))
            ),
            start=int(s.get("start", 0)),
            duration=int(s.get("duration", 100)),
            amplitude=float(s.get("amplitude", 0.5)),
        )
        for s in config.get("stimulus", [])
    ]
    plan = excitable.StimulusPlan(entries=entries)

    index = excitable.NodeIndex(template)
    snapshots_dir = out / "snapshots"

    def dump(it: int, u: np.ndarray):
        atomic_write_bytes(snapshots_dir / f"u_{it:08d}.pgm", excitable.snapshot_pgm(u, index))

    traces = excitable.run(
        template,
        params,
        plan,
        electrodes,
        iterations=runc.iterations,
        sample_every=runc.sample_every,
        snapshot_every=runc.snapshot_every,
        snapshot_callback=dump if runc.snapshot_every > 0 else None,
    )
    atomic_write_text(out / "traces.csv", excitable.traces_to_csv(traces))
    _write_manifest(
        out,
        "simulate-fhn",
        seed,
        threads,
        {"substrate": src, "fhn": params, "run": runc, "electrodes": config.get("electrodes", []), "stimulus": config.get("stimulus", [])},
    )


def _apply_params(cls, table: dict):
    """Frozen-dataclass variant of _apply: rebuild with overrides."""
    names = {f.name for f in dataclasses.fields(cls)}
    for key in table:
        if key not in names:
            raise CliError(f"unknown config key {key!r} for {cls.__name__}")
    return cls(**table)


def cmd_mine_spikes(config: dict, seed: int, out: Path, threads: int) -> None:
    cfg = _apply(experiments.SpikeCensusConfig(), config.get("spike_census", {}))
    if "fhn" in config:
        cfg.fhn = _apply_params(excitable.FhnParams, config["fhn"])
    cfg.seed = seed
    cfg.threads = threads
    census = experiments.run_spike_census(cfg)
    atomic_write_text(out / "census.csv", spikegates.census_to_csv(census))
    _write_json(out / "ratios.json", spikegates.ratio_report(census))
    ratios = census.ratios()
    series = [("this substrate", ratios if ratios is not None else [0.0] * len(spikegates.RATIO_ORDER))]
    for overlay in config.get("overlays", []):
        series.append((str(overlay["label"]), [float(x) for x in overlay["ratios"]]))
    svg = svgplot.category_polylines(
        list(spikegates.RATIO_ORDER), series, "Gate ratio distribution", "ratio of discovered gates"
    )
    atomic_write_text(out / "gates.svg", svg)
    _write_manifest(out, "mine-spikes", seed, threads, {"spike_census": cfg, "overlays": config.get("overlays", [])})


def cmd_mine_rc(config: dict, seed: int, out: Path, threads: int) -> None:
    rc_table = dict(config.get("rc_sweep", {}))
    netlist_count = int(rc_table.pop("netlists", 0))
    cfg = _apply(experiments.RcSweepConfig(), rc_table)
    cfg.seed = seed
    cfg.threads = threads
    src_table = config.get("substrate")
    modes = ["serial", "parallel"] if cfg.mode == "both" else [cfg.mode]
    graph = None
    if src_table is not None:
        src = _apply(SubstrateSource(), src_table)
        graph = _resolve_graph(src, seed)
    base_mode = cfg.mode
    for mode in modes:
        cfg.mode = mode
        res = experiments.run_rc_sweep(cfg, graph=graph)
        atomic_write_text(out / f"sweep_{mode}.csv", rcnet.sweep_to_csv(res))
        _write_json(out / f"fits_{mode}.json", experiments.sweep_fit_report(res))
        series = [(g, res.counts[g].tolist()) for g in rcnet.GATE_CLASSES]
        svg = svgplot.xy_polylines(
            res.thetas.tolist(), series, f"Gate counts vs threshold ({mode} mode)", "theta (V)", "count"
        )
        atomic_write_text(out / f"gates_{mode}.svg", svg)
        if netlist_count > 0:
            g = graph if graph is not None else experiments.colony_graph_for(cfg)
            pulse = rcnet.PulseSpec()
            for i in range(netlist_count):
                net = rcnet.build_rc(
                    g, mode, child_seed(child_seed(cfg.seed, SEED_ROLES["rc"]), i),
                    r_scale=cfg.r_scale, c_scale=cfg.c_scale, p_r=cfg.p_r,
                )
                text = rcnet.export_netlist(net, [pulse, pulse], cfg.dt, cfg.total_time, title=f"{mode} member {i}")
                atomic_write_text(out / "netlists" / f"{mode}_{i:04d}.cir", text)
    cfg.mode = base_mode
    _write_manifest(out, "mine-rc", seed, threads, {"rc_sweep": cfg, "substrate": src_table, "netlists": netlist_count})


def cmd_mine_functions(config: dict, seed: int, out: Path, threads: int) -> None:
    cfg = _apply(experiments.FunctionMiningConfig(), config.get("function_mining", {}))
    cfg.seed = seed
    tables, census = experiments.run_function_mining(cfg)
    atomic_write_text(out / "census.csv", funcmine.census_to_csv(census))
    _write_json(out / "top_functions.json", funcmine.top_report(census, cfg.top_n))
    values = sorted(census.histogram)
    svg = svgplot.histogram_stems(
        values,
        [census.histogram[v] for v in values],
        "Boolean function census",
        "function (decimal truth table)",
        "count",
        x_hi=funcmine.ALL_ONES,
    )
    atomic_write_text(out / "functions.svg", svg)
    _write_manifest(out, "mine-functions", seed, threads, {"function_mining": cfg})


@dataclasses.dataclass
class NetlistConfig:
    mode: str = "serial"
    index: int = 0
    dt: float = 1e-5
    total_time: float = 1e-2
    r_scale: float = 1e3
    c_scale: float = 1e-13
    p_r: float = 0.5


def cmd_export_netlist(config: dict, seed: int, out: Path, threads: int) -> None:
    src = _apply(SubstrateSource(), config.get("substrate", {}))
    ncfg = _apply(NetlistConfig(), config.get("netlist", {}))
    graph = _resolve_graph(src, seed)
    member_seed = child_seed(child_seed(seed, SEED_ROLES["rc"]), ncfg.index)
    net = rcnet.build_rc(graph, ncfg.mode, member_seed, r_scale=ncfg.r_scale, c_scale=ncfg.c_scale, p_r=ncfg.p_r)
    pulse = rcnet.PulseSpec()
    text = rcnet.export_netlist(net, [pulse, pulse], ncfg.dt, ncfg.total_time, title=f"{ncfg.mode} member {ncfg.index}")
    atomic_write_text(out / "netlist.cir", text)
    _write_manifest(out, "export-netlist", seed, threads, {"substrate": src, "netlist": ncfg})


COMMANDS = {
    "synth-colony": cmd_synth_colony,
    "simulate-fhn": cmd_simulate_fhn,
    "mine-spikes": cmd_mine_spikes,
    "mine-rc": cmd_mine_rc,
    "mine-functions": cmd_mine_functions,
    "export-netlist": cmd_export_netlist,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mycelogic", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes for ensembles/sweeps")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](config, args.seed, out, args.threads)
    except (CliError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
