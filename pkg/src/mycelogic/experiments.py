"""End-to-end experiment drivers shared by the CLI, scripts and tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import excitable, funcmine, rcnet, spikegates, substrate
from .util import child_seed


def place_electrodes(
    template: substrate.GridTemplate,
    count: int,
    radius: float = 2.0,
    placement_radius: float | None = None,
) -> list[substrate.Electrode]:
    """Deterministic farthest-point placement over conductive cells.

    The first electrode sits at the conductive cell nearest the mask
    centroid; each next one maximizes its minimum distance to those already
    placed. ``placement_radius`` restricts candidates to a disc around the
    centroid so experiments can bound wave travel distances.
    """
    rows, cols = np.nonzero(template.mask)
    pts = np.stack([rows, cols], axis=1).astype(np.float64)
    centroid = pts.mean(axis=0)
    if placement_radius is not None:
        keep = np.linalg.norm(pts - centroid, axis=1) <= placement_radius
        pts = pts[keep]
    if len(pts) < count:
        raise ValueError(f"only {len(pts)} candidate cells for {count} electrodes")
    d0 = np.linalg.norm(pts - centroid, axis=1)
    first = int(np.lexsort((pts[:, 1], pts[:, 0], d0))[0])
    chosen = [first]
    mind = np.linalg.norm(pts - pts[first], axis=1)
    for _ in range(count - 1):
        nxt = int(np.lexsort((pts[:, 1], pts[:, 0], -mind))[0])
        chosen.append(nxt)
        mind = np.minimum(mind, np.linalg.norm(pts - pts[nxt], axis=1))
    return [
        substrate.Electrode(center=(int(pts[i, 0]), int(pts[i, 1])), radius=radius)
        for i in chosen
    ]


# ---------------------------------------------------------------------------
# Spike-gate census over synthetic colonies


@dataclass
class SpikeCensusConfig:
    colonies: int = 20
    width: int = 200
    height: int = 192
    branch_rate: float = 0.04
    steps: int = 4000
    thickness: int = 1
    initial_tips: int = 4
    electrodes: int = 16
    pairs: int = 3
    iterations: int = 120_000
    sample_every: int = 10
    stim_amplitude: float = 0.5
    stim_duration: int = 100
    electrode_radius: float = 2.0
    placement_radius: float = 45.0
    amp_threshold: float = 0.1
    w_coin: int = 200
    w_sep: int = 1000
    seed: int = 0
    threads: int = 1
    fhn: excitable.FhnParams = field(default_factory=excitable.FhnParams)


def _colony_census(args) -> spikegates.GateCensus:
    cfg, colony_index = args
    colony_seed = child_seed(cfg.seed, 0, colony_index)
    template = substrate.synthesize_colony(
        colony_seed, cfg.width, cfg.height, cfg.branch_rate, cfg.steps,
        thickness=cfg.thickness, initial_tips=cfg.initial_tips,
    )
    electrodes = place_electrodes(
        template, cfg.electrodes, radius=cfg.electrode_radius, placement_radius=cfg.placement_radius
    )
    pair_list = [(2 * p, 2 * p + 1) for p in range(cfg.pairs)]
    events_by_electrode: dict[int, list[spikegates.GateEvent]] = {i: [] for i in range(len(electrodes))}
    for xi, yi in pair_list:
        trains = {}
        for cond, (x_on, y_on) in (("01", (False, True)), ("10", (True, False)), ("11", (True, True))):
            entries = []
            if x_on:
                entries.append(
                    excitable.StimulusEntry(electrodes[xi], 0, cfg.stim_duration, cfg.stim_amplitude)
                )
            if y_on:
                entries.append(
                    excitable.StimulusEntry(electrodes[yi], 0, cfg.stim_duration, cfg.stim_amplitude)
                )
            traces = excitable.run(
                template,
                cfg.fhn,
                excitable.StimulusPlan(entries=entries),
                electrodes,
                iterations=cfg.iterations,
                sample_every=cfg.sample_every,
                stop_when_quiet=1e-6,
            )
            trains[cond] = [
                spikegates.detect_spikes(tr, cfg.amp_threshold, cfg.w_sep) for tr in traces
            ]
        for ei in range(len(electrodes)):
            events = spikegates.classify_events(
                trains["01"][ei], trains["10"][ei], trains["11"][ei], cfg.w_coin, cfg.w_sep
            )
            events_by_electrode[ei].extend(events)
    return spikegates.census(events_by_electrode)


def run_spike_census(cfg: SpikeCensusConfig) -> spikegates.GateCensus:
    """Pooled gate census over a seed sweep of synthetic colonies."""
    if 2 * cfg.pairs > cfg.electrodes:
        raise ValueError(f"{cfg.pairs} disjoint input pairs need {2 * cfg.pairs} electrodes, have {cfg.electrodes}")
    jobs = [(cfg, i) for i in range(cfg.colonies)]
    if cfg.threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(_colony_census, jobs))
    else:
        parts = [_colony_census(job) for job in jobs]
    return spikegates.merge_census(parts)


# ---------------------------------------------------------------------------
# RC sweep over a synthetic colony graph


@dataclass
class RcSweepConfig:
    mode: str = "serial"
    ensemble: int = 100
    width: int = 128
    height: int = 128
    branch_rate: float = 0.05
    steps: int = 2500
    thickness: int = 1
    initial_tips: int = 4
    z_jitter: float = 8.0
    dt: float = 1e-5
    total_time: float = 1e-2
    r_scale: float = 1e3
    c_scale: float = 1e-13
    p_r: float = 0.5
    theta_min: float = 1e-4
    theta_max: float = 5e-2
    theta_step: float = 1e-4
    seed: int = 0
    threads: int = 1

    def theta_grid(self) -> np.ndarray:
        n = int(round((self.theta_max - self.theta_min) / self.theta_step)) + 1
        return self.theta_min + np.arange(n) * self.theta_step


def colony_graph_for(cfg: RcSweepConfig) -> substrate.ColonyGraph:
    template = substrate.synthesize_colony(
        child_seed(cfg.seed, 0), cfg.width, cfg.height, cfg.branch_rate, cfg.steps,
        thickness=cfg.thickness, initial_tips=cfg.initial_tips,
    )
    return substrate.graph_from_template(template, z_jitter=cfg.z_jitter, seed=child_seed(cfg.seed, 5))


def run_rc_sweep(cfg: RcSweepConfig, graph: substrate.ColonyGraph | None = None) -> rcnet.SweepResult:
    if graph is None:
        graph = colony_graph_for(cfg)
    return rcnet.mine_gates(
        graph,
        cfg.mode,
        cfg.ensemble,
        thetas=cfg.theta_grid(),
        pulse=rcnet.PulseSpec(),
        seed=child_seed(cfg.seed, 3),
        dt=cfg.dt,
        total_time=cfg.total_time,
        r_scale=cfg.r_scale,
        c_scale=cfg.c_scale,
        p_r=cfg.p_r,
        threads=cfg.threads,
    )


def sweep_fit_report(res: rcnet.SweepResult) -> dict:
    """Power-law and polynomial fits per gate class, where the data allows."""
    report: dict = {}
    for gate in rcnet.GATE_CLASSES:
        counts = res.counts[gate]
        entry: dict = {"total": int(counts.sum())}
        try:
            a, k, rms = rcnet.fit_power_law(res.thetas, counts)
            entry["power_law"] = {"coefficient": a, "exponent": k, "rms_log_residual": rms}
        except rcnet.InsufficientDataError as exc:
            entry["power_law"] = {"error": str(exc)}
        for degree in (1, 2):
            try:
                coeffs, rms = rcnet.fit_poly(res.thetas, counts, degree)
                entry[f"poly{degree}"] = {"coefficients": [float(c) for c in coeffs], "rms_residual": rms}
            except rcnet.InsufficientDataError as exc:
                entry[f"poly{degree}"] = {"error": str(exc)}
        report[gate] = entry
    return report


# ---------------------------------------------------------------------------
# Function mining through a four-input RC substrate


@dataclass
class FunctionMiningConfig:
    repeats: int = 14
    channels: int = 7
    thresholds: int = 32
    dwell: float = 1e-2
    dt: float = 1e-5
    width: int = 96
    height: int = 96
    branch_rate: float = 0.06
    steps: int = 1500
    thickness: int = 1
    initial_tips: int = 4
    z_jitter: float = 8.0
    level_low: float = -5.0
    level_high: float = 5.0
    top_n: int = 10
    seed: int = 0


def run_function_mining(cfg: FunctionMiningConfig) -> tuple[list[funcmine.TruthTable16], funcmine.FunctionCensus]:
    """Laboratory-shaped pipeline: repeats x channels x thresholds tables.

    Each repeat randomizes a fresh four-source network over one colony graph
    (element draw and terminals change, architecture does not).
    """
    template = substrate.synthesize_colony(
        child_seed(cfg.seed, 0), cfg.width, cfg.height, cfg.branch_rate, cfg.steps,
        thickness=cfg.thickness, initial_tips=cfg.initial_tips,
    )
    graph = substrate.graph_from_template(template, z_jitter=cfg.z_jitter, seed=child_seed(cfg.seed, 5))
    schedule = funcmine.StateSchedule(dwell=cfg.dwell, level_low=cfg.level_low, level_high=cfg.level_high)
    tables: list[funcmine.TruthTable16] = []
    for rep in range(cfg.repeats):
        net = rcnet.build_rc(graph, "serial", child_seed(cfg.seed, 4, rep), n_sources=4)
        probes = net.probes
        if len(probes) < cfg.channels:
            raise ValueError(f"network has {len(probes)} probes; need {cfg.channels} channels")
        stride = max(1, len(probes) // cfg.channels)
        channels = [probes[i * stride] for i in range(cfg.channels)]
        recs = funcmine.synth_driver(
            funcmine.RcFunctionSubstrate(network=net, dt=cfg.dt), schedule, channels
        )
        for rec in recs:
            for t in funcmine.threshold_sweep(rec, cfg.thresholds):
                tables.append(
                    funcmine.TruthTable16(
                        value=t.value, repeat=rep, channel=t.channel, threshold_index=t.threshold_index
                    )
                )
    return tables, funcmine.census_functions(tables)
