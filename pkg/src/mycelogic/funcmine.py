"""Mining 4-input Boolean functions from multi-channel voltage recordings.

The pipeline drives (or ingests) recordings under a 16-state input schedule,
turns each (channel, threshold band) pair into a 16-row truth table via the
peak-outside-band rule, synthesizes an exact sum-of-products form per table,
and reports the function census.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import excitable
from .rcnet import MnaSystem, RcNetwork
from .substrate import Electrode, GridTemplate

VAR_NAMES = "ABCD"
N_INPUTS = 4
N_STATES = 16
ALL_ONES = 0xFFFF


class IncompleteRecordingError(ValueError):
    pass


@dataclass(frozen=True)
class StateSchedule:
    """16 input states in ascending binary order, one dwell interval each."""

    dwell: float = 1e-2          # seconds per state (simulated, time-compressed)
    level_low: float = -5.0     # volts encoding logical 0
    level_high: float = 5.0     # volts encoding logical 1

    def __post_init__(self):
        if self.dwell <= 0:
            raise ValueError("dwell must be positive")

    def state_bits(self, state: int) -> tuple[int, int, int, int]:
        """(A, B, C, D) for a state, A being the most significant bit."""
        return ((state >> 3) & 1, (state >> 2) & 1, (state >> 1) & 1, state & 1)

    def level(self, bit: int) -> float:
        return self.level_high if bit else self.level_low

    def boundaries(self) -> np.ndarray:
        return np.arange(N_STATES + 1) * self.dwell


@dataclass
class ChannelRecording:
    """One differential channel: samples plus the 16 state intervals."""

    channel_id: int
    times: np.ndarray
    volts: np.ndarray
    boundaries: np.ndarray  # 17 interval edges; last interval is closed

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.volts = np.asarray(self.volts, dtype=np.float64)
        self.boundaries = np.asarray(self.boundaries, dtype=np.float64)
        if len(self.boundaries) != N_STATES + 1:
            raise ValueError("need 17 state boundaries")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("sample times must be non-decreasing")
        if len(self.times) != len(self.volts):
            raise ValueError("times and volts must align")
        if len(self.times) and (self.times[0] < self.boundaries[0] or self.times[-1] > self.boundaries[-1]):
            raise ValueError("samples fall outside the state intervals")

    def state_slices(self) -> list[np.ndarray]:
        idx = np.searchsorted(self.boundaries, self.times, side="right") - 1
        idx = np.clip(idx, 0, N_STATES - 1)  # closes the last interval
        return [np.where(idx == s)[0] for s in range(N_STATES)]


@dataclass(frozen=True)
class TruthTable16:
    """16-bit output vector; bit s is the output for input state s."""

    value: int
    repeat: int | None = None
    channel: int | None = None
    threshold_index: int | None = None

    def __post_init__(self):
        if not (0 <= self.value <= ALL_ONES):
            raise ValueError("table value must fit in 16 bits")

    def output(self, state: int) -> int:
        return (self.value >> state) & 1


# ---------------------------------------------------------------------------
# Table extraction


def extract_table(rec: ChannelRecording, band: tuple[float, float]) -> TruthTable16:
    """Peak-outside-band rule: state bit is 1 iff any sample leaves the band.

    Polarity is ignored by construction: both v < low and v > high count.
    """
    low, high = band
    if not (low < high):
        raise ValueError(f"band must satisfy low < high, got {band}")
    value = 0
    for s, idx in enumerate(rec.state_slices()):
        if len(idx) == 0:
            raise IncompleteRecordingError(f"channel {rec.channel_id}: state {s} has no samples")
        v = rec.volts[idx]
        if bool(np.any((v < low) | (v > high))):
            value |= 1 << s
    return TruthTable16(value=value, channel=rec.channel_id)


def linear_band_builder(rec: ChannelRecording, n_thresholds: int) -> list[tuple[float, float]]:
    """Symmetric bands (-t_i, +t_i), t_i linear from 5% to 100% of max |V|."""
    vmax = float(np.max(np.abs(rec.volts))) if len(rec.volts) else 0.0
    vmax = max(vmax, 1e-12)
    if n_thresholds == 1:
        widths = np.array([vmax])
    else:
        widths = np.linspace(0.05 * vmax, vmax, n_thresholds)
    return [(-float(w), float(w)) for w in widths]


def threshold_sweep(
    rec: ChannelRecording,
    n_thresholds: int = 32,
    band_builder=linear_band_builder,
) -> list[TruthTable16]:
    """One truth table per band over a per-channel threshold ladder."""
    if n_thresholds < 1:
        raise ValueError("n_thresholds must be at least 1")
    tables = []
    for i, band in enumerate(band_builder(rec, n_thresholds)):
        t = extract_table(rec, band)
        tables.append(TruthTable16(value=t.value, channel=rec.channel_id, threshold_index=i))
    return tables


# ---------------------------------------------------------------------------
# Sum-of-products synthesis (Quine-McCluskey tabulation, greedy cover)


@dataclass(frozen=True)
class SopExpression:
    """Disjunction of product terms; each term is a cube (care_mask, values).

    A minterm s satisfies the term iff (s & care_mask) == values. The empty
    sum is constant FALSE; a term with an empty mask is constant TRUE.
    """

    terms: tuple[tuple[int, int], ...]

    def evaluate(self) -> int:
        value = 0
        for s in range(N_STATES):
            for mask, want in self.terms:
                if (s & mask) == want:
                    value |= 1 << s
                    break
        return value

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mask, want in self.terms:
            if mask == 0:
                return "1"
            lits = []
            for i, name in enumerate(VAR_NAMES):
                bit = 1 << (N_INPUTS - 1 - i)
                if mask & bit:
                    lits.append(name if want & bit else name + "'")
            parts.append("".join(lits))
        return " + ".join(parts)


FULL_MASK = 0xF  # all four inputs cared


def _prime_implicants(on_set: list[int]) -> list[tuple[int, int]]:
    """All maximal cubes contained in the on-set."""
    level = {(FULL_MASK, m) for m in on_set}  # (care_mask, values)
    primes: set[tuple[int, int]] = set()
    while level:
        merged: set[tuple[int, int]] = set()
        next_level: set[tuple[int, int]] = set()
        by_mask: dict[int, list[int]] = {}
        for mask, val in sorted(level):
            by_mask.setdefault(mask, []).append(val)
        for mask, vals in by_mask.items():
            vset = set(vals)
            for val in vals:
                for i in range(N_INPUTS):
                    bit = 1 << i
                    if not mask & bit:
                        continue
                    if (val ^ bit) in vset:
                        merged.add((mask, val))
                        merged.add((mask, val ^ bit))
                        next_level.add((mask & ~bit, val & ~bit))
        primes |= level - merged
        level = next_level
    # fewest literals first, then variable order A before D, then positive late
    return sorted(primes, key=lambda cube: (bin(cube[0]).count("1"), -cube[0], cube[1]))


def sop(table: TruthTable16 | int) -> SopExpression:
    """Exact minimized-ish SOP: prime implicants plus a greedy cover.

    Equivalence with the table is exact by construction (primes only cover
    on-set minterms); minimality of the cover is best-effort.
    """
    value = table.value if isinstance(table, TruthTable16) else int(table)
    if value == 0:
        return SopExpression(terms=())
    if value == ALL_ONES:
        return SopExpression(terms=((0, 0),))
    on_set = [s for s in range(N_STATES) if (value >> s) & 1]
    primes = _prime_implicants(on_set)
    cover_of: list[set[int]] = [set() for _ in primes]
    for pi, (mask, want) in enumerate(primes):
        for s in on_set:
            if (s & mask) == want:
                cover_of[pi].add(s)

    chosen: list[int] = []
    uncovered = set(on_set)
    # essential primes first: minterms covered by exactly one prime
    for s in sorted(on_set):
        holders = [pi for pi, cov in enumerate(cover_of) if s in cov]
        if len(holders) == 1 and holders[0] not in chosen:
            chosen.append(holders[0])
            uncovered -= cover_of[holders[0]]
    # then greedy: largest remaining coverage, ties to the earlier prime
    while uncovered:
        best = max(range(len(primes)), key=lambda pi: (len(cover_of[pi] & uncovered), -pi))
        chosen.append(best)
        uncovered -= cover_of[best]
    chosen.sort()
    return SopExpression(terms=tuple(primes[pi] for pi in chosen))


# ---------------------------------------------------------------------------
# Census


@dataclass
class FunctionCensus:
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.histogram.values())

    @property
    def unique_functions(self) -> int:
        return len(self.histogram)

    def top(self, n: int) -> list[tuple[int, int, str]]:
        """(table value, count, SOP string) for the n most frequent tables."""
        ranked = sorted(self.histogram.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(value, count, str(sop(value))) for value, count in ranked[:n]]


def census_functions(tables: list[TruthTable16]) -> FunctionCensus:
    hist = Counter(t.value for t in tables)
    return FunctionCensus(histogram=dict(sorted(hist.items())))


def census_to_csv(c: FunctionCensus) -> str:
    lines = ["table_decimal,count"]
    for value in sorted(c.histogram):
        lines.append(f"{value},{c.histogram[value]}")
    return "\n".join(lines) + "\n"


def top_report(c: FunctionCensus, n: int = 10) -> dict:
    return {
        "total_tables": c.total,
        "unique_functions": c.unique_functions,
        "top": [
            {"table": value, "count": count, "sop": expr}
            for value, count, expr in c.top(n)
        ],
    }


# ---------------------------------------------------------------------------
# Synthetic drivers: run the schedule through a simulated substrate


@dataclass
class RcFunctionSubstrate:
    """RC network with four driven source nodes; channels are probe nodes."""

    network: RcNetwork
    dt: float = 1e-5

    def __post_init__(self):
        if len(self.network.sources) != N_INPUTS:
            raise ValueError(f"function substrate needs {N_INPUTS} sources, got {len(self.network.sources)}")


@dataclass
class FhnFunctionSubstrate:
    """Excitable template with four stimulus electrodes; channels record p.

    Times are in iterations: the schedule's dwell is interpreted as
    iterations per state (rounded).
    """

    template: GridTemplate
    params: excitable.FhnParams
    inputs: list[Electrode]
    stim_amplitude: float = 0.5
    stim_duration: int = 100
    sample_every: int = 10

    def __post_init__(self):
        if len(self.inputs) != N_INPUTS:
            raise ValueError(f"function substrate needs {N_INPUTS} input electrodes, got {len(self.inputs)}")


def synth_driver(substrate, schedule: StateSchedule, channels: list) -> list[ChannelRecording]:
    """Drive the 16-state schedule through a simulated substrate.

    For an RC substrate, ``channels`` lists probe node ids; for an excitable
    substrate it lists Electrode objects. Channel ids are 1-based in the
    order given.
    """
    if isinstance(substrate, RcFunctionSubstrate):
        return _drive_rc(substrate, schedule, channels)
    if isinstance(substrate, FhnFunctionSubstrate):
        return _drive_fhn(substrate, schedule, channels)
    raise TypeError(f"unsupported substrate {type(substrate).__name__}")


def _drive_rc(substrate: RcFunctionSubstrate, schedule: StateSchedule, channels: list[int]) -> list[ChannelRecording]:
    net = substrate.network
    dt = substrate.dt
    steps_per_state = max(1, int(round(schedule.dwell / dt)))
    nsteps = steps_per_state * N_STATES
    times = np.arange(nsteps + 1) * dt
    state_at = np.minimum(np.arange(nsteps + 1) // steps_per_state, N_STATES - 1)
    source_values = np.zeros((N_INPUTS, nsteps + 1))
    for s in range(N_STATES):
        bits = schedule.state_bits(s)
        cols = state_at == s
        for j in range(N_INPUTS):
            source_values[j, cols] = schedule.level(bits[j])
    sys = MnaSystem(net, dt)
    volts = sys.solve(source_values)
    boundaries = np.arange(N_STATES + 1) * (steps_per_state * dt)
    out = []
    for ci, node in enumerate(channels, start=1):
        if node not in sys.node_index:
            raise ValueError(f"channel node {node} is not a solvable network node")
        out.append(ChannelRecording(channel_id=ci, times=times, volts=volts[sys.node_index[node]], boundaries=boundaries))
    return out


def _drive_fhn(substrate: FhnFunctionSubstrate, schedule: StateSchedule, channels: list[Electrode]) -> list[ChannelRecording]:
    dwell_iters = max(1, int(round(schedule.dwell)))
    entries = []
    for s in range(N_STATES):
        bits = schedule.state_bits(s)
        for j, electrode in enumerate(substrate.inputs):
            if bits[j]:
                entries.append(
                    excitable.StimulusEntry(
                        electrode=electrode,
                        start=s * dwell_iters,
                        duration=min(substrate.stim_duration, dwell_iters),
                        amplitude=substrate.stim_amplitude,
                    )
                )
    plan = excitable.StimulusPlan(entries=entries)
    traces = excitable.run(
        substrate.template,
        substrate.params,
        plan,
        channels,
        iterations=dwell_iters * N_STATES,
        sample_every=substrate.sample_every,
    )
    boundaries = np.arange(N_STATES + 1) * float(dwell_iters)
    return [
        ChannelRecording(
            channel_id=ci,
            times=tr.iterations.astype(np.float64),
            volts=tr.values,
            boundaries=boundaries,
        )
        for ci, tr in enumerate(traces, start=1)
    ]


# ---------------------------------------------------------------------------
# Recording IO: CSV of channels plus a sidecar with state boundaries


def recordings_to_csv(recs: list[ChannelRecording]) -> str:
    """`time_s,ch1,...,chN`; all channels must share one time base."""
    if not recs:
        raise ValueError("no recordings")
    times = recs[0].times
    for r in recs[1:]:
        if not np.array_equal(r.times, times):
            raise ValueError("recordings do not share a time base")
    header = "time_s," + ",".join(f"ch{r.channel_id}" for r in recs)
    lines = [header]
    cols = [r.volts.tolist() for r in recs]
    for i, t in enumerate(times.tolist()):
        lines.append(f"{t!r}," + ",".join(f"{c[i]!r}" for c in cols))
    return "\n".join(lines) + "\n"


def boundaries_sidecar(recs: list[ChannelRecording]) -> dict:
    return {"boundaries": recs[0].boundaries.tolist()}


def load_recordings(csv_text: str, sidecar: dict) -> list[ChannelRecording]:
    lines = [ln for ln in csv_text.strip().splitlines() if ln]
    header = lines[0].split(",")
    if header[0] != "time_s" or len(header) < 2:
        raise ValueError("recording CSV must start with a `time_s,ch1,...` header")
    channel_ids = []
    for name in header[1:]:
        if not name.startswith("ch"):
            raise ValueError(f"bad channel column {name!r}")
        channel_ids.append(int(name[2:]))
    data = np.array([[float(tok) for tok in ln.split(",")] for ln in lines[1:]])
    if data.shape[1] != len(header):
        raise ValueError("ragged recording CSV")
    boundaries = np.asarray(sidecar["boundaries"], dtype=np.float64)
    times = data[:, 0]
    return [
        ChannelRecording(channel_id=cid, times=times, volts=data[:, j + 1], boundaries=boundaries)
        for j, cid in enumerate(channel_ids)
    ]
