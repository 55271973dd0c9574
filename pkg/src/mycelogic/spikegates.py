"""Spike detection and two-input gate classification from potential traces.

A spike encodes logical TRUE. Traces recorded under the input conditions
(01), (10) and (11) are aligned; spikes that coincide across conditions form
one event whose presence-triple picks one of the seven zero-preserving gates.
The (00) condition is omitted: a quiescent medium stays quiescent, so its
trace is provably flat.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .excitable import PotentialTrace

# gate labels; CENSUS_CSV_ORDER mirrors the census table layout,
# RATIO_ORDER is the fixed x-axis order of the ratio report and plot
GATE_OR = "x+y"
GATE_SELECT_Y = "Sy"
GATE_XOR = "x^y"
GATE_SELECT_X = "Sx"
GATE_NOTX_AND_Y = "~x*y"
GATE_X_AND_NOTY = "x*~y"
GATE_AND = "x*y"

CENSUS_CSV_ORDER = (GATE_OR, GATE_SELECT_Y, GATE_XOR, GATE_SELECT_X, GATE_NOTX_AND_Y, GATE_X_AND_NOTY, GATE_AND)
RATIO_ORDER = (GATE_SELECT_X, GATE_SELECT_Y, GATE_NOTX_AND_Y, GATE_X_AND_NOTY, GATE_OR, GATE_AND, GATE_XOR)

# (spike in 01, spike in 10, spike in 11) -> gate
TRIPLE_TO_GATE = {
    (True, True, True): GATE_OR,
    (True, False, True): GATE_SELECT_Y,
    (True, True, False): GATE_XOR,
    (False, True, True): GATE_SELECT_X,
    (True, False, False): GATE_NOTX_AND_Y,
    (False, True, False): GATE_X_AND_NOTY,
    (False, False, True): GATE_AND,
}


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SpikeTrain:
    electrode_id: int
    times: np.ndarray  # spike onsets, strictly increasing iteration counts


@dataclass(frozen=True)
class GateEvent:
    electrode_id: int
    time: int
    triple: tuple[bool, bool, bool]
    gate: str


@dataclass
class GateCensus:
    per_electrode: dict[int, dict[str, int]] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        total = {g: 0 for g in CENSUS_CSV_ORDER}
        for row in self.per_electrode.values():
            for g, n in row.items():
                total[g] += n
        return total

    def total(self) -> int:
        return sum(self.counts().values())

    def ratios(self) -> list[float] | None:
        """Gate frequencies in RATIO_ORDER, or None for an empty census."""
        counts = self.counts()
        total = sum(counts.values())
        if total == 0:
            return None
        return [counts[g] / total for g in RATIO_ORDER]


def detect_spikes(trace: PotentialTrace, amp_threshold: float = 0.1, w_sep: int = 1000) -> SpikeTrain:
    """Extract spike onsets from a potential trace.

    An onset is the first sample of a maximal excursion crossing
    ``amp_threshold`` upward; excursions whose onsets are within ``w_sep``
    iterations merge into a single spike keeping the earliest onset.
    """
    if w_sep <= 0:
        raise ValueError("w_sep must be positive")
    if len(trace.iterations) == 0:
        raise ValueError("trace is empty")
    p = trace.values
    above = p >= amp_threshold
    rising = above & ~np.concatenate(([False], above[:-1]))
    onsets = trace.iterations[rising]
    merged: list[int] = []
    last_onset = None
    for t in onsets.tolist():
        # consecutive excursions within w_sep chain into one spike
        if last_onset is None or t - last_onset > w_sep:
            merged.append(t)
        last_onset = t
    return SpikeTrain(electrode_id=trace.electrode_id, times=np.asarray(merged, dtype=np.int64))


def classify_events(
    t01: SpikeTrain,
    t10: SpikeTrain,
    t11: SpikeTrain,
    w_coin: int = 200,
    w_sep: int = 1000,
) -> list[GateEvent]:
    """Group coincident spikes across the three input conditions into events.

    Greedy earliest-first matching: the earliest unmatched spike seeds an
    event; each other train contributes its earliest unmatched spike lying
    within ``w_coin``. All contributors then sit in one half-open window of
    width ``w_coin``, so coincidence is automatically pairwise.
    """
    if w_coin >= w_sep:
        raise ConfigurationError(f"w_coin ({w_coin}) must be smaller than w_sep ({w_sep})")
    if not (t01.electrode_id == t10.electrode_id == t11.electrode_id):
        raise ConfigurationError("spike trains must come from the same electrode")
    trains = [t01.times.tolist(), t10.times.tolist(), t11.times.tolist()]
    heads = [0, 0, 0]
    events: list[GateEvent] = []
    while True:
        pending = [(trains[k][heads[k]], k) for k in range(3) if heads[k] < len(trains[k])]
        if not pending:
            break
        t0 = min(pending)[0]
        triple = [False, False, False]
        for t, k in pending:
            if t - t0 < w_coin:
                triple[k] = True
                heads[k] += 1
        triple_t = (triple[0], triple[1], triple[2])
        events.append(GateEvent(electrode_id=t01.electrode_id, time=int(t0), triple=triple_t, gate=TRIPLE_TO_GATE[triple_t]))
    return events


def census(events_by_electrode: dict[int, list[GateEvent]]) -> GateCensus:
    """Aggregate gate events into per-electrode counts."""
    out = GateCensus()
    for eid in sorted(events_by_electrode):
        row = {g: 0 for g in CENSUS_CSV_ORDER}
        for ev in events_by_electrode[eid]:
            row[ev.gate] += 1
        out.per_electrode[eid] = row
    return out


def merge_census(parts: list[GateCensus]) -> GateCensus:
    """Commutative merge: per-electrode rows add; order of parts is irrelevant."""
    out = GateCensus()
    keys = sorted({eid for part in parts for eid in part.per_electrode})
    for eid in keys:
        row = {g: 0 for g in CENSUS_CSV_ORDER}
        for part in parts:
            for g, n in part.per_electrode.get(eid, {}).items():
                row[g] += n
        out.per_electrode[eid] = row
    return out


def census_to_csv(c: GateCensus) -> str:
    lines = ["electrode," + ",".join(CENSUS_CSV_ORDER) + ",total"]
    for eid in sorted(c.per_electrode):
        row = c.per_electrode[eid]
        vals = [row[g] for g in CENSUS_CSV_ORDER]
        lines.append(f"{eid}," + ",".join(str(v) for v in vals) + f",{sum(vals)}")
    totals = c.counts()
    vals = [totals[g] for g in CENSUS_CSV_ORDER]
    lines.append("total," + ",".join(str(v) for v in vals) + f",{sum(vals)}")
    return "\n".join(lines) + "\n"


def ratio_report(c: GateCensus) -> dict:
    counts = c.counts()
    ratios = c.ratios()
    return {
        "order": list(RATIO_ORDER),
        "counts": {g: counts[g] for g in RATIO_ORDER},
        "total": c.total(),
        "ratios": ratios,
    }
