"""Randomized RC circuits on colony graphs and transient gate mining.

A colony graph becomes a circuit by mapping each edge to a resistor or a
capacitor (serial mode) or to an R parallel C pair (parallel mode), with
values proportional to edge length. Transients are solved by modified nodal
analysis with backward-Euler companion models; the system matrix is constant
over a run, so it is factorized once and only the right-hand side is
rebuilt per step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .substrate import ColonyGraph
from .util import child_seed

BLEED_CONDUCTANCE = 1e-9  # 1 GOhm to ground for DC-floating probes

GATE_CLASSES = ("and", "or", "andnot", "select", "xor")


class BuildError(ValueError):
    pass


class TopologyError(ValueError):
    def __init__(self, nodes: list[int]):
        self.nodes = nodes
        super().__init__(f"nodes not connected to ground through any element: {nodes}")


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class Element:
    kind: str  # "R" or "C"
    node_a: int
    node_b: int
    value: float  # ohms or farads

    def __post_init__(self):
        if self.kind not in ("R", "C"):
            raise ValueError(f"bad element kind {self.kind!r}")
        if not (self.value > 0):
            raise ValueError(f"element value must be positive, got {self.value}")


@dataclass(frozen=True)
class PulseSpec:
    """Repeated trapezoidal voltage pulse starting at t = 0."""

    amplitude: float = 0.06
    rise: float = 1e-5
    fall: float = 1e-5
    width: float = 1e-3
    period: float = 2e-3
    count: int = 2

    def __post_init__(self):
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.rise < 0 or self.fall < 0 or self.period <= 0 or self.count < 1:
            raise ValueError("bad pulse timing")

    @staticmethod
    def step(amplitude: float, duration: float) -> "PulseSpec":
        """Single instant-edge pulse covering [0, duration)."""
        return PulseSpec(amplitude=amplitude, rise=0.0, fall=0.0, width=duration, period=duration * 2, count=1)

    def values(self, times: np.ndarray) -> np.ndarray:
        k = np.floor_divide(times, self.period).astype(np.int64)
        phase = times - k * self.period
        out = np.zeros_like(times, dtype=np.float64)
        active = k < self.count
        ph = phase[active]
        val = np.zeros_like(ph)
        if self.rise > 0:
            seg = ph < self.rise
            val[seg] = self.amplitude * ph[seg] / self.rise
        plateau = (ph >= self.rise) & (ph < self.rise + self.width)
        val[plateau] = self.amplitude
        if self.fall > 0:
            seg = (ph >= self.rise + self.width) & (ph < self.rise + self.width + self.fall)
            val[seg] = self.amplitude * (1.0 - (ph[seg] - self.rise - self.width) / self.fall)
        out[active] = val
        return out


@dataclass
class RcNetwork:
    """Edge-labelled circuit over a colony graph component.

    ``sources`` are driven voltage nodes (two for gate mining, four for the
    function-mining driver); every non-terminal node is a probe.
    """

    ground: int
    sources: tuple[int, ...]
    elements: list[Element]
    mode: str
    nodes: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.nodes:
            ids = {self.ground, *self.sources}
            for el in self.elements:
                ids.add(el.node_a)
                ids.add(el.node_b)
            self.nodes = sorted(ids)
        if self.ground in self.sources:
            raise BuildError("sources must be distinct from ground")
        if len(set(self.sources)) != len(self.sources):
            raise BuildError("sources must be distinct")
        if not self.probes:
            raise BuildError("network has no probe nodes")

    @property
    def probes(self) -> list[int]:
        terminals = {self.ground, *self.sources}
        return [n for n in self.nodes if n not in terminals]


def build_rc(
    graph: ColonyGraph,
    mode: str,
    seed: int,
    r_scale: float = 1e3,     # ohms per micrometre
    c_scale: float = 1e-13,   # farads per micrometre (0.1 pF/um)
    p_r: float = 0.5,
    n_sources: int = 2,
    max_retries: int = 50,
) -> RcNetwork:
    """Randomize a circuit over ``graph`` deterministically under ``seed``.

    Ground and sources are drawn uniformly at random among the graph nodes;
    draws whose terminals are not in one connected component with room for at
    least one probe are rejected and redrawn, bounded by ``max_retries``.
    """
    if mode not in ("serial", "parallel"):
        raise ValueError(f"mode must be 'serial' or 'parallel', got {mode!r}")
    rng = np.random.default_rng(seed)
    ids = sorted(graph.nodes)
    need = n_sources + 1
    if len(ids) < need + 1:
        raise BuildError(f"graph has {len(ids)} nodes; need at least {need + 1} for terminals plus a probe")
    comps = graph.components()
    comp_of = {n: i for i, comp in enumerate(comps) for n in comp}

    terminals = None
    for _ in range(max_retries):
        draw = rng.choice(len(ids), size=need, replace=False)
        cand = [ids[i] for i in draw]
        comp = comps[comp_of[cand[0]]]
        if all(n in comp for n in cand) and len(comp) >= need + 1:
            terminals = cand
            break
    if terminals is None:
        raise BuildError(f"no connected terminal draw with a spare probe found in {max_retries} retries")
    ground, *sources = terminals
    comp = comps[comp_of[ground]]

    elements: list[Element] = []
    for a, b, length in graph.edges:
        if a not in comp:
            continue
        r_val = r_scale * length
        c_val = c_scale * length
        if mode == "parallel":
            elements.append(Element("R", a, b, r_val))
            elements.append(Element("C", a, b, c_val))
        else:
            if rng.random() < p_r:
                elements.append(Element("R", a, b, r_val))
            else:
                elements.append(Element("C", a, b, c_val))
    return RcNetwork(
        ground=ground,
        sources=tuple(sources),
        elements=elements,
        mode=mode,
        nodes=sorted(comp),
    )


# ---------------------------------------------------------------------------
# Modified nodal analysis


class MnaSystem:
    """Factorized MNA operator for one network: constant matrix, per-step RHS.

    Unknowns are the non-ground node voltages followed by one branch current
    per voltage source. Capacitors enter as backward-Euler companions:
    conductance C/dt into the matrix and a history current (C/dt) * v_ab(t)
    on the right-hand side.
    """

    def __init__(self, net: RcNetwork, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.net = net
        self.dt = dt
        self.node_index = {n: i for i, n in enumerate(n for n in net.nodes if n != net.ground)}
        n = len(self.node_index)
        ns = len(net.sources)
        self.n = n

        self._check_grounded()

        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []

        def stamp_conductance(a: int, b: int, g: float):
            ia = self.node_index.get(a, -1)
            ib = self.node_index.get(b, -1)
            if ia >= 0:
                rows.append(ia); cols.append(ia); vals.append(g)
            if ib >= 0:
                rows.append(ib); cols.append(ib); vals.append(g)
            if ia >= 0 and ib >= 0:
                rows.append(ia); cols.append(ib); vals.append(-g)
                rows.append(ib); cols.append(ia); vals.append(-g)

        cap_rows: list[int] = []
        cap_cols: list[int] = []
        cap_vals: list[float] = []

        for el in net.elements:
            if el.kind == "R":
                stamp_conductance(el.node_a, el.node_b, 1.0 / el.value)
            else:
                geq = el.value / dt
                stamp_conductance(el.node_a, el.node_b, geq)
                ia = self.node_index.get(el.node_a, -1)
                ib = self.node_index.get(el.node_b, -1)
                if ia >= 0:
                    cap_rows.append(ia); cap_cols.append(ia); cap_vals.append(geq)
                if ib >= 0:
                    cap_rows.append(ib); cap_cols.append(ib); cap_vals.append(geq)
                if ia >= 0 and ib >= 0:
                    cap_rows.append(ia); cap_cols.append(ib); cap_vals.append(-geq)
                    cap_rows.append(ib); cap_cols.append(ia); cap_vals.append(-geq)

        for node in self._dc_floating_nodes():
            stamp_conductance(node, net.ground, BLEED_CONDUCTANCE)

        # voltage source rows/columns
        for j, s in enumerate(net.sources):
            si = self.node_index[s]
            rows.append(si); cols.append(n + j); vals.append(1.0)
            rows.append(n + j); cols.append(si); vals.append(1.0)

        size = n + ns
        a_mat = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsc()
        # history operator: rhs[:n] = Ccomp @ v_prev
        self.c_comp = sp.coo_matrix((cap_vals, (cap_rows, cap_cols)), shape=(n, n)).tocsr()
        try:
            self.lu = spla.splu(a_mat)
        except RuntimeError as exc:
            raise TopologyError(self._suspect_nodes()) from exc

    def _adjacency(self, kinds: tuple[str, ...]) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {node: set() for node in self.net.nodes}
        for el in self.net.elements:
            if el.kind in kinds:
                adj[el.node_a].add(el.node_b)
                adj[el.node_b].add(el.node_a)
        return adj

    def _reachable(self, adj: dict[int, set[int]], seeds: list[int]) -> set[int]:
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def _check_grounded(self) -> None:
        adj = self._adjacency(("R", "C"))
        anchored = self._reachable(adj, [self.net.ground, *self.net.sources])
        floating = sorted(set(self.net.nodes) - anchored)
        if floating:
            raise TopologyError(floating)

    def _dc_floating_nodes(self) -> list[int]:
        """Nodes with no resistive path to ground or a driven source."""
        adj = self._adjacency(("R",))
        anchored = self._reachable(adj, [self.net.ground, *self.net.sources])
        return sorted(set(self.net.nodes) - anchored)

    def _suspect_nodes(self) -> list[int]:
        adj = self._adjacency(("R", "C"))
        anchored = self._reachable(adj, [self.net.ground, *self.net.sources])
        return sorted(set(self.net.nodes) - anchored)

    def solve(self, source_values: np.ndarray) -> np.ndarray:
        """March the transient; ``source_values`` is (n_sources, n_times).

        Column k holds the source voltages at time k*dt; column 0 is the
        initial instant where the network rests at zero. Returns node
        voltages (n_nodes_without_ground, n_times).
        """
        ns = len(self.net.sources)
        if source_values.shape[0] != ns:
            raise ValueError("source_values rows must match source count")
        n_times = source_values.shape[1]
        volts = np.zeros((self.n, n_times))
        rhs = np.zeros(self.n + ns)
        v = volts[:, 0]
        for k in range(1, n_times):
            rhs[: self.n] = self.c_comp @ v
            rhs[self.n:] = source_values[:, k]
            x = self.lu.solve(rhs)
            v = x[: self.n]
            volts[:, k] = v
        return volts


@dataclass(frozen=True)
class TransientResult:
    times: np.ndarray
    voltages: dict[int, np.ndarray]  # probe node id -> V(t) relative to ground

    def peaks(self) -> dict[int, float]:
        return {node: float(np.max(np.abs(v))) for node, v in self.voltages.items()}


def transient(
    net: RcNetwork,
    x_pulse: PulseSpec | None,
    y_pulse: PulseSpec | None,
    dt: float,
    total_time: float,
    extra_pulses: tuple[PulseSpec | None, ...] = (),
) -> TransientResult:
    """Solve the network's response to pulses on its sources.

    ``None`` means the source is held at 0 V (a driven line, not an open
    circuit). Probe voltages are returned for every non-terminal node.
    """
    if dt <= 0 or total_time < dt:
        raise ValueError("need dt > 0 and total_time >= dt")
    provided: list[PulseSpec | None] = [x_pulse, y_pulse, *extra_pulses]
    n = len(net.sources)
    if len(provided) < n:
        raise ValueError(f"{len(provided)} pulses for {n} sources")
    pulses = provided[:n]
    if any(p is not None for p in provided[n:]):
        raise ValueError(f"pulse given for a source beyond the network's {n}")
    nsteps = int(round(total_time / dt))
    times = np.arange(nsteps + 1) * dt
    source_values = np.zeros((len(pulses), nsteps + 1))
    for j, pulse in enumerate(pulses):
        if pulse is not None:
            source_values[j] = pulse.values(times)
    sys = MnaSystem(net, dt)
    volts = sys.solve(source_values)
    out = {}
    for node in net.probes:
        out[node] = volts[sys.node_index[node]]
    return TransientResult(times=times, voltages=out)


# ---------------------------------------------------------------------------
# Gate mining over a network ensemble


@dataclass
class SweepResult:
    thetas: np.ndarray
    counts: dict[str, np.ndarray]  # gate class -> per-theta counts

    def __post_init__(self):
        if np.any(np.diff(self.thetas) <= 0):
            raise ValueError("theta grid must be strictly increasing")

    def merge(self, other: "SweepResult") -> "SweepResult":
        if not np.array_equal(self.thetas, other.thetas):
            raise ValueError("theta grids differ")
        return SweepResult(
            thetas=self.thetas,
            counts={g: self.counts[g] + other.counts[g] for g in GATE_CLASSES},
        )


def default_theta_grid() -> np.ndarray:
    """theta in [0.0001, 0.05] with increment 0.0001."""
    return np.arange(1, 501) * 1e-4


def classify_responses(responses: np.ndarray, thetas: np.ndarray) -> dict[str, np.ndarray]:
    """Binarize per-probe responses and bin the resulting truth tables.

    ``responses`` is (n_probes, 3) holding the (01), (10), (11) peaks; the
    (00) response of a passive network is identically zero. Constant-FALSE
    tables are discarded; the seven zero-preserving tables map onto the five
    gate classes.
    """
    b = responses[:, :, None] > thetas[None, None, :]
    code = b[:, 0].astype(np.int8) + 2 * b[:, 1].astype(np.int8) + 4 * b[:, 2].astype(np.int8)
    counts = {g: np.zeros(len(thetas), dtype=np.int64) for g in GATE_CLASSES}
    counts["andnot"] = (code == 1).sum(axis=0) + (code == 2).sum(axis=0)
    counts["xor"] = (code == 3).sum(axis=0)
    counts["and"] = (code == 4).sum(axis=0)
    counts["select"] = (code == 5).sum(axis=0) + (code == 6).sum(axis=0)
    counts["or"] = (code == 7).sum(axis=0)
    return counts


def _mine_member(args) -> dict[str, np.ndarray]:
    graph, mode, member_seed, thetas, pulse, dt, total_time, r_scale, c_scale, p_r = args
    net = build_rc(graph, mode, member_seed, r_scale=r_scale, c_scale=c_scale, p_r=p_r)
    nsteps = int(round(total_time / dt))
    times = np.arange(nsteps + 1) * dt
    wave = pulse.values(times)
    sys = MnaSystem(net, dt)
    probe_idx = np.array([sys.node_index[n] for n in net.probes], dtype=np.int64)
    responses = np.zeros((len(probe_idx), 3))
    for cond, (x_on, y_on) in enumerate(((False, True), (True, False), (True, True))):
        source_values = np.zeros((2, nsteps + 1))
        if x_on:
            source_values[0] = wave
        if y_on:
            source_values[1] = wave
        volts = sys.solve(source_values)
        responses[:, cond] = np.max(np.abs(volts[probe_idx]), axis=1)
    return classify_responses(responses, thetas)


def mine_gates(
    graph: ColonyGraph,
    mode: str,
    ensemble: int,
    thetas: np.ndarray | None = None,
    pulse: PulseSpec | None = None,
    seed: int = 0,
    dt: float = 1e-5,
    total_time: float = 1e-2,
    r_scale: float = 1e3,
    c_scale: float = 1e-13,
    p_r: float = 0.5,
    threads: int = 1,
) -> SweepResult:
    """Mine the gate census over an ensemble of randomized networks.

    Member i draws its network under a child seed of (seed, i), so results
    are independent of execution order and thread count.
    """
    if ensemble < 1:
        raise ValueError("ensemble must be at least 1")
    thetas = default_theta_grid() if thetas is None else np.asarray(thetas, dtype=np.float64)
    pulse = PulseSpec() if pulse is None else pulse
    jobs = [
        (graph, mode, child_seed(seed, i), thetas, pulse, dt, total_time, r_scale, c_scale, p_r)
        for i in range(ensemble)
    ]
    totals = {g: np.zeros(len(thetas), dtype=np.int64) for g in GATE_CLASSES}
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_mine_member, jobs, chunksize=max(1, len(jobs) // (threads * 4))):
                for g in GATE_CLASSES:
                    totals[g] += part[g]
    else:
        for job in jobs:
            part = _mine_member(job)
            for g in GATE_CLASSES:
                totals[g] += part[g]
    return SweepResult(thetas=thetas, counts=totals)


def sweep_to_csv(res: SweepResult) -> str:
    lines = ["theta,and,or,andnot,select,xor"]
    for i, th in enumerate(res.thetas.tolist()):
        row = ",".join(str(int(res.counts[g][i])) for g in GATE_CLASSES)
        lines.append(f"{th!r},{row}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Curve fitting


def fit_power_law(thetas: np.ndarray, counts: np.ndarray) -> tuple[float, float, float]:
    """Least-squares fit of log(n) = log(A) + k log(theta) over n > 0 points.

    Returns (A, k, rms_log_residual).
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    mask = counts > 0
    if int(mask.sum()) < 3:
        raise InsufficientDataError(f"need at least 3 positive points, got {int(mask.sum())}")
    x = np.log(thetas[mask])
    y = np.log(counts[mask])
    k, log_a = np.polyfit(x, y, 1)
    resid = y - (log_a + k * x)
    rms = float(np.sqrt(np.mean(resid**2)))
    return float(np.exp(log_a)), float(k), rms


def fit_poly(thetas: np.ndarray, counts: np.ndarray, degree: int) -> tuple[np.ndarray, float]:
    """Ordinary least-squares polynomial fit; coefficients low order first.

    Returns (coefficients, rms_residual).
    """
    if degree > 2 or degree < 0:
        raise ValueError("degree must be 0, 1 or 2")
    thetas = np.asarray(thetas, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if len(thetas) < max(3, degree + 1):
        raise InsufficientDataError(f"need at least {max(3, degree + 1)} points, got {len(thetas)}")
    coeffs = np.polynomial.polynomial.polyfit(thetas, counts, degree)
    resid = counts - np.polynomial.polynomial.polyval(thetas, coeffs)
    rms = float(np.sqrt(np.mean(resid**2)))
    return coeffs, rms


# ---------------------------------------------------------------------------
# Netlist export


def export_netlist(
    net: RcNetwork,
    pulses: list[PulseSpec | None],
    dt: float,
    total_time: float,
    title: str = "rc network",
) -> str:
    """SPICE-compatible netlist with bit-exact element values."""
    if len(pulses) != len(net.sources):
        raise ValueError(f"{len(pulses)} pulses for {len(net.sources)} sources")

    def node_name(n: int) -> str:
        return "0" if n == net.ground else f"N{n}"

    lines = [f"* {title}"]
    for j, (src, pulse) in enumerate(zip(net.sources, pulses), start=1):
        if pulse is None:
            lines.append(f"V{j} {node_name(src)} 0 0")
        else:
            lines.append(
                f"V{j} {node_name(src)} 0 PULSE(0 {pulse.amplitude!r} 0 "
                f"{pulse.rise!r} {pulse.fall!r} {pulse.width!r} {pulse.period!r})"
            )
    rn = cn = 0
    for el in net.elements:
        if el.kind == "R":
            rn += 1
            lines.append(f"R{rn} {node_name(el.node_a)} {node_name(el.node_b)} {el.value!r}")
        else:
            cn += 1
            lines.append(f"C{cn} {node_name(el.node_a)} {node_name(el.node_b)} {el.value!r}")
    lines.append(f".tran {dt!r} {total_time!r}")
    lines.append(".end")
    return "\n".join(lines) + "\n"
