"""Excitation dynamics on conductive grid templates.

Two-variable activator/recovery kinetics integrated with forward Euler and a
five-point Laplacian restricted to conductive nodes; non-conductive and
out-of-bounds neighbours are zero-flux (they contribute the centre value).
State lives on a packed 1-D array over conductive cells in row-major order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .substrate import NEIGHBOR_OFFSETS_4, Electrode, GridTemplate


class NumericalBlowupError(ArithmeticError):
    def __init__(self, iteration: int, node: tuple[int, int]):
        self.iteration = iteration
        self.node = node
        super().__init__(f"non-finite activator value at iteration {iteration}, node (row={node[0]}, col={node[1]})")


@dataclass(frozen=True)
class FhnParams:
    """Reaction constants, conductance and integration steps."""

    a: float = 0.13
    b: float = 0.013
    c1: float = 0.26
    c2: float = 0.095
    Du: float = 1.0
    dt: float = 0.015
    dx: float = 2.0

    def __post_init__(self):
        if self.dt <= 0 or self.dx <= 0:
            raise ValueError("dt and dx must be positive")
        if self.Du < 0:
            raise ValueError("Du must be non-negative")
        if self.dt * self.Du * 4.0 / self.dx**2 >= 1.0:
            raise ValueError(
                f"explicit-Euler stability violated: dt*Du*4/dx^2 = "
                f"{self.dt * self.Du * 4.0 / self.dx**2:.3g} >= 1"
            )


@dataclass(frozen=True)
class StimulusEntry:
    electrode: Electrode
    start: int
    duration: int
    amplitude: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("stimulus duration must be positive")


@dataclass
class StimulusPlan:
    entries: list[StimulusEntry] = field(default_factory=list)

    def validate(self, template: GridTemplate) -> None:
        for e in self.entries:
            e.electrode.validate(template)

    def end_iteration(self) -> int:
        return max((e.start + e.duration for e in self.entries), default=0)


@dataclass
class FhnState:
    """Packed per-conductive-node activator u and recovery v at iteration t."""

    u: np.ndarray
    v: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class PotentialTrace:
    electrode_id: int
    iterations: np.ndarray
    values: np.ndarray


class NodeIndex:
    """Packing of a template's conductive cells plus the neighbour table.

    ``nbr[i, k]`` holds the packed index of node i's k-th 4-neighbour, or i
    itself where that neighbour is non-conductive or out of bounds, which
    makes the missing neighbour contribute the centre value in the stencil.
    """

    def __init__(self, template: GridTemplate):
        self.template = template
        rows, cols = np.nonzero(template.mask)
        self.rows = rows.astype(np.int64)
        self.cols = cols.astype(np.int64)
        self.n = len(rows)
        grid_index = -np.ones((template.height, template.width), dtype=np.int64)
        grid_index[rows, cols] = np.arange(self.n)
        self.grid_index = grid_index
        nbr = np.empty((self.n, 4), dtype=np.int64)
        for k, (dr, dc) in enumerate(NEIGHBOR_OFFSETS_4):
            rr = rows + dr
            cc = cols + dc
            ok = (rr >= 0) & (rr < template.height) & (cc >= 0) & (cc < template.width)
            target = np.arange(self.n)
            inside = np.where(ok)[0]
            cand = grid_index[rr[inside], cc[inside]]
            hit = cand >= 0
            target[inside[hit]] = cand[hit]
            nbr[:, k] = target
        self.nbr = nbr

    def zero_state(self) -> FhnState:
        return FhnState(u=np.zeros(self.n), v=np.zeros(self.n), t=0)

    def disc_nodes(self, center: tuple[int, int], radius: float, strict: bool = False) -> np.ndarray:
        """Packed indices of conductive nodes within `radius` of a grid point."""
        r0, c0 = center
        d2 = (self.rows - r0) ** 2 + (self.cols - c0) ** 2
        if strict:
            return np.where(d2 < radius**2)[0]
        return np.where(d2 <= radius**2)[0]

    def electrode_nodes(self, electrode: Electrode) -> np.ndarray:
        """Potential-summing neighbourhood: conductive y with |x - y| < 2."""
        return self.disc_nodes(electrode.center, 2.0, strict=True)

    def unpack(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full((self.template.height, self.template.width), fill)
        out[self.rows, self.cols] = values
        return out


@njit(cache=True)
def _advance(u, v, nbr, stim, niter, dt, dx2inv, Du, a, b, c1, c2):  # pragma: no cover - jitted
    n = u.shape[0]
    bad = -1
    for _ in range(niter):
        u2 = np.empty(n)
        v2 = np.empty(n)
        for i in range(n):
            ui = u[i]
            nb = u[nbr[i, 0]] + u[nbr[i, 1]] + u[nbr[i, 2]] + u[nbr[i, 3]]
            lap = (nb - 4.0 * ui) * dx2inv
            du = c1 * ui * (ui - a) * (1.0 - ui) - c2 * ui * v[i] + stim[i] + Du * lap
            un = ui + dt * du
            if not (-1e300 < un < 1e300):
                bad = i
            u2[i] = un
            v2[i] = v[i] + dt * b * (ui - v[i])
        u = u2
        v = v2
        if bad >= 0:
            break
    return u, v, bad


def _stim_vector(index: NodeIndex, plan: StimulusPlan, iteration: int) -> np.ndarray:
    stim = np.zeros(index.n)
    for e in plan.entries:
        if e.start <= iteration < e.start + e.duration:
            stim[index.disc_nodes(e.electrode.center, e.electrode.radius)] += e.amplitude
    return stim


def step(
    state: FhnState,
    params: FhnParams,
    stim: StimulusPlan,
    template: GridTemplate,
    index: NodeIndex | None = None,
) -> FhnState:
    """One forward-Euler update of the full state."""
    if index is None:
        index = NodeIndex(template)
    if state.u.shape != (index.n,) or state.v.shape != (index.n,):
        raise ValueError("state dimensions do not match template")
    stim_vec = _stim_vector(index, stim, state.t)
    u, v, bad = _advance(
        state.u, state.v, index.nbr, stim_vec, 1,
        params.dt, 1.0 / params.dx**2, params.Du, params.a, params.b, params.c1, params.c2,
    )
    if bad >= 0:
        raise NumericalBlowupError(state.t + 1, (int(index.rows[bad]), int(index.cols[bad])))
    return FhnState(u=u, v=v, t=state.t + 1)


def run(
    template: GridTemplate,
    params: FhnParams,
    stim: StimulusPlan,
    electrodes: list[Electrode],
    iterations: int,
    sample_every: int = 10,
    initial: FhnState | None = None,
    stop_when_quiet: float | None = None,
    snapshot_every: int = 0,
    snapshot_callback=None,
) -> list[PotentialTrace]:
    """Advance the dynamics and record per-electrode potentials.

    The potential at electrode location x is sum over conductive nodes y with
    Euclidean distance |x - y| < 2 of (u_y - v_y), sampled every
    ``sample_every`` iterations (iteration 0 included). ``stop_when_quiet``
    ends the run once all stimuli are over and max |u| drops below it; no
    further upward threshold crossings are possible then, so spike mining is
    unaffected.
    """
    if iterations <= 0:
        raise ValueError("iterations must be positive")
    if sample_every <= 0:
        raise ValueError("sample_every must be positive")
    index = NodeIndex(template)
    stim.validate(template)
    for el in electrodes:
        el.validate(template)
    state = initial if initial is not None else index.zero_state()
    if state.u.shape != (index.n,):
        raise ValueError("initial state does not match template")

    el_nodes = [index.electrode_nodes(el) for el in electrodes]
    samples_it: list[int] = []
    samples_p: list[list[float]] = [[] for _ in electrodes]

    def record(it: int, u: np.ndarray, v: np.ndarray):
        samples_it.append(it)
        for j, idx in enumerate(el_nodes):
            samples_p[j].append(float(np.sum(u[idx] - v[idx])))

    # stimulus vector is piecewise constant; rebuild only at entry boundaries
    boundaries = sorted({e.start for e in stim.entries} | {e.start + e.duration for e in stim.entries})
    stim_end = stim.end_iteration()
    dx2inv = 1.0 / params.dx**2

    u, v = state.u, state.v
    it = state.t
    if it % sample_every == 0:
        record(it, u, v)
    if snapshot_every > 0 and snapshot_callback is not None and it % snapshot_every == 0:
        snapshot_callback(it, u.copy())
    end = state.t + iterations
    while it < end:
        nxt_boundary = min([b for b in boundaries if b > it], default=end)
        nxt_sample = (it // sample_every + 1) * sample_every
        nxt = min(nxt_boundary, nxt_sample, end)
        if snapshot_every > 0:
            nxt = min(nxt, (it // snapshot_every + 1) * snapshot_every)
        stim_vec = _stim_vector(index, stim, it)
        u, v, bad = _advance(
            u, v, index.nbr, stim_vec, nxt - it,
            params.dt, dx2inv, params.Du, params.a, params.b, params.c1, params.c2,
        )
        if bad >= 0:
            # re-run the chunk one step at a time to pin the exact iteration
            if nxt - it > 1:
                fine = FhnState(u=state.u.copy(), v=state.v.copy(), t=state.t)
                raise _locate_blowup(fine, params, stim, index, end)
            raise NumericalBlowupError(it + 1, (int(index.rows[bad]), int(index.cols[bad])))
        it = nxt
        if it % sample_every == 0:
            record(it, u, v)
        if snapshot_every > 0 and snapshot_callback is not None and it % snapshot_every == 0:
            snapshot_callback(it, u.copy())
        if stop_when_quiet is not None and it >= stim_end and float(np.max(np.abs(u))) < stop_when_quiet:
            break

    return [
        PotentialTrace(
            electrode_id=j,
            iterations=np.asarray(samples_it, dtype=np.int64),
            values=np.asarray(samples_p[j]),
        )
        for j in range(len(electrodes))
    ]


def _locate_blowup(state: FhnState, params: FhnParams, stim: StimulusPlan, index: NodeIndex, end: int) -> NumericalBlowupError:
    u, v, it = state.u, state.v, state.t
    while it < end:
        stim_vec = _stim_vector(index, stim, it)
        u, v, bad = _advance(
            u, v, index.nbr, stim_vec, 1,
            params.dt, 1.0 / params.dx**2, params.Du, params.a, params.b, params.c1, params.c2,
        )
        it += 1
        if bad >= 0:
            return NumericalBlowupError(it, (int(index.rows[bad]), int(index.cols[bad])))
    return NumericalBlowupError(end, (-1, -1))  # unreachable


def traces_to_csv(traces: list[PotentialTrace]) -> str:
    """Serialize traces as `iteration,electrode_id,p` rows."""
    lines = ["iteration,electrode_id,p"]
    order: list[tuple[int, int, float]] = []
    for tr in traces:
        for it, p in zip(tr.iterations.tolist(), tr.values.tolist()):
            order.append((it, tr.electrode_id, p))
    order.sort(key=lambda row: (row[0], row[1]))
    for it, eid, p in order:
        lines.append(f"{it},{eid},{p!r}")
    return "\n".join(lines) + "\n"


def snapshot_pgm(state_u: np.ndarray, index: NodeIndex) -> bytes:
    """Render activator values as an 8-bit PGM, u clipped to [0, 1]."""
    grid = index.unpack(np.clip(state_u, 0.0, 1.0))
    pix = np.round(grid * 255.0).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()
