"""Physical substrates: 2-D conductive grid templates and 3-D colony graphs.

Templates come from grayscale images (PGM mandatory, PNG optional) or from a
deterministic synthetic colony generator; graphs come from a line-oriented
text format or by skeletonizing a template.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

NEIGHBOR_OFFSETS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


class TemplateFormatError(ValueError):
    """Raster bytes could not be decoded."""


class DegenerateTemplateError(ValueError):
    """Decoded mask has no conductive nodes."""


class GraphParseError(ValueError):
    """Graph file is malformed; message carries the line number."""


class GraphInvariantError(ValueError):
    """Parsed graph violates a structural invariant."""


@dataclass(frozen=True)
class GridTemplate:
    """Binary conductive mask on a rectangular lattice.

    ``mask[row, col]`` is True where the node conducts. The mask is the full
    record of the simulation domain, so runs are reproducible from it alone.
    """

    width: int
    height: int
    mask: np.ndarray

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError(f"grid must be at least 3x3, got {self.width}x{self.height}")
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.height, self.width):
            raise ValueError(f"mask shape {m.shape} does not match {self.height}x{self.width}")
        if not m.any():
            raise DegenerateTemplateError("template has no conductive nodes")
        object.__setattr__(self, "mask", m)

    @property
    def conductive_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class Electrode:
    """Disc-shaped site on the grid: center (row, col) and radius in grid units."""

    center: tuple[int, int]
    radius: float = 2.0

    def validate(self, template: GridTemplate) -> None:
        r, c = self.center
        if not (0 <= r < template.height and 0 <= c < template.width):
            raise ValueError(f"electrode center {self.center} outside grid")
        if self.radius <= 0:
            raise ValueError("electrode radius must be positive")


@dataclass
class ColonyGraph:
    """Spatial graph: nodes (id -> x, y, z in micrometres), edges with lengths."""

    nodes: dict[int, tuple[float, float, float]]
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    def validate(self) -> None:
        for a, b, length in self.edges:
            if a == b:
                raise GraphInvariantError(f"self-loop at node {a}")
            if a not in self.nodes or b not in self.nodes:
                raise GraphInvariantError(f"edge ({a},{b}) references unknown node")
            if not (length > 0):
                raise GraphInvariantError(f"edge ({a},{b}) has non-positive length {length}")

    def euclidean(self, a: int, b: int) -> float:
        xa, ya, za = self.nodes[a]
        xb, yb, zb = self.nodes[b]
        return math.dist((xa, ya, za), (xb, yb, zb))

    def components(self) -> list[set[int]]:
        """Connected components over the edge set (isolated nodes included)."""
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for a, b, _ in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        seen: set[int] = set()
        comps = []
        for start in self.nodes:
            if start in seen:
                continue
            stack = [start]
            comp = set()
            while stack:
                n = stack.pop()
                if n in comp:
                    continue
                comp.add(n)
                stack.extend(m for m in adj[n] if m not in comp)
            seen |= comp
            comps.append(comp)
        return comps


# ---------------------------------------------------------------------------
# Raster decoding and template IO


def _decode_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM into a float array of luminances in [0, 1]."""
    if not data.startswith(b"P5"):
        raise TemplateFormatError("not a P5 PGM")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise TemplateFormatError("truncated PGM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise TemplateFormatError("unterminated PGM comment")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace() and data[end:end + 1] != b"#":
                end += 1
            try:
                tokens.append(int(data[pos:end]))
            except ValueError as exc:
                raise TemplateFormatError(f"bad PGM header token {data[pos:end]!r}") from exc
            pos = end
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise TemplateFormatError("missing whitespace after PGM maxval")
    pos += 1
    width, height, maxval = tokens
    if width <= 0 or height <= 0 or not (0 < maxval < 65536):
        raise TemplateFormatError(f"bad PGM dimensions {width}x{height} maxval {maxval}")
    nbytes = 2 if maxval > 255 else 1
    need = width * height * nbytes
    raw = data[pos:pos + need]
    if len(raw) < need:
        raise TemplateFormatError(f"PGM pixel data truncated: {len(raw)} < {need} bytes")
    dtype = ">u2" if nbytes == 2 else np.uint8
    pix = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    return pix.astype(np.float64) / maxval


def _decode_png(data: bytes) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - Pillow is an optional extra
        raise TemplateFormatError("PNG support requires Pillow") from exc
    try:
        img = Image.open(io.BytesIO(data)).convert("L")
    except Exception as exc:
        raise TemplateFormatError(f"undecodable PNG: {exc}") from exc
    return np.asarray(img, dtype=np.float64) / 255.0


def load_template(data: bytes, threshold: float = 0.5) -> GridTemplate:
    """Binarize a grayscale raster into a template.

    A node is conductive iff its pixel luminance is >= threshold.
    """
    if data[:2] == b"P5":
        lum = _decode_pgm(data)
    elif data[:8] == b"\x89PNG\r\n\x1a\n":
        lum = _decode_png(data)
    else:
        raise TemplateFormatError("unrecognized raster format (need P5 PGM or PNG)")
    mask = lum >= threshold
    if not mask.any():
        raise DegenerateTemplateError("thresholding produced an all-empty mask")
    h, w = mask.shape
    return GridTemplate(width=w, height=h, mask=mask)


def save_template(template: GridTemplate) -> bytes:
    """Serialize a template as binary PGM: 255 = conductive, 0 = not."""
    header = f"P5\n{template.width} {template.height}\n255\n".encode("ascii")
    body = np.where(template.mask, 255, 0).astype(np.uint8).tobytes()
    return header + body


def write_pgm(path, template: GridTemplate) -> None:
    from .util import atomic_write_bytes

    atomic_write_bytes(path, save_template(template))


# ---------------------------------------------------------------------------
# Synthetic colony generation


def synthesize_colony(
    seed: int,
    width: int,
    height: int,
    branch_rate: float = 0.05,
    steps: int = 5000,
    straight_bias: float = 0.8,
    outward_bias: float = 0.75,
    thickness: int = 1,
    initial_tips: int = 1,
) -> GridTemplate:
    """Grow a branching, tree-like conductive mask from a central inoculum.

    Each of ``steps`` rounds advances every live tip by one cell: mostly
    straight, otherwise a perpendicular turn preferring the direction that
    points away from the inoculum; a turn is taken only when its target cell
    is free. A tip dies when it runs head-on into existing growth or the
    boundary, so collisions prune the tree instead of tangling it. With
    probability ``branch_rate`` per advance, a tip also spawns a sub-apical
    branch perpendicular to its heading. Every new cell is 4-adjacent to an
    existing one, so the mask is connected by construction; with a single
    initial tip and no branching the mask is one path of at most
    ``steps + 1`` cells.
    """
    if width < 16 or height < 16:
        raise ValueError("colony grid must be at least 16x16")
    if not (0.0 <= branch_rate <= 1.0):
        raise ValueError("branch_rate must be in [0, 1]")
    if initial_tips < 1:
        raise ValueError("need at least one initial tip")
    rng = np.random.default_rng(seed)
    mask = np.zeros((height, width), dtype=bool)
    start = (height // 2, width // 2)

    def paint(cell):
        r, c = cell
        # thickness > 1 widens the stroke so thin hyphae can carry waves
        for dr in range(thickness):
            for dc in range(thickness):
                rr, cc = r + dr, c + dc
                if 0 <= rr < height and 0 <= cc < width:
                    mask[rr, cc] = True

    paint(start)
    dirs = NEIGHBOR_OFFSETS_4
    first = int(rng.integers(4))
    tips: list[tuple[tuple[int, int], int]] = [
        (start, (first + k) % 4) for k in range(initial_tips)
    ]

    def outwardness(cell, d):
        nr, nc = cell[0] + dirs[d][0], cell[1] + dirs[d][1]
        return (nr - start[0]) ** 2 + (nc - start[1]) ** 2 - ((cell[0] - start[0]) ** 2 + (cell[1] - start[1]) ** 2)

    for _ in range(steps):
        if not tips:
            break
        survivors: list[tuple[tuple[int, int], int]] = []
        spawned: list[tuple[tuple[int, int], int]] = []
        for (r, c), heading in tips:
            back = heading ^ 1  # paired offsets: 0<->1 and 2<->3 are opposites
            perp = [d for d in range(4) if d not in (heading, back)]
            if outwardness((r, c), perp[0]) < outwardness((r, c), perp[1]):
                perp = [perp[1], perp[0]]
            if rng.random() >= outward_bias:
                perp = [perp[1], perp[0]]
            d = heading
            if rng.random() >= straight_bias:
                tr, tc = r + dirs[perp[0]][0], c + dirs[perp[0]][1]
                if 0 <= tr < height and 0 <= tc < width and not mask[tr, tc]:
                    d = perp[0]  # turn only when the turn target is free
            nr, nc = r + dirs[d][0], c + dirs[d][1]
            if 0 <= nr < height and 0 <= nc < width and not mask[nr, nc]:
                paint((nr, nc))
                survivors.append(((nr, nc), d))
                if rng.random() < branch_rate:
                    spawned.append(((r, c), perp[0] if d != perp[0] else perp[1]))
            # else: head-on contact with growth or the boundary kills the tip
        tips = survivors + spawned
    return GridTemplate(width=width, height=height, mask=mask)


# ---------------------------------------------------------------------------
# Template -> graph conversion


def graph_from_template(
    template: GridTemplate,
    z_jitter: float = 0.0,
    seed: int = 0,
    contract_chains: bool = True,
) -> ColonyGraph:
    """Convert a template into a spatial graph over its conductive nodes.

    Node coordinates are (col, row, z) with one grid unit = one micrometre;
    z is uniform in [0, z_jitter] under ``seed``. With ``contract_chains``
    (default) degree-2 runs collapse into single edges whose length is the
    chain's step count, which is all the circuit model needs.
    """
    rng = np.random.default_rng(seed)
    h, w = template.height, template.width
    cells = [(int(r), int(c)) for r, c in zip(*np.nonzero(template.mask))]
    index = {cell: i for i, cell in enumerate(cells)}
    zs = rng.uniform(0.0, z_jitter, size=len(cells)) if z_jitter > 0 else np.zeros(len(cells))

    def neighbors(cell):
        r, c = cell
        for dr, dc in NEIGHBOR_OFFSETS_4:
            n = (r + dr, c + dc)
            if 0 <= n[0] < h and 0 <= n[1] < w and template.mask[n]:
                yield n

    degree = {cell: sum(1 for _ in neighbors(cell)) for cell in cells}

    def make_node(cell):
        r, c = cell
        return (float(c), float(r), float(zs[index[cell]]))

    if not contract_chains:
        nodes = {index[cell]: make_node(cell) for cell in cells}
        edges = []
        for cell in cells:
            for n in neighbors(cell):
                if index[n] > index[cell]:
                    edges.append((index[cell], index[n], 1.0))
        return ColonyGraph(nodes=nodes, edges=edges)

    keep = {cell for cell in cells if degree[cell] != 2}
    # a component that is a pure cycle has no degree!=2 anchor; keep two of
    # its cells so contraction yields two parallel edges instead of a loop
    visited_cc: set = set()
    for cell in cells:
        if cell in visited_cc:
            continue
        comp = []
        stack = [cell]
        seen = {cell}
        has_anchor = False
        while stack:
            cur = stack.pop()
            comp.append(cur)
            if degree[cur] != 2:
                has_anchor = True
            for n in neighbors(cur):
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        visited_cc |= seen
        if not has_anchor and len(comp) >= 2:
            comp.sort()
            keep.add(comp[0])
            keep.add(comp[len(comp) // 2])

    nodes = {index[cell]: make_node(cell) for cell in sorted(keep, key=lambda cl: index[cl])}
    edges: list[tuple[int, int, float]] = []
    seen_walks: set[tuple] = set()
    for cell in sorted(keep):
        for first in neighbors(cell):
            if (cell, first) in seen_walks:
                continue
            # walk through degree-2 cells until the next kept cell
            path = [cell, first]
            while path[-1] not in keep:
                nxt = [n for n in neighbors(path[-1]) if n != path[-2]]
                path.append(nxt[0])  # degree-2 interior: exactly one way on
            end = path[-1]
            seen_walks.add((cell, first))
            seen_walks.add((end, path[-2]))
            a, b = index[cell], index[end]
            if a != b:
                edges.append((min(a, b), max(a, b), float(len(path) - 1)))
            else:
                # chain loops back to its only anchor; promote the path's
                # midpoint so the loop becomes two parallel edges
                mid = len(path) // 2
                m = index[path[mid]]
                nodes[m] = make_node(path[mid])
                edges.append((min(a, m), max(a, m), float(mid)))
                edges.append((min(m, b), max(m, b), float(len(path) - 1 - mid)))
    edges.sort()
    return ColonyGraph(nodes=nodes, edges=edges)


# ---------------------------------------------------------------------------
# Graph file format: `N <id> <x> <y> <z>` and `E <id1> <id2> [length]`


def load_colony_graph(text: str) -> ColonyGraph:
    """Parse the line-oriented graph format; '#' starts a comment."""
    nodes: dict[int, tuple[float, float, float]] = {}
    edges: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "N":
                if len(parts) != 5:
                    raise ValueError("node line needs: N <id> <x> <y> <z>")
                nid = int(parts[1])
                if nid in nodes:
                    raise ValueError(f"duplicate node id {nid}")
                nodes[nid] = (float(parts[2]), float(parts[3]), float(parts[4]))
            elif parts[0] == "E":
                if len(parts) not in (3, 4):
                    raise ValueError("edge line needs: E <id1> <id2> [length]")
                a, b = int(parts[1]), int(parts[2])
                length = float(parts[3]) if len(parts) == 4 else math.nan
                edges.append((a, b, length))
            else:
                raise ValueError(f"unknown record type {parts[0]!r}")
        except ValueError as exc:
            raise GraphParseError(f"line {lineno}: {exc}") from exc

    graph = ColonyGraph(nodes=nodes, edges=[])
    for a, b, length in edges:
        if a not in nodes or b not in nodes:
            raise GraphInvariantError(f"edge ({a},{b}) references unknown node")
        if a == b:
            raise GraphInvariantError(f"self-loop at node {a}")
        euc = graph.euclidean(a, b)
        if math.isnan(length):
            if euc <= 0:
                raise GraphInvariantError(f"edge ({a},{b}) joins coincident nodes; give a length")
            length = euc
        else:
            if length <= 0:
                raise GraphInvariantError(f"edge ({a},{b}) has non-positive length {length}")
        graph.edges.append((a, b, float(length)))
    graph.validate()
    return graph


def save_colony_graph(graph: ColonyGraph) -> str:
    lines = ["# colony graph"]
    for nid in sorted(graph.nodes):
        x, y, z = graph.nodes[nid]
        lines.append(f"N {nid} {x!r} {y!r} {z!r}")
    for a, b, length in graph.edges:
        lines.append(f"E {a} {b} {length!r}")
    return "\n".join(lines) + "\n"
