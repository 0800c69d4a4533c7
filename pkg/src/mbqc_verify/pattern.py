"""Measurement patterns and the two benchmark pattern builders.

Angles are stored as integers ``j`` meaning ``j * pi/4`` so that all one-time
pad arithmetic is exact modulo 8.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .graph import (
    Colouring,
    Flow,
    GraphError,
    OpenGraph,
    Vertex,
    dump_json,
    load_json,
    validate_colouring,
    validate_flow,
)

QUARTER_PI = math.pi / 4


def angle_index(radians: float) -> int:
    """Round-trip a multiple of pi/4 in radians to its index in 0..7."""
    j = radians / QUARTER_PI
    jr = round(j)
    if abs(j - jr) > 1e-9:
        raise ValueError(f"angle {radians} is not a multiple of pi/4")
    return jr % 8


def angle_radians(j: int) -> float:
    return (j % 8) * QUARTER_PI


@dataclass(frozen=True)
class MeasurementPattern:
    """Open graph, flow, colouring and target angles (indices of pi/4).

    Output vertices may carry an angle too; it is the final read-out angle and
    defaults to 0.
    """

    graph: OpenGraph
    flow: Flow
    angles: Mapping[Vertex, int]
    colouring: Colouring
    name: str = "pattern"

    def __post_init__(self):
        angles = {}
        for v in self.graph.vertices:
            if v in self.angles:
                angles[v] = int(self.angles[v]) % 8
            elif v in self.graph.outputs:
                angles[v] = 0
            else:
                raise GraphError(f"measured vertex {v} has no angle")
        object.__setattr__(self, "angles", angles)
        res = validate_flow(self.graph, self.flow)
        if not res:
            raise GraphError("invalid flow: " + "; ".join(map(str, res.violations)))
        res = validate_colouring(self.graph, self.colouring)
        if not res:
            raise GraphError("invalid colouring: " + "; ".join(map(str, res.violations)))

    @property
    def outputs(self) -> tuple[Vertex, ...]:
        return tuple(sorted(self.graph.outputs))

    @property
    def inputs(self) -> tuple[Vertex, ...]:
        return tuple(sorted(self.graph.inputs))

    def to_json(self) -> str:
        return dump_json(
            self.graph,
            self.flow,
            self.colouring,
            angles={str(v): angle_radians(j) for v, j in sorted(self.angles.items())},
            name=self.name,
        )

    @classmethod
    def from_json(cls, text: str) -> "MeasurementPattern":
        graph, flow, colouring, doc = load_json(text)
        if flow is None or colouring is None or "angles" not in doc:
            raise GraphError("pattern JSON needs flow, colour_classes and angles")
        angles = {int(k): angle_index(float(v)) for k, v in doc["angles"].items()}
        return cls(graph, flow, angles, colouring, doc.get("name", "pattern"))


# -- builders --------------------------------------------------------------

GROVER_EDGES = ((1, 2), (2, 3), (1, 4), (3, 6), (4, 5), (6, 7), (5, 8), (7, 8))
# oracle angles (phi_3, phi_4) in units of pi/4, indexed by the marked item
_GROVER_ORACLE = {0: (4, 4), 1: (4, 0), 2: (0, 4), 3: (0, 0)}


def grover_pattern(tau: int) -> MeasurementPattern:
    """Two-qubit Grover search on the 4x2 cluster; ``tau`` is the marked item.

    Rows are 1-4-5-8 and 2-3-6-7 with rungs 1-2 and 7-8. The decoded outputs
    ``(y_7, y_8)`` are the binary digits of ``tau``.
    """
    if tau not in _GROVER_ORACLE:
        raise ValueError(f"tau must be in 0..3, got {tau!r}")
    phi3, phi4 = _GROVER_ORACLE[tau]
    graph = OpenGraph(range(1, 9), GROVER_EDGES, inputs=(1, 2), outputs=(7, 8), order=(1, 2, 3, 4, 5, 6))
    flow = Flow({1: 4, 4: 5, 5: 8, 2: 3, 3: 6, 6: 7})
    angles = {1: 0, 2: 0, 3: phi3, 4: phi4, 5: 0, 6: 0, 7: 4, 8: 4}
    colouring = Colouring([(1, 3, 5, 7), (2, 4, 6, 8)])
    return MeasurementPattern(graph, flow, angles, colouring, name=f"grover-tau{tau}")


def grover_expected(tau: int) -> tuple[int, int]:
    return (tau >> 1) & 1, tau & 1


def cnot_grid_vertex_count(n: int, m: int) -> int:
    return n * (2 * m + 3)


def cnot_grid_pattern(n: int, m: int, b: Sequence[int]) -> MeasurementPattern:
    """MBQC pattern for ``m`` staggered layers of CNOT(i -> i+1) on ``n`` wires.

    Each wire is a chain ``input, v1, (a, b) * m, output``: the input is
    measured at ``b_i * pi`` which leaves ``|b_i>`` on ``v1``; every later
    vertex is measured at 0 and so applies a Hadamard. In layer ``l`` the
    ``b`` vertex of wire ``i`` is joined to the ``a`` vertex of wire ``i+1``,
    which realises CNOT with wire ``i`` as control. The measurement order is
    by staggered column and then wire, so that wire ``i+1`` sees the updated
    value of wire ``i`` within the same layer.
    """
    if n < 2 or m < 1:
        raise ValueError(f"need n >= 2 wires and m >= 1 layers, got n={n}, m={m}")
    b = [int(x) for x in b]
    if len(b) != n or any(x not in (0, 1) for x in b):
        raise ValueError(f"b must be a bit vector of length {n}")

    length = 2 * m + 3
    chains = [[i * length + k for k in range(length)] for i in range(n)]
    column = {}
    for i, ch in enumerate(chains):
        cols = [0, 1] + [c for layer in range(m) for c in (2 + 2 * layer + i, 3 + 2 * layer + i)] + [2 * m + 2 + i]
        for v, c in zip(ch, cols):
            column[v] = (c, i)
    edges = [(ch[k], ch[k + 1]) for ch in chains for k in range(length - 1)]
    for layer in range(m):
        for i in range(n - 1):
            edges.append((chains[i][3 + 2 * layer], chains[i + 1][2 + 2 * layer]))

    outputs = [ch[-1] for ch in chains]
    measured = [v for ch in chains for v in ch[:-1]]
    order = sorted(measured, key=column.__getitem__)
    graph = OpenGraph(column, edges, inputs=[ch[0] for ch in chains], outputs=outputs, order=order)
    flow = Flow({ch[k]: ch[k + 1] for ch in chains for k in range(length - 1)})
    angles = {v: 0 for v in column}
    for i, ch in enumerate(chains):
        angles[ch[0]] = 4 * b[i]
    even = [ch[k] for ch in chains for k in range(0, length, 2)]
    odd = [ch[k] for ch in chains for k in range(1, length, 2)]
    return MeasurementPattern(graph, flow, angles, Colouring([even, odd]), name=f"cnot-grid-n{n}-m{m}")


def cnot_grid_expected(n: int, m: int, b: Sequence[int]) -> tuple[int, ...]:
    """Classical oracle: propagate ``b`` through ``m`` cascades of CNOT(i -> i+1)."""
    bits = [int(x) for x in b]
    for _ in range(m):
        for i in range(n - 1):
            bits[i + 1] ^= bits[i]
    return tuple(bits)


def line_pattern(length: int, angles: Sequence[int] | None = None) -> MeasurementPattern:
    """Single chain ``0 - 1 - ... - (length-1)`` with input 0 and output ``length-1``."""
    if length < 2:
        raise ValueError("a line pattern needs at least two vertices")
    verts = list(range(length))
    graph = OpenGraph(verts, [(k, k + 1) for k in range(length - 1)], inputs=[0], outputs=[length - 1])
    flow = Flow({k: k + 1 for k in range(length - 1)})
    if angles is None:
        angles = [0] * length
    return MeasurementPattern(
        graph,
        flow,
        dict(zip(verts, angles)),
        Colouring([verts[0::2], verts[1::2]]),
        name=f"line-{length}",
    )


# -- statistics ------------------------------------------------------------


def flow_depth(p: MeasurementPattern) -> int:
    """Length (in vertices) of the longest chain of the flow-induced order."""
    g, f = p.graph, p.flow.f
    succ: dict[Vertex, set[Vertex]] = {v: set() for v in g.vertices}
    for v, w in f.items():
        succ[v].add(w)
        for u in g.neighbours(w):
            if u != v:
                succ[v].add(u)
    longest: dict[Vertex, int] = {}
    for v in reversed(g.processing_order):
        longest[v] = 1 + max((longest[u] for u in succ[v]), default=0)
    return max(longest.values(), default=0)


def pattern_stats(p: MeasurementPattern) -> dict:
    return {
        "vertices": len(p.graph.vertices),
        "edges": len(p.graph.edges),
        "outputs": len(p.graph.outputs),
        "depth": flow_depth(p),
    }


def save_pattern(p: MeasurementPattern, path) -> None:
    with open(path, "w") as fh:
        fh.write(p.to_json())


def load_pattern(path) -> MeasurementPattern:
    with open(path) as fh:
        return MeasurementPattern.from_json(fh.read())


def pattern_summary(p: MeasurementPattern) -> str:
    return json.dumps({"name": p.name, **pattern_stats(p)}, sort_keys=True)
