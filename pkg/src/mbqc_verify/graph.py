"""Open graphs, flows and colourings.

An :class:`OpenGraph` is the resource of a measurement pattern: an undirected
connected graph with input and output vertex sets and an explicit total order
in which the non-output vertices are measured. Outputs are treated as measured
after every other vertex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

Vertex = int
Edge = tuple[Vertex, Vertex]


class GraphError(ValueError):
    """Raised when an open graph violates its structural invariants."""


def _norm_edge(u: Vertex, v: Vertex) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Violation:
    """One failed condition; ``vertices`` names the offending vertex pair or vertex."""

    condition: str
    vertices: tuple[Vertex, ...]

    def __str__(self) -> str:
        return f"{self.condition}: {self.vertices}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class OpenGraph:
    vertices: frozenset[Vertex]
    edges: frozenset[Edge]
    inputs: frozenset[Vertex]
    outputs: frozenset[Vertex]
    order: tuple[Vertex, ...]
    _adj: Mapping[Vertex, frozenset[Vertex]] = field(init=False, repr=False, compare=False)
    _pos: Mapping[Vertex, int] = field(init=False, repr=False, compare=False)

    def __init__(
        self,
        vertices: Iterable[Vertex],
        edges: Iterable[Sequence[Vertex]],
        inputs: Iterable[Vertex] = (),
        outputs: Iterable[Vertex] = (),
        order: Iterable[Vertex] | None = None,
    ):
        verts = frozenset(int(v) for v in vertices)
        seen: set[Edge] = set()
        for e in edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            if u not in verts or v not in verts:
                raise GraphError(f"edge ({u}, {v}) references an unknown vertex")
            ne = _norm_edge(u, v)
            if ne in seen:
                raise GraphError(f"duplicate edge {ne}")
            seen.add(ne)
        ins = frozenset(int(v) for v in inputs)
        outs = frozenset(int(v) for v in outputs)
        if not ins <= verts or not outs <= verts:
            raise GraphError("inputs and outputs must be subsets of the vertices")
        if order is None:
            order = sorted(verts - outs)
        order = tuple(int(v) for v in order)
        if len(set(order)) != len(order):
            raise GraphError("measurement order repeats a vertex")
        if set(order) != verts - outs:
            raise GraphError("measurement order must list every non-output vertex exactly once")

        adj: dict[Vertex, set[Vertex]] = {v: set() for v in verts}
        for u, v in seen:
            adj[u].add(v)
            adj[v].add(u)
        if verts:
            start = next(iter(verts))
            reached = {start}
            stack = [start]
            while stack:
                for w in adj[stack.pop()]:
                    if w not in reached:
                        reached.add(w)
                        stack.append(w)
            if reached != verts:
                raise GraphError("graph is not connected")

        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", frozenset(seen))
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "outputs", outs)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_adj", {v: frozenset(n) for v, n in adj.items()})
        pos = {v: i for i, v in enumerate(order)}
        # outputs come after every measured vertex, in sorted order
        for i, v in enumerate(sorted(outs)):
            pos[v] = len(order) + i
        object.__setattr__(self, "_pos", pos)

    def neighbours(self, v: Vertex) -> frozenset[Vertex]:
        try:
            return self._adj[v]
        except KeyError:
            raise KeyError(f"unknown vertex {v}") from None

    def position(self, v: Vertex) -> int:
        """Index of ``v`` in the full processing order (outputs last)."""
        return self._pos[v]

    def precedes(self, u: Vertex, v: Vertex) -> bool:
        return self._pos[u] < self._pos[v]

    @property
    def processing_order(self) -> tuple[Vertex, ...]:
        """Measured vertices in order followed by the outputs."""
        return self.order + tuple(sorted(self.outputs))

    def to_dict(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "edges": [list(e) for e in sorted(self.edges)],
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
            "order": list(self.order),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OpenGraph":
        return cls(d["vertices"], d["edges"], d.get("inputs", ()), d.get("outputs", ()), d.get("order"))


def neighbours(graph: OpenGraph, v: Vertex) -> frozenset[Vertex]:
    return graph.neighbours(v)


@dataclass(frozen=True)
class Flow:
    """Partial map from measured vertices to their correcting successor."""

    f: Mapping[Vertex, Vertex]

    def __init__(self, f: Mapping[Vertex, Vertex]):
        object.__setattr__(self, "f", {int(k): int(v) for k, v in f.items()})

    def inverse(self) -> dict[Vertex, Vertex]:
        return {w: v for v, w in self.f.items()}

    def __getitem__(self, v: Vertex) -> Vertex:
        return self.f[v]

    def get(self, v: Vertex, default=None):
        return self.f.get(v, default)


def validate_flow(graph: OpenGraph, flow: Flow) -> ValidationResult:
    """Check the four flow conditions against the graph's measurement order.

    The domain must be exactly the non-output vertices and the image must avoid
    the inputs; ``f`` must be injective; ``f(v)`` must be a neighbour of ``v``
    measured after it; every other neighbour of ``f(v)`` must come after ``v``.
    """
    out: list[Violation] = []
    f = flow.f
    measured = graph.vertices - graph.outputs
    for v in sorted(measured - f.keys()):
        out.append(Violation("non-output vertex has no flow successor", (v,)))
    for v in sorted(f.keys() - measured):
        out.append(Violation("flow defined on an output or unknown vertex", (v,)))
    targets: dict[Vertex, Vertex] = {}
    for v, w in sorted(f.items()):
        if w not in graph.vertices:
            out.append(Violation("flow target is not a vertex", (v, w)))
            continue
        if w in graph.inputs:
            out.append(Violation("flow target is an input", (v, w)))
        if w in targets:
            out.append(Violation("flow is not injective", (targets[w], v)))
        targets[w] = v
        if v not in graph.vertices:
            continue
        if w not in graph.neighbours(v):
            out.append(Violation("f(v) is not adjacent to v", (v, w)))
        if not graph.precedes(v, w):
            out.append(Violation("v does not precede f(v)", (v, w)))
        for u in sorted(graph.neighbours(w)):
            if u != v and not graph.precedes(v, u):
                out.append(Violation("neighbour of f(v) precedes v", (v, u)))
    return ValidationResult(tuple(out))


@dataclass(frozen=True)
class Colouring:
    classes: tuple[frozenset[Vertex], ...]

    def __init__(self, classes: Iterable[Iterable[Vertex]]):
        object.__setattr__(self, "classes", tuple(frozenset(int(v) for v in c) for c in classes))

    @property
    def k(self) -> int:
        return len(self.classes)

    def colour_of(self, v: Vertex) -> int:
        for i, c in enumerate(self.classes):
            if v in c:
                return i
        raise KeyError(v)


def validate_colouring(graph: OpenGraph, colouring: Colouring) -> ValidationResult:
    out: list[Violation] = []
    seen: dict[Vertex, int] = {}
    for i, cls in enumerate(colouring.classes):
        if not cls:
            out.append(Violation("empty colour class", (i,)))
        for v in sorted(cls):
            if v not in graph.vertices:
                out.append(Violation("colour class contains an unknown vertex", (v,)))
            elif v in seen:
                out.append(Violation("vertex in more than one class", (v,)))
            seen[v] = i
    for v in sorted(graph.vertices - seen.keys()):
        out.append(Violation("vertex not coloured", (v,)))
    for u, v in sorted(graph.edges):
        if u in seen and seen.get(u) == seen.get(v):
            out.append(Violation("edge inside a colour class", (u, v)))
    return ValidationResult(tuple(out))


def bipartition(graph: OpenGraph) -> Colouring | None:
    """Two-colouring by BFS parity, or ``None`` for non-bipartite graphs."""
    colour: dict[Vertex, int] = {}
    for root in sorted(graph.vertices):
        if root in colour:
            continue
        colour[root] = 0
        queue = [root]
        while queue:
            u = queue.pop()
            for w in graph.neighbours(u):
                if w not in colour:
                    colour[w] = colour[u] ^ 1
                    queue.append(w)
                elif colour[w] == colour[u]:
                    return None
    classes = [sorted(v for v, c in colour.items() if c == i) for i in (0, 1)]
    return Colouring([c for c in classes if c])


def dump_json(graph: OpenGraph, flow: Flow | None = None, colouring: Colouring | None = None, **extra) -> str:
    doc = graph.to_dict()
    if flow is not None:
        doc["flow"] = {str(k): v for k, v in sorted(flow.f.items())}
    if colouring is not None:
        doc["colour_classes"] = [sorted(c) for c in colouring.classes]
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)


def load_json(text: str) -> tuple[OpenGraph, Flow | None, Colouring | None, dict]:
    doc = json.loads(text)
    graph = OpenGraph.from_dict(doc)
    flow = Flow({int(k): int(v) for k, v in doc["flow"].items()}) if "flow" in doc else None
    colouring = Colouring(doc["colour_classes"]) if "colour_classes" in doc else None
    return graph, flow, colouring, doc
