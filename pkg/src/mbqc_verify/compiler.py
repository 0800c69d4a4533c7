"""Lazy compilation of measurement patterns into qubit-reusing schedules.

A qubit is allocated only when its first entangling gate (or its measurement)
is due, and its slot is reset and handed back as soon as it has been measured.
Edges fire immediately before the earlier endpoint is measured, so for
line-like patterns at most ``|O| + 1`` qubits are alive at once.

The same instruction stream serves computation and test rounds; what differs
is the content of the per-vertex classical registers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .graph import GraphError, OpenGraph, Vertex, validate_flow
from .pattern import MeasurementPattern

# register bit positions (1-based, bit 1 is the least significant)
B_OUTCOME = 1
B_THETA = (2, 3, 4)
B_RPAD = 5
B_TRAP = 6
B_DUMMY = 7
B_ZCORR = 8


class RegisterError(RuntimeError):
    """Raised on reading a register bit that has not been written."""


@dataclass
class RegisterFile:
    """Eight-bit classical register per vertex plus round-level bits.

    ``scratch`` holds the X-correction parity of each vertex, accumulated from
    the vertices whose flow successor neighbours it.
    """

    vertices: tuple[Vertex, ...]
    regs: dict[Vertex, int] = field(default_factory=dict)
    written: set[tuple[Vertex, int]] = field(default_factory=set)
    round_is_test: int = 0
    colour: int = 0
    scratch: dict[Vertex, int] = field(default_factory=dict)

    def __post_init__(self):
        for v in self.vertices:
            self.regs.setdefault(v, 0)

    def set(self, v: Vertex, bit: int, value: int) -> None:
        mask = 1 << (bit - 1)
        self.regs[v] = (self.regs[v] | mask) if value else (self.regs[v] & ~mask)
        self.written.add((v, bit))

    def get(self, v: Vertex, bit: int) -> int:
        if (v, bit) not in self.written:
            raise RegisterError(f"bit {bit} of vertex {v} read before it was written")
        return (self.regs[v] >> (bit - 1)) & 1

    def toggle(self, v: Vertex, bit: int) -> None:
        self.set(v, bit, self.get(v, bit) ^ 1)

    def set_theta(self, v: Vertex, j: int) -> None:
        for k, bit in enumerate(B_THETA):
            self.set(v, bit, (j >> k) & 1)

    def theta(self, v: Vertex) -> int:
        return sum(self.get(v, bit) << k for k, bit in enumerate(B_THETA))

    def byte(self, v: Vertex) -> int:
        return self.regs[v]


@dataclass(frozen=True)
class Instr:
    op: str
    v: Vertex | None = None
    w: Vertex | None = None
    slot: int | None = None
    slot2: int | None = None

    def __str__(self) -> str:
        if self.op == "ALLOC":
            return f"ALLOC    v{self.v} -> q{self.slot}"
        if self.op == "PREP":
            return f"PREP     v{self.v} q{self.slot}  [c2-4 theta, c6 trap, c7 dummy]"
        if self.op == "XX":
            return f"XX       v{self.v} v{self.w}  q{self.slot} q{self.slot2}"
        if self.op == "MEASURE":
            return f"MEASURE  v{self.v} q{self.slot} -> c1  [delta from c2-5, c8, x-scratch]"
        if self.op == "UPDATE":
            return f"UPDATE   v{self.v}  [c8 of f(v), x-scratch of N(f(v))]"
        if self.op == "FREE":
            return f"FREE     v{self.v} q{self.slot}"
        return self.op


@dataclass(frozen=True)
class LazySchedule:
    pattern: MeasurementPattern
    instructions: tuple[Instr, ...]

    def __iter__(self):
        return iter(self.instructions)

    def __len__(self):
        return len(self.instructions)

    def dump(self) -> str:
        return "\n".join(str(i) for i in self.instructions) + "\n"


def schedule_graph(graph: OpenGraph) -> tuple[Instr, ...]:
    """Lazy instruction stream for ``graph`` in its processing order (no flow check)."""
    instrs: list[Instr] = [Instr("INIT")]
    slot_of: dict[Vertex, int] = {}
    free_slots: list[int] = []
    next_slot = 0
    fired: set[tuple[Vertex, Vertex]] = set()
    done: set[Vertex] = set()

    def ensure(v: Vertex) -> int:
        nonlocal next_slot
        if v in slot_of:
            return slot_of[v]
        if v in done:
            raise GraphError(f"vertex {v} needed after it was measured")
        if free_slots:
            free_slots.sort()
            s = free_slots.pop(0)
        else:
            s = next_slot
            next_slot += 1
        slot_of[v] = s
        instrs.append(Instr("ALLOC", v, slot=s))
        instrs.append(Instr("PREP", v, slot=s))
        return s

    for v in graph.processing_order:
        for w in sorted(graph.neighbours(v), key=graph.position):
            e = (min(v, w), max(v, w))
            if e in fired:
                continue
            su, sw = ensure(v), ensure(w)
            instrs.append(Instr("XX", v, w, su, sw))
            fired.add(e)
        s = ensure(v)
        instrs.append(Instr("MEASURE", v, slot=s))
        instrs.append(Instr("UPDATE", v))
        instrs.append(Instr("FREE", v, slot=s))
        del slot_of[v]
        done.add(v)
        free_slots.append(s)
    instrs.append(Instr("DECODE"))
    return tuple(instrs)


def compile(p: MeasurementPattern) -> LazySchedule:  # noqa: A001 - domain name
    res = validate_flow(p.graph, p.flow)
    if not res:
        raise GraphError("measurement order violates the flow: " + "; ".join(map(str, res.violations)))
    return LazySchedule(p, schedule_graph(p.graph))


def peak_qubits(s: LazySchedule | Iterable[Instr]) -> int:
    live = peak = 0
    for ins in s:
        if ins.op == "ALLOC":
            live += 1
            peak = max(peak, live)
        elif ins.op == "FREE":
            live -= 1
    return peak


def x_sources(p: MeasurementPattern) -> dict[Vertex, set[Vertex]]:
    """For each vertex, the measured vertices ``u`` with ``v`` in ``N(f(u)) \\ {u}``."""
    src: dict[Vertex, set[Vertex]] = {v: set() for v in p.graph.vertices}
    for u, fu in p.flow.f.items():
        for v in p.graph.neighbours(fu):
            if v != u:
                src[v].add(u)
    return src


def replay_symbolic(s: LazySchedule) -> None:
    """Walk the schedule without quantum state, checking resource discipline.

    Raises :class:`RegisterError` if a measurement would read a correction
    register before all its contributions arrived, and
    :class:`~mbqc_verify.graph.GraphError` on any use of an unallocated or
    freed slot.
    """
    p = s.pattern
    finv = p.flow.inverse()
    xsrc = x_sources(p)
    regs = RegisterFile(tuple(sorted(p.graph.vertices)))
    live: dict[int, Vertex] = {}
    prepared: set[Vertex] = set()
    measured: set[Vertex] = set()
    updated: set[Vertex] = set()

    def owned(slot, v):
        if live.get(slot) != v:
            raise GraphError(f"slot q{slot} does not hold v{v}")

    for ins in s:
        if ins.op == "INIT":
            for v in regs.vertices:
                regs.set_theta(v, 0)
                for bit in (B_RPAD, B_TRAP, B_DUMMY):
                    regs.set(v, bit, 0)
                if v not in finv:
                    regs.set(v, B_ZCORR, 0)
        elif ins.op == "ALLOC":
            if ins.slot in live:
                raise GraphError(f"slot q{ins.slot} allocated twice")
            live[ins.slot] = ins.v
        elif ins.op == "PREP":
            owned(ins.slot, ins.v)
            regs.theta(ins.v)
            regs.get(ins.v, B_TRAP)
            regs.get(ins.v, B_DUMMY)
            prepared.add(ins.v)
        elif ins.op == "XX":
            owned(ins.slot, ins.v)
            owned(ins.slot2, ins.w)
            if not {ins.v, ins.w} <= prepared or {ins.v, ins.w} & measured:
                raise GraphError(f"XX on v{ins.v}, v{ins.w} outside their lifetime")
        elif ins.op == "MEASURE":
            owned(ins.slot, ins.v)
            v = ins.v
            regs.theta(v)
            regs.get(v, B_RPAD)
            regs.get(v, B_ZCORR)
            if not xsrc[v] <= updated:
                raise RegisterError(f"x-correction of v{v} read before {sorted(xsrc[v] - updated)} measured")
            if (v, B_OUTCOME) in regs.written:
                raise RegisterError(f"outcome of v{v} written twice")
            regs.set(v, B_OUTCOME, 0)
            measured.add(v)
        elif ins.op == "UPDATE":
            v = ins.v
            regs.get(v, B_OUTCOME)
            if v in p.flow.f:
                regs.set(p.flow.f[v], B_ZCORR, 0)
            updated.add(v)
        elif ins.op == "FREE":
            owned(ins.slot, ins.v)
            del live[ins.slot]
        elif ins.op == "DECODE":
            for v in p.graph.outputs:
                regs.get(v, B_OUTCOME)
    if live:
        raise GraphError(f"slots still allocated at the end: {sorted(live)}")
