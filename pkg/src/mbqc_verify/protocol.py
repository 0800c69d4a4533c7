"""Interleaved computation/test-round verification of a measurement pattern.

A run draws a random partition of the rounds into ``d`` computation rounds and
``t`` test rounds. Computation rounds execute a one-time-padded copy of the
pattern; test rounds pick a random colour class as traps, surround them with
``|+>``/``|->`` dummies, and check the trap outcomes. The run aborts when at
least ``w`` test rounds fail or when the computation outputs have no strict
majority.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import reduce
from operator import xor
from typing import Callable, Mapping, Sequence

import numpy as np

from .compiler import (
    B_DUMMY,
    B_OUTCOME,
    B_RPAD,
    B_TRAP,
    B_ZCORR,
    LazySchedule,
    RegisterFile,
    compile,
    schedule_graph,
)
from .graph import Colouring, Flow, OpenGraph, Vertex
from .pattern import MeasurementPattern, angle_radians
from .simulator import NOISELESS, NoiseModel, StateVector, shot_rng

COMPUTATION = "computation"
TEST = "test"


@dataclass(frozen=True)
class ProtocolParams:
    d: int
    t: int
    w: int
    pattern: MeasurementPattern
    x: tuple[int, ...] = ()
    p: float = 0.0

    def __post_init__(self):
        if self.d < 1 or self.t < 1:
            raise ValueError("need at least one computation round and one test round")
        if not 0 <= self.w <= self.t:
            raise ValueError("w must lie in [0, t]")
        x = tuple(int(b) for b in self.x) or (0,) * len(self.pattern.inputs)
        if len(x) != len(self.pattern.inputs) or any(b not in (0, 1) for b in x):
            raise ValueError("x must be a bit vector with one bit per input vertex")
        object.__setattr__(self, "x", x)
        if not 0 <= self.p < 0.5:
            raise ValueError("inherent error probability must lie in [0, 1/2)")

    @property
    def n(self) -> int:
        return self.d + self.t

    @property
    def x_of(self) -> dict[Vertex, int]:
        return dict(zip(self.pattern.inputs, self.x))


@dataclass(frozen=True)
class RoundSecrets:
    """Secrets of one round; angles are indices of pi/4.

    Every vertex gets an angle pad ``theta`` and an outcome pad ``r``. In test
    rounds the vertices outside the trap colour are dummies with a bit ``d``;
    their measurement angle is their (otherwise unused) uniform ``theta``.
    """

    kind: str
    theta: Mapping[Vertex, int]
    r: Mapping[Vertex, int]
    colour: int | None = None
    traps: frozenset[Vertex] = frozenset()
    d: Mapping[Vertex, int] = field(default_factory=dict)

    @property
    def is_test(self) -> bool:
        return self.kind == TEST


@dataclass
class RoundResult:
    index: int
    kind: str
    outcomes: dict[Vertex, int]
    colour: int | None = None
    trap_pass: dict[Vertex, bool] = field(default_factory=dict)
    output: tuple[int, ...] | None = None
    deltas: dict[Vertex, int] = field(default_factory=dict)
    attempts: int = 1

    @property
    def failed(self) -> bool:
        return not all(self.trap_pass.values())


def choose_partition(params: ProtocolParams, rng: np.random.Generator) -> list[str]:
    kinds = np.array([COMPUTATION] * params.d + [TEST] * params.t, dtype=object)
    return list(kinds[rng.permutation(params.n)])


def draw_secrets(pattern: MeasurementPattern, kind: str, rng: np.random.Generator) -> RoundSecrets:
    verts = sorted(pattern.graph.vertices)
    theta = dict(zip(verts, (int(j) for j in rng.integers(0, 8, len(verts)))))
    r = dict(zip(verts, (int(b) for b in rng.integers(0, 2, len(verts)))))
    if kind == COMPUTATION:
        return RoundSecrets(COMPUTATION, theta, r)
    colour = int(rng.integers(pattern.colouring.k))
    traps = pattern.colouring.classes[colour]
    dummies = [v for v in verts if v not in traps]
    d = dict(zip(dummies, (int(b) for b in rng.integers(0, 2, len(dummies)))))
    return RoundSecrets(TEST, theta, r, colour, traps, d)


def plan_rounds(params: ProtocolParams, rng: np.random.Generator) -> list[RoundSecrets]:
    return [draw_secrets(params.pattern, kind, rng) for kind in choose_partition(params, rng)]


def compute_delta(
    pattern: MeasurementPattern,
    v: Vertex,
    secrets: RoundSecrets,
    outcomes: Mapping[Vertex, int],
    x: Mapping[Vertex, int] | None = None,
) -> int:
    """Measurement angle (index of pi/4) sent for vertex ``v``.

    ``outcomes`` holds the *decoded* outcomes ``b_u xor r_u`` of the vertices
    measured so far. For outputs the X correction is left out; it is applied
    to the read-out bit classically.
    """
    if secrets.is_test:
        if v in secrets.traps:
            return (secrets.theta[v] + 4 * secrets.r[v]) % 8
        return secrets.theta[v] % 8
    g, f = pattern.graph, pattern.flow
    finv = f.inverse()
    for u in g.order[: g.position(v)] if v not in g.outputs else g.order:
        if u not in outcomes:
            raise ValueError(f"vertex {u} must be measured before {v}")
    z = outcomes[finv[v]] if v in finv else 0
    s = 0
    if v not in g.outputs:
        for u, fu in f.f.items():
            if u != v and v in g.neighbours(fu):
                s ^= outcomes[u]
    theta = secrets.theta[v] + 4 * (x or {}).get(v, 0)
    phi = pattern.angles[v]
    adapted = (-phi if z else phi) + 4 * s
    return (theta + adapted + 4 * secrets.r[v]) % 8


def execute_round(
    schedule: LazySchedule,
    secrets: RoundSecrets,
    rng: np.random.Generator,
    noise: NoiseModel = NOISELESS,
    x: Mapping[Vertex, int] | None = None,
    index: int = 0,
) -> RoundResult:
    """Run one round of the compiled schedule on the statevector simulator."""
    p = schedule.pattern
    g, f = p.graph, p.flow.f
    x = x or {}
    test = secrets.is_test
    regs = RegisterFile(tuple(sorted(g.vertices)))
    sv = StateVector(noise)
    deltas: dict[Vertex, int] = {}
    result = RoundResult(index, secrets.kind, {}, colour=secrets.colour)

    for ins in schedule:
        op = ins.op
        if op == "INIT":
            regs.round_is_test = int(test)
            regs.colour = secrets.colour or 0
            finv = p.flow.inverse()
            for v in regs.vertices:
                regs.set_theta(v, secrets.theta[v])
                regs.set(v, B_RPAD, secrets.r[v])
                regs.set(v, B_TRAP, int(test and v in secrets.traps))
                regs.set(v, B_DUMMY, secrets.d.get(v, 0))
                if v not in finv:
                    regs.set(v, B_ZCORR, 0)
                regs.scratch[v] = 0
        elif op == "ALLOC":
            sv.allocate(ins.slot)
        elif op == "PREP":
            v = ins.v
            if test and not regs.get(v, B_TRAP):
                sv.prep_dummy(ins.slot, regs.get(v, B_DUMMY), rng)
            else:
                j = regs.theta(v)
                sv.prep_theta(ins.slot, angle_radians(j), rng, theta_index=j)
        elif op == "XX":
            sv.apply_xx(ins.slot, ins.slot2, rng)
        elif op == "MEASURE":
            v = ins.v
            j, r = regs.theta(v), regs.get(v, B_RPAD)
            if test:
                delta = (j + 4 * r) % 8 if regs.get(v, B_TRAP) else j
            else:
                theta = j + 4 * x.get(v, 0)
                phi = p.angles[v]
                if regs.get(v, B_ZCORR):
                    phi = -phi
                s = 0 if v in g.outputs else regs.scratch[v]
                delta = (theta + phi + 4 * s + 4 * r) % 8
            deltas[v] = delta
            b = sv.measure_angle(ins.slot, angle_radians(delta), rng)
            regs.set(v, B_OUTCOME, b)
            result.outcomes[v] = b
        elif op == "UPDATE":
            v = ins.v
            if not test and v in f:
                s = regs.get(v, B_OUTCOME) ^ regs.get(v, B_RPAD)
                # f is injective, so v is the only source of f(v)'s Z correction
                regs.set(f[v], B_ZCORR, s)
                if s:
                    for u in g.neighbours(f[v]):
                        if u != v:
                            regs.scratch[u] ^= 1
            elif v in f:
                regs.set(f[v], B_ZCORR, 0)
        elif op == "FREE":
            sv.free(ins.slot)
        elif op == "DECODE":
            if test:
                for v in sorted(secrets.traps):
                    expected = secrets.r[v] ^ reduce(xor, (secrets.d[u] for u in g.neighbours(v)), 0)
                    result.trap_pass[v] = result.outcomes[v] == expected
            else:
                result.output = tuple(
                    regs.get(v, B_OUTCOME) ^ regs.get(v, B_RPAD) ^ regs.scratch[v] for v in p.outputs
                )
    result.deltas = deltas
    return result


@dataclass(frozen=True)
class TrapGraph:
    """An open graph with a proper colouring, enough to run test rounds.

    Test rounds never read the flow or the target angles, so any connected
    graph can be trap-tested without a flow.
    """

    graph: OpenGraph
    colouring: Colouring
    flow: Flow = field(default_factory=lambda: Flow({}))


def test_round_on_graph(
    graph: OpenGraph,
    colouring: Colouring,
    rng: np.random.Generator,
    noise: NoiseModel = NOISELESS,
) -> tuple[RoundSecrets, RoundResult]:
    """Draw test-round secrets for ``graph`` and execute its lazy schedule."""
    tg = TrapGraph(graph, colouring)
    secrets = draw_secrets(tg, TEST, rng)
    schedule = LazySchedule(tg, schedule_graph(graph))
    return secrets, execute_round(schedule, secrets, rng, noise)


test_round_on_graph.__test__ = False  # not a pytest test despite the name


def threshold_bound(k: int, p: float = 0.0) -> float:
    """Largest admissible ``w/t`` for a ``k``-colouring and inherent error ``p``."""
    if k < 1:
        raise ValueError("need at least one colour")
    if not 0 <= p < 0.5:
        raise ValueError("inherent error probability must lie in [0, 1/2)")
    return (2 * p - 1) / (2 * p - 2) / k


def majority(outputs: Sequence[tuple[int, ...]], d: int) -> tuple[int, ...] | None:
    counts: dict[tuple[int, ...], int] = {}
    for y in outputs:
        counts[y] = counts.get(y, 0) + 1
    for y, c in counts.items():
        if c > d / 2:
            return y
    return None


def decide(results: Sequence[RoundResult], w: int, d: int) -> tuple[int, bool, tuple[int, ...] | None]:
    """Return ``(c_fail, accepted, output)`` from raw round data."""
    c_fail = sum(1 for r in results if r.kind == TEST and r.failed)
    if c_fail >= w:
        return c_fail, False, None
    y = majority([r.output for r in results if r.kind == COMPUTATION], d)
    return c_fail, y is not None, y


def bootstrap_rates(
    flags: Sequence[tuple[str, bool]],
    sample: int = 800,
    resamples: int = 10,
    rng: np.random.Generator | None = None,
) -> dict[str, dict[str, float]]:
    """Subsample ``sample`` rounds ``resamples`` times and summarise both rates.

    ``flags`` pairs each round's kind with its bad-outcome flag (failed test
    round, or incorrect computation output).
    """
    if len(flags) < sample:
        raise ValueError(f"need at least {sample} rounds, got {len(flags)}")
    rng = rng if rng is not None else np.random.default_rng()
    kinds = np.array([k for k, _ in flags])
    bad = np.array([bool(b) for _, b in flags])
    stats = {TEST: [], COMPUTATION: []}
    for _ in range(resamples):
        idx = rng.choice(len(flags), size=sample, replace=False)
        for kind in stats:
            sel = bad[idx][kinds[idx] == kind]
            stats[kind].append(sel.mean() if sel.size else 0.0)
    return {
        "test_failure": {"mean": float(np.mean(stats[TEST])), "std": float(np.std(stats[TEST]))},
        "incorrect_output": {"mean": float(np.mean(stats[COMPUTATION])), "std": float(np.std(stats[COMPUTATION]))},
    }


@dataclass
class VerdictReport:
    c_fail: int
    accepted: bool
    output: tuple[int, ...] | None
    n_test: int
    n_computation: int
    test_failure_rate: float
    incorrect_output_rate: float | None = None
    bootstrap: dict | None = None
    rounds: list[RoundResult] = field(default_factory=list, repr=False)

    @property
    def decision(self) -> str:
        return "accept" if self.accepted else "abort"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("rounds")
        d["decision"] = self.decision
        d["output"] = list(self.output) if self.output is not None else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def rounds_csv(self, truth: Sequence[int] | None = None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["round", "kind", "colour", "passed", "output", "correct"])
        for r in self.rounds:
            if r.kind == TEST:
                wr.writerow([r.index, r.kind, r.colour, int(not r.failed), "", ""])
            else:
                out = "".join(map(str, r.output))
                correct = "" if truth is None else int(tuple(truth) == r.output)
                wr.writerow([r.index, r.kind, "", "", out, correct])
        return buf.getvalue()


def _run_chunk(args) -> list[RoundResult]:
    schedule, kinds, indices, noise, x, seed, redo = args
    out = []
    for j in indices:
        attempt = 0
        while True:
            rng = shot_rng(seed, 1, j, attempt)
            secrets = draw_secrets(schedule.pattern, kinds[j], rng)
            res = execute_round(schedule, secrets, rng, noise, x, index=j)
            attempt += 1
            if redo is None or not redo(j, attempt):
                break
        res.attempts = attempt
        out.append(res)
    return out


def run_protocol(
    params: ProtocolParams,
    noise: NoiseModel = NOISELESS,
    seed: int = 0,
    truth: Sequence[int] | None = None,
    workers: int = 1,
    redo: Callable[[int, int], bool] | None = None,
    bootstrap_sample: int = 800,
    bootstrap_resamples: int = 10,
) -> VerdictReport:
    """Execute all rounds and apply the accept/abort rule.

    Each round ``j`` draws its secrets and measurement randomness from its own
    stream ``(seed, 1, j, attempt)``, so results do not depend on ``workers``.
    ``redo(j, attempt)`` is a test hook: returning True restarts round ``j``
    with fresh secrets. ``truth`` enables the incorrect-output statistics.
    The bootstrap uses ``min(bootstrap_sample, 0.8 n)`` rounds per resample.
    """
    schedule = compile(params.pattern)
    kinds = choose_partition(params, shot_rng(seed, 0))
    x = params.x_of
    indices = list(range(params.n))
    if workers > 1:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = ex.map(_run_chunk, [(schedule, kinds, c, noise, x, seed, redo) for c in chunks])
            results = sorted((r for part in parts for r in part), key=lambda r: r.index)
    else:
        results = _run_chunk((schedule, kinds, indices, noise, x, seed, redo))

    c_fail, accepted, y = decide(results, params.w, params.d)
    tests = [r for r in results if r.kind == TEST]
    comps = [r for r in results if r.kind == COMPUTATION]
    report = VerdictReport(
        c_fail=c_fail,
        accepted=accepted,
        output=y,
        n_test=len(tests),
        n_computation=len(comps),
        test_failure_rate=sum(r.failed for r in tests) / len(tests),
        rounds=results,
    )
    truth = tuple(truth) if truth is not None else None
    if truth is not None:
        report.incorrect_output_rate = sum(r.output != truth for r in comps) / len(comps)
    sample = min(bootstrap_sample, math.floor(0.8 * params.n))
    if sample >= 1:
        flags = [(r.kind, r.failed if r.kind == TEST else (truth is not None and r.output != truth)) for r in results]
        stats = bootstrap_rates(flags, sample, bootstrap_resamples, shot_rng(seed, 2))
        if truth is None:
            stats.pop("incorrect_output")
        report.bootstrap = stats
    return report
