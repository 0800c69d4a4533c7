"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

from __future__ import annotations

import filecmp
import math
import time
from functools import reduce
from operator import xor

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import ACCEPTANCE_LINES
from mbqc_verify.cli import RunConfig, cnot_grid_cells, main, simulate_bits
from mbqc_verify.compiler import compile, peak_qubits
from mbqc_verify.pattern import cnot_grid_expected, cnot_grid_pattern, grover_expected, grover_pattern
from mbqc_verify.protocol import COMPUTATION, ProtocolParams, run_protocol, test_round_on_graph, threshold_bound
from mbqc_verify.rngtest import STREAM_LENGTH, fips_suite
from mbqc_verify.secretdep import (
    clip_psd,
    fidelity,
    fit_multistart,
    load_reference_states,
    trace_norm_gap,
)
from oracles import postselected_output
from strategies import coloured_graphs


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_secret_dependency_fit():
    states = load_reference_states()
    start = time.perf_counter()
    fit, objectives = fit_multistart(states, starts=5, rng=np.random.default_rng(0))
    elapsed = time.perf_counter() - start
    eps_1 = trace_norm_gap(fit.lam, states)
    spread = max(objectives) - min(objectives)
    ok = abs(fit.eps_f - 0.015) <= 0.005 and abs(eps_1 - 0.011) <= 0.005 and elapsed < 60 and spread <= 1e-3
    record(1, ok, f"eps_f={fit.eps_f:.5f} eps_1={eps_1:.5f} spread={spread:.1e} time={elapsed:.1f}s")


def test_criterion_02_infidelity_table():
    states = load_reference_states()
    mean = float(np.mean([1 - fidelity(clip_psd(states[j]), j) for j in range(8)]))
    record(2, abs(mean - 5.8e-4) <= 4e-4, f"mean infidelity={mean:.3e} (target 5.8e-4 +- 4e-4)")


def test_criterion_03_threshold_formula():
    value = threshold_bound(2, 0)
    record(3, value == 0.25, f"threshold_bound(2, 0)={value}")


def test_criterion_04_noiseless_grover():
    start = time.perf_counter()
    details = []
    ok = True
    for tau in range(4):
        oracle = postselected_output(grover_pattern(tau))
        rep = run_protocol(ProtocolParams(500, 500, 1, grover_pattern(tau)), seed=100 + tau, truth=oracle)
        outs = {r.output for r in rep.rounds if r.kind == COMPUTATION}
        ok &= rep.c_fail == 0 and rep.accepted and outs == {oracle} and oracle == grover_expected(tau)
        details.append(f"tau={tau}:c_fail={rep.c_fail},y={''.join(map(str, rep.output or ()))}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    record(4, ok, " ".join(details) + f" time={elapsed:.1f}s")


def test_criterion_05_cnot_grid_oracle():
    rng = np.random.default_rng(5)
    rounds = wrong = 0
    for n in (2, 3, 4):
        for m in (1, 2, 3):
            for k in range(20):
                b = [int(v) for v in rng.integers(0, 2, n)]
                rep = run_protocol(ProtocolParams(5, 1, 1, cnot_grid_pattern(n, m, b)), seed=k, bootstrap_sample=0)
                expected = cnot_grid_expected(n, m, b)
                for r in rep.rounds:
                    if r.kind == COMPUTATION:
                        rounds += 1
                        wrong += r.output != expected
    record(5, wrong == 0, f"{rounds - wrong}/{rounds} computation rounds match the XOR oracle")


def test_criterion_06_lazy_compiler_bound():
    peaks = {"grover": peak_qubits(compile(grover_pattern(0)))}
    ok = peaks["grover"] == 3
    for n in (2, 3, 4):
        for m in (1, 2, 3):
            p = cnot_grid_pattern(n, m, [0] * n)
            peaks[(n, m)] = peak_qubits(compile(p))
            ok &= peaks[(n, m)] <= len(p.outputs) + 1
    record(6, ok, f"grover peak={peaks['grover']}, grid peaks={sorted(set(v for k, v in peaks.items() if k != 'grover'))}")


_trap_stats = {"rounds": 0, "traps": 0, "failures": 0}


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow], database=None)
@given(coloured_graphs(max_vertices=10), st.integers(0, 2**32 - 1))
def _trap_identity(gc, seed):
    g, colouring = gc
    secrets, res = test_round_on_graph(g, colouring, np.random.default_rng(seed))
    _trap_stats["rounds"] += 1
    for v in secrets.traps:
        _trap_stats["traps"] += 1
        expected = secrets.r[v] ^ reduce(xor, (secrets.d[u] for u in g.neighbours(v)), 0)
        if res.outcomes[v] != expected:
            _trap_stats["failures"] += 1


def test_criterion_07_trap_identity():
    _trap_identity()
    s = _trap_stats
    record(7, s["failures"] == 0 and s["rounds"] >= 1000, f"{s['rounds']} rounds, {s['traps']} traps, {s['failures']} failures")


def test_criterion_08_fips_suite():
    attempts = 0
    passed = False
    for attempt in range(2):  # one retry permitted
        attempts += 1
        if fips_suite(simulate_bits(8, attempt=attempt)).passed:
            passed = True
            break
    zeros = fips_suite(np.zeros(STREAM_LENGTH, dtype=int)).pattern()
    alternating = fips_suite(np.arange(STREAM_LENGTH) % 2).pattern()
    ok = (
        passed
        and zeros == {"monobit": False, "poker": False, "runs": False, "long_run": False}
        and alternating == {"monobit": True, "poker": False, "runs": False, "long_run": True}
    )
    record(8, ok, f"simulated stream passed={passed} after {attempts} attempt(s); zeros={zeros}; alternating={alternating}")


SWEEP_ROUNDS = 1000  # computation rounds and test rounds per cell
SWEEP_NOISE = (0.01, 0.02, 0.04)
SWEEP_SIZES = ((2, 1), (3, 2), (4, 3))


def _se(rate: float, n: int) -> float:
    return math.sqrt(rate * (1 - rate) / n)


def test_criterion_09_noise_and_size_sweep():
    table = {}
    for p in SWEEP_NOISE:
        cfg = RunConfig(d=SWEEP_ROUNDS, t=SWEEP_ROUNDS, w=1, noise=f"depol1={p / 10},depol2={p},measflip={p / 3}", seed=9)
        for n, m in SWEEP_SIZES:
            row = cnot_grid_cells(cfg, [n], [m], circuits=1)[0]
            table[p, (n, m)] = (row["test_failure_mean"], row["incorrect_output_mean"])
    N = SWEEP_ROUNDS

    def not_lower(a, b):
        # b is not lower than a, with 2 sigma slack
        return b >= a - 2 * math.hypot(_se(a, N), _se(b, N))

    mono_noise = all(
        not_lower(table[p0, s][k], table[p1, s][k])
        for s in SWEEP_SIZES
        for p0, p1 in zip(SWEEP_NOISE, SWEEP_NOISE[1:])
        for k in (0, 1)
    )
    mono_size = all(
        not_lower(table[p, s0][k], table[p, s1][k])
        for p in SWEEP_NOISE
        for s0, s1 in zip(SWEEP_SIZES, SWEEP_SIZES[1:])
        for k in (0, 1)
    )
    small, large = SWEEP_SIZES[0], SWEEP_SIZES[-1]
    diffs, variances = [], []
    for p in SWEEP_NOISE:
        (t0, c0), (t1, c1) = table[p, small], table[p, large]
        diffs.append((t1 - t0) - (c1 - c0))
        variances.append(sum(_se(x, N) ** 2 for x in (t0, c0, t1, c1)))
    pooled = float(np.mean(diffs))
    pooled_se = math.sqrt(sum(variances)) / len(diffs)
    faster = all(d > 0 for d in diffs) and pooled > 2 * pooled_se
    cells = " ".join(f"p={p}:{s[0]}x{s[1]}=({table[p, s][0]:.3f},{table[p, s][1]:.3f})" for p in SWEEP_NOISE for s in SWEEP_SIZES)
    record(
        9,
        mono_noise and mono_size and faster,
        f"monotone noise={mono_noise} size={mono_size}; growth gap per p={[round(d, 3) for d in diffs]} "
        f"pooled={pooled:.3f}+-{pooled_se:.3f}; cells (test,incorrect) {cells}",
    )


def test_criterion_10_seed_determinism(tmp_path):
    commands = {
        "grover": ["grover", "--tau", "1", "--d", "60", "--t", "60", "--noise", "depol2=0.03", "--seed", "7"],
        "cnot-grid": ["cnot-grid", "--n", "2,3", "--m", "1", "--circuits", "2", "--d", "20", "--t", "20", "--noise", "depol2=0.03", "--seed", "7"],
    }
    same = {}
    for name, argv in commands.items():
        for workers in (1, 2):
            assert main(argv + ["--workers", str(workers), "--out-dir", str(tmp_path / f"{name}-{workers}")]) == 0
        a, b = tmp_path / f"{name}-1", tmp_path / f"{name}-2"
        files = sorted(p.name for p in a.iterdir())
        match, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
        same[name] = not mismatch and not errors and len(match) == len(files) > 0
    for name, argv in {
        "tomography-fit": ["tomography-fit", "--starts", "2", "--seed", "7"],
        "rng-test": ["rng-test", "--simulate", "--seed", "7"],
    }.items():
        outs = [tmp_path / f"{name}-{k}.json" for k in range(2)]
        for out in outs:
            assert main(argv + ["--out", str(out)]) == 0
        same[name] = outs[0].read_bytes() == outs[1].read_bytes()
    record(10, all(same.values()), f"byte-identical outputs: {same}")
