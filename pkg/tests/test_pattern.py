import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbqc_verify.graph import GraphError, validate_colouring, validate_flow
from mbqc_verify.pattern import (
    MeasurementPattern,
    angle_index,
    angle_radians,
    cnot_grid_expected,
    cnot_grid_pattern,
    cnot_grid_vertex_count,
    flow_depth,
    grover_expected,
    grover_pattern,
    line_pattern,
    load_pattern,
    pattern_stats,
    pattern_summary,
    save_pattern,
)
from oracles import postselected_output


@given(st.integers(0, 7), st.integers(-3, 3))
def test_angle_round_trip(j, turns):
    assert angle_index(angle_radians(j) + 2 * math.pi * turns) == j


def test_angle_index_rejects_off_grid():
    with pytest.raises(ValueError):
        angle_index(0.1)


@pytest.mark.parametrize("tau", range(4))
def test_grover_structure(tau):
    p = grover_pattern(tau)
    assert len(p.graph.vertices) == 8 and len(p.graph.edges) == 8
    assert p.inputs == (1, 2) and p.outputs == (7, 8)
    assert validate_flow(p.graph, p.flow).ok
    assert validate_colouring(p.graph, p.colouring).ok and p.colouring.k == 2
    assert p.angles[7] == p.angles[8] == 4
    assert {p.angles[v] for v in (1, 2, 5, 6)} == {0}


@pytest.mark.parametrize("tau, phis", [(0, (4, 4)), (1, (4, 0)), (2, (0, 4)), (3, (0, 0))])
def test_grover_oracle_angles(tau, phis):
    p = grover_pattern(tau)
    assert (p.angles[3], p.angles[4]) == phis


@pytest.mark.parametrize("tau", range(4))
def test_grover_postselected_oracle_finds_marked_item(tau):
    assert postselected_output(grover_pattern(tau)) == grover_expected(tau)


def test_grover_rejects_bad_tau():
    with pytest.raises(ValueError):
        grover_pattern(5)


@pytest.mark.parametrize("n, m", [(2, 1), (2, 2), (3, 1), (2, 3), (4, 1)])
def test_cnot_grid_matches_postselected_oracle(n, m):
    for b in itertools.product((0, 1), repeat=n):
        p = cnot_grid_pattern(n, m, b)
        assert postselected_output(p) == cnot_grid_expected(n, m, b)


@pytest.mark.parametrize("n, m", [(2, 1), (3, 2), (4, 3), (6, 5)])
def test_cnot_grid_shape(n, m):
    p = cnot_grid_pattern(n, m, [0] * n)
    assert len(p.graph.vertices) == cnot_grid_vertex_count(n, m) == n * (2 * m + 3)
    assert len(p.outputs) == n and len(p.inputs) == n
    assert len(p.graph.edges) == n * (2 * m + 2) + m * (n - 1)
    assert p.colouring.k == 2


def test_cnot_grid_argument_checks():
    with pytest.raises(ValueError):
        cnot_grid_pattern(1, 1, [0])
    with pytest.raises(ValueError):
        cnot_grid_pattern(2, 0, [0, 0])
    with pytest.raises(ValueError):
        cnot_grid_pattern(2, 1, [0, 2])
    with pytest.raises(ValueError):
        cnot_grid_pattern(3, 1, [0, 1])


@given(st.integers(2, 6), st.integers(1, 5), st.data())
def test_xor_oracle_is_invertible(n, m, data):
    b = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    y = cnot_grid_expected(n, m, b)
    # undo the cascades in reverse
    bits = list(y)
    for _ in range(m):
        for i in reversed(range(n - 1)):
            bits[i + 1] ^= bits[i]
    assert bits == b
    assert y[0] == b[0]


def test_line_pattern_identity():
    # an odd-length chain measures an even number of vertices at 0: identity
    for length in (3, 5):
        for x in (0, 1):
            assert postselected_output(line_pattern(length), [x]) == (x,)
    # an even-length chain leaves the output in a superposition
    with pytest.raises(AssertionError, match="not deterministic"):
        postselected_output(line_pattern(2), [0])


def test_pattern_requires_angles_and_valid_flow():
    p = grover_pattern(0)
    with pytest.raises(GraphError, match="no angle"):
        MeasurementPattern(p.graph, p.flow, {}, p.colouring)
    bad = dict(p.flow.f)
    bad[1] = 2
    with pytest.raises(GraphError, match="invalid flow"):
        MeasurementPattern(p.graph, type(p.flow)(bad), p.angles, p.colouring)


def test_pattern_json_round_trip(tmp_path):
    p = cnot_grid_pattern(3, 2, [1, 0, 1])
    path = tmp_path / "p.json"
    save_pattern(p, path)
    q = load_pattern(path)
    assert q.graph == p.graph and q.flow.f == p.flow.f and q.angles == p.angles
    assert [sorted(c) for c in q.colouring.classes] == [sorted(c) for c in p.colouring.classes]


def test_stats():
    s = pattern_stats(grover_pattern(1))
    assert s == {"vertices": 8, "edges": 8, "outputs": 2, "depth": flow_depth(grover_pattern(1))}
    assert s["depth"] >= 4
    assert '"name": "grover-tau1"' in pattern_summary(grover_pattern(1))
    assert flow_depth(line_pattern(4)) == 4
