import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbqc_verify.secretdep import (
    FitError,
    TomographyData,
    bootstrap_infidelity,
    choi_apply,
    choi_from_params,
    choi_to_params,
    clip_psd,
    counts_from_states,
    fidelity,
    fit_multistart,
    fit_report,
    fit_secret_independent_channel,
    frobenius_gap,
    ideal_state,
    identity_choi,
    is_cptp,
    is_density_matrix,
    kraus_to_choi,
    load_reference_states,
    partial_trace_out,
    project_cptp,
    random_cptp_choi,
    reconstruct_state,
    to_ptm,
    trace_norm,
    trace_norm_gap,
)
from mbqc_verify.simulator import X, Z, dephasing, rx
from oracles import choi_fit_cvxpy

PERFECT = {j: ideal_state(j) for j in range(8)}


def test_reconstruct_examples():
    assert np.allclose(reconstruct_state({"X": (50, 50), "Y": (50, 50), "Z": (100, 0)}), np.diag([1, 0]))
    assert np.allclose(reconstruct_state({"X": (5, 5), "Y": (5, 5), "Z": (5, 5)}), np.eye(2) / 2)
    with pytest.raises(ValueError):
        reconstruct_state({"X": (0, 0), "Y": (5, 5), "Z": (5, 5)})
    with pytest.raises(ValueError):
        reconstruct_state({"X": (1, 0), "Y": (5, 5)})


def test_reconstruct_half_pi_row():
    rho = load_reference_states()[2]
    r = {b: float(np.trace(rho @ P).real) for b, P in zip("XYZ", (X, np.array([[0, -1j], [1j, 0]]), Z))}
    shots = 10**6
    counts = {b: (round(shots * (1 + v) / 2), shots - round(shots * (1 + v) / 2)) for b, v in r.items()}
    got = reconstruct_state(counts, clip=False)
    assert np.allclose(got, [[0.5094, 0.0067 + 0.4999j], [0.0067 - 0.4999j, 0.4906]], atol=2e-4)


def test_clipping_gives_density_matrix():
    rho = reconstruct_state({"X": (100, 0), "Y": (100, 0), "Z": (100, 0)})
    assert is_density_matrix(rho)
    for j, rho in load_reference_states().items():
        assert is_density_matrix(clip_psd(rho))


def test_fidelity_examples():
    for j in range(8):
        assert fidelity(ideal_state(j), j) == pytest.approx(1)
        assert fidelity(np.eye(2) / 2, j) == pytest.approx(0.5)


def test_choi_apply_examples():
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    assert np.allclose(choi_apply(identity_choi(), rho), rho)
    assert np.allclose(choi_apply(np.eye(4) / 2, np.diag([1, 0])), np.eye(2) / 2)
    assert np.allclose(choi_apply(kraus_to_choi([X]), np.diag([1, 0])), np.diag([0, 1]))
    assert np.allclose(partial_trace_out(identity_choi()), np.eye(2))


def test_ptm_examples():
    assert np.allclose(to_ptm(identity_choi()), np.eye(4))
    assert np.allclose(to_ptm(kraus_to_choi([Z])), np.diag([1, -1, -1, 1]))


@given(st.lists(st.floats(-1, 1), min_size=16, max_size=16))
def test_choi_params_round_trip(x):
    lam = choi_from_params(x)
    assert np.allclose(lam, lam.conj().T)
    assert np.allclose(choi_to_params(lam), x)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_choi_apply_preserves_trace_and_hermiticity(seed, rank):
    rng = np.random.default_rng(seed)
    lam = random_cptp_choi(rng, rank)
    assert is_cptp(lam)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    out = choi_apply(lam, rho)
    assert np.trace(out) == pytest.approx(1, abs=1e-8)
    assert np.allclose(out, out.conj().T, atol=1e-10)
    assert to_ptm(lam)[0] == pytest.approx([1, 0, 0, 0], abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_is_feasible_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    m = choi_from_params(rng.normal(size=16))
    p = project_cptp(m)
    assert is_cptp(p, tp_tol=1e-8)
    assert np.allclose(project_cptp(p), p, atol=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_objective_is_convex_along_segments(seed):
    rng = np.random.default_rng(seed)
    states = load_reference_states()
    a, b = random_cptp_choi(rng), random_cptp_choi(rng)
    mid = frobenius_gap((a + b) / 2, states)
    assert mid <= (frobenius_gap(a, states) + frobenius_gap(b, states)) / 2 + 1e-12


def test_perfect_states_fit_identity():
    fit = fit_secret_independent_channel(PERFECT)
    assert fit.eps_f < 1e-6
    assert trace_norm_gap(fit.lam, PERFECT) < 1e-6
    # only the YZ-plane part of the channel is pinned down by these states
    for P in (np.eye(2), np.array([[0, -1j], [1j, 0]]), Z):
        assert np.allclose(choi_apply(fit.lam, P), P, atol=1e-3)
    assert np.allclose(fit.lam, identity_choi(), atol=1e-2)


def test_dephasing_generator_is_recovered():
    p = 0.3
    gen = dephasing(p)
    states = {j: gen.apply_dm(ideal_state(j)) for j in range(8)}
    fit = fit_secret_independent_channel(states)
    assert fit.eps_f < 1e-3
    truth = gen.choi()
    # outputs on I, Y, Z are identifiable from YZ-plane inputs
    Y = np.array([[0, -1j], [1j, 0]])
    for P in (np.eye(2), Y, Z):
        assert np.allclose(choi_apply(fit.lam, P), choi_apply(truth, P), atol=1e-2)
    ptm, ptm_true = to_ptm(fit.lam), to_ptm(truth)
    assert np.allclose(ptm[:, [0, 2, 3]], ptm_true[:, [0, 2, 3]], atol=1e-2)


def test_reference_fit_matches_conic_solver():
    states = load_reference_states()
    ref_value, ref_lam = choi_fit_cvxpy(states)
    fit = fit_secret_independent_channel(states)
    assert is_cptp(fit.lam)
    assert fit.eps_f == pytest.approx(ref_value, abs=1e-5)
    assert trace_norm_gap(fit.lam, states) == pytest.approx(trace_norm_gap(ref_lam, states), abs=1e-3)
    assert np.diag(to_ptm(fit.lam)) == pytest.approx([1, 0.998, 0.998, 0.999], abs=0.01)


def test_multistart_agreement():
    fit, objs = fit_multistart(load_reference_states(), starts=5, rng=np.random.default_rng(3))
    assert max(objs) - min(objs) < 1e-3
    assert fit.eps_f == min(objs)


def test_budget_exhaustion_raises_with_best_iterate():
    with pytest.raises(FitError) as err:
        fit_secret_independent_channel(load_reference_states(), x0=np.eye(4) / 2, max_iter=3)
    best = err.value.best
    assert best is not None and not best.converged and is_cptp(best.lam)


def test_trace_norm():
    diff = np.eye(2) / 2 - np.diag([1, 0])
    assert trace_norm(diff) == pytest.approx(1)
    assert trace_norm_gap(identity_choi(), PERFECT) == 0
    # one state replaced by I/2 contributes half its trace norm, averaged over 8
    states = dict(PERFECT)
    states[0] = np.eye(2) / 2
    assert trace_norm_gap(identity_choi(), states) == pytest.approx(0.5 / 8)


def test_trace_and_frobenius_gaps_nonnegative():
    states = load_reference_states()
    lam = random_cptp_choi(np.random.default_rng(0))
    assert frobenius_gap(lam, states) >= 0 and trace_norm_gap(lam, states) >= 0


def test_bootstrap_zero_noise_is_shot_noise_only():
    # a perfect |0> still gives 50/50 statistics in X and Y; each resampled
    # chunk tilts the Bloch vector by about sqrt(2/chunk), so the infidelity
    # is about (1/chunk + 1/chunk)/4
    chunk = 1000
    data = counts_from_states({j: ideal_state(j) for j in (0, 4)}, shots=3000)
    stats = bootstrap_infidelity(data, chunk=chunk, resamples=1000, rng=np.random.default_rng(0))
    for j in (0, 4):
        assert stats[j]["mean"] == pytest.approx(2 / chunk / 4, rel=0.15)


def test_bootstrap_deterministic_counts_have_zero_spread():
    data = TomographyData({0: {"X": (1000, 0), "Y": (1000, 0), "Z": (1000, 0)}})
    stats = bootstrap_infidelity(data, chunk=1000, resamples=20, rng=np.random.default_rng(0))
    assert stats[0]["variance"] == pytest.approx(0, abs=1e-20)


def test_bootstrap_single_resample_has_zero_variance():
    data = counts_from_states({1: dephasing(0.2).apply_dm(ideal_state(1))}, shots=3000)
    stats = bootstrap_infidelity(data, resamples=1, rng=np.random.default_rng(0))
    assert stats[1]["variance"] == 0


def test_bootstrap_small_rotation():
    eps = 0.1
    j = 0
    rho = rx(eps) @ ideal_state(j) @ rx(eps).conj().T
    analytic = math.sin(eps / 2) ** 2
    data = counts_from_states({j: rho}, shots=3000)
    stats = bootstrap_infidelity(data, chunk=1000, resamples=400, rng=np.random.default_rng(1))
    assert abs(stats[j]["mean"] - analytic) < 3 * math.sqrt(stats[j]["variance"])


def test_bootstrap_needs_enough_shots():
    data = counts_from_states({0: ideal_state(0)}, shots=500)
    with pytest.raises(ValueError):
        bootstrap_infidelity(data, chunk=1000)


def test_csv_round_trip(tmp_path):
    data = counts_from_states(load_reference_states(), shots=3000)
    path = tmp_path / "counts.csv"
    data.to_csv(path)
    again = TomographyData.from_csv(path)
    assert again.counts == data.counts
    assert again.shots(3, "Y") == 3000


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("theta_index,basis,count\n0,X,5\n")
    with pytest.raises(ValueError, match="missing columns"):
        TomographyData.from_csv(bad)
    bad.write_text("theta_index,basis,outcome,count\n0,X,?,5\n")
    with pytest.raises(ValueError, match="bad outcome"):
        TomographyData.from_csv(bad)
    with pytest.raises(ValueError):
        TomographyData({0: {"W": (1, 1)}})


def test_fit_report_fields():
    doc = fit_report(load_reference_states(), starts=2)
    assert set(doc) >= {"eps_f", "eps_1", "ptm", "lam", "multistart_objectives", "mean_infidelity"}
    assert len(doc["lam"]) == 4 and len(doc["lam"][0][0]) == 2
