"""Secret dependency of single-qubit preparation noise.

Given tomographic reconstructions ``rho_j`` of the eight preparations
``|j pi/4>``, find the single CPTP map ``E`` that best explains all of them,

    eps_F = min_E (1/8) sum_j || E(|j pi/4><j pi/4|) - rho_j ||_F ,

and report how far the best secret-independent explanation is from the data.

Channels are handled as unnormalised Choi matrices ``Lam = sum_ij |i><j| (x)
E(|i><j|)`` (input system first), so trace preservation reads
``tr_B Lam = I`` and complete positivity reads ``Lam >= 0``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from .simulator import PAULIS, yz_state

BASES = ("X", "Y", "Z")
_PAULI = dict(zip(("I",) + BASES, PAULIS))
THETAS = tuple(range(8))

TP_TOL = 1e-6
PSD_TOL = 1e-8


class FitError(RuntimeError):
    """The solver ran out of iterations; ``best`` holds the best iterate found."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


# -- states ----------------------------------------------------------------


def ideal_state(j: int) -> np.ndarray:
    psi = yz_state(j * math.pi / 4)
    return np.outer(psi, psi.conj())


def clip_psd(rho: np.ndarray) -> np.ndarray:
    """Zero out negative eigenvalues and renormalise the trace."""
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    if w.min() >= 0:
        return rho
    w = np.clip(w, 0, None)
    w /= w.sum()
    return (v * w) @ v.conj().T


def is_density_matrix(rho: np.ndarray) -> bool:
    return (
        rho.shape == (2, 2)
        and np.allclose(rho, rho.conj().T, atol=1e-10)
        and abs(np.trace(rho) - 1) < 1e-8
        and np.linalg.eigvalsh(rho).min() >= -PSD_TOL
    )


@dataclass(frozen=True)
class TomographyData:
    """``counts[j][basis] = (n_plus, n_minus)`` for each preparation index ``j``."""

    counts: Mapping[int, Mapping[str, tuple[int, int]]]

    def __post_init__(self):
        for j, per in self.counts.items():
            for basis, (plus, minus) in per.items():
                if basis not in BASES:
                    raise ValueError(f"unknown basis {basis!r}")
                if plus < 0 or minus < 0:
                    raise ValueError("counts must be non-negative")

    def shots(self, j: int, basis: str) -> int:
        return sum(self.counts[j][basis])

    @classmethod
    def from_csv(cls, path) -> "TomographyData":
        """Columns ``theta_index, basis, outcome, count``; outcome is ``+``/``-`` (or 0/1)."""
        counts: dict[int, dict[str, list[int]]] = {}
        with open(path, newline="") as fh:
            rows = csv.DictReader(fh)
            missing = {"theta_index", "basis", "outcome", "count"} - set(rows.fieldnames or ())
            if missing:
                raise ValueError(f"tomography CSV is missing columns {sorted(missing)}")
            for row in rows:
                j = int(row["theta_index"])
                basis = row["basis"].strip().upper()
                outcome = row["outcome"].strip()
                if outcome in ("+", "0", "+1"):
                    k = 0
                elif outcome in ("-", "1", "-1"):
                    k = 1
                else:
                    raise ValueError(f"bad outcome {outcome!r}")
                counts.setdefault(j, {}).setdefault(basis, [0, 0])[k] += int(row["count"])
        return cls({j: {b: tuple(c) for b, c in per.items()} for j, per in counts.items()})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["theta_index", "basis", "outcome", "count"])
            for j in sorted(self.counts):
                for basis in BASES:
                    plus, minus = self.counts[j][basis]
                    wr.writerow([j, basis, "+", plus])
                    wr.writerow([j, basis, "-", minus])


def reconstruct_state(counts: Mapping[str, tuple[int, int]], clip: bool = True) -> np.ndarray:
    """Linear inversion ``rho = (I + r_x X + r_y Y + r_z Z) / 2`` from Pauli counts."""
    rho = 0.5 * _PAULI["I"].copy()
    for basis in BASES:
        if basis not in counts:
            raise ValueError(f"missing {basis} counts")
        plus, minus = counts[basis]
        n = plus + minus
        if n == 0:
            raise ValueError(f"zero shots in basis {basis}")
        rho = rho + 0.5 * (plus - minus) / n * _PAULI[basis]
    return clip_psd(rho) if clip else rho


def counts_from_states(states: Mapping[int, np.ndarray], shots: int = 3000) -> TomographyData:
    """Counts whose frequencies reproduce ``states`` up to rounding."""
    out = {}
    for j, rho in states.items():
        per = {}
        for basis in BASES:
            r = float(np.trace(rho @ _PAULI[basis]).real)
            plus = int(round(shots * (1 + r) / 2))
            per[basis] = (plus, shots - plus)
        out[j] = per
    return TomographyData(out)


def fidelity(rho: np.ndarray, j: int) -> float:
    """``<theta|rho|theta>`` for ``theta = j pi/4``."""
    psi = yz_state(j * math.pi / 4)
    return float(np.real(psi.conj() @ rho @ psi))


def load_reference_states() -> dict[int, np.ndarray]:
    """Reference reconstructions of the eight YZ-plane preparations (4-decimal rounding)."""
    text = resources.files("mbqc_verify").joinpath("data/preparation_tomography.json").read_text()
    doc = json.loads(text)["states"]
    return {int(j): np.array([[complex(*e) for e in row] for row in m]) for j, m in doc.items()}


def bootstrap_infidelity(
    data: TomographyData,
    chunk: int = 1000,
    resamples: int = 1000,
    rng: np.random.Generator | None = None,
) -> dict[int, dict[str, float]]:
    """Infidelity statistics from resampling ``chunk`` shots per basis, with replacement."""
    rng = rng if rng is not None else np.random.default_rng()
    out = {}
    for j in sorted(data.counts):
        draws = {}
        for basis in BASES:
            plus, minus = data.counts[j][basis]
            n = plus + minus
            if n < chunk:
                raise ValueError(f"basis {basis} of preparation {j} has {n} < {chunk} shots")
            draws[basis] = rng.binomial(chunk, plus / n, size=resamples)
        inf = np.empty(resamples)
        for k in range(resamples):
            rho = reconstruct_state({b: (int(draws[b][k]), chunk - int(draws[b][k])) for b in BASES})
            inf[k] = 1 - fidelity(rho, j)
        out[j] = {"mean": float(inf.mean()), "variance": float(inf.var())}
    return out


# -- Choi matrices ---------------------------------------------------------


def choi_from_params(x: Iterable[float]) -> np.ndarray:
    """Hermitian 4x4 matrix from ``(d1..d4, a1..a6, z1..z6)``."""
    x = np.asarray(list(x), dtype=float)
    if x.shape != (16,):
        raise ValueError("need 16 real parameters")
    lam = np.diag(x[:4]).astype(complex)
    iu = np.triu_indices(4, 1)
    lam[iu] = x[4:10] + 1j * x[10:16]
    lam[(iu[1], iu[0])] = x[4:10] - 1j * x[10:16]
    return lam


def choi_to_params(lam: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(4, 1)
    return np.concatenate([np.diag(lam).real, lam[iu].real, lam[iu].imag])


def choi_apply(lam: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``tr_A[(rho^T (x) I) Lam]``."""
    return np.einsum("ij,ibjc->bc", rho, lam.reshape(2, 2, 2, 2))


def partial_trace_out(lam: np.ndarray) -> np.ndarray:
    """``tr_B Lam`` (traces out the output system)."""
    return np.einsum("ibjb->ij", lam.reshape(2, 2, 2, 2))


def identity_choi() -> np.ndarray:
    phi = np.array([1, 0, 0, 1], dtype=complex)
    return np.outer(phi, phi)


def kraus_to_choi(ops: Iterable[np.ndarray]) -> np.ndarray:
    lam = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1
            lam += np.kron(e, sum(k @ e @ k.conj().T for k in ops))
    return lam


def is_cptp(lam: np.ndarray, tp_tol: float = TP_TOL, psd_tol: float = PSD_TOL) -> bool:
    return (
        np.allclose(lam, lam.conj().T, atol=1e-10)
        and np.abs(partial_trace_out(lam) - np.eye(2)).max() <= tp_tol
        and np.linalg.eigvalsh(lam).min() >= -psd_tol
    )


def to_ptm(lam: np.ndarray) -> np.ndarray:
    """Pauli transfer matrix ``R_ij = tr(P_i E(P_j)) / 2`` in the basis (I, X, Y, Z)."""
    return np.array([[0.5 * np.trace(Pi @ choi_apply(lam, Pj)).real for Pj in PAULIS] for Pi in PAULIS])


# -- projection onto CPTP maps ---------------------------------------------


def _project_tp(lam: np.ndarray) -> np.ndarray:
    # orthogonal projection onto the affine set tr_B(Lam) = I
    return lam - np.kron(partial_trace_out(lam) - np.eye(2), np.eye(2)) / 2


def _project_psd(lam: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (lam + lam.conj().T))
    return (v * np.clip(w, 0, None)) @ v.conj().T


def project_cptp(lam: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Euclidean projection onto ``{tr_B Lam = I, Lam >= 0}`` by Dykstra's algorithm."""
    x = 0.5 * (lam + lam.conj().T)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _project_tp(x + p)
        p = x + p - y
        x = _project_psd(y + q)
        q = y + q - x
        if np.abs(partial_trace_out(x) - np.eye(2)).max() <= tol:
            break
    return x


def random_cptp_choi(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Choi matrix of a random channel (Kraus operators from a Haar-random isometry)."""
    g = rng.normal(size=(2 * rank, 2)) + 1j * rng.normal(size=(2 * rank, 2))
    q, _ = np.linalg.qr(g)
    return kraus_to_choi([q[2 * k : 2 * k + 2] for k in range(rank)])


# -- fit -------------------------------------------------------------------


def _objective(lam, ideals, rhos, smoothing):
    res = [choi_apply(lam, P) - r for P, r in zip(ideals, rhos)]
    norms = np.array([math.sqrt(np.vdot(m, m).real + smoothing**2) for m in res])
    grad = sum(np.kron(P.T, m / n) for P, m, n in zip(ideals, res, norms)) / len(rhos)
    return norms.mean(), grad


def frobenius_gap(lam: np.ndarray, states: Mapping[int, np.ndarray]) -> float:
    return float(np.mean([np.linalg.norm(choi_apply(lam, ideal_state(j)) - rho) for j, rho in states.items()]))


def trace_norm(m: np.ndarray) -> float:
    """Schatten-1 norm of a Hermitian matrix."""
    return float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum())


def trace_norm_gap(lam: np.ndarray, states: Mapping[int, np.ndarray]) -> float:
    """Mean trace distance ``||E(|theta><theta|) - rho_theta||_1 / 2`` over the preparations."""
    return float(np.mean([0.5 * trace_norm(choi_apply(lam, ideal_state(j)) - rho) for j, rho in states.items()]))


@dataclass(frozen=True)
class ChannelFit:
    lam: np.ndarray
    eps_f: float
    iterations: int
    converged: bool

    @property
    def ptm(self) -> np.ndarray:
        return to_ptm(self.lam)


def fit_secret_independent_channel(
    states: Mapping[int, np.ndarray],
    x0: np.ndarray | None = None,
    max_iter: int = 20_000,
    tol: float = 1e-10,
    smoothing: float = 1e-9,
) -> ChannelFit:
    """Best secret-independent channel under the mean Frobenius distance.

    Accelerated projected gradient on the (smoothed) convex objective with
    backtracking and adaptive restart; each step is projected onto the CPTP
    set with :func:`project_cptp`. Stops when the objective has changed by
    less than ``tol`` over 50 consecutive iterations.

    Raises :class:`FitError` (carrying the best iterate) if ``max_iter`` is
    exhausted.
    """
    js = sorted(states)
    ideals = [ideal_state(j) for j in js]
    rhos = [np.asarray(states[j], dtype=complex) for j in js]
    x = project_cptp(identity_choi() if x0 is None else x0)
    fx, gx = _objective(x, ideals, rhos, smoothing)
    y, fy, gy = x, fx, gx
    t_prev = 1.0
    step = 1.0
    best = (fx, x)
    history = [fx]
    for it in range(1, max_iter + 1):
        # backtracking on the projected step from the extrapolated point
        while True:
            cand = project_cptp(y - step * gy)
            fc, gc = _objective(cand, ideals, rhos, smoothing)
            diff = cand - y
            bound = fy + np.vdot(gy, diff).real + np.vdot(diff, diff).real / (2 * step)
            if fc <= bound + 1e-15 or step < 1e-12:
                break
            step *= 0.5
        if fc > fx:
            # restart momentum
            t_prev = 1.0
            y, fy, gy = x, fx, gx
            step *= 0.5
            if step < 1e-12:
                break
            continue
        t_next = (1 + math.sqrt(1 + 4 * t_prev**2)) / 2
        y = cand + ((t_prev - 1) / t_next) * (cand - x)
        y = project_cptp(y)
        fy, gy = _objective(y, ideals, rhos, smoothing)
        x, fx, gx = cand, fc, gc
        t_prev = t_next
        step *= 1.25
        if fx < best[0]:
            best = (fx, x)
        history.append(fx)
        if len(history) > 50 and history[-51] - history[-1] < tol:
            lam = best[1]
            return ChannelFit(lam, frobenius_gap(lam, states), it, True)
    lam = best[1]
    if step < 1e-12:
        return ChannelFit(lam, frobenius_gap(lam, states), it, True)
    raise FitError(f"no convergence after {max_iter} iterations", ChannelFit(lam, frobenius_gap(lam, states), max_iter, False))


def fit_multistart(
    states: Mapping[int, np.ndarray],
    starts: int = 5,
    rng: np.random.Generator | None = None,
    **kwargs,
) -> tuple[ChannelFit, list[float]]:
    """Fit from the identity channel plus ``starts - 1`` random channels; keep the best."""
    rng = rng if rng is not None else np.random.default_rng(0)
    inits = [None] + [random_cptp_choi(rng) for _ in range(starts - 1)]
    fits = [fit_secret_independent_channel(states, x0=x0, **kwargs) for x0 in inits]
    best = min(fits, key=lambda f: f.eps_f)
    return best, [f.eps_f for f in fits]


def fit_report(states: Mapping[int, np.ndarray], starts: int = 5, seed: int = 0) -> dict:
    fit, objectives = fit_multistart(states, starts, np.random.default_rng(seed))
    return {
        "eps_f": fit.eps_f,
        "eps_1": trace_norm_gap(fit.lam, states),
        "ptm": fit.ptm.round(12).tolist(),
        "lam": [[[z.real, z.imag] for z in row] for row in fit.lam.round(12)],
        "multistart_objectives": objectives,
        "multistart_spread": max(objectives) - min(objectives),
        "mean_infidelity": float(np.mean([1 - fidelity(clip_psd(states[j]), j) for j in sorted(states)])),
    }
