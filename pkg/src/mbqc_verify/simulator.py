"""Dense statevector simulator with mid-circuit measurement, reset and
trajectory-sampled Kraus noise.

Qubits live in numbered *slots*. A slot is allocated in ``|0>``, operated on,
measured (which resets it to ``|0>``) and freed, after which the slot number
may be handed out again. The amplitude array keeps one tensor axis per live
slot, so the cost of every operation scales with the number of qubits that are
simultaneously alive, not with the size of the measurement pattern.

Angles in the YZ plane follow ``|theta> = Rx(theta)|0>
= cos(theta/2)|0> - i sin(theta/2)|1>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = (I2, X, Y, Z)

CZ = np.diag([1, 1, 1, -1]).astype(complex)
XX = np.kron(H, H) @ CZ @ np.kron(H, H)

NORM_TOL = 1e-10
COMPLETENESS_TOL = 1e-8


class SimulationError(RuntimeError):
    """Raised for invalid slot usage."""


# -- gate matrices ---------------------------------------------------------


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    """Virtual phase gate ``exp(-i theta/2 Z)``."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def u1q(theta: float, phi: float) -> np.ndarray:
    """Native single-qubit rotation ``exp(-i theta/2 (cos(phi) X + sin(phi) Y))``."""
    axis = np.cos(phi) * X + np.sin(phi) * Y
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * axis


def zz(theta: float) -> np.ndarray:
    """Native two-qubit interaction ``exp(-i theta/2 Z(x)Z)``."""
    phases = np.exp(-0.5j * theta * np.array([1, -1, -1, 1]))
    return np.diag(phases)


def yz_state(theta: float) -> np.ndarray:
    """Amplitudes of ``|theta>`` in the YZ plane."""
    return np.array([np.cos(theta / 2), -1j * np.sin(theta / 2)])


# -- channels --------------------------------------------------------------


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map on one or two qubits given by its Kraus operators."""

    ops: tuple[np.ndarray, ...]
    # branch probabilities when every K^dag K is a multiple of I (mixed unitary)
    fixed_weights: tuple[float, ...] | None = field(default=None, init=False, compare=False, repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.ops)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if dim not in (2, 4) or any(k.shape != (dim, dim) for k in ops):
            raise ValueError("Kraus operators must all be 2x2 or all 4x4")
        total = sum(k.conj().T @ k for k in ops)
        if not np.allclose(total, np.eye(dim), atol=COMPLETENESS_TOL):
            raise ValueError("Kraus operators violate completeness (not trace preserving)")
        object.__setattr__(self, "ops", ops)
        weights = []
        for k in ops:
            kk = k.conj().T @ k
            c = kk[0, 0].real
            if not np.allclose(kk, c * np.eye(dim), atol=1e-12):
                break
            weights.append(c)
        else:
            object.__setattr__(self, "fixed_weights", tuple(weights))

    @property
    def n_qubits(self) -> int:
        return 1 if self.ops[0].shape[0] == 2 else 2

    def apply_dm(self, rho: np.ndarray) -> np.ndarray:
        """Exact action on a density matrix."""
        return sum(k @ rho @ k.conj().T for k in self.ops)

    def choi(self) -> np.ndarray:
        """Unnormalised Choi matrix ``sum_ij |i><j| (x) E(|i><j|)`` (single qubit only)."""
        if self.n_qubits != 1:
            raise ValueError("choi() is only defined for single-qubit channels")
        lam = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2), dtype=complex)
                e[i, j] = 1
                lam += np.kron(e, self.apply_dm(e))
        return lam


def identity_channel(n_qubits: int = 1) -> KrausChannel:
    return KrausChannel((np.eye(2**n_qubits, dtype=complex),))


def depolarizing(p: float, n_qubits: int = 1) -> KrausChannel:
    """``rho -> (1-p) rho + p I/d``, as a uniform Pauli mixture."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    if n_qubits == 1:
        paulis = list(PAULIS)
    else:
        paulis = [np.kron(a, b) for a in PAULIS for b in PAULIS]
    n = len(paulis)
    weights = [1 - p * (n - 1) / n] + [p / n] * (n - 1)
    return KrausChannel(tuple(np.sqrt(w) * P for w, P in zip(weights, paulis)))


def dephasing(p: float) -> KrausChannel:
    """Phase-flip channel that shrinks coherences by ``1 - p``.

    ``rho -> (1 - p/2) rho + (p/2) Z rho Z``; ``p = 1`` removes all coherence.
    """
    if not 0 <= p <= 1:
        raise ValueError("dephasing strength must lie in [0, 1]")
    return KrausChannel((np.sqrt(1 - p / 2) * I2, np.sqrt(p / 2) * Z))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel((np.asarray(u, dtype=complex),))


@dataclass(frozen=True)
class NoiseModel:
    """Noise attached to operation classes.

    ``prep`` acts after every single-qubit preparation. ``prep_by_theta``
    overrides it for ``|j pi/4>`` preparations keyed by ``j``, which makes the
    preparation noise deliberately secret dependent.
    """

    prep: KrausChannel | None = None
    prep_by_theta: Mapping[int, KrausChannel] | None = None
    gate1: KrausChannel | None = None
    gate2: KrausChannel | None = None
    meas_flip: float = 0.0

    def __post_init__(self):
        if not 0 <= self.meas_flip <= 1:
            raise ValueError("measurement flip probability must lie in [0, 1]")
        for name, ch, nq in (("prep", self.prep, 1), ("gate1", self.gate1, 1), ("gate2", self.gate2, 2)):
            if ch is not None and ch.n_qubits != nq:
                raise ValueError(f"{name} channel must act on {nq} qubit(s)")
        if self.prep_by_theta is not None:
            for j, ch in self.prep_by_theta.items():
                if not 0 <= int(j) < 8 or ch.n_qubits != 1:
                    raise ValueError("prep_by_theta maps j in 0..7 to single-qubit channels")

    @property
    def is_noiseless(self) -> bool:
        return (
            self.prep is None
            and not self.prep_by_theta
            and self.gate1 is None
            and self.gate2 is None
            and self.meas_flip == 0
        )

    def prep_channel(self, theta_index: int | None) -> KrausChannel | None:
        if theta_index is not None and self.prep_by_theta and theta_index in self.prep_by_theta:
            return self.prep_by_theta[theta_index]
        return self.prep


NOISELESS = NoiseModel()


# -- state -----------------------------------------------------------------


@dataclass
class StateVector:
    """Pure state over the currently allocated slots.

    ``psi`` has one axis of length 2 per live slot; ``axes`` lists the slot
    number owning each axis in order.
    """

    noise: NoiseModel = NOISELESS
    psi: np.ndarray = field(default_factory=lambda: np.ones((), dtype=complex))
    axes: list[int] = field(default_factory=list)

    # bookkeeping

    @property
    def n_qubits(self) -> int:
        return len(self.axes)

    def _axis(self, slot: int) -> int:
        try:
            return self.axes.index(slot)
        except ValueError:
            raise SimulationError(f"slot {slot} is not allocated") from None

    def allocate(self, slot: int) -> None:
        if slot in self.axes:
            raise SimulationError(f"slot {slot} is already allocated")
        self.psi = np.multiply.outer(self.psi, np.array([1, 0], dtype=complex))
        self.axes.append(slot)

    def free(self, slot: int) -> None:
        """Release a slot that has been reset to ``|0>``."""
        ax = self._axis(slot)
        psi = np.moveaxis(self.psi, ax, 0)
        if not np.allclose(psi[1], 0, atol=1e-9):
            raise SimulationError(f"slot {slot} freed while not in |0>")
        self.psi = psi[0]
        self.axes.pop(ax)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    # unitaries

    def apply(self, u: np.ndarray, slots: Sequence[int]) -> None:
        """Apply a ``2^k x 2^k`` matrix to ``slots`` (first slot is most significant)."""
        k = len(slots)
        if len(set(slots)) != k:
            raise SimulationError("slot collision")
        axes = [self._axis(s) for s in slots]
        u = np.asarray(u).reshape((2,) * (2 * k))
        out = np.tensordot(u, self.psi, axes=(list(range(k, 2 * k)), axes))
        self.psi = np.moveaxis(out, list(range(k)), axes)

    def apply_channel(self, ch: KrausChannel | None, slots: Sequence[int], rng: np.random.Generator) -> None:
        """Sample one Kraus branch with probability ``||K_i psi||^2`` and renormalise."""
        if ch is None:
            return
        if len(ch.ops) == 1:
            self.apply(ch.ops[0], slots)
            return
        if ch.fixed_weights is not None:
            # state-independent branch probabilities: draw first, apply one operator
            w = np.array(ch.fixed_weights)
            i = rng.choice(len(w), p=w / w.sum())
            self.apply(ch.ops[i] / np.sqrt(w[i]), slots)
            return
        saved = self.psi
        branches = []
        weights = []
        for k in ch.ops:
            self.psi = saved
            self.apply(k, slots)
            branches.append(self.psi)
            weights.append(float(np.vdot(self.psi, self.psi).real))
        weights = np.array(weights)
        i = rng.choice(len(branches), p=weights / weights.sum())
        self.psi = branches[i] / np.sqrt(weights[i])

    # protocol operations

    def prep_theta(self, slot: int, theta: float, rng: np.random.Generator, theta_index: int | None = None) -> None:
        """Reset ``slot`` and rotate it to ``|theta>``; then preparation noise."""
        self.reset(slot)
        self.apply(rx(theta), [slot])
        self.apply_channel(self.noise.prep_channel(theta_index), [slot], rng)
        self.apply_channel(self.noise.gate1, [slot], rng)

    def prep_dummy(self, slot: int, d: int, rng: np.random.Generator) -> None:
        """Reset ``slot`` and prepare ``Z^d |+>``."""
        self.reset(slot)
        self.apply(H, [slot])
        if d:
            self.apply(Z, [slot])
        self.apply_channel(self.noise.prep_channel(None), [slot], rng)
        self.apply_channel(self.noise.gate1, [slot], rng)

    def apply_xx(self, slot_u: int, slot_v: int, rng: np.random.Generator) -> None:
        self.apply(XX, [slot_u, slot_v])
        self.apply_channel(self.noise.gate2, [slot_u, slot_v], rng)

    def _project_z(self, slot: int, rng: np.random.Generator) -> int:
        ax = self._axis(slot)
        psi = np.moveaxis(self.psi, ax, 0)
        p1 = float(np.vdot(psi[1], psi[1]).real)
        p1 = min(max(p1 / float(np.vdot(psi, psi).real), 0.0), 1.0)
        bit = int(rng.random() < p1)
        post = np.zeros_like(psi)
        # collapse and reset in one step: the surviving branch goes to |0>
        post[0] = psi[bit] / np.sqrt(p1 if bit else 1 - p1)
        self.psi = np.moveaxis(post, 0, ax)
        return bit

    def _flip(self, bit: int, rng: np.random.Generator) -> int:
        if self.noise.meas_flip and rng.random() < self.noise.meas_flip:
            return bit ^ 1
        return bit

    def measure_angle(self, slot: int, delta: float, rng: np.random.Generator) -> int:
        """Measure in ``{|delta>, |delta+pi>}``; 0 means ``|delta>``. Resets the slot."""
        self.apply(rx(-delta), [slot])
        return self._flip(self._project_z(slot, rng), rng)

    def measure_z(self, slot: int, rng: np.random.Generator) -> int:
        return self._flip(self._project_z(slot, rng), rng)

    def measure_x(self, slot: int, rng: np.random.Generator) -> int:
        """X-basis measurement; 0 means ``|+>``. Resets the slot."""
        self.apply(H, [slot])
        return self._flip(self._project_z(slot, rng), rng)

    def reset(self, slot: int) -> None:
        ax = self._axis(slot)
        psi = np.moveaxis(self.psi, ax, 0)
        p1 = float(np.vdot(psi[1], psi[1]).real)
        if p1 > 1e-14:
            raise SimulationError(f"slot {slot} must be measured before it is reset")

    def sample_random_bit(self, slot: int, rng: np.random.Generator) -> int:
        """Prepare ``|+>`` in a scratch slot and read it out in the Z basis."""
        self.allocate(slot)
        self.apply(H, [slot])
        self.apply_channel(self.noise.gate1, [slot], rng)
        bit = self.measure_z(slot, rng)
        self.free(slot)
        return bit

    # diagnostics

    def expectation(self, ops: Mapping[int, np.ndarray]) -> float:
        """``<psi| (x)_slot op |psi>`` for a product of single-slot operators."""
        phi = self.psi
        for slot, op in ops.items():
            ax = self._axis(slot)
            phi = np.moveaxis(np.tensordot(op, phi, axes=([1], [ax])), 0, ax)
        return float(np.vdot(self.psi, phi).real)

    def probability_one(self, slot: int) -> float:
        psi = np.moveaxis(self.psi, self._axis(slot), 0)
        return float(np.vdot(psi[1], psi[1]).real)

    def dump(self) -> str:
        """Human-readable amplitude listing (at most 10 qubits)."""
        if self.n_qubits > 10:
            raise SimulationError("amplitude dump limited to 10 qubits")
        lines = [f"slots {self.axes}"]
        flat = self.psi.reshape(-1)
        for idx, amp in enumerate(flat):
            if abs(amp) > 1e-12:
                lines.append(f"|{idx:0{self.n_qubits}b}> {amp.real:+.6f}{amp.imag:+.6f}j")
        return "\n".join(lines)


def shot_rng(master_seed: int, *counter: int) -> np.random.Generator:
    """Independent generator for a shot, derived from the master seed and a counter.

    The derivation only depends on ``(master_seed, counter)``, so results are
    identical whichever worker happens to run the shot.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(counter)))
