"""Noisy circuit execution.

An :class:`Executor` binds a register and a noise model, pre-compiles every
channel it will need, and then runs circuits as pure functions of
(circuit, seed).  Noiseless circuits run on statevectors; as soon as the
model introduces any non-unitary channel the run switches to density
matrices.  Coherent-only noise (over-rotations, crosstalk) stays on the
statevector path.

Per cycle the engine applies: the ideal cycle unitary, then coherent CNOT
rotations, then crosstalk rotations (hard cycles only), then the stochastic
Pauli channel of each gate, then damping (gate qubits for the gate's
duration, idle qubits for the cycle duration).
"""

from __future__ import annotations

import functools

import numpy as np

from .circuits import Circuit, Cycle, cycle_unitary
from .noise import NoiseModel, coherent_overrotation, damping_channel, pauli_channel
from .pauli import PauliString
from .sim import (
    MAX_QUBITS,
    DensityMatrix,
    KrausChannel,
    SimulationError,
    State,
    StateVector,
    embed_operator,
    readout_distribution,
    rng_from,
    sample_counts,
)


class Executor:
    """Runs circuits on a fixed register under one noise model."""

    def __init__(
        self,
        register: tuple[int, ...],
        noise: NoiseModel | None = None,
        force_density: bool = False,
    ):
        self.register = tuple(register)
        self.n = len(self.register)
        if self.n > MAX_QUBITS:
            raise SimulationError(f"registers are limited to {MAX_QUBITS} qubits")
        self.noise = noise
        self.use_density = force_density or (
            noise is not None and noise.introduces_channels(self.register)
        )
        self._superops: dict = {}
        self._embedded_unitary: dict = {}
        self._damping: dict = {}
        self._pauli_chans: dict = {}
        self._parity: dict = {}
        self._readout = None
        self._prep_flips: list[tuple[int, KrausChannel]] = []
        if noise is not None:
            self._readout = {
                i: np.asarray(noise.readout[q], dtype=float)
                for i, q in enumerate(self.register)
                if q in noise.readout
            } or None
            for i, q in enumerate(self.register):
                p = noise.prep_flip.get(q, 0.0)
                if p > 0:
                    self._prep_flips.append((i, pauli_channel({"X": p})))

    # -- cached embeddings ----------------------------------------------

    def _superop(self, key, channel: KrausChannel, positions: tuple[int, ...]):
        """Embedded channel as a superoperator on row-major vec(rho)."""
        cache_key = (key, positions)
        if cache_key not in self._superops:
            acc = None
            for k in channel.operators:
                full = embed_operator(k, positions, self.n)
                term = np.kron(full, full.conj())
                acc = term if acc is None else acc + term
            self._superops[cache_key] = acc
        return self._superops[cache_key]

    def _unitary_full(self, key, mat: np.ndarray, positions: tuple[int, ...]):
        cache_key = (key, positions)
        if cache_key not in self._embedded_unitary:
            self._embedded_unitary[cache_key] = embed_operator(mat, positions, self.n)
        return self._embedded_unitary[cache_key]

    def _pauli_channel_for(self, gate_class: str, pair: tuple[int, int] | None):
        key = (gate_class, pair)
        if key not in self._pauli_chans:
            probs = self.noise.gate_pauli_probs(gate_class, pair)
            if probs and any(p > 0 for p in probs.values()):
                self._pauli_chans[key] = pauli_channel(probs)
            else:
                self._pauli_chans[key] = None
        return self._pauli_chans[key]

    def _damping_channel(self, qubit_label: int, duration: float) -> KrausChannel | None:
        noise = self.noise
        if noise is None or duration <= 0:
            return None
        if qubit_label not in noise.t1 and qubit_label not in noise.t2:
            return None
        key = (qubit_label, duration)
        if key not in self._damping:
            t1 = noise.t1.get(qubit_label, np.inf)
            t2 = noise.t2.get(qubit_label)
            self._damping[key] = damping_channel(t1, t2, duration)
        return self._damping[key]

    # -- state transforms -------------------------------------------------

    def _apply_unitary(self, state, key, mat, positions):
        full = self._unitary_full(key, mat, positions)
        if isinstance(state, np.ndarray) and state.ndim == 1:
            return full @ state
        return full @ state @ full.conj().T

    def _apply_kraus(self, rho, key, channel, positions):
        dim = rho.shape[0]
        s = self._superop(key, channel, positions)
        return (s @ rho.reshape(-1)).reshape(dim, dim)

    # -- execution ---------------------------------------------------------

    def run(self, circuit: Circuit, initial: State | None = None) -> State:
        if tuple(circuit.qubits) != self.register:
            raise SimulationError(
                f"circuit register {circuit.qubits} does not match executor register"
            )
        noise = self.noise
        if initial is not None:
            state = initial.entries.copy() if isinstance(initial, DensityMatrix) else (
                np.outer(initial.amplitudes, initial.amplitudes.conj())
                if self.use_density
                else initial.amplitudes.copy()
            )
        elif self.use_density:
            state = np.zeros((2**self.n, 2**self.n), dtype=complex)
            state[0, 0] = 1.0
        else:
            state = np.zeros(2**self.n, dtype=complex)
            state[0] = 1.0

        for pos, chan in self._prep_flips:
            state = self._apply_kraus(state, ("prep", pos), chan, (pos,))

        for cyc in circuit.cycles:
            state = self._run_cycle(state, cyc)

        if self.use_density or state.ndim == 2:
            return DensityMatrix(state)
        return StateVector(state)

    def _positions(self, qubits: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(self.register.index(q) for q in qubits)

    def _run_cycle(self, state, cyc: Cycle):
        noise = self.noise
        ideal = cycle_unitary(cyc, self.register)
        if state.ndim == 1:
            state = ideal @ state
        else:
            state = ideal @ state @ ideal.conj().T
        if noise is None:
            return state

        # coherent over-rotation riding on each CNOT
        for g in cyc.gates:
            if g.name != "CNOT":
                continue
            rot = noise.rotation_for_pair(g.qubits)
            if rot is not None and rot[1] != 0.0:
                axis, angle = rot
                state = self._apply_unitary(
                    state,
                    ("rot", axis, angle),
                    self._rotation(axis, angle),
                    self._positions(g.qubits),
                )

        # spectator crosstalk during hard cycles
        if cyc.kind == "hard":
            fired = {frozenset(p) for p in cyc.cnot_pairs()}
            for term in noise.crosstalk:
                if frozenset(term.pair) in fired and term.spectator in self.register:
                    pos = self._positions((term.pair[0], term.spectator))
                    state = self._apply_unitary(
                        state, ("xt", term.angle), self._rotation("ZZ", term.angle), pos
                    )

        # stochastic Pauli errors per gate
        for g in cyc.gates:
            pair = g.qubits if g.name == "CNOT" else None
            chan = self._pauli_channel_for(g.gate_class, pair)
            if chan is not None:
                key = ("pauli", g.gate_class, pair)
                state = self._as_density(state)
                state = self._apply_kraus(state, key, chan, self._positions(g.qubits))

        # damping: gate qubits for the gate duration, idle for the cycle
        cycle_dur = max((noise.duration(g.gate_class) for g in cyc.gates), default=0.0)
        busy = {}
        for g in cyc.gates:
            for q in g.qubits:
                busy[q] = noise.duration(g.gate_class)
        for i, q in enumerate(self.register):
            dur = busy.get(q, cycle_dur)
            chan = self._damping_channel(q, dur)
            if chan is not None:
                state = self._as_density(state)
                state = self._apply_kraus(state, ("damp", q, dur), chan, (i,))
        return state

    def _as_density(self, state):
        if state.ndim == 1:
            return np.outer(state, state.conj())
        return state

    @staticmethod
    @functools.lru_cache(maxsize=512)
    def _rotation(axis: str, angle: float) -> np.ndarray:
        return coherent_overrotation(axis, angle)

    # -- measurement -------------------------------------------------------

    def sample(self, state: State, shots: int, seed) -> dict[str, int]:
        """Counts through this model's readout confusion."""
        return sample_counts(state, self._readout, shots, seed)

    def measured_expectation(
        self, state: State, observable: PauliString, shots: int | None, seed=0
    ) -> tuple[float, float]:
        """Estimate <observable> (a signed Z/I string) from sampled counts.

        ``shots=None`` returns the analytic expectation through the readout
        confusion (an infinite-shot surrogate) with zero shot error.
        """
        if any(c not in ("I", "Z") for c in observable.letters):
            raise SimulationError("measured observables must be Z/I strings")
        support = tuple(i for i, c in enumerate(observable.letters) if c != "I")
        probs = state.probabilities()
        probs = probs / probs.sum()
        probs = readout_distribution(probs, self._readout, state.n_qubits)
        if support not in self._parity:
            self._parity[support] = _parity_vector(state.n_qubits, support)
        parity = self._parity[support]
        if shots is None:
            return float(observable.sign * np.dot(parity, probs)), 0.0
        rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed)
        draws = rng.multinomial(shots, probs)
        x = float(observable.sign * np.dot(parity, draws) / shots)
        err = float(np.sqrt(max(0.0, 1.0 - x * x) / shots))
        return x, err


def _parity_vector(n: int, support: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(2**n)
    acc = np.zeros(2**n, dtype=int)
    for q in support:
        acc ^= (idx >> (n - 1 - q)) & 1
    return 1.0 - 2.0 * acc


def run_circuit(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    force_density: bool = False,
) -> State:
    """One-shot convenience wrapper around :class:`Executor`."""
    return Executor(circuit.qubits, noise, force_density=force_density).run(circuit)
