"""Noisy density-matrix simulator used as the reference executor.

After every gate a noise channel of strength ``p`` acts on that gate's qubits:

* depolarizing, one qubit: ``(1 - p) rho + p/3 (X rho X + Y rho Y + Z rho Z)``
* depolarizing, two qubits: ``(1 - p) rho + p/15 sum_{P != II} P rho P``
* amplitude damping: the usual two-Kraus channel with decay ``p``, applied to
  each target qubit separately.

Idle qubits are noiseless.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from zne.circuit import MAX_ORACLE_QUBITS, Circuit, TooManyQubits, apply_operator, gate_matrix

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class SimulationError(Exception):
    pass


class DimensionMismatch(SimulationError):
    pass


class NoiseKind(enum.Enum):
    NONE = "none"
    DEPOLARIZING = "depolarizing"
    AMPLITUDE_DAMPING = "amplitude-damping"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.NONE
    p: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise strength must be in [0, 1], got {self.p}")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """Parses ``none``, ``depolarizing:<p>`` or ``amplitude-damping:<p>``."""
        text = text.strip()
        if text == "none":
            return cls()
        kind, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"noise spec {text!r}: expected <kind>:<p> or 'none'")
        try:
            k = NoiseKind(kind)
        except ValueError:
            raise ValueError(f"noise spec {text!r}: unknown kind {kind!r}") from None
        if k is NoiseKind.NONE:
            raise ValueError("noise kind 'none' takes no strength")
        try:
            p = float(value)
        except ValueError:
            raise ValueError(f"noise spec {text!r}: bad strength {value!r}") from None
        return cls(k, p)

    def __str__(self) -> str:
        if self.kind is NoiseKind.NONE:
            return "none"
        return f"{self.kind.value}:{self.p!r}"


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of Pauli strings, one letter per qubit (qubit 0 first)."""

    terms: tuple[tuple[float, str], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(c), str(s).upper()) for c, s in self.terms)
        if not terms:
            raise ValueError("observable needs at least one term")
        n = len(terms[0][1])
        for c, s in terms:
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient {c} for {s!r}")
            if len(s) != n or n == 0:
                raise ValueError("all Pauli strings must have the same non-zero length")
            if set(s) - set("IXYZ"):
                raise ValueError(f"Pauli string {s!r} has letters outside IXYZ")
        object.__setattr__(self, "terms", terms)

    @property
    def num_qubits(self) -> int:
        return len(self.terms[0][1])

    @classmethod
    def pauli(cls, paulis: str, coeff: float = 1.0) -> "Observable":
        return cls(((coeff, paulis),))

    @classmethod
    def projector(cls, bitstring: str) -> "Observable":
        """``|b><b|`` expanded as ``prod_q (I +- Z_q) / 2``."""
        n = len(bitstring)
        terms = []
        for mask in itertools.product((0, 1), repeat=n):
            sign = 1.0
            for bit, use_z in zip(bitstring, mask):
                if use_z and bit == "1":
                    sign = -sign
            paulis = "".join("Z" if z else "I" for z in mask)
            terms.append((sign / 2**n, paulis))
        return cls(tuple(terms))

    def matrix(self) -> np.ndarray:
        return sum(c * pauli_string_matrix(s) for c, s in self.terms)

    def to_dict(self) -> dict:
        return {"terms": [{"coeff": c, "paulis": s} for c, s in self.terms]}

    @classmethod
    def from_dict(cls, data) -> "Observable":
        if not isinstance(data, dict) or set(data) != {"terms"}:
            raise ValueError('observable: expected an object with exactly the key "terms"')
        if not isinstance(data["terms"], list):
            raise ValueError("observable.terms: expected a list")
        terms = []
        for i, rec in enumerate(data["terms"]):
            if not isinstance(rec, dict) or set(rec) != {"coeff", "paulis"}:
                raise ValueError(f'terms[{i}]: expected keys "coeff" and "paulis"')
            c, s = rec["coeff"], rec["paulis"]
            if isinstance(c, bool) or not isinstance(c, (int, float)):
                raise ValueError(f"terms[{i}].coeff: expected a number, got {c!r}")
            if not isinstance(s, str):
                raise ValueError(f"terms[{i}].paulis: expected a string, got {s!r}")
            terms.append((c, s))
        return cls(tuple(terms))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Observable":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"observable: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data)


def pauli_string_matrix(paulis: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for letter in paulis:
        out = np.kron(out, PAULIS[letter])
    return out


class DensityMatrix:
    """A ``2**n x 2**n`` density matrix with physicality checks."""

    def __init__(self, data: np.ndarray, num_qubits: int | None = None):
        data = np.asarray(data, dtype=complex)
        if num_qubits is None:
            num_qubits = int(round(np.log2(data.shape[0])))
        dim = 2**num_qubits
        self.num_qubits = num_qubits
        self.data = data.reshape(dim, dim)

    @classmethod
    def zero_state(cls, num_qubits: int) -> "DensityMatrix":
        dim = 2**num_qubits
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho, num_qubits)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = (self.data + self.data.conj().T) / 2
        return float(np.linalg.eigvalsh(herm)[0])

    def is_physical(self, tol: float = 1e-9) -> bool:
        return (
            abs(self.trace - 1.0) <= tol
            and self.hermiticity_error() < tol
            and self.min_eigenvalue() >= -tol
        )

    def probability(self, bitstring: str) -> float:
        return float(self.data[int(bitstring, 2), int(bitstring, 2)].real)


# ---------------------------------------------------------------------------
# channels; rho is stored as a tensor with axes (ket_0..ket_{n-1}, bra_0..bra_{n-1})
# ---------------------------------------------------------------------------


def _apply_unitary(rho: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    rho = apply_operator(rho, u, qubits)
    return apply_operator(rho, u.conj(), [n + q for q in qubits])


def _maximally_mix(rho: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Replaces the state of ``qubits`` by ``I / 2**k`` (partial trace then tensor)."""
    k = len(qubits)
    ket = list(range(n))
    bra = list(range(n, 2 * n))
    fresh = list(range(2 * n, 2 * n + 2 * k))
    traced_in = ket + [q if q in qubits else bra[q] for q in range(n)]
    out = list(ket) + list(bra)
    for j, q in enumerate(qubits):
        out[q] = fresh[j]
        out[n + q] = fresh[k + j]
    ident = np.eye(2**k).reshape((2,) * (2 * k)) / 2**k
    return np.einsum(rho, traced_in, ident, fresh, out)


def _depolarize(rho: np.ndarray, p: float, qubits: Sequence[int], n: int) -> np.ndarray:
    # (1 - p) rho + p / (d^2 - 1) sum_{P != I} P rho P, using
    # sum_{all P} P rho P = d^2 * (I / d (x) Tr_q rho)
    if p == 0:
        return rho
    d2 = 4 ** len(qubits)
    mix_weight = p * d2 / (d2 - 1)
    return (1.0 - mix_weight) * rho + mix_weight * _maximally_mix(rho, qubits, n)


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def _amplitude_damp(rho: np.ndarray, gamma: float, qubits: Sequence[int], n: int) -> np.ndarray:
    if gamma == 0:
        return rho
    k0, k1 = amplitude_damping_kraus(gamma)
    for q in qubits:
        rho = _apply_unitary(rho, k0, [q], n) + _apply_unitary(rho, k1, [q], n)
    return rho


def simulate(circuit: Circuit, noise: NoiseModel = NoiseModel()) -> DensityMatrix:
    """Evolves ``|0...0>`` through the circuit, adding noise after each gate."""
    n = circuit.num_qubits
    if n > MAX_ORACLE_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the limit of {MAX_ORACLE_QUBITS}")
    rho = DensityMatrix.zero_state(n).data.reshape((2,) * (2 * n))
    for gate in circuit.gates:
        rho = _apply_unitary(rho, gate_matrix(gate), gate.qubits, n)
        if noise.kind is NoiseKind.DEPOLARIZING:
            rho = _depolarize(rho, noise.p, gate.qubits, n)
        elif noise.kind is NoiseKind.AMPLITUDE_DAMPING:
            rho = _amplitude_damp(rho, noise.p, gate.qubits, n)
    return DensityMatrix(rho.reshape(2**n, 2**n), n)


def _check_dims(rho: DensityMatrix, obs: Observable) -> None:
    if rho.num_qubits != obs.num_qubits:
        raise DimensionMismatch(
            f"state has {rho.num_qubits} qubit(s), observable acts on {obs.num_qubits}"
        )


def pauli_expectation(rho: DensityMatrix, paulis: str) -> float:
    value = np.einsum("ij,ji->", rho.data, pauli_string_matrix(paulis))
    if abs(value.imag) > 1e-9:
        raise SimulationError(f"<{paulis}> has imaginary part {value.imag:.3g}")
    return float(value.real)


def expectation(rho: DensityMatrix, obs: Observable) -> float:
    """Returns ``sum_k c_k Tr(rho P_k)``."""
    _check_dims(rho, obs)
    return float(sum(c * pauli_expectation(rho, s) for c, s in obs.terms))


def sample_expectation(rho: DensityMatrix, obs: Observable, shots: int, seed: int) -> float:
    """Shot-noise estimate of ``expectation(rho, obs)``.

    Each Pauli term is measured ``shots`` times as a +-1 outcome with mean
    ``Tr(rho P_k)``; the estimate is the coefficient-weighted sum of the
    per-term sample means. Identity terms are exact.
    """
    _check_dims(rho, obs)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    total = 0.0
    for c, s in obs.terms:
        if set(s) == {"I"}:
            total += c
            continue
        mean = pauli_expectation(rho, s)
        p_plus = min(max((1.0 + mean) / 2.0, 0.0), 1.0)
        plus = rng.binomial(shots, p_plus)
        total += c * (2.0 * plus - shots) / shots
    return float(total)


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Sampled:
    shots: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


class SimulatorExecutor:
    """Callable executor: circuit -> noisy expectation value.

    In ``Sampled`` mode the n-th call draws from a generator seeded with
    ``(seed, n)``, so a fresh executor replays the same values when called in
    the same order. Concurrent callers need distinct executors or seeds;
    ``reentrant`` is only true in ``Exact`` mode.
    """

    def __init__(self, noise: NoiseModel, obs: Observable, mode: Exact | Sampled = Exact()):
        self.noise = noise
        self.obs = obs
        self.mode = mode
        self.calls = 0
        self.reentrant = isinstance(mode, Exact)

    def __call__(self, circuit: Circuit) -> float:
        rho = simulate(circuit, self.noise)
        if isinstance(self.mode, Sampled):
            seed = np.random.SeedSequence([self.mode.seed, self.calls])
            self.calls += 1
            return sample_expectation(rho, self.obs, self.mode.shots, seed)
        self.calls += 1
        return expectation(rho, self.obs)


def make_executor(
    noise: NoiseModel, obs: Observable, mode: Exact | Sampled = Exact()
) -> Callable[[Circuit], float]:
    return SimulatorExecutor(noise, obs, mode)
