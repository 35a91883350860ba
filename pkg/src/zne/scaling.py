"""Noise scaling by unitary folding, G -> G G^dag G.

Local folding picks individual gates to fold; global folding folds the whole
circuit and then a suffix of it. "Depth" here always means gate count.

For a scale factor ``lam`` and ``d`` foldable gates, every foldable gate is
folded ``m = floor((lam - 1) / 2)`` times and a further
``round(d * (lam - 1 - 2m) / 2)`` gates (ties up) are folded once more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from zne.circuit import Circuit, Gate, GateFidelities, TWO_QUBIT_GATES, inverse

# absorbs float noise such as 5 * (1.2 - 1) / 2 == 0.49999999999999994
_ROUND_EPS = 1e-9


class ScalingError(ValueError):
    pass


class EmptyCircuit(ScalingError):
    pass


class InvalidScaleFactor(ScalingError):
    pass


@dataclass(frozen=True)
class FromLeft:
    pass


@dataclass(frozen=True)
class FromRight:
    pass


@dataclass(frozen=True)
class AtRandom:
    seed: int

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


FoldStrategy = Union[FromLeft, FromRight, AtRandom]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + _ROUND_EPS))


def _check(circuit: Circuit, scale_factor: float) -> None:
    if len(circuit.gates) == 0:
        raise EmptyCircuit("cannot fold an empty circuit")
    if not np.isfinite(scale_factor) or scale_factor < 1:
        raise InvalidScaleFactor(f"scale factor must be >= 1, got {scale_factor}")


def fold_split(num_foldable: int, scale_factor: float) -> tuple[int, int]:
    """Returns ``(m, s)``: whole folding passes and single extra folds."""
    m = int(math.floor((scale_factor - 1) / 2 + _ROUND_EPS))
    s = _round_half_up(num_foldable * (scale_factor - 1 - 2 * m) / 2)
    return m, min(s, num_foldable)


def expected_gate_count(num_gates: int, num_foldable: int, scale_factor: float) -> int:
    m, s = fold_split(num_foldable, scale_factor)
    return num_gates + 2 * (m * num_foldable + s)


def gate_fidelity(gate: Gate, fidelities: GateFidelities) -> float:
    """Looks up a gate's fidelity.

    Keys are tried from most to least specific: ``(name, qubits)``, ``name``,
    then ``"single"`` or ``"double"`` by gate arity. Gates matching no key are
    treated as perfect (fidelity 1) and are never folded.
    """
    arity_key = "double" if gate.name in TWO_QUBIT_GATES else "single"
    for key in ((gate.name, gate.qubits), gate.name, arity_key):
        if key in fidelities:
            f = float(fidelities[key])
            if not 0 < f <= 1:
                raise ValueError(f"fidelity for {key!r} must be in (0, 1], got {f}")
            return f
    return 1.0


def _order(indices: list[int], strategy: FoldStrategy, rng: np.random.Generator | None):
    if isinstance(strategy, FromLeft):
        return list(indices)
    if isinstance(strategy, FromRight):
        return list(reversed(indices))
    if isinstance(strategy, AtRandom):
        return [indices[i] for i in rng.permutation(len(indices))]
    raise TypeError(f"unknown fold strategy {strategy!r}")


def fold_counts(
    circuit: Circuit,
    scale_factor: float,
    strategy: FoldStrategy,
    fidelities: GateFidelities | None = None,
) -> list[int]:
    """Number of times each gate of ``circuit`` is folded (the fold ledger).

    With ``fidelities``, gate ``g`` weighs ``1 - f_g`` and folds are chosen so
    that the folded weight approaches ``(lam - 1) / 2`` times the total weight.
    Gates of weight zero are never folded.
    """
    _check(circuit, scale_factor)
    d = len(circuit.gates)
    if fidelities is None:
        weights = np.ones(d)
    else:
        weights = np.array([1.0 - gate_fidelity(g, fidelities) for g in circuit.gates])
    foldable = [i for i in range(d) if weights[i] > 0]
    counts = [0] * d
    if scale_factor == 1 or not foldable:
        if scale_factor > 1:
            raise InvalidScaleFactor("no foldable gates: every gate has fidelity 1")
        return counts

    m, s = fold_split(len(foldable), scale_factor)
    for i in foldable:
        counts[i] = m

    rng = np.random.default_rng(strategy.seed) if isinstance(strategy, AtRandom) else None
    order = _order(foldable, strategy, rng)

    if fidelities is None:
        chosen = order[:s]
    else:
        total = float(np.sum(weights[foldable]))
        target = ((scale_factor - 1) / 2 - m) * total
        chosen, acc = [], 0.0
        tol = 1e-12 * max(total, 1.0)
        for i in order:
            if acc >= target:
                break
            w = weights[i]
            # include the gate that straddles the target only if that lands closer
            if acc + w > target and abs(acc + w - target) > abs(acc - target) + tol:
                break
            chosen.append(i)
            acc += w
    for i in chosen:
        counts[i] += 1
    return counts


def apply_folds(circuit: Circuit, counts: Sequence[int]) -> Circuit:
    """Replaces gate ``i`` by ``G (G^dag G)^counts[i]``."""
    if len(counts) != len(circuit.gates):
        raise ValueError("one fold count per gate required")
    out: list[Gate] = []
    for gate, k in zip(circuit.gates, counts):
        out.append(gate)
        inv = inverse(gate)
        for _ in range(k):
            out.append(inv)
            out.append(gate)
    return circuit.with_gates(out)


def fold_local(
    circuit: Circuit,
    scale_factor: float,
    strategy: FoldStrategy,
    fidelities: GateFidelities | None = None,
) -> Circuit:
    """Folds individual gates until the gate count reaches ``scale_factor`` times.

    Args:
        circuit: Circuit to fold. It is not modified.
        scale_factor: Target ratio of folded to original gate count, >= 1.
        strategy: Which gates go first: ``FromLeft()``, ``FromRight()`` or
            ``AtRandom(seed)``. Random folding never folds a gate twice for
            scale factors up to three.
        fidelities: Optional gate fidelities; noisier gates weigh more.

    Returns:
        A new circuit with the same unitary and measurement flag.
    """
    return apply_folds(circuit, fold_counts(circuit, scale_factor, strategy, fidelities))


def fold_gates_from_left(circuit, scale_factor, fidelities=None):
    return fold_local(circuit, scale_factor, FromLeft(), fidelities)


def fold_gates_from_right(circuit, scale_factor, fidelities=None):
    return fold_local(circuit, scale_factor, FromRight(), fidelities)


def fold_gates_at_random(circuit, scale_factor, seed, fidelities=None):
    return fold_local(circuit, scale_factor, AtRandom(seed), fidelities)


def fold_global(circuit: Circuit, scale_factor: float) -> Circuit:
    """Folds the whole circuit, then a block of gates taken from its end.

    The result is ``C (C^dag C)^m`` followed by ``S^dag S`` where ``S`` is the
    last ``s`` gates of ``C``.
    """
    _check(circuit, scale_factor)
    gates = list(circuit.gates)
    d = len(gates)
    m, s = fold_split(d, scale_factor)
    inv = [inverse(g) for g in reversed(gates)]
    out = gates + (inv + gates) * m
    if s:
        suffix = gates[d - s :]
        out += [inverse(g) for g in reversed(suffix)] + suffix
    return circuit.with_gates(out)
