"""Desk-scale benchmark experiments: mirror-circuit RB and the H2 energy surface."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from zne.circuit import Circuit, Gate, circuit_unitary, random_circuit
from zne.inference import Factory
from zne.pipeline import ZneConfig, execute_with_zne, repetition_seed
from zne.sim import Exact, NoiseModel, Observable, Sampled, make_executor

H2_TERMS = ("II", "ZI", "IZ", "ZZ", "XX", "YY")


class CoefficientFileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# mirror circuits
# ---------------------------------------------------------------------------


def mirror_circuit(num_qubits: int, depth: int, rng: np.random.Generator) -> Circuit:
    """Random prefix of ``depth // 2`` gates followed by its exact inverse."""
    if depth < 2 or depth % 2:
        raise ValueError(f"mirror depth must be a positive even number, got {depth}")
    prefix = random_circuit(num_qubits, depth // 2, rng)
    return Circuit(num_qubits, prefix.gates + prefix.inverse().gates)


def is_identity(circuit: Circuit, tol: float = 1e-10) -> bool:
    u = circuit_unitary(circuit)
    return bool(np.max(np.abs(u - np.eye(u.shape[0]))) < tol)


@dataclass
class RBTrial:
    trial: int
    factory: str
    unmitigated: float
    mitigated: float
    stderr: float | None
    identity_ok: bool


def run_rb(
    num_qubits: int,
    depth: int,
    trials: int,
    noise: NoiseModel,
    factories: Sequence[tuple[str, Factory]],
    seed: int,
    scale_noise: str = "random",
    num_to_average: int = 1,
    shots: int | None = None,
) -> list[RBTrial]:
    """Survival probability of ``|0...0>`` on mirror circuits, with and without ZNE.

    Trial ``t`` draws its circuit and seeds from ``(seed, t)`` only, so rows
    do not depend on which factories are requested.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    obs = Observable.projector("0" * num_qubits)
    rows = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        circuit = mirror_circuit(num_qubits, depth, rng)
        ok = is_identity(circuit)
        trial_seed = repetition_seed(seed, t, 0)

        def executor():
            mode = Exact() if shots is None else Sampled(shots, trial_seed)
            return make_executor(noise, obs, mode)

        unmitigated = executor()(circuit)
        for name, factory in factories:
            config = ZneConfig(factory, scale_noise, num_to_average, trial_seed)
            result = execute_with_zne(circuit, executor(), config)
            rows.append(
                RBTrial(t, name, unmitigated, result.zne_value, result.diagnostics.stderr, ok)
            )
    return rows


# ---------------------------------------------------------------------------
# H2 energy surface
# ---------------------------------------------------------------------------


def h2_observable(g: Sequence[float]) -> Observable:
    """``g0 I + g1 Z0 + g2 Z1 + g3 Z0 Z1 + g4 X0 X1 + g5 Y0 Y1``."""
    if len(g) != 6:
        raise ValueError(f"expected 6 coefficients, got {len(g)}")
    return Observable(tuple(zip(g, H2_TERMS)))


def h2_ansatz(theta: float) -> Circuit:
    """Prepares ``exp(-i theta X0 Y1) |01>``.

    The exponential is conjugated to ``exp(-i theta Z0 Z1)`` by H on qubit 0
    and RX(pi/2) on qubit 1, and that is CNOT . RZ(2 theta) on 1 . CNOT.
    """
    half_pi = math.pi / 2
    return Circuit(
        2,
        (
            Gate("X", (1,)),
            Gate("H", (0,)),
            Gate("RX", (1,), (half_pi,)),
            Gate("CNOT", (0, 1)),
            Gate("RZ", (1,), (2 * theta,)),
            Gate("CNOT", (0, 1)),
            Gate("H", (0,)),
            Gate("RX", (1,), (-half_pi,)),
        ),
    )


def theta_grid(points: int = 41) -> list[float]:
    if points < 1:
        raise ValueError("theta grid needs at least one point")
    if points == 1:
        return [0.0]
    return [float(t) for t in np.linspace(-math.pi / 2, math.pi / 2, points)]


def read_h2_coefficients(text: str) -> list[tuple[float, list[float]]]:
    """Parses ``r,g0,...,g5`` CSV; lines starting with ``#`` are comments."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise CoefficientFileError("coefficient file is empty")
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = [h.strip() for h in next(reader)]
    if header != ["r", "g0", "g1", "g2", "g3", "g4", "g5"]:
        raise CoefficientFileError(f"expected header r,g0,g1,g2,g3,g4,g5, got {','.join(header)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != 7:
            raise CoefficientFileError(f"data row {lineno}: expected 7 fields, got {len(rec)}")
        try:
            values = [float(v) for v in rec]
        except ValueError:
            raise CoefficientFileError(f"data row {lineno}: non-numeric field") from None
        if not all(math.isfinite(v) for v in values):
            raise CoefficientFileError(f"data row {lineno}: non-finite value")
        if rows and values[0] <= rows[-1][0]:
            raise CoefficientFileError(f"data row {lineno}: r must be strictly increasing")
        rows.append((values[0], values[1:]))
    if not rows:
        raise CoefficientFileError("coefficient file has no data rows")
    return rows


def relative_l2(values: Sequence[float], reference: Sequence[float]) -> float:
    """``|values - reference|_2 / |reference|_2``."""
    v = np.asarray(values, dtype=float)
    ref = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(v - ref) / np.linalg.norm(ref))


@dataclass
class H2Row:
    r: float
    noise: str
    exact: float
    unmitigated: float
    mitigated: float


def run_h2(
    coefficients: Sequence[tuple[float, Sequence[float]]],
    noises: Sequence[NoiseModel],
    thetas: Sequence[float],
    factory: Factory,
    seed: int,
    scale_noise: str = "random",
    num_to_average: int = 1,
    shots: int | None = None,
    progress: Callable[[str], None] | None = None,
) -> list[H2Row]:
    """Grid-search VQE energies per separation, noiseless, noisy and mitigated."""
    circuits = [h2_ansatz(t) for t in thetas]
    rows = []
    for i, (r, g) in enumerate(coefficients):
        obs = h2_observable(g)
        exact_ex = make_executor(NoiseModel(), obs)
        exact = min(exact_ex(c) for c in circuits)
        for j, noise in enumerate(noises):
            point_seed = repetition_seed(seed, i, j)
            noisy = []
            mitigated = []
            for k, circuit in enumerate(circuits):
                if shots is None:
                    mode = Exact()
                else:
                    mode = Sampled(shots, repetition_seed(point_seed, k, 0))
                executor = make_executor(noise, obs, mode)
                noisy.append(executor(circuit))
                config = ZneConfig(
                    factory, scale_noise, num_to_average, repetition_seed(point_seed, k, 1)
                )
                mitigated.append(execute_with_zne(circuit, executor, config).zne_value)
            rows.append(H2Row(r, str(noise), exact, min(noisy), min(mitigated)))
            if progress:
                progress(f"r={r!r} noise={noise}")
    return rows
