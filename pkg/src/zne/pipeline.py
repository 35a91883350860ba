"""Zero-noise extrapolation: scale noise, execute, extrapolate."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from zne.circuit import Circuit
from zne.inference import Factory, FitDiagnostics, RichardsonFactory
from zne.scaling import AtRandom, FromLeft, FromRight, fold_global, fold_local

Executor = Callable[[Circuit], float]
#: noise scaler: (circuit, scale factor, seed) -> folded circuit
ScaleNoise = Callable[[Circuit, float, int], Circuit]


def fold_random(circuit: Circuit, scale_factor: float, seed: int) -> Circuit:
    return fold_local(circuit, scale_factor, AtRandom(seed))


def fold_left(circuit: Circuit, scale_factor: float, seed: int) -> Circuit:
    return fold_local(circuit, scale_factor, FromLeft())


def fold_right(circuit: Circuit, scale_factor: float, seed: int) -> Circuit:
    return fold_local(circuit, scale_factor, FromRight())


def fold_whole(circuit: Circuit, scale_factor: float, seed: int) -> Circuit:
    return fold_global(circuit, scale_factor)


SCALERS: dict[str, ScaleNoise] = {
    "random": fold_random,
    "left": fold_left,
    "right": fold_right,
    "global": fold_whole,
}


class ExecutorError(RuntimeError):
    """An executor call failed; ``scale_factor`` says where."""

    def __init__(self, scale_factor: float, cause: BaseException):
        super().__init__(f"executor failed at scale factor {scale_factor}: {cause}")
        self.scale_factor = scale_factor


def _default_factory() -> Factory:
    return RichardsonFactory([1.0, 2.0, 3.0])


@dataclass
class ZneConfig:
    """How to run zero-noise extrapolation.

    ``factory`` is a template; every run works on ``factory.fresh()``.
    ``scale_noise`` is a key of ``SCALERS`` or a callable with the same
    signature. ``max_workers > 1`` evaluates the repetitions of one scale
    factor in threads, but only for executors with ``reentrant = True``.
    """

    factory: Factory = field(default_factory=_default_factory)
    scale_noise: Union[str, ScaleNoise] = "random"
    num_to_average: int = 1
    seed: int = 0
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.num_to_average < 1:
            raise ValueError(f"num_to_average must be >= 1, got {self.num_to_average}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if isinstance(self.scale_noise, str) and self.scale_noise not in SCALERS:
            raise ValueError(
                f"unknown folding {self.scale_noise!r}; choose from {', '.join(SCALERS)}"
            )

    @property
    def scaler(self) -> ScaleNoise:
        if isinstance(self.scale_noise, str):
            return SCALERS[self.scale_noise]
        return self.scale_noise


@dataclass
class ZneResult:
    scale_factors: list[float]
    raw_values: list[list[float]]
    means: list[float]
    zne_value: float
    diagnostics: FitDiagnostics
    gate_counts: list[list[int]]

    def to_dict(self) -> dict:
        return {
            "scale_factors": self.scale_factors,
            "raw_values": self.raw_values,
            "means": self.means,
            "zne_value": self.zne_value,
            "diagnostics": self.diagnostics.to_dict(),
        }


def repetition_seed(seed: int, scale_index: int, repetition: int) -> int:
    """Folding seed for one repetition at one scale factor."""
    state = np.random.SeedSequence([seed, scale_index, repetition]).generate_state(1, np.uint64)
    return int(state[0])


def _run(executor: Executor, circuit: Circuit, scale: float) -> float:
    try:
        return float(executor(circuit))
    except Exception as exc:
        raise ExecutorError(scale, exc) from exc


def execute_with_zne(
    circuit: Circuit, executor: Executor, config: ZneConfig | None = None
) -> ZneResult:
    """Runs the full pipeline and returns every intermediate value.

    At each scale factor the factory asks for, ``num_to_average`` scaled
    circuits are executed and their mean is pushed. Scale factor 1 runs the
    input circuit as is.
    """
    config = config or ZneConfig()
    factory = config.factory.fresh()
    scaler = config.scaler
    parallel = config.max_workers > 1 and getattr(executor, "reentrant", False)

    scales, raw, means, counts = [], [], [], []
    index = 0
    while not factory.is_done():
        scale = factory.next_scale()
        if scale == 1.0:
            circuits = [circuit] * config.num_to_average
        else:
            circuits = [
                scaler(circuit, scale, repetition_seed(config.seed, index, r))
                for r in range(config.num_to_average)
            ]
        if parallel:
            with ThreadPoolExecutor(config.max_workers) as pool:
                values = list(pool.map(lambda c: _run(executor, c, scale), circuits))
        else:
            values = [_run(executor, c, scale) for c in circuits]
        mean = float(np.mean(values))
        factory.push(scale, mean)
        scales.append(scale)
        raw.append(values)
        means.append(mean)
        counts.append([len(c.gates) for c in circuits])
        index += 1

    value, diagnostics = factory.reduce()
    return ZneResult(scales, raw, means, value, diagnostics, counts)


def mitigate_executor(executor: Executor, config: ZneConfig | None = None) -> Executor:
    """Wraps ``executor`` so that each call returns the ZNE estimate."""
    config = config or ZneConfig()

    def mitigated(circuit: Circuit) -> float:
        return execute_with_zne(circuit, executor, config).zne_value

    mitigated.reentrant = getattr(executor, "reentrant", False)
    return mitigated
