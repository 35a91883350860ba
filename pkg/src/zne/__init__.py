"""Zero-noise extrapolation with unitary folding and a density-matrix simulator."""

from zne.circuit import Circuit, Gate, circuit_unitary, from_json, inverse, to_json
from zne.inference import (
    AdaExpFactory,
    ExpFactory,
    Factory,
    LinearFactory,
    PolyExpFactory,
    PolyFactory,
    RichardsonFactory,
)
from zne.pipeline import ZneConfig, ZneResult, execute_with_zne, mitigate_executor
from zne.scaling import AtRandom, FromLeft, FromRight, fold_global, fold_local
from zne.sim import NoiseModel, Observable, make_executor, simulate

__version__ = "0.1.0"

__all__ = [
    "AdaExpFactory",
    "AtRandom",
    "Circuit",
    "ExpFactory",
    "Factory",
    "FromLeft",
    "FromRight",
    "Gate",
    "LinearFactory",
    "NoiseModel",
    "Observable",
    "PolyExpFactory",
    "PolyFactory",
    "RichardsonFactory",
    "ZneConfig",
    "ZneResult",
    "circuit_unitary",
    "execute_with_zne",
    "fold_global",
    "fold_local",
    "from_json",
    "inverse",
    "make_executor",
    "mitigate_executor",
    "simulate",
    "to_json",
]
