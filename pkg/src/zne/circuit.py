"""Gate-level circuit representation.

Qubit ordering: qubit 0 is the most significant bit of a computational-basis
index, so the state ``|q0 q1>`` has index ``2 * q0 + q1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

MAX_ORACLE_QUBITS = 10

_SQRT2 = np.sqrt(2.0)

SINGLE_QUBIT_GATES = ("H", "X", "Y", "Z", "S", "SDG", "T", "TDG", "RX", "RY", "RZ")
TWO_QUBIT_GATES = ("CNOT", "CZ", "SWAP")
GATE_NAMES = SINGLE_QUBIT_GATES + TWO_QUBIT_GATES
PARAMETRIC_GATES = ("RX", "RY", "RZ")

_INVERSE_NAME = {
    "H": "H",
    "X": "X",
    "Y": "Y",
    "Z": "Z",
    "S": "SDG",
    "SDG": "S",
    "T": "TDG",
    "TDG": "T",
    "CNOT": "CNOT",
    "CZ": "CZ",
    "SWAP": "SWAP",
}

_FIXED_MATRICES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / _SQRT2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "TDG": np.array([[1, 0], [0, np.exp(-1j * np.pi / 4)]], dtype=complex),
    # two-qubit matrices act on |q_first q_second>, first qubit most significant
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}


class CircuitError(Exception):
    """Base class for circuit-related errors."""


class ParseError(CircuitError):
    """Malformed circuit text."""


class ValidationError(CircuitError):
    """Structurally valid input that violates a circuit invariant."""


class TooManyQubits(CircuitError):
    pass


class MeasurementPresent(CircuitError):
    pass


@dataclass(frozen=True)
class Gate:
    """A named one- or two-qubit unitary.

    Rotation gates (RX, RY, RZ) carry exactly one angle in radians, all other
    gates carry none.
    """

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.name not in GATE_NAMES:
            raise ValidationError(f"unknown gate {self.name!r}")
        arity = 2 if self.name in TWO_QUBIT_GATES else 1
        if len(self.qubits) != arity:
            raise ValidationError(
                f"gate {self.name} acts on {arity} qubit(s), got {list(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValidationError(f"gate {self.name} has repeated qubits {list(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise ValidationError(f"negative qubit index in {self.name} {list(self.qubits)}")
        n_params = 1 if self.name in PARAMETRIC_GATES else 0
        if len(self.params) != n_params:
            raise ValidationError(
                f"gate {self.name} takes {n_params} parameter(s), got {len(self.params)}"
            )

    def __str__(self) -> str:
        args = f"({self.params[0]:g})" if self.params else ""
        return f"{self.name}{args} {','.join(map(str, self.qubits))}"

    def inverse(self) -> "Gate":
        return inverse(self)

    def matrix(self) -> np.ndarray:
        return gate_matrix(self)


@dataclass(frozen=True)
class Circuit:
    """An ordered gate sequence on ``num_qubits`` qubits.

    ``terminal_measurement`` marks that every qubit is measured after the last
    gate; no other measurement can be expressed.
    """

    num_qubits: int
    gates: tuple[Gate, ...] = ()
    terminal_measurement: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if isinstance(self.num_qubits, bool) or int(self.num_qubits) != self.num_qubits:
            raise ValidationError(f"num_qubits must be an integer, got {self.num_qubits!r}")
        if self.num_qubits < 1:
            raise ValidationError(f"num_qubits must be positive, got {self.num_qubits}")
        for i, gate in enumerate(self.gates):
            if not isinstance(gate, Gate):
                raise ValidationError(f"gates[{i}] is not a Gate: {gate!r}")
            bad = [q for q in gate.qubits if q >= self.num_qubits]
            if bad:
                raise ValidationError(
                    f"gates[{i}] ({gate.name}) uses qubit {bad[0]} but the circuit "
                    f"has {self.num_qubits} qubit(s)"
                )

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __str__(self) -> str:
        body = "; ".join(str(g) for g in self.gates)
        meas = " | measure" if self.terminal_measurement else ""
        return f"Circuit({self.num_qubits}q: {body}{meas})"

    def with_gates(self, gates: Iterable[Gate]) -> "Circuit":
        """Returns a circuit with the same qubits and measurement flag."""
        return Circuit(self.num_qubits, tuple(gates), self.terminal_measurement)

    def inverse(self) -> "Circuit":
        return self.with_gates(inverse(g) for g in reversed(self.gates))


GateFidelities = Mapping[Union[str, tuple], float]


def inverse(gate: Gate) -> Gate:
    """Returns the exact inverse of ``gate``."""
    if gate.name in PARAMETRIC_GATES:
        return Gate(gate.name, gate.qubits, (-gate.params[0],))
    return Gate(_INVERSE_NAME[gate.name], gate.qubits)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of ``gate`` on its own qubits (2x2 or 4x4)."""
    if gate.name in PARAMETRIC_GATES:
        half = gate.params[0] / 2.0
        c, s = np.cos(half), np.sin(half)
        if gate.name == "RX":
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
        if gate.name == "RY":
            return np.array([[c, -s], [s, c]], dtype=complex)
        return np.array([[np.exp(-1j * half), 0], [0, np.exp(1j * half)]], dtype=complex)
    return _FIXED_MATRICES[gate.name].copy()


def apply_operator(tensor: np.ndarray, op: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Contracts a ``2**k x 2**k`` operator into the given axes of a qubit tensor.

    ``tensor`` has one length-2 axis per qubit (possibly followed by other axes
    for matrices). The operator acts from the left on the listed axes.
    """
    k = len(qubits)
    op_t = op.reshape((2,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    # tensordot moves the contracted output axes to the front
    return np.moveaxis(out, list(range(k)), list(qubits))


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense ``2**n x 2**n`` unitary of a measurement-free circuit."""
    if circuit.terminal_measurement:
        raise MeasurementPresent("circuit has terminal measurements; unitary undefined")
    n = circuit.num_qubits
    if n > MAX_ORACLE_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the limit of {MAX_ORACLE_QUBITS}")
    dim = 2**n
    u = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    for gate in circuit.gates:
        u = apply_operator(u, gate_matrix(gate), gate.qubits)
    return u.reshape(dim, dim)


def random_circuit(
    num_qubits: int,
    num_gates: int,
    rng: np.random.Generator,
    gate_names: Sequence[str] = GATE_NAMES,
) -> Circuit:
    """Draws a circuit of uniformly random gates, qubits and angles in [-pi, pi]."""
    names = [g for g in gate_names if num_qubits >= 2 or g not in TWO_QUBIT_GATES]
    gates = []
    for _ in range(num_gates):
        name = names[rng.integers(len(names))]
        arity = 2 if name in TWO_QUBIT_GATES else 1
        qubits = tuple(int(q) for q in rng.choice(num_qubits, size=arity, replace=False))
        params = (float(rng.uniform(-np.pi, np.pi)),) if name in PARAMETRIC_GATES else ()
        gates.append(Gate(name, qubits, params))
    return Circuit(num_qubits, tuple(gates))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

_TOP_KEYS = {"num_qubits", "terminal_measurement", "gates"}
_GATE_KEYS = {"name", "qubits", "params"}


def circuit_to_dict(circuit: Circuit) -> dict[str, Any]:
    return {
        "num_qubits": circuit.num_qubits,
        "terminal_measurement": circuit.terminal_measurement,
        "gates": [
            {"name": g.name, "qubits": list(g.qubits), "params": list(g.params)}
            for g in circuit.gates
        ],
    }


def to_json(circuit: Circuit, indent: int | None = None) -> str:
    return json.dumps(circuit_to_dict(circuit), indent=indent)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def circuit_from_dict(data: Any) -> Circuit:
    if not isinstance(data, dict):
        raise ParseError("top level: expected a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ParseError(f"top level: unknown key(s) {', '.join(map(repr, unknown))}")
    for key in ("num_qubits", "gates"):
        if key not in data:
            raise ParseError(f"top level: missing required key {key!r}")
    num_qubits = data["num_qubits"]
    if not _is_int(num_qubits):
        raise ParseError(f"num_qubits: expected an integer, got {num_qubits!r}")
    measured = data.get("terminal_measurement", False)
    if not isinstance(measured, bool):
        raise ParseError(f"terminal_measurement: expected a boolean, got {measured!r}")
    records = data["gates"]
    if not isinstance(records, list):
        raise ParseError("gates: expected a list")

    gates = []
    for i, rec in enumerate(records):
        where = f"gates[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        unknown = sorted(set(rec) - _GATE_KEYS)
        if unknown:
            raise ParseError(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}")
        name = rec.get("name")
        if not isinstance(name, str):
            raise ParseError(f"{where}.name: expected a string, got {name!r}")
        if name not in GATE_NAMES:
            raise ParseError(f"{where}.name: unknown gate {name!r}")
        qubits = rec.get("qubits")
        if not isinstance(qubits, list) or not all(_is_int(q) for q in qubits):
            raise ParseError(f"{where}.qubits: expected a list of integers, got {qubits!r}")
        params = rec.get("params", [])
        if not isinstance(params, list) or not all(_is_real(p) for p in params):
            raise ParseError(f"{where}.params: expected a list of numbers, got {params!r}")
        try:
            gates.append(Gate(name, tuple(qubits), tuple(params)))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return Circuit(num_qubits, tuple(gates), measured)


def from_json(text: str) -> Circuit:
    """Parses the circuit JSON format.

    Raises:
        ParseError: malformed JSON, unknown keys or gate names, wrong types.
        ValidationError: well-formed input violating circuit invariants, such
            as a qubit index outside ``range(num_qubits)``.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return circuit_from_dict(data)


def load_circuit(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return from_json(fh.read())
