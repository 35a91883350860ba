import json

import numpy as np
import pytest

import oracles
from zne.circuit import (
    GATE_NAMES,
    PARAMETRIC_GATES,
    Circuit,
    Gate,
    MeasurementPresent,
    ParseError,
    TooManyQubits,
    ValidationError,
    circuit_unitary,
    from_json,
    inverse,
    random_circuit,
    to_json,
)

BELL = Circuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))))


def every_gate(n=3):
    for name in GATE_NAMES:
        if name in ("CNOT", "CZ", "SWAP"):
            qubit_sets = [(0, 1), (1, 0), (2, 0)]
        else:
            qubit_sets = [(0,), (2,)]
        for qs in qubit_sets:
            params = (0.7,) if name in PARAMETRIC_GATES else ()
            yield Gate(name, qs, params)


@pytest.mark.parametrize(
    "gate, expected",
    [
        (Gate("H", (0,)), Gate("H", (0,))),
        (Gate("RZ", (1,), (0.7,)), Gate("RZ", (1,), (-0.7,))),
        (Gate("T", (0,)), Gate("TDG", (0,))),
        (Gate("SDG", (2,)), Gate("S", (2,))),
        (Gate("CNOT", (1, 0)), Gate("CNOT", (1, 0))),
    ],
)
def test_inverse_examples(gate, expected):
    assert inverse(gate) == expected


def test_t_times_tdg_is_identity_by_hand():
    t = np.diag([1, np.exp(1j * np.pi / 4)])
    tdg = np.diag([1, np.exp(-1j * np.pi / 4)])
    assert np.allclose(t @ tdg, np.eye(2), atol=1e-12)
    assert np.allclose(Gate("T", (0,)).matrix(), t)
    assert np.allclose(Gate("TDG", (0,)).matrix(), tdg)


@pytest.mark.parametrize("gate", list(every_gate()), ids=str)
def test_gate_then_inverse_is_identity(gate):
    u = circuit_unitary(Circuit(3, (gate, inverse(gate))))
    assert np.max(np.abs(u - np.eye(8))) < 1e-12


@pytest.mark.parametrize("gate", list(every_gate()), ids=str)
def test_embedding_matches_kron_oracle(gate):
    u = circuit_unitary(Circuit(3, (gate,)))
    assert np.max(np.abs(u - oracles.gate_full(gate, 3))) < 1e-12


def test_empty_circuit_is_identity():
    assert np.array_equal(circuit_unitary(Circuit(1, ())), np.eye(2))


def test_x_matrix():
    u = circuit_unitary(Circuit(1, (Gate("X", (0,)),)))
    assert np.allclose(u, [[0, 1], [1, 0]])


def test_bell_first_column():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    oracle = cnot @ np.kron(h, np.eye(2))
    u = circuit_unitary(BELL)
    assert np.allclose(u, oracle, atol=1e-12)
    assert np.allclose(u[:, 0], [1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2)], atol=1e-12)


def test_qubit_zero_is_most_significant():
    # X on qubit 0 maps |00> (index 0) to |10> (index 2)
    u = circuit_unitary(Circuit(2, (Gate("X", (0,)),)))
    assert u[2, 0] == 1


def test_random_circuits_match_oracle_and_are_unitary():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        c = random_circuit(n, int(rng.integers(0, 20)), rng)
        u = circuit_unitary(c)
        assert np.max(np.abs(u - oracles.unitary(c))) < 1e-10
        assert np.max(np.abs(u.conj().T @ u - np.eye(2**n))) < 1e-10


def test_unitary_guards():
    with pytest.raises(TooManyQubits):
        circuit_unitary(Circuit(11, ()))
    with pytest.raises(MeasurementPresent):
        circuit_unitary(Circuit(2, BELL.gates, terminal_measurement=True))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(name="FOO", qubits=(0,)),
        dict(name="CNOT", qubits=(0, 0)),
        dict(name="H", qubits=(0, 1)),
        dict(name="RX", qubits=(0,)),
        dict(name="H", qubits=(0,), params=(1.0,)),
        dict(name="H", qubits=(-1,)),
    ],
)
def test_invalid_gates_rejected(kwargs):
    with pytest.raises(ValidationError):
        Gate(**kwargs)


def test_qubit_out_of_range_rejected():
    with pytest.raises(ValidationError):
        Circuit(2, (Gate("H", (5,)),))


def test_bell_json_round_trip():
    text = to_json(BELL)
    data = json.loads(text)
    assert data["num_qubits"] == 2
    assert len(data["gates"]) == 2
    assert from_json(text) == BELL


def test_json_round_trip_random():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        c = random_circuit(int(rng.integers(1, 6)), int(rng.integers(0, 51)), rng)
        c = Circuit(c.num_qubits, c.gates, bool(rng.integers(2)))
        back = from_json(to_json(c))
        assert back == c
        assert back.terminal_measurement == c.terminal_measurement


def test_params_may_be_omitted():
    c = from_json('{"num_qubits": 1, "terminal_measurement": false, "gates": [{"name": "H", "qubits": [0]}]}')
    assert c.gates == (Gate("H", (0,)),)


def test_qubit_index_five_in_two_qubit_circuit():
    text = '{"num_qubits": 2, "terminal_measurement": false, "gates": [{"name": "X", "qubits": [5], "params": []}]}'
    with pytest.raises(ValidationError):
        from_json(text)


def test_unknown_gate_names_the_gate():
    text = '{"num_qubits": 1, "terminal_measurement": false, "gates": [{"name": "FOO", "qubits": [0], "params": []}]}'
    with pytest.raises(ParseError, match="FOO"):
        from_json(text)


@pytest.mark.parametrize(
    "text",
    [
        '{"num_qubits": 1, "gates": [], "extra": 1}',
        '{"num_qubits": 1, "gates": [{"name": "H", "qubits": [0], "colour": "red"}]}',
        '{"num_qubits": "two", "gates": []}',
        '{"num_qubits": 1, "gates": [{"name": "H", "qubits": [0.5]}]}',
        "[1, 2]",
        '{"num_qubits": 1, "gates": [',
    ],
)
def test_malformed_json(text):
    with pytest.raises((ParseError, ValidationError)):
        from_json(text)


def test_syntax_error_reports_position():
    with pytest.raises(ParseError, match="line 2"):
        from_json('{"num_qubits": 1,\n "gates": [}')
