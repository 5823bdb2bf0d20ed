"""A small statevector simulator for RX/RY/RZ/CNOT/CZ circuits.

Qubit 0 is the most significant bit of the basis index, so ``|q0 q1 ...>``
reads left to right.  Gates act on a batch of states at once: the internal
representation has shape ``(batch, 2, 2, ..., 2)``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimMismatch
from .states import StateVector

MAX_QUBITS = 10
ROTATIONS = ("RX", "RY", "RZ")
ENTANGLERS = ("CNOT", "CZ")


class Gate(NamedTuple):
    name: str
    qubits: tuple
    angle: float = 0.0


def rotation_matrix(name, angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if name == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if name == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if name == "RZ":
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])
    raise ValueError(f"unknown rotation {name!r}")


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        gates, self.gates = list(self.gates), []
        for g in gates:
            self.append(*g)

    @property
    def dim(self):
        return 2 ** self.n_qubits

    def append(self, name, qubits, angle=0.0):
        name = name.upper()
        qubits = (qubits,) if isinstance(qubits, (int, np.integer)) else tuple(qubits)
        qubits = tuple(int(q) for q in qubits)
        if any(not 0 <= q < self.n_qubits for q in qubits):
            raise ValueError(f"qubit index out of range in {name}{qubits}")
        if name in ROTATIONS:
            if len(qubits) != 1:
                raise ValueError(f"{name} acts on one qubit")
            if not np.isfinite(angle):
                raise ValueError(f"{name} angle must be finite")
        elif name in ENTANGLERS:
            if len(qubits) != 2 or qubits[0] == qubits[1]:
                raise ValueError(f"{name} needs distinct control and target")
        else:
            raise ValueError(f"unsupported gate {name!r}")
        self.gates.append(Gate(name, qubits, float(angle)))
        return self

    def rx(self, q, angle):
        return self.append("RX", q, angle)

    def ry(self, q, angle):
        return self.append("RY", q, angle)

    def rz(self, q, angle):
        return self.append("RZ", q, angle)

    def cnot(self, control, target):
        return self.append("CNOT", (control, target))

    def cz(self, control, target):
        return self.append("CZ", (control, target))

    def __add__(self, other):
        if other.n_qubits != self.n_qubits:
            raise DimMismatch("cannot concatenate circuits on different qubit counts")
        return Circuit(self.n_qubits, self.gates + other.gates)


def apply_gate(states, gate, n_qubits):
    """Apply one gate to a batch of states shaped ``(batch, 2, ..., 2)``."""
    if gate.name in ROTATIONS:
        (q,) = gate.qubits
        u = rotation_matrix(gate.name, gate.angle)
        axis = q + 1
        moved = np.moveaxis(states, axis, -1)
        return np.moveaxis(moved @ u.T, -1, axis)
    control, target = gate.qubits
    out = states.copy()
    sel = [slice(None)] * (n_qubits + 1)
    sel[control + 1] = 1
    if gate.name == "CNOT":
        sub = out[tuple(sel)]
        # target axis index shifts down by one if it follows the control axis
        t_axis = target + (0 if target < control else -1)
        out[tuple(sel)] = np.flip(sub, axis=t_axis + 1)
    else:
        sel[target + 1] = 1
        out[tuple(sel)] *= -1
    return out


def run_batch(circuit, states):
    """Run ``circuit`` on a ``(batch, 2**n)`` array of amplitudes."""
    n = circuit.n_qubits
    states = np.asarray(states, dtype=complex)
    if states.ndim != 2 or states.shape[1] != circuit.dim:
        raise DimMismatch(f"expected states of dim {circuit.dim}, got shape {states.shape}")
    psi = states.reshape((states.shape[0],) + (2,) * n)
    for g in circuit.gates:
        psi = apply_gate(psi, g, n)
    return psi.reshape(states.shape[0], -1)


def zero_state(n_qubits) -> StateVector:
    return StateVector.basis(0, 2 ** n_qubits)


def simulate(circuit: Circuit, initial: StateVector = None) -> StateVector:
    """Apply the circuit's gates in order to ``initial`` (default ``|0...0>``)."""
    if initial is None:
        initial = zero_state(circuit.n_qubits)
    if initial.dim != circuit.dim:
        raise DimMismatch(f"initial state has dim {initial.dim}, circuit needs {circuit.dim}")
    out = run_batch(circuit, initial.amplitudes[None, :])[0]
    return StateVector(out)


def expectation_z(state: StateVector, qubit, n_qubits):
    """``<Z_qubit>`` of a statevector."""
    probs = state.probabilities().reshape((2,) * n_qubits)
    marg = np.moveaxis(probs, qubit, 0).reshape(2, -1).sum(axis=1)
    return float(marg[0] - marg[1])


def parameter_shift(f, params, shift=np.pi / 2):
    """Gradient of ``f`` by the two-term shift rule.

    Exact for any ``f`` that is an expectation value (or a vector of
    probabilities) of a circuit in which each parameter drives exactly one
    Pauli rotation.
    """
    params = np.asarray(params, dtype=float)
    grads = []
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = shift
        grads.append((np.asarray(f(params + e)) - np.asarray(f(params - e))) / (2 * np.sin(shift)))
    return np.array(grads)


def finite_difference(f, params, step=1e-5, order=2):
    """Central-difference gradient of ``f``.

    ``order=4`` uses the five-point stencil, which stays accurate where
    ``f`` is sharply curved (e.g. a log-loss near a vanishing probability).
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    params = np.asarray(params, dtype=float)
    grads = []
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = step
        if order == 2:
            g = (np.asarray(f(params + e)) - np.asarray(f(params - e))) / (2 * step)
        else:
            g = (8 * (np.asarray(f(params + e)) - np.asarray(f(params - e)))
                 - (np.asarray(f(params + 2 * e)) - np.asarray(f(params - 2 * e)))) / (12 * step)
        grads.append(g)
    return np.array(grads)
