"""Exact statevector simulator for the gate set used by the QLBM circuits.

Bit order is little-endian: qubit ``q`` is bit ``q`` of the basis index.
Controls carry a polarity, so open-circle controls (trigger on |0>) are
native and never expanded into X sandwiches.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

KINDS = ("H", "X", "SWAP", "MCX", "MC-SWAP", "MC-H", "Diagonal", "Prepare")

UNIT_TOL = 1e-12
IMAG_TOL = 1e-9

_SQRT1_2 = 1.0 / np.sqrt(2.0)


class GateError(ValueError):
    """Raised for malformed gates or gates that do not fit the register."""


class PostSelectionError(RuntimeError):
    """The requested ancilla outcome has zero amplitude."""


class ReadoutError(RuntimeError):
    """A readout found imaginary residue where a real field was expected."""


@dataclass(frozen=True, eq=False)
class CircuitOp:
    kind: str
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    payload: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GateError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        controls = tuple((int(q), int(p)) for q, p in self.controls)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)

        qubits = list(targets) + [q for q, _ in controls]
        if len(set(qubits)) != len(qubits):
            raise GateError(f"{self.kind}: targets and controls must be disjoint, got {qubits}")
        if any(q < 0 for q in qubits):
            raise GateError(f"{self.kind}: negative qubit index")
        if any(p not in (0, 1) for _, p in controls):
            raise GateError(f"{self.kind}: control polarity must be 0 or 1")

        n_targets = {"H": 1, "X": 1, "MCX": 1, "MC-H": 1, "SWAP": 2, "MC-SWAP": 2}
        if self.kind in n_targets and len(targets) != n_targets[self.kind]:
            raise GateError(f"{self.kind} takes {n_targets[self.kind]} target(s), got {len(targets)}")
        if self.kind in ("H", "X", "SWAP") and controls:
            raise GateError(f"{self.kind} takes no controls; use the MC- form")

        if self.kind == "Diagonal":
            if self.payload is None:
                raise GateError("Diagonal needs a payload")
            payload = np.asarray(self.payload, dtype=complex).ravel()
            if payload.size != 2 ** len(targets):
                raise GateError(
                    f"Diagonal payload length {payload.size} != 2^{len(targets)}"
                )
            dev = np.max(np.abs(np.abs(payload) - 1.0)) if payload.size else 0.0
            if dev > UNIT_TOL:
                raise GateError(f"Diagonal entry off the unit circle by {dev:.3e}")
            payload.setflags(write=False)
            object.__setattr__(self, "payload", payload)
        elif self.kind == "Prepare":
            if self.payload is None:
                raise GateError("Prepare needs a payload")
            if controls:
                raise GateError("Prepare cannot be controlled")
            payload = np.asarray(self.payload, dtype=float).ravel()
            if payload.size != 2 ** len(targets):
                raise GateError(
                    f"Prepare payload length {payload.size} != 2^{len(targets)}"
                )
            payload.setflags(write=False)
            object.__setattr__(self, "payload", payload)
        elif self.payload is not None:
            raise GateError(f"{self.kind} takes no payload")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + tuple(q for q, _ in self.controls)

    def describe(self) -> str:
        """One-line text form: kind, targets, controls with polarity, payload digest."""
        ctrl = ",".join(f"{q}{'+' if p else '-'}" for q, p in self.controls)
        line = f"{self.kind:<8} t={','.join(map(str, self.targets))}"
        if ctrl:
            line += f" c={ctrl}"
        if self.payload is not None:
            digest = hashlib.sha256(np.ascontiguousarray(self.payload).tobytes()).hexdigest()
            line += f" payload[{self.payload.size}]={digest[:12]}"
        return line


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit assignment for an N x M lattice: x bits, then y bits, then 5 block bits.

    The two ancillas sit directly above the main register, so the
    all-ancillas-zero sector is simply the first 2^n_main amplitudes.
    """

    m_x: int
    m_y: int
    m_b: int = 5

    def __post_init__(self):
        if self.m_x < 1 or self.m_y < 1:
            raise ValueError("each coordinate register needs at least one qubit")
        if self.m_b != 5:
            raise ValueError("the block selector always has 5 qubits (32 blocks)")

    @classmethod
    def for_grid(cls, nx: int, ny: int) -> "RegisterLayout":
        for size in (nx, ny):
            if size < 2 or size & (size - 1):
                raise ValueError(f"grid size {size} is not a power of two >= 2")
        return cls(nx.bit_length() - 1, ny.bit_length() - 1)

    @property
    def nx(self) -> int:
        return 2**self.m_x

    @property
    def ny(self) -> int:
        return 2**self.m_y

    @property
    def n_main(self) -> int:
        return self.m_x + self.m_y + self.m_b

    @property
    def n_qubits(self) -> int:
        return self.n_main + 2

    @property
    def a1(self) -> int:
        return self.n_main

    @property
    def a2(self) -> int:
        return self.n_main + 1

    @property
    def x_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.m_x))

    @property
    def y_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.m_x, self.m_x + self.m_y))

    @property
    def block_qubits(self) -> tuple[int, ...]:
        p = self.m_x + self.m_y
        return tuple(range(p, p + self.m_b))

    @property
    def main_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n_main))

    def decode(self, k: int) -> tuple[int, int, int]:
        """Basis index of the main register -> (block, y, x)."""
        nm = self.nx * self.ny
        return k // nm, (k % nm) // self.nx, k % self.nx


class Statevector:
    """Complex amplitudes over ``n_qubits`` qubits; mutated in place by gates."""

    def __init__(self, amplitudes):
        amps = np.array(amplitudes, dtype=complex).ravel()
        n = int(amps.size).bit_length() - 1
        if amps.size == 0 or 2**n != amps.size:
            raise ValueError(f"statevector length must be a power of two, got {amps.size}")
        self.amplitudes = amps
        self.n_qubits = n

    @classmethod
    def zeros(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes.copy())

    def __repr__(self):
        return f"Statevector(n_qubits={self.n_qubits}, norm={self.norm():.6g})"


def _index(n: int, fixed: dict[int, int]) -> tuple:
    # axis 0 of the (2,)*n view is the most significant qubit
    idx = [slice(None)] * n
    for q, bit in fixed.items():
        idx[n - 1 - q] = bit
    return tuple(idx)


@lru_cache(maxsize=64)
def _diag_indices(n: int, targets: tuple[int, ...], controls: tuple[tuple[int, int], ...]):
    k = np.arange(2**n, dtype=np.int64)
    mask = np.ones(k.size, dtype=bool)
    for q, p in controls:
        mask &= ((k >> q) & 1) == p
    sel = np.flatnonzero(mask)
    local = np.zeros(sel.size, dtype=np.int64)
    for i, t in enumerate(targets):
        local |= ((sel >> t) & 1) << i
    return sel, local


def apply_gate(state: Statevector, op: CircuitOp) -> Statevector:
    """Apply ``op`` to ``state`` in place and return it."""
    n = state.n_qubits
    if any(q >= n for q in op.qubits):
        raise GateError(f"{op.kind}: qubit index out of range for {n} qubits")

    if op.kind == "Prepare":
        prepare_amplitudes(state, op.payload, op.targets)
        return state
    if op.kind == "Diagonal":
        sel, local = _diag_indices(n, op.targets, op.controls)
        state.amplitudes[sel] *= op.payload[local]
        return state

    t = state.amplitudes.reshape((2,) * n)
    ctrl = dict(op.controls)
    if op.kind in ("X", "MCX"):
        (q,) = op.targets
        i0, i1 = _index(n, {**ctrl, q: 0}), _index(n, {**ctrl, q: 1})
        tmp = t[i0].copy()
        t[i0] = t[i1]
        t[i1] = tmp
    elif op.kind in ("H", "MC-H"):
        (q,) = op.targets
        i0, i1 = _index(n, {**ctrl, q: 0}), _index(n, {**ctrl, q: 1})
        a = t[i0].copy()
        b = t[i1]
        t[i0] = (a + b) * _SQRT1_2
        t[i1] = (a - b) * _SQRT1_2
    elif op.kind in ("SWAP", "MC-SWAP"):
        p, q = op.targets
        i01, i10 = _index(n, {**ctrl, p: 0, q: 1}), _index(n, {**ctrl, p: 1, q: 0})
        tmp = t[i01].copy()
        t[i01] = t[i10]
        t[i10] = tmp
    return state


def apply_circuit(state: Statevector, ops: Iterable[CircuitOp]) -> Statevector:
    for op in ops:
        apply_gate(state, op)
    return state


def inverse_circuit(ops: Sequence[CircuitOp]) -> list[CircuitOp]:
    """Reverse order with conjugated diagonals; every other gate is self-inverse."""
    inv = []
    for op in reversed(ops):
        if op.kind == "Prepare":
            raise GateError("Prepare has no inverse in this gate set")
        if op.kind == "Diagonal":
            inv.append(CircuitOp("Diagonal", op.targets, op.controls, np.conj(op.payload)))
        else:
            inv.append(op)
    return inv


def prepare_amplitudes(state: Statevector, vector, targets: Sequence[int]) -> float:
    """Load ``vector/||vector||`` into the target register, which must be |0...0>.

    Returns the norm that was divided out so callers can undo the scaling.
    """
    n = state.n_qubits
    targets = tuple(targets)
    vec = np.asarray(vector, dtype=float).ravel()
    if vec.size != 2 ** len(targets):
        raise GateError(f"vector length {vec.size} != 2^{len(targets)}")
    if any(q >= n for q in targets):
        raise GateError("prepare target out of range")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot prepare the zero vector")

    # axes: rest qubits (descending) then targets (descending) -> index = rest*2^k + local
    t = state.amplitudes.reshape((2,) * n)
    t_axes = [n - 1 - q for q in sorted(targets, reverse=True)]
    rest_axes = [a for a in range(n) if a not in t_axes]
    moved = np.transpose(t, rest_axes + t_axes).reshape(2 ** len(rest_axes), -1)

    # local index under moved layout is bit-ordered by sorted targets; map from vector order
    k = len(targets)
    order = sorted(range(k), key=lambda i: targets[i])
    local = np.arange(2**k)
    vec_index = np.zeros(2**k, dtype=np.int64)
    for pos, i in enumerate(order):
        vec_index |= ((local >> pos) & 1) << i

    ground = moved[:, 0].copy()
    leftover = np.linalg.norm(moved[:, 1:])
    if leftover > UNIT_TOL:
        raise GateError("prepare target register is not in the ground state")
    new = np.outer(ground, vec[vec_index] / norm)
    new = new.reshape([2] * n)
    inv_perm = np.argsort(rest_axes + t_axes)
    state.amplitudes[:] = np.transpose(new, inv_perm).ravel()
    return norm


def branch_probability(state: Statevector, ancillas: Sequence[int], outcome: str) -> float:
    """Squared norm of the branch where ``ancillas`` read ``outcome`` (no collapse)."""
    return float(np.sum(np.abs(state.amplitudes[_branch_mask(state, ancillas, outcome)]) ** 2))


def _branch_mask(state: Statevector, ancillas: Sequence[int], outcome: str) -> np.ndarray:
    if len(outcome) != len(ancillas):
        raise ValueError("outcome bitstring must have one bit per ancilla")
    if any(a >= state.n_qubits or a < 0 for a in ancillas):
        raise GateError("ancilla index out of range")
    k = np.arange(state.amplitudes.size, dtype=np.int64)
    mask = np.ones(k.size, dtype=bool)
    for a, bit in zip(ancillas, outcome):
        mask &= ((k >> a) & 1) == int(bit)
    return mask


def project_ancilla(state: Statevector, ancillas: Sequence[int], outcome: str):
    """Post-select ``ancillas`` on ``outcome``; returns (state, success probability).

    ``outcome`` lists bits in the same order as ``ancillas``.
    """
    mask = _branch_mask(state, ancillas, outcome)
    amps = state.amplitudes
    prob = float(np.sum(np.abs(amps[mask]) ** 2))
    if prob == 0.0:
        raise PostSelectionError(f"outcome {outcome} on ancillas {list(ancillas)} has zero norm")
    amps[~mask] = 0.0
    amps /= np.sqrt(prob)
    return state, prob


def read_slice(state: Statevector, block: int, layout) -> np.ndarray:
    """Real amplitudes of one N*M block in the all-ancillas-zero sector, x fastest."""
    if not 0 <= block < 32:
        raise ValueError(f"block must be in [0, 32), got {block}")
    nm = layout.nx * layout.ny
    vals = state.amplitudes[block * nm:(block + 1) * nm]
    resid = np.max(np.abs(vals.imag)) if vals.size else 0.0
    if resid > IMAG_TOL:
        raise ReadoutError(f"block {block} carries imaginary residue {resid:.3e}")
    return vals.real.copy()
