"""Dense-matrix reference for gates, built from Kronecker products.

Deliberately shares no code with the strided kernel in ``qlbm.statevec``.
"""

from functools import reduce

import numpy as np

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]


def kron_op(n, factors):
    """Operator acting with ``factors[q]`` on qubit q (little-endian), identity elsewhere."""
    mats = [factors.get(q, I2) for q in reversed(range(n))]
    return reduce(np.kron, mats)


def _terms(op):
    """(G - I) on the targets as a list of (coeff, {qubit: 2x2}) terms."""
    if op.kind in ("X", "MCX"):
        (t,) = op.targets
        return [(1.0, {t: X - I2})]
    if op.kind in ("H", "MC-H"):
        (t,) = op.targets
        return [(1.0, {t: H - I2})]
    if op.kind in ("SWAP", "MC-SWAP"):
        p, q = op.targets
        return [(0.5, {p: X, q: X}), (0.5, {p: Y, q: Y}), (0.5, {p: Z, q: Z}), (-0.5, {})]
    raise ValueError(op.kind)


def gate_matrix(op, n):
    dim = 2**n
    if op.kind == "Diagonal":
        ctrl = {q: P[b] for q, b in op.controls}
        U = np.eye(dim, dtype=complex) - kron_op(n, ctrl)
        for local, phase in enumerate(op.payload):
            proj = {t: P[(local >> i) & 1] for i, t in enumerate(op.targets)}
            U = U + phase * kron_op(n, {**ctrl, **proj})
        return U
    ctrl = {q: P[b] for q, b in op.controls}
    U = np.eye(dim, dtype=complex)
    for coeff, fac in _terms(op):
        U = U + coeff * kron_op(n, {**ctrl, **fac})
    return U


def circuit_matrix(ops, n):
    U = np.eye(2**n, dtype=complex)
    for op in ops:
        U = gate_matrix(op, n) @ U
    return U
