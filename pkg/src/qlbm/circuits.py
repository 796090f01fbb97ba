"""Five-stage quantum lattice Boltzmann time step built on the statevector core.

Main-register layout (little-endian): x bits, y bits, then block bits
b0..b4. Block values 0-15 form one half of the encoding and 16-31 duplicate
it; b4 is the half selector and no stage gate ever touches it except the
LCU swaps. Within a half the 16 slots are

    0-4   f-links (omega)        5-9   g-links (psi)
    10-14 source per link        15    wall vorticity

Two ancillas a1, a2 sit above the main register. Sectors are named
(a2, a1); only the (0, 0) sector carries results.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import lattice
from .lattice import SimConfig, W, E
from .statevec import (
    CircuitOp,
    RegisterLayout,
    Statevector,
    apply_circuit,
    branch_probability,
    project_ancilla,
    read_slice,
)

SQRT2 = np.sqrt(2.0)

# stage constants: good-sector amplitude * ||lambda|| = constant * oracle prediction
STAGE_CONSTANTS = {
    "encoding": 1.0,
    "collision": 1.0 / SQRT2,
    "propagation": 1.0 / SQRT2,
    "macros": 0.25,
    "boundary": 1.0 / (4.0 * SQRT2),
}

MIN_PROBABILITY = 1e-12

F0, G0, S0, WB = 0, 5, 10, 15


class MagnitudeGuardError(ValueError):
    """A diagonal entry exceeds 1 in modulus, so no unitary extension exists."""


class PipelineError(RuntimeError):
    """Post-selection failed; indicates a construction fault."""


@dataclass
class LambdaVector:
    entries: np.ndarray
    norm: float

    @property
    def blocks(self) -> np.ndarray:
        return self.entries.reshape(32, -1)


@dataclass
class UnitaryExtension:
    """B1 = A1 + i sqrt(1 - A1^2) on the lower half, B2 = A2 - i sqrt(1 - A2^2) on the upper."""

    B1: np.ndarray
    B2: np.ndarray

    @classmethod
    def from_diagonal(cls, A) -> "UnitaryExtension":
        A = np.asarray(A, dtype=float)
        if np.max(np.abs(A)) > 1.0:
            raise MagnitudeGuardError(f"max |A| = {np.max(np.abs(A)):.6g} > 1")
        half = A.size // 2
        A1, A2 = A[:half], A[half:]
        return cls(
            A1 + 1j * np.sqrt(1.0 - A1**2),
            A2 - 1j * np.sqrt(1.0 - A2**2),
        )

    @property
    def B(self) -> np.ndarray:
        return np.concatenate([self.B1, self.B2])


@dataclass
class DiagonalBlocks:
    a: np.ndarray  # (5, NM) f_eq factors
    b: np.ndarray  # (5, NM) g_eq factors
    c: np.ndarray  # (5, NM) source weights
    d: np.ndarray  # (NM,) wall prefactor

    @property
    def half(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.b.ravel(), self.c.ravel(), self.d])

    @property
    def A(self) -> np.ndarray:
        h = self.half
        return np.concatenate([h, h])

    def extension(self) -> UnitaryExtension:
        return UnitaryExtension.from_diagonal(self.A)


@dataclass
class StageReport:
    stage: str
    gate_counts: dict = field(default_factory=dict)
    probability: float | None = None
    deviation: float | None = None
    constant: float | None = None

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "gate_counts": dict(sorted(self.gate_counts.items())),
            "probability": self.probability,
            "deviation": self.deviation,
            "constant": self.constant,
        }


def layout_for(cfg: SimConfig) -> RegisterLayout:
    return RegisterLayout.for_grid(cfg.nx, cfg.ny)


def count_gates(ops: Sequence[CircuitOp]) -> dict:
    return dict(Counter(op.kind for op in ops))


# --- encoding -------------------------------------------------------------

def assemble_lambda(omega, psi, u, v, cfg: SimConfig) -> LambdaVector:
    """Stack omega, psi, source and wall vorticity into the 32-block vector."""
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if omega.shape != cfg.shape or psi.shape != cfg.shape:
        raise ValueError(f"fields must have shape {cfg.shape}")
    om = omega.ravel()
    src = lattice.source_term(omega, cfg).ravel()
    wb = lattice.wall_vorticity(psi, cfg).ravel()
    half = np.concatenate([np.tile(om, 5), np.tile(psi.ravel(), 5), np.tile(src, 5), wb])
    entries = np.concatenate([half, half])
    return LambdaVector(entries, float(np.linalg.norm(entries)))


def encoding_circuit(lam: LambdaVector, layout: RegisterLayout) -> list[CircuitOp]:
    if lam.norm == 0.0:
        raise ValueError("cannot encode an all-zero lambda; handle the fixed point upstream")
    return [CircuitOp("Prepare", layout.main_qubits, payload=lam.entries)]


# --- collision ------------------------------------------------------------

def build_diagonal(u, v, cfg: SimConfig) -> DiagonalBlocks:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    eu = E[:, 0, None] * u + E[:, 1, None] * v
    a = W[:, None] * (1.0 + eu / lattice.CS2)
    nm = u.size
    b = np.repeat(W[:, None], nm, axis=1)
    c = cfg.dt * b
    d = np.full(nm, 1.0 / SQRT2)
    blocks = DiagonalBlocks(a, b, c, d)
    worst = np.max(np.abs(blocks.half))
    if worst > 1.0:
        raise MagnitudeGuardError(
            f"diagonal entry of modulus {worst:.6g} > 1; reduce the lid velocity "
            "or rescale lambda so that |w(1 + 3 e.u)| <= 1"
        )
    return blocks


def _block_controls(layout: RegisterLayout, value: int, bits=(0, 1, 2, 3)):
    bq = layout.block_qubits
    return [(bq[i], (value >> i) & 1) for i in bits]


def _anc(layout: RegisterLayout, a1=0, a2=0):
    return [(layout.a1, a1), (layout.a2, a2)]


def transposition(register: Sequence[int], p: int, q: int, controls=()) -> list[CircuitOp]:
    """Swap basis values p and q of ``register`` (LSB first), all else fixed.

    Walks a Gray path from p to q and back; 2k - 1 MCX for Hamming distance k.
    """
    m = len(register)
    diff = [i for i in range(m) if (p ^ q) >> i & 1]
    if not diff:
        return []
    path_ops = []
    cur = p
    for i in diff:
        ctrl = [(register[j], (cur >> j) & 1) for j in range(m) if j != i]
        path_ops.append(CircuitOp("MCX", (register[i],), tuple(ctrl) + tuple(controls)))
        cur ^= 1 << i
    return path_ops + path_ops[-2::-1]


def _lcu(layout: RegisterLayout, B: np.ndarray, anc: int, controls=()) -> list[CircuitOp]:
    # diag(B) then H . SWAP(anc, half selector) . H leaves Re(B) in the anc=0 branch
    top = layout.main_qubits[-1]
    kind = "MC-H" if controls else "H"
    swap = "MC-SWAP" if controls else "SWAP"
    return [
        CircuitOp("Diagonal", layout.main_qubits, controls, B),
        CircuitOp(kind, (anc,), controls),
        CircuitOp(swap, (anc, top), controls),
        CircuitOp(kind, (anc,), controls),
    ]


def collision_circuit(blocks: DiagonalBlocks, layout: RegisterLayout) -> list[CircuitOp]:
    """LCU application of A, then add each source slot onto its g-slot.

    The a1=1 remainder of the LCU is parked in a2=1 so that a1 can serve as
    a clean addend register for the Hadamard additions.
    """
    ext = blocks.extension()
    a1, a2 = layout.a1, layout.a2
    bq4 = layout.block_qubits[:4]
    ops = _lcu(layout, ext.B, a1)
    ops.append(CircuitOp("MCX", (a2,), ((a1, 1),)))
    for alpha in range(5):
        ops.append(CircuitOp("MCX", (a1,), tuple([(a2, 0)] + _block_controls(layout, S0 + alpha))))
        ops += transposition(bq4, S0 + alpha, G0 + alpha, _anc(layout, a1=1))
    ops.append(CircuitOp("MC-H", (a1,), ((a2, 0),)))
    return ops


# --- propagation ----------------------------------------------------------

def shift_circuit(direction: str, subregister: Sequence[int], controls=()) -> list[CircuitOp]:
    """Modular increment (R) or decrement (L) of ``subregister`` (LSB first).

    R: a descending cascade of MCX gates for the high bits, each controlled on
    all lower bits, followed by the two-bit tail X q0, X q1, CX(q0 -> q1).
    L is the same sequence reversed.
    """
    if direction not in ("R", "L"):
        raise ValueError(f"direction must be 'R' or 'L', got {direction!r}")
    s = list(subregister)
    controls = tuple(controls)

    def gate(target, ctrl):
        ctrl = tuple(ctrl) + controls
        return CircuitOp("MCX" if ctrl else "X", (target,), ctrl)

    if len(s) == 1:
        ops = [gate(s[0], ())]
    else:
        ops = [gate(s[j], [(s[i], 1) for i in range(j)]) for j in range(len(s) - 1, 1, -1)]
        ops += [gate(s[0], ()), gate(s[1], ()), gate(s[1], [(s[0], 1)])]
    return ops if direction == "R" else ops[::-1]


# link -> (register, direction); y grows toward the lid
_LINK_SHIFTS = {1: ("x", "R"), 2: ("x", "L"), 3: ("y", "R"), 4: ("y", "L")}


@lru_cache(maxsize=16)
def _propagation(layout: RegisterLayout) -> tuple[CircuitOp, ...]:
    ops = []
    for base in (F0, G0):
        for alpha, (axis, direction) in _LINK_SHIFTS.items():
            reg = layout.x_qubits if axis == "x" else layout.y_qubits
            ctrl = _block_controls(layout, base + alpha) + _anc(layout)
            ops += shift_circuit(direction, reg, ctrl)
    return tuple(ops)


def propagation_circuit(layout: RegisterLayout) -> list[CircuitOp]:
    return list(_propagation(layout))


# --- macroscopic sums -----------------------------------------------------

def _mch(layout, bit, ctrl_bits: dict, extra=None):
    bq = layout.block_qubits
    ctrl = [(bq[i], val) for i, val in ctrl_bits.items()]
    ctrl += _anc(layout) if extra is None else extra
    return CircuitOp("MC-H", (bq[bit],), tuple(ctrl))


def _addend(layout, slot):
    # pad a lone slot with the empty a1=1 partner so it picks up a 1/sqrt(2)
    ctrl = [(layout.a2, 0)] + _block_controls(layout, slot)
    return CircuitOp("MC-H", (layout.a1,), tuple(ctrl))


@lru_cache(maxsize=16)
def _macros(layout: RegisterLayout) -> tuple[CircuitOp, ...]:
    bq4 = layout.block_qubits[:4]
    anc = _anc(layout)
    ops = [
        # f-links: (0+1), (2+3); link 4 is parked at slot 10 to match scales
        _mch(layout, 0, {2: 0, 3: 0}),
        *transposition(bq4, 4, 10, anc),
        _addend(layout, 10),
        _mch(layout, 0, {1: 1, 2: 0, 3: 1}),
        _mch(layout, 1, {0: 0, 2: 0, 3: 0}),
        *transposition(bq4, 10, 4, anc),
        _mch(layout, 2, {0: 0, 1: 0, 3: 0}),
        # g-links regrouped into slots 8, 9, 12, 13, 14
        *transposition(bq4, 9, 14, anc),
        *transposition(bq4, 5, 12, anc),
        *transposition(bq4, 6, 13, anc),
        *transposition(bq4, 7, 9, anc),
        _mch(layout, 0, {1: 0, 3: 1}),
        _addend(layout, 14),
        _mch(layout, 2, {0: 0, 3: 1}),
        _mch(layout, 1, {0: 0, 2: 0, 3: 1}),
        *transposition(bq4, 8, 5, anc),
    ]
    return tuple(ops)


def macros_circuit(layout: RegisterLayout) -> list[CircuitOp]:
    """Hadamard-addition trees: slot 0 <- sum f / 4, slot 5 <- sum g / 4."""
    return list(_macros(layout))


# --- boundary -------------------------------------------------------------

def boundary_mask(layout: RegisterLayout) -> np.ndarray:
    """Cb diagonal over the main register: 0 at wall nodes of slots 0, 1, else 1."""
    walls = lattice.wall_mask((layout.ny, layout.nx)).ravel()
    C = np.ones((32, walls.size))
    for blk in (0, 1, 16, 17):
        C[blk, walls] = 0.0
    return C.ravel()


@lru_cache(maxsize=16)
def _boundary(layout: RegisterLayout) -> tuple[CircuitOp, ...]:
    a1, a2 = layout.a1, layout.a2
    bq = layout.block_qubits
    bq4 = bq[:4]
    anc = _anc(layout)
    only_a1 = ((a1, 0),)
    ext = UnitaryExtension.from_diagonal(boundary_mask(layout))
    ops = [
        # wall vorticity 15 -> 7 -> 6, ending at the same 1/4 scale as the sums
        _mch(layout, 3, {0: 1, 1: 1, 2: 1}),
        _mch(layout, 0, {1: 1, 2: 1, 3: 0}),
        # psi 5 -> 1
        CircuitOp("MCX", (bq[2],), tuple([(bq[0], 1), (bq[1], 0), (bq[3], 0)] + anc)),
    ]
    ops += _lcu(layout, ext.B, a2, only_a1)
    ops += [
        # move the Cb remainder out of slots 0, 1 of the a2=1 branch
        CircuitOp("MCX", (bq[1],), ((a2, 1), (a1, 0), (bq[2], 0), (bq[3], 0))),
        CircuitOp("MCX", (a2,), tuple([(a1, 0)] + _block_controls(layout, 6))),
        *transposition(bq4, 6, 0, _anc(layout, a2=1)),
        CircuitOp("MC-H", (a2,), only_a1),
    ]
    return tuple(ops)


def boundary_circuit(layout: RegisterLayout, cfg: SimConfig | None = None) -> list[CircuitOp]:
    """Zero omega and psi on walls, then add the wall vorticity onto slot 0.

    The wall data itself travels in slot 15 of lambda, so the gates depend on
    the layout only; ``cfg`` is accepted for interface symmetry.
    """
    return list(_boundary(layout))


# --- full step ------------------------------------------------------------

def _good(state: Statevector, layout: RegisterLayout) -> np.ndarray:
    return state.amplitudes[: 2**layout.n_main]


def run_timestep(omega, psi, u, v, cfg: SimConfig, check: bool = False):
    """One quantum time step; returns (omega, psi, [StageReport, ...]).

    With ``check=True`` every stage is compared against the classical
    oracle prediction and the max deviation is recorded.
    """
    from . import oracles

    if cfg.eps != 1.0:
        raise ValueError("the quantum pipeline implements eps = 1 only")
    layout = layout_for(cfg)
    lam = assemble_lambda(omega, psi, u, v, cfg)
    if lam.norm == 0.0:
        zero = np.zeros(cfg.shape)
        return zero, zero.copy(), [StageReport("encoding", {}, 1.0, 0.0, 1.0)]

    blocks = build_diagonal(u, v, cfg)
    stages = [
        ("encoding", encoding_circuit(lam, layout)),
        ("collision", collision_circuit(blocks, layout)),
        ("propagation", propagation_circuit(layout)),
        ("macros", macros_circuit(layout)),
        ("boundary", boundary_circuit(layout, cfg)),
    ]
    predictions = oracles.stage_predictions(omega, psi, u, v, cfg) if check else None

    state = Statevector.zeros(layout.n_qubits)
    reports = []
    for name, ops in stages:
        apply_circuit(state, ops)
        rep = StageReport(name, count_gates(ops), constant=STAGE_CONSTANTS[name])
        rep.probability = branch_probability(state, (layout.a1, layout.a2), "00")
        if check:
            pred, mask = predictions[name]
            got = _good(state, layout).reshape(32, -1) * lam.norm
            dev = np.abs(got - STAGE_CONSTANTS[name] * pred)[mask]
            rep.deviation = float(dev.max()) if dev.size else 0.0
        reports.append(rep)

    if reports[-1].probability < MIN_PROBABILITY:
        raise PipelineError(f"post-selection probability {reports[-1].probability:.3e}")
    state, prob = project_ancilla(state, (layout.a1, layout.a2), "00")
    scale = np.sqrt(prob) * lam.norm / STAGE_CONSTANTS["boundary"]
    new_omega = read_slice(state, 0, layout).reshape(cfg.shape) * scale
    new_psi = read_slice(state, 1, layout).reshape(cfg.shape) * scale
    return new_omega, new_psi, reports


# --- accounting -----------------------------------------------------------

def prep_cnot_bound(n: int) -> int:
    return 2 * 4**n - (2 * n + 3) * 2**n + 2 * n


def diagonal_cnot_count(n: int) -> int:
    return 2 * 2**n


def propagation_mcx_count(shift_qubits: int) -> int:
    """Gates in the propagation circuit when every shift register has this width."""
    layout = RegisterLayout(shift_qubits, shift_qubits)
    return len(_propagation(layout))


def gate_count_report(n_main_qubits: int, shift_qubits: int | None = None) -> StageReport:
    """Scaling table for a main register of ``n_main_qubits`` qubits.

    ``shift_qubits`` is the width of each register the R/L operators act on;
    by default the coordinate qubits are split evenly (x gets the extra one).
    """
    n = n_main_qubits
    if n < 7:
        raise ValueError("a main register needs at least 7 qubits (2x2 grid)")
    m_x = (n - 5 + 1) // 2
    m_y = n - 5 - m_x
    layout = RegisterLayout(m_x, m_y)
    counts = {
        "prep_cnot_bound": prep_cnot_bound(n),
        "diagonal_cnot": diagonal_cnot_count(n),
        "diagonal_ops": 2,
        "propagation_mcx": len(_propagation(layout)),
        "macros_gates": len(_macros(layout)),
        "boundary_gates_excl_diagonal": len(_boundary(layout)) - 1,
    }
    if shift_qubits is not None:
        counts["shift_qubits"] = shift_qubits
        counts["propagation_mcx_at_shift_width"] = propagation_mcx_count(shift_qubits)
    return StageReport("accounting", counts)


def dump_circuit(ops: Sequence[CircuitOp]) -> str:
    """Text form, one gate per line, stable across runs."""
    return "\n".join(op.describe() for op in ops) + "\n"
