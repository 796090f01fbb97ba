"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""

import filecmp
import os

import numpy as np
import pytest

from qlbm import lattice, oracles
from qlbm.circuits import (
    STAGE_CONSTANTS,
    UnitaryExtension,
    assemble_lambda,
    boundary_circuit,
    boundary_mask,
    build_diagonal,
    collision_circuit,
    encoding_circuit,
    gate_count_report,
    layout_for,
    macros_circuit,
    propagation_circuit,
    propagation_mcx_count,
    run_timestep,
    shift_circuit,
)
from qlbm.driver import RunConfig, run_simulation
from qlbm.lattice import SimConfig
from qlbm.statevec import Statevector, apply_circuit

CAVITY = SimConfig(nx=16, ny=16, dt=1.0, dx=1.0, dy=1.0, eps=1.0, U=1.0, steps=500)


@pytest.fixture(scope="module")
def cavity():
    return run_simulation(RunConfig(CAVITY, mode="both", dump_every=100))


def test_c1_cavity_reproduction(cavity, criterion):
    dumped = set(cavity.dumped_steps)
    worst = {}
    for entry in cavity.per_step:
        if entry["step"] in dumped:
            for name in ("omega", "psi", "u", "v"):
                worst[name] = max(worst.get(name, 0.0), entry[name]["linf_rel"])
    ok = len(worst) == 4 and all(val <= 1e-8 for val in worst.values())
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items())
    assert criterion(1, ok, f"16x16, 500 steps, max L-inf rel over dumps {sorted(dumped)}: {detail} (<= 1e-8)")


def test_c2_steady_state(cavity, criterion):
    res = cavity.residual
    vals = [res[p][f] for p in ("quantum", "classical") for f in ("omega", "psi")]
    ok = all(val < 1e-6 for val in vals)
    detail = ", ".join(f"{p} d{f}={res[p][f]:.2e}" for p in ("quantum", "classical") for f in ("omega", "psi"))
    assert criterion(2, ok, f"step 500 vs 499: {detail} (< 1e-6)")


def test_c3_figure_levels(cavity, criterion):
    snap = cavity.snapshots["quantum"][CAVITY.steps]
    interior = ~lattice.wall_mask(CAVITY.shape)
    omega_min = snap["omega"][interior].min()
    speed_max = snap["velocity_magnitude"][interior].max()
    omega_ok = omega_min <= -0.7533 * (1 - 0.01)
    speed_ok = speed_max >= 0.4444 * (1 - 0.01)
    detail = (f"interior min omega={omega_min:.4f} (need <= {-0.7533 * 0.99:.4f}: {'ok' if omega_ok else 'not met'}), "
              f"interior max |u|={speed_max:.4f} (need >= {0.4444 * 0.99:.4f}: {'ok' if speed_ok else 'not met'})")
    assert criterion(3, omega_ok and speed_ok, detail)


def _fit(got, pred, mask):
    g, p = got[mask], pred[mask]
    return float(np.dot(g, p) / np.dot(p, p))


def test_c4_stage_oracles(criterion):
    # constants measured once on 2x2 against the oracle predictions
    small = SimConfig(nx=2, ny=2)
    rng = np.random.default_rng(2024)
    omega, psi = rng.normal(size=(2,) + small.shape)
    u, v = rng.uniform(-1, 1, size=(2,) + small.shape)
    L = layout_for(small)
    lam = assemble_lambda(omega, psi, u, v, small)
    preds = oracles.stage_predictions(omega, psi, u, v, small)
    s = Statevector.zeros(L.n_qubits)
    measured = {}
    for name, ops in [("encoding", encoding_circuit(lam, L)),
                      ("collision", collision_circuit(build_diagonal(u, v, small), L)),
                      ("propagation", propagation_circuit(L)),
                      ("macros", macros_circuit(L)),
                      ("boundary", boundary_circuit(L, small))]:
        apply_circuit(s, ops)
        pred, mask = preds[name]
        measured[name] = _fit(s.amplitudes[: 2**L.n_main].real.reshape(32, -1) * lam.norm, pred, mask)
    const_ok = all(abs(measured[k] - STAGE_CONSTANTS[k]) <= 1e-12 for k in measured)

    cfg = SimConfig(nx=4, ny=4)
    worst_stage = {}
    worst_e2e = 0.0
    for _ in range(50):
        omega, psi = rng.normal(size=(2,) + cfg.shape)
        u, v = rng.uniform(-1, 1, size=(2,) + cfg.shape)
        om_q, ps_q, reports = run_timestep(omega, psi, u, v, cfg, check=True)
        for rep in reports:
            worst_stage[rep.stage] = max(worst_stage.get(rep.stage, 0.0), rep.deviation)
        ref = lattice.step(lattice.FlowState(omega, psi, u, v), cfg)
        worst_e2e = max(worst_e2e, np.abs(om_q - ref.omega).max(), np.abs(ps_q - ref.psi).max())
    ok = const_ok and max(worst_stage.values()) <= 1e-10 and worst_e2e <= 1e-10
    consts = " ".join(f"{k}={v:.12f}" for k, v in measured.items())
    devs = " ".join(f"{k}={v:.1e}" for k, v in worst_stage.items())
    assert criterion(4, ok, f"constants {consts}; 50 draws 4x4 max dev {devs}; end-to-end {worst_e2e:.1e} (<= 1e-10)")


def test_c5_unitarity_and_permutations(criterion):
    rng = np.random.default_rng(5)
    cfg = SimConfig(nx=4, ny=4)
    L = layout_for(cfg)
    omega, psi = rng.normal(size=(2,) + cfg.shape)
    u, v = rng.uniform(-1, 1, size=(2,) + cfg.shape)
    circuits_ = {
        "collision": collision_circuit(build_diagonal(u, v, cfg), L),
        "propagation": propagation_circuit(L),
        "macros": macros_circuit(L),
        "boundary": boundary_circuit(L, cfg),
    }
    worst = 0.0
    for _ in range(1000):
        amps = rng.normal(size=2**L.n_qubits) + 1j * rng.normal(size=2**L.n_qubits)
        s = Statevector(amps / np.linalg.norm(amps))
        for ops in circuits_.values():
            apply_circuit(s, ops)
            worst = max(worst, abs(s.norm() - 1.0))

    big = layout_for(CAVITY)
    perm_ok = True
    for reg in (big.x_qubits, big.y_qubits):
        m = len(reg)
        for k in range(2**m):
            s = Statevector(np.eye(2**m)[k])
            apply_circuit(s, shift_circuit("R", range(m)))
            perm_ok &= int(np.argmax(np.abs(s.amplitudes))) == (k + 1) % 2**m
            apply_circuit(s, shift_circuit("L", range(m)))
            perm_ok &= int(np.argmax(np.abs(s.amplitudes))) == k and np.isclose(abs(s.amplitudes[k]), 1)

    state = lattice.run(CAVITY)
    B = build_diagonal(state.u, state.v, CAVITY).extension().B
    Cb = UnitaryExtension.from_diagonal(boundary_mask(big)).B
    bb = max(np.abs(B * B.conj() - 1).max(), np.abs(Cb * Cb.conj() - 1).max())
    ok = worst <= 1e-12 and perm_ok and bb <= 1e-10
    assert criterion(5, ok, f"1000 states x 4 stages max |norm-1|={worst:.1e}; R/L exhaustive on "
                            f"{big.m_x}+{big.m_y} qubits: {'ok' if perm_ok else 'broken'}; max |BB^dag - I|={bb:.1e}")


def test_c6_gate_accounting(criterion):
    # frozen from direct integer evaluation of 2*4^n - (2n+3)*2^n + 2n
    frozen_prep = {7: 30606, 8: 126224, 9: 513554, 10: 2073620, 11: 8337430, 12: 33443864, 13: 133980186}
    ok = True
    for n in range(7, 14):
        counts = gate_count_report(n).gate_counts
        ok &= counts["diagonal_cnot"] == 2 * 2**n
        ok &= counts["prep_cnot_bound"] == frozen_prep[n] == 2 * 4**n - (2 * n + 3) * 2**n + 2 * n
    steps = {m: propagation_mcx_count(m + 1) - propagation_mcx_count(m) for m in range(2, 9)}
    ok &= all(d == 8 for d in steps.values())
    assert criterion(6, ok, f"n=7..13 diagonal and prep counts match; propagation increments per "
                            f"added qubit per shift register {sorted(set(steps.values()))}")


def test_c7_moment_identities(criterion):
    rng = np.random.default_rng(7)
    omega, psi, u, v = rng.uniform(-1, 1, size=(4, 100, 1000))
    ef = np.abs(lattice.equilibrium_f(omega, u, v).sum(axis=0) - omega).max()
    eg = np.abs(lattice.equilibrium_g(psi).sum(axis=0) - psi).max()
    ok = ef <= 8 * np.finfo(float).eps and eg <= 4 * np.finfo(float).eps
    assert criterion(7, ok, f"1e5 nodes: max |sum f_eq - omega|={ef:.1e}, max |sum g_eq - psi|={eg:.1e}")


def test_c8_determinism(tmp_path, criterion):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        run_simulation(RunConfig(SimConfig(nx=8, ny=8, steps=20), mode="both", out=str(d), dump_every=5))
    names = []
    for root, _, files in os.walk(dirs[0]):
        names += [os.path.relpath(os.path.join(root, f), dirs[0]) for f in files]
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    csvs = [n for n in names if n.endswith(".csv")]
    ok = not mismatch and not errors and len(csvs) == 2 * 4 * 5
    assert criterion(8, ok, f"{len(match)} of {len(names)} files byte-identical ({len(csvs)} CSVs + report)")
