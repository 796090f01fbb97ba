"""Stage-by-stage predictions built only from the classical solver.

Each prediction is a (32, N*M) array in field units together with a boolean
mask of the entries the stage contract pins down; entries outside the mask
hold Hadamard-addition by-products and are not constrained. The quantum
good-sector amplitudes times ||lambda|| should equal the stage constant
times the prediction on the mask.
"""

from __future__ import annotations

import numpy as np

from . import lattice
from .lattice import SimConfig


def _halves(half: np.ndarray) -> np.ndarray:
    return np.concatenate([half, half])


def stage_predictions(omega, psi, u, v, cfg: SimConfig) -> dict:
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    nm = omega.size
    wb = lattice.wall_vorticity(psi, cfg)

    enc = np.zeros((16, nm))
    enc[0:5] = omega.ravel()
    enc[5:10] = psi.ravel()
    enc[10:15] = lattice.source_term(omega, cfg).ravel()
    enc[15] = wb.ravel()

    # eps = 1: incoming distributions do not matter
    fhat, ghat = lattice.collide(np.zeros((5,) + omega.shape), np.zeros((5,) + omega.shape),
                                 omega, psi, u, v, cfg)
    col = np.zeros((16, nm))
    col[0:5] = fhat.reshape(5, nm)
    col[5:10] = ghat.reshape(5, nm)
    col[15] = wb.ravel() / np.sqrt(2.0)

    f, g = lattice.stream(fhat), lattice.stream(ghat)
    prop = col.copy()
    prop[0:5] = f.reshape(5, nm)
    prop[5:10] = g.reshape(5, nm)

    om_star, ps_star = lattice.macros(f, g)
    mac = np.zeros((16, nm))
    mac[0] = om_star.ravel()
    mac[5] = ps_star.ravel()
    mac[15] = 2.0 * wb.ravel()
    mac_mask = np.zeros((16, nm), dtype=bool)
    mac_mask[[0, 5, 6, 7, 8, 15]] = True

    fb, gb = lattice.apply_boundaries(f, g, psi, cfg)
    om_new, ps_new = lattice.macros(fb, gb)
    walls = lattice.wall_mask(omega.shape)
    om_new[walls] = wb[walls]
    ps_new[walls] = 0.0
    bnd = np.zeros((16, nm))
    bnd[0] = om_new.ravel()
    bnd[1] = ps_new.ravel()
    bnd_mask = np.zeros((16, nm), dtype=bool)
    bnd_mask[[0, 1]] = True

    full = np.ones((32, nm), dtype=bool)
    return {
        "encoding": (_halves(enc), full),
        "collision": (_halves(col), full),
        "propagation": (_halves(prop), full),
        "macros": (_halves(mac), _halves(mac_mask)),
        "boundary": (_halves(bnd), _halves(bnd_mask)),
    }
