"""Classical D2Q5 lattice Boltzmann solver in stream-function/vorticity form.

Fields are numpy arrays of shape ``(ny, nx)`` indexed ``[y, x]``; the moving
lid is the row ``y = ny - 1``. Distribution sets have shape ``(5, ny, nx)``.
Streaming is periodic so it matches the modular shift circuits node for
node; wall nodes are overwritten by the boundary step right after.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

E = np.array([(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)], dtype=int)
W = np.array([2 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6])
CS2 = 1.0 / 3.0


@dataclass(frozen=True)
class SimConfig:
    """Lattice and run parameters, lattice units throughout.

    ``source_sign`` multiplies omega to form the Poisson source S. The
    default +1 is the stable choice for this discretization; -1 diverges on
    the cavity within a few dozen steps (see tests/test_lattice.py).
    """

    nx: int = 16
    ny: int = 16
    dt: float = 1.0
    dx: float = 1.0
    dy: float = 1.0
    eps: float = 1.0
    U: float = 1.0
    steps: int = 500
    source_sign: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        if self.dt <= 0 or self.dx <= 0 or self.dy <= 0:
            raise ValueError("dt, dx and dy must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")

    @property
    def tau(self) -> float:
        return self.dt / self.eps

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)


def _check_same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"field shape mismatch: {sorted(shapes)}")


def equilibrium_f(omega, u, v) -> np.ndarray:
    """f_eq[a] = w_a * omega * (1 + e_a.(u, v) / cs^2)."""
    omega, u, v = (np.asarray(x, dtype=float) for x in (omega, u, v))
    _check_same_shape(omega, u, v)
    eu = E[:, 0, None, None] * u + E[:, 1, None, None] * v
    return W[:, None, None] * omega * (1.0 + eu / CS2)


def equilibrium_g(psi) -> np.ndarray:
    """g_eq[a] = w_a * psi."""
    psi = np.asarray(psi, dtype=float)
    return W[:, None, None] * psi


def source_term(omega, cfg: SimConfig) -> np.ndarray:
    return cfg.source_sign * np.asarray(omega, dtype=float)


def collide(f, g, omega, psi, u, v, cfg: SimConfig):
    """BGK relaxation of both distribution sets; the g-equation carries the source."""
    feq = equilibrium_f(omega, u, v)
    geq = equilibrium_g(psi)
    S = source_term(omega, cfg)
    eps = cfg.eps
    fhat = (1.0 - eps) * np.asarray(f, dtype=float) + eps * feq
    ghat = (1.0 - eps) * np.asarray(g, dtype=float) + eps * geq + cfg.dt * W[:, None, None] * S
    return fhat, ghat


def stream(fhat) -> np.ndarray:
    """Periodic streaming: f[a](x + e_a) = fhat[a](x)."""
    fhat = np.asarray(fhat)
    out = np.empty_like(fhat)
    for a, (ex, ey) in enumerate(E):
        out[a] = np.roll(fhat[a], (ey, ex), axis=(0, 1))
    return out


def wall_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def wall_vorticity(psi, cfg: SimConfig) -> np.ndarray:
    """Wall vorticity from the first interior line of psi, zero off the walls.

    Walls are written bottom, left, right, top, so the lid value wins at the
    two top corners.
    """
    psi = np.asarray(psi, dtype=float)
    wb = np.zeros_like(psi)
    wb[0, :] = -2.0 * psi[1, :] / cfg.dy**2
    wb[:, 0] = -2.0 * psi[:, 1] / cfg.dx**2
    wb[:, -1] = -2.0 * psi[:, -2] / cfg.dx**2
    wb[-1, :] = -2.0 * psi[-2, :] / cfg.dy**2 - 2.0 * cfg.U / cfg.dy
    return wb


# inward-pointing unknown link per wall, in application order
_INWARD = (
    ((0, slice(None)), 3),   # bottom: +y
    ((slice(None), 0), 1),   # left: +x
    ((slice(None), -1), 2),  # right: -x
    ((-1, slice(None)), 4),  # top: -y
)


def apply_boundaries(f, g, psi, cfg: SimConfig):
    """Force wall omega to the wall-vorticity value and wall psi to zero.

    Each wall rewrites its single inward unknown distribution so the link sum
    hits the target. ``psi`` is the stream function the wall values are built
    from. Returns new (f, g) arrays.
    """
    f = np.array(f, dtype=float)
    g = np.array(g, dtype=float)
    wb = wall_vorticity(psi, cfg)
    for idx, a in _INWARD:
        others = [b for b in range(5) if b != a]
        f[(a,) + idx] = wb[idx] - f[others][(slice(None),) + idx].sum(axis=0)
        g[(a,) + idx] = -g[others][(slice(None),) + idx].sum(axis=0)
    return f, g


def macros(f, g):
    """Zeroth moments: omega = sum_a f_a, psi = sum_a g_a."""
    return np.asarray(f).sum(axis=0), np.asarray(g).sum(axis=0)


def velocity_from_stream(psi, cfg: SimConfig):
    """u = dpsi/dy, v = -dpsi/dx with second-order stencils, then wall velocities."""
    psi = np.asarray(psi, dtype=float)
    ny, nx = psi.shape
    u = np.gradient(psi, cfg.dy, axis=0, edge_order=2 if ny >= 3 else 1)
    v = -np.gradient(psi, cfg.dx, axis=1, edge_order=2 if nx >= 3 else 1)
    u[0, :] = v[0, :] = 0.0
    u[:, 0] = v[:, 0] = 0.0
    u[:, -1] = v[:, -1] = 0.0
    u[-1, :] = cfg.U
    v[-1, :] = 0.0
    return u, v


@dataclass
class FlowState:
    omega: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    f: np.ndarray | None = None
    g: np.ndarray | None = None
    t: int = 0

    @classmethod
    def initial(cls, cfg: SimConfig) -> "FlowState":
        """Zero omega and psi with the lid velocity already on the top row."""
        zero = np.zeros(cfg.shape)
        u, v = velocity_from_stream(zero, cfg)
        f = equilibrium_f(zero, u, v)
        g = equilibrium_g(zero)
        return cls(zero.copy(), zero.copy(), u, v, f, g)


def step(state: FlowState, cfg: SimConfig) -> FlowState:
    """One full update: collide, stream, boundaries, macros, velocity."""
    f, g = state.f, state.g
    if f is None or g is None:
        f = equilibrium_f(state.omega, state.u, state.v)
        g = equilibrium_g(state.psi)
    fhat, ghat = collide(f, g, state.omega, state.psi, state.u, state.v, cfg)
    f, g = stream(fhat), stream(ghat)
    f, g = apply_boundaries(f, g, state.psi, cfg)
    omega, psi = macros(f, g)
    # the inward-link rewrite leaves rounding noise; pin wall values exactly
    mask = wall_mask(cfg.shape)
    omega[mask] = wall_vorticity(state.psi, cfg)[mask]
    psi[mask] = 0.0
    u, v = velocity_from_stream(psi, cfg)
    return FlowState(omega, psi, u, v, f, g, state.t + 1)


def run(cfg: SimConfig, state: FlowState | None = None) -> FlowState:
    state = FlowState.initial(cfg) if state is None else state
    for _ in range(cfg.steps):
        state = step(state, cfg)
    return state


def write_field_csv(path, data) -> None:
    """Row-major CSV, y outer and x inner, 17 significant digits."""
    np.savetxt(path, np.asarray(data, dtype=float), delimiter=",", fmt="%.17g")


def read_field_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
