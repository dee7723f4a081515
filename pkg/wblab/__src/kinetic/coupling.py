import logging
import jax
import jax.numpy as jnp
import numpy as np
from dataclasses import dataclass, field
from flax import struct
from typing import List, Optional, Tuple

from wblab.__src.balance.scalar import TempleState, burgers_law, temple_state, wb_godunov_step
from wblab.__src.kinetic.vfp import (
    VelocityGrid,
    _check_condition,
    _layer_doublings,
    _layer_scattering,
    fokker_planck_matrix,
    from_hermite,
    gauss_hermite_grid,
    moments,
    to_hermite,
)
from wblab.__src.utils.errors import InvalidInputError, NonConvergenceError, PositivityError, StepRejectedError

logger = logging.getLogger(__name__)

KINETIC_MODES = ("split", "scattering")
POSITIVITY_TOL = 1e-10

# one law object so the jitted Godunov kernels compile once
_BURGERS = burgers_law()


@struct.dataclass
class KineticDensity:
    """
    Discrete-ordinates density f(x_i, v_j) on periodic cells.

    Attributes:
        values (jnp.ndarray): (n_cells, n_ordinates) samples.
        grid (VelocityGrid): Velocity ordinates and quadrature.
        dx (float): Cell width.
    """
    values: jnp.ndarray
    grid: VelocityGrid
    dx: float = struct.field(pytree_node=False)

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    def moments(self) -> Tuple[jnp.ndarray, jnp.ndarray]:
        """Cell densities ρ_i and currents J_i."""
        return moments(self.values, self.grid)

    def total_mass(self) -> float:
        return float(self.dx * jnp.sum(self.moments()[0]))

    def total_momentum(self) -> float:
        return float(self.dx * jnp.sum(self.moments()[1]))


def maxwellian_density(x, rho, drift=0.0, kappa: float = 1.0, n_ordinates: int = 32,
                       grid: Optional[VelocityGrid] = None) -> KineticDensity:
    """
    Local Maxwellians ρ(x) exp(-(v - w(x))² / 2κ) / sqrt(2πκ) sampled on the ordinates.

    Example usage:
    ```
        >>> x = jnp.linspace(0.0, 1.0, 64, endpoint=False) + 0.5 / 64
        >>> f = maxwellian_density(x, 1.0 + 0.1 * jnp.sin(2 * jnp.pi * x), kappa=1.0)
        >>> rho, current = f.moments()
    ```
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise InvalidInputError("cell centres must be a 1D array with at least two cells")
    if grid is None:
        grid = gauss_hermite_grid(n_ordinates, kappa)
    elif grid.kappa != kappa:
        raise InvalidInputError(f"velocity grid is scaled for kappa = {grid.kappa}, not {kappa}")
    rho = jnp.broadcast_to(jnp.asarray(rho, dtype=jnp.float64), x.shape)
    drift = jnp.broadcast_to(jnp.asarray(drift, dtype=jnp.float64), x.shape)
    if bool(jnp.any(rho < 0)):
        raise InvalidInputError("density must be nonnegative")
    v = grid.velocities[None, :]
    values = rho[:, None] * jnp.exp(-(v - drift[:, None]) ** 2 / (2.0 * kappa)) / jnp.sqrt(2.0 * jnp.pi * kappa)
    return KineticDensity(values, grid, float(x[1] - x[0]))


@jax.jit
def _upwind(values, velocities, dt_dx):
    # periodic first-order upwinding of v ∂x f, one ordinate per column
    incoming = jnp.where(velocities > 0, jnp.roll(values, 1, axis=0), jnp.roll(values, -1, axis=0))
    return values - dt_dx * jnp.abs(velocities) * (values - incoming)


@jax.jit
def _collide(values, u, grid: VelocityGrid, dt):
    eye = jnp.eye(grid.size)

    def one(f_cell, u_cell):
        system = eye - dt * fokker_planck_matrix(u_cell, grid)
        c = jax.scipy.linalg.solve_triangular(system, to_hermite(f_cell, grid), lower=True)
        return from_hermite(c, grid)

    return jax.vmap(one)(values, u)


@jax.jit
def _drag(u, values, grid: VelocityGrid, dt):
    rho, current = moments(values, grid)
    return u + dt * (current - u * rho)


@jax.jit
def _scatter_update(u, values, matrices, velocities, weights, dt_dx):
    pos = velocities > 0
    right = jnp.roll(values, -1, axis=0)
    incoming = jnp.where(pos, values, right)
    out = jnp.einsum("kij,kj->ki", matrices, incoming)
    # traces on both sides of the layer between cell i and i + 1
    trace_left = jnp.where(pos, values, out)
    trace_right = jnp.where(pos, out, right)
    new = values - dt_dx * velocities * (trace_left - jnp.roll(trace_right, 1, axis=0))
    lost = jnp.sum(weights * velocities ** 2 * (trace_left - trace_right), axis=-1)
    return u + 0.5 * dt_dx * (lost + jnp.roll(lost, 1)), new


def _interface_matrices(u_faces, kappa: float, dx: float, grid: VelocityGrid):
    doublings = _layer_doublings(u_faces, kappa, dx, grid)

    def one(u_face):
        return _layer_scattering(u_face, kappa, dx, grid.velocities, grid.weights, doublings)

    matrices, condition = jax.vmap(one)(u_faces)
    _check_condition(float(jnp.max(condition)), f"kappa = {kappa}, layer length {dx}")
    min_entry = float(jnp.min(matrices))
    if min_entry < -POSITIVITY_TOL:
        logger.warning("interface scattering matrices have negative entries (min %.3e)", min_entry)
    return matrices


def _check_density(values: jnp.ndarray, tol: float = POSITIVITY_TOL):
    low = float(jnp.min(values))
    if low >= 0:
        return
    scale = max(1.0, float(jnp.max(values)))
    if low < -tol * scale:
        cell = int(np.unravel_index(int(jnp.argmin(values)), values.shape)[0])
        raise PositivityError(f"kinetic density dropped to {low:.3e} in cell {cell}", index=cell, value=low)
    logger.debug("round-off negative kinetic density %.3e", low)


def coupled_dt(state: TempleState, density: KineticDensity, cfl: float = 0.9) -> float:
    """Largest dt with dt·max(|u|, |v|) <= cfl·dx."""
    speed = max(float(jnp.max(jnp.abs(state.u))), float(jnp.max(jnp.abs(density.grid.velocities))))
    return cfl * state.dx / speed


def burgers_vfp_step(state: TempleState, density: KineticDensity, kappa: float, dt: float,
                     kinetic: str = "split", cfl: float = 1.0) -> Tuple[TempleState, KineticDensity]:
    """
    One splitting step of the Burgers / Vlasov-Fokker-Planck system

        u_t + (u²/2)_x = ∫ (v - u) f dv,
        f_t + v f_x = ∂v((v - u) f + κ ∂v f)

    on a periodic grid.

    The Burgers part is advanced by the Godunov scheme. With `kinetic="split"` the
    ordinates are then upwinded and the collision is solved implicitly in Hermite
    coefficient space with u frozen per cell; the drag J - uρ fed back to u is taken
    from the post-collision density, so the momentum lost by the particles is exactly
    the momentum gained by u. With `kinetic="scattering"` collisions act through the
    stationary scattering matrix of the layer between two cell centres (see
    `layer_scattering_matrix`, drift averaged from the two cells) and the momentum lost
    at each layer goes half to each neighbouring cell. Those matrices are nonnegative,
    so under the CFL bound the update keeps f nonnegative.

    Args:
        state (TempleState): Burgers field on uniform periodic cells.
        density (KineticDensity): Kinetic density on the same cells.
        kappa (float): Diffusion coefficient, must match the velocity grid.
        dt (float): Time step, dt·max(|u|, |v|) <= cfl·dx.
        kinetic (str): 'split' or 'scattering'.
        cfl (float): Courant bound checked against dt.

    Returns:
        Tuple[TempleState, KineticDensity]: Updated field and density.

    Example usage:
    ```
        >>> x = jnp.linspace(0.0, 1.0, 64, endpoint=False) + 0.5 / 64
        >>> state = temple_state(x, 0.5 * jnp.sin(2 * jnp.pi * x), burgers_law())
        >>> f = maxwellian_density(x, 1.0, kappa=1.0)
        >>> state, f = burgers_vfp_step(state, f, 1.0, dt=1e-3)
    ```
    """
    if kinetic not in KINETIC_MODES:
        raise InvalidInputError(f"kinetic must be one of {KINETIC_MODES}, got '{kinetic}'")
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    if density.grid.kappa != kappa:
        raise InvalidInputError(f"velocity grid is scaled for kappa = {density.grid.kappa}, not {kappa}")
    if density.n_cells != state.u.shape[0] or abs(density.dx - state.dx) > 1e-12 * state.dx:
        raise InvalidInputError("kinetic density and Burgers field live on different cells")
    if bool(jnp.any(state.a != state.a[0])):
        raise InvalidInputError("the coupled Burgers field carries no geometric source (a must be constant)")
    dt_max = coupled_dt(state, density, cfl)
    if dt > dt_max * (1.0 + 1e-12):
        raise StepRejectedError(f"dt = {dt:.3e} violates the CFL bound {dt_max:.3e}", dt, dt_max)
    _check_density(density.values)

    state = wb_godunov_step(state, _BURGERS, dt, cfl=1.0, boundary="periodic")
    grid = density.grid
    dt_dx = dt / density.dx
    if kinetic == "split":
        values = _upwind(density.values, grid.velocities, dt_dx)
        values = _collide(values, state.u, grid, dt)
        u = _drag(state.u, values, grid, dt)
    else:
        u_faces = 0.5 * (state.u + jnp.roll(state.u, -1))
        matrices = _interface_matrices(u_faces, kappa, density.dx, grid)
        u, values = _scatter_update(state.u, density.values, matrices, grid.velocities, grid.weights, dt_dx)
    _check_density(values)
    return state.replace(u=u), density.replace(values=values)


@dataclass
class CoupledRun:
    """Outcome of `run_burgers_vfp`, with the (time, total momentum) ledger."""
    state: TempleState
    density: KineticDensity
    time: float
    steps: int
    ledger: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def momentum_drift(self) -> float:
        start = self.ledger[0][1]
        return max(abs(m - start) for _, m in self.ledger)


def total_momentum(state: TempleState, density: KineticDensity) -> float:
    """∫ u dx + ∫∫ v f dx dv."""
    return float(state.dx * jnp.sum(state.u)) + density.total_momentum()


def run_burgers_vfp(state: TempleState, density: KineticDensity, kappa: float, t_end: float,
                    cfl: float = 0.9, kinetic: str = "split", dt: Optional[float] = None, max_steps: int = 200_000) -> CoupledRun:
    """
    Time loop for `burgers_vfp_step` with a total-momentum ledger recorded every step.

    Example usage:
    ```
        >>> run = run_burgers_vfp(state, f, kappa=1.0, t_end=0.1)
        >>> run.momentum_drift   # round-off
    ```
    """
    if t_end < 0:
        raise InvalidInputError("t_end must be nonnegative")
    run = CoupledRun(state, density, 0.0, 0)
    run.ledger.append((0.0, total_momentum(state, density)))
    logger.info("burgers/vfp run (%s): %d cells, %d ordinates, t_end = %g",
                kinetic, density.n_cells, density.grid.size, t_end)
    t = 0.0
    while t < t_end * (1.0 - 1e-14):
        step = dt if dt is not None else coupled_dt(state, density, cfl)
        step = min(step, t_end - t)
        state, density = burgers_vfp_step(state, density, kappa, step, kinetic=kinetic, cfl=cfl)
        t += step
        run.steps += 1
        run.ledger.append((t, total_momentum(state, density)))
        if run.steps % 200 == 0:
            logger.debug("t = %.6g after %d steps, momentum %.15g", t, run.steps, run.ledger[-1][1])
        if run.steps >= max_steps:
            raise NonConvergenceError(f"step cap {max_steps} reached at t = {t:.6g}")
    run.state, run.density, run.time = state, density, t
    logger.info("burgers/vfp run done: %d steps, momentum drift %.3e", run.steps, run.momentum_drift)
    return run


def periodic_cells(n_cells: int, length: float = 1.0) -> jnp.ndarray:
    """Cell centres of a uniform periodic grid on [0, length)."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise InvalidInputError(f"n_cells must be an integer >= 2, got {n_cells}")
    dx = length / n_cells
    return (jnp.arange(n_cells) + 0.5) * dx


def burgers_field(x, u) -> TempleState:
    """Burgers field without geometric source on the cells `x`."""
    return temple_state(x, u, _BURGERS)
