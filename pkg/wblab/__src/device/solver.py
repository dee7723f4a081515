import logging
import jax
import jax.numpy as jnp
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence

from wblab.__src.device.flux import _augment, _split, _wb_flux
from wblab.__src.device.poisson import PotentialField, _ghosts, _solve, poisson_solve
from wblab.__src.device.state import DeviceConfig, MomentState, check_state, rest_state
from wblab.__src.utils.errors import (
    InvalidInputError,
    NonConvergenceError,
    PositivityError,
    StepRejectedError,
)

logger = logging.getLogger(__name__)


def _update(rho, mom, phi, phi_left, phi_right, doping, tau, dt, dx, literal: bool):
    safe = jnp.where(rho > 0, rho, 1.0)
    u = jnp.where(rho > 0, mom / safe, 0.0)
    # ohmic contacts: ρ = ρ_D at the walls, velocity extrapolated
    u_ext = jnp.concatenate([u[:1], u, u[-1:]])
    rho_ext = jnp.concatenate([doping[:1], rho, doping[-1:]])
    tau_ext = jnp.concatenate([tau[:1], tau, tau[-1:]])
    up = u_ext + 0.5 * rho_ext
    um = u_ext - 0.5 * rho_ext

    jump = jnp.diff(_ghosts(phi, phi_left, phi_right))
    jump = _augment(jump, u_ext[:-1], u_ext[1:], 0.5 * (tau_ext[:-1] + tau_ext[1:]), dx, literal)
    f_in_right, f_in_left = _wb_flux(up[:-1], um[:-1], up[1:], um[1:], jump)
    f_plus, f_minus = _split(up[1:-1], um[1:-1])

    m = jnp.stack([rho, mom], axis=-1)
    new = m - dt / dx * (f_in_left[1:] - f_minus + f_plus - f_in_right[:-1])
    inflow = dt * (f_in_right[0, 0] + f_minus[0, 0]) - dt * (f_in_left[-1, 0] + f_plus[-1, 0])
    crossing = jnp.sqrt(jnp.maximum(0.0, jnp.maximum(up ** 2, um ** 2)[:-1] + 2.0 * jnp.abs(jump)))
    speed = jnp.maximum(jnp.max(jnp.maximum(jnp.abs(up), jnp.abs(um))), jnp.max(crossing))
    return new[:, 0], new[:, 1], inflow, speed


@partial(jax.jit, static_argnames=("literal",))
def _step(rho, mom, config_arrays, bias, dt, dx, literal: bool):
    doping, debye, tau = config_arrays
    phi, _ = _solve(rho, doping, debye, 0.0, -bias, dx)
    return _update(rho, mom, phi, 0.0, -bias, doping, tau, dt, dx, literal)


@partial(jax.jit, static_argnames=("n_steps", "literal"))
def _chunk(rho, mom, config_arrays, bias, dt, dx, n_steps: int, literal: bool):
    def body(carry, _):
        rho, mom = carry
        new_rho, new_mom, inflow, speed = _step(rho, mom, config_arrays, bias, dt, dx, literal)
        norm = jnp.sqrt(jnp.sum(rho ** 2 + mom ** 2))
        increment = jnp.sqrt(jnp.sum((new_rho - rho) ** 2 + (new_mom - mom) ** 2)) / (norm * dt)
        return (new_rho, new_mom), (increment, inflow, speed, jnp.min(new_rho))

    return jax.lax.scan(body, (rho, mom), None, length=n_steps)


def _arrays(config: DeviceConfig):
    return config.doping, config.debye, config.damping_tau


def stable_dt(state: MomentState, config: DeviceConfig) -> float:
    """Largest dt allowed by the Courant number of `config` for the current state."""
    _, _, _, speed = _step(state.rho, state.momentum, _arrays(config), float(config.bias), 0.0,
                           config.dx, config.literal_damping)
    return config.cfl * config.dx / float(speed)


def _check_positive(rho: jnp.ndarray):
    if bool(jnp.any(rho < 0)):
        i = int(jnp.argmin(rho))
        raise PositivityError(f"negative density {float(rho[i]):.3e} in cell {i}", index=i, value=float(rho[i]))


def device_step(state: MomentState, config: DeviceConfig, dt: float) -> MomentState:
    """
    One step of the well-balanced kinetic scheme: Poisson solve for the current
    density, transport with the potential-jump fluxes, projection back on moments.

    m_j <- m_j - dt/dx [F-_{j+1/2} - f-(m_j) + f+(m_j) - F+_{j-1/2}]

    Args:
        state (MomentState): Current moments.
        config (DeviceConfig): Device description.
        dt (float): Time step, dt·max(|u+|, |u-|) <= cfl·dx.

    Returns:
        MomentState: Updated moments.

    Example usage:
    ```
        >>> config = device_config(n_cells=64, doping=1.0)
        >>> state = rest_state(config)
        >>> state = device_step(state, config, dt=0.01)   # unchanged rest state
    ```
    """
    check_state(state)
    _check_positive(state.rho)
    dt_max = stable_dt(state, config)
    if dt > dt_max * (1.0 + 1e-12):
        raise StepRejectedError(f"dt = {dt:.3e} violates the CFL bound {dt_max:.3e}", dt, dt_max)
    rho, mom, _, _ = _step(state.rho, state.momentum, _arrays(config), float(config.bias), float(dt),
                           config.dx, config.literal_damping)
    _check_positive(rho)
    return MomentState(rho, mom)


@dataclass
class DeviceRun:
    """Outcome of `device_run`."""
    state: MomentState
    potential: PotentialField
    time: float
    steps: int
    converged: bool
    boundary_mass: float
    increments: List[float] = field(default_factory=list)


def device_run(state: MomentState, config: DeviceConfig, t_end: Optional[float] = None,
               steady: bool = False, tol: float = 1e-8, patience: int = 50,
               chunk: int = 200, max_steps: int = 400_000, dt: Optional[float] = None) -> DeviceRun:
    """
    Chunked time loop with positivity, CFL and steady-state checks after each chunk.

    Args:
        state (MomentState): Initial moments.
        config (DeviceConfig): Device description.
        t_end (float, optional): Final time; required unless `steady`.
        steady (bool): Stop once the relative increment ||m^{n+1} - m^n|| / (||m^n|| dt)
            stays below `tol` for `patience` consecutive steps.
        tol (float): Steady-state tolerance.
        patience (int): Consecutive steps below `tol`.
        chunk (int): Steps per jitted scan.
        max_steps (int): Step budget.
        dt (float, optional): Fixed time step; chosen from the CFL bound otherwise.

    Returns:
        DeviceRun: Final state and potential, step count, convergence flag and the
        mass that entered through the contacts.
    """
    if t_end is None and not steady:
        raise InvalidInputError("either t_end or steady=True is required")
    check_state(state)
    _check_positive(state.rho)
    t, steps, quiet, inflow_total = 0.0, 0, 0, 0.0
    increments: List[float] = []
    rho, mom = state.rho, state.momentum
    logger.info("device run: %d cells, bias %g, %s", config.n_cells, config.bias,
                "until steady" if steady else f"t_end = {t_end}")
    converged = False
    while steps < max_steps:
        step_dt = dt if dt is not None else stable_dt(MomentState(rho, mom), config)
        n = chunk
        if t_end is not None:
            remaining = t_end - t
            if remaining <= 1e-14 * max(1.0, t_end):
                break
            if step_dt >= remaining:
                n, step_dt = 1, remaining
            else:
                n = max(1, min(chunk, int(remaining // step_dt)))
        for _attempt in range(6):
            (new_rho, new_mom), (inc, inflow, speed, min_rho) = _chunk(
                rho, mom, _arrays(config), float(config.bias), float(step_dt), config.dx, n,
                config.literal_damping)
            worst = float(jnp.max(speed)) * step_dt
            if worst <= config.cfl * config.dx * (1.0 + 1e-12) or dt is not None:
                break
            step_dt = config.cfl * config.dx / float(jnp.max(speed)) * 0.9
        else:
            raise StepRejectedError("CFL bound keeps shrinking inside a chunk", step_dt, step_dt)
        if dt is not None and worst > config.cfl * config.dx * (1.0 + 1e-12):
            raise StepRejectedError(f"dt = {dt:.3e} violates the CFL bound", dt,
                                    config.cfl * config.dx / float(jnp.max(speed)))
        if float(jnp.min(min_rho)) < 0:
            _check_positive(new_rho)
            raise PositivityError("density turned negative inside a chunk", index=None,
                                  value=float(jnp.min(min_rho)))
        rho, mom = new_rho, new_mom
        t += n * step_dt
        steps += n
        inflow_total += float(jnp.sum(inflow))
        inc_list = [float(v) for v in inc]
        increments.extend(inc_list[-patience:])
        increments = increments[-patience:]
        for v in inc_list:
            quiet = quiet + 1 if v < tol else 0
        logger.debug("t = %.5g steps = %d increment = %.3e", t, steps, inc_list[-1])
        if steady and quiet >= patience:
            converged = True
            break
        if not jnp.isfinite(jnp.asarray(inc_list[-1])):
            raise NonConvergenceError("non-finite increment in the device run", trace=increments)
    if t_end is not None and not steady:
        converged = True
    final = MomentState(rho, mom)
    logger.info("device run done: %d steps, t = %.5g, converged = %s", steps, t, converged)
    return DeviceRun(final, poisson_solve(rho, config), t, steps, converged, inflow_total, increments)


@dataclass
class SonicReport:
    """Sonic points (sign changes of |u| - ρ/2) and sonic shocks at cell faces."""
    points: List[int]
    shocks: List[int]
    x_points: List[float]


def sonic_diagnostics(state: MomentState, config: Optional[DeviceConfig] = None) -> SonicReport:
    """
    Locates sonic points and transonic shocks.

    A sonic shock is a face where the flow goes from supersonic to subsonic in the
    direction of motion.
    """
    s = jnp.abs(state.velocity) - 0.5 * state.rho
    change = jnp.sign(s[:-1]) * jnp.sign(s[1:]) < 0
    u_face = 0.5 * (state.velocity[:-1] + state.velocity[1:])
    downstream_drop = jnp.where(u_face >= 0, (s[:-1] > 0) & (s[1:] < 0), (s[1:] > 0) & (s[:-1] < 0))
    points = [int(i) for i in jnp.nonzero(change)[0]]
    shocks = [int(i) for i in jnp.nonzero(change & downstream_drop)[0]]
    if config is not None:
        x_points = [float(config.x[i] + 0.5 * config.dx) for i in points]
    else:
        x_points = []
    return SonicReport(points, shocks, x_points)


@dataclass
class IVRow:
    bias: float
    current: float
    oscillation: float
    converged: bool
    steps: int
    sonic_points: int
    sonic_shocks: int


def iv_curve(config: DeviceConfig, biases: Sequence[float], tol: float = 1e-8,
             max_steps: int = 400_000, continuation: bool = True) -> List[IVRow]:
    """
    Current-voltage relation: one steady run per bias.

    Each row reports the spatial median of ρu at steady state, its spatial spread
    (max - min, which spikes at transonic shocks) and the sonic diagnostics.
    Unconverged biases are flagged with a NaN current.

    Example usage:
    ```
        >>> config = device_config(n_cells=64, debye=0.15)
        >>> rows = iv_curve(config, [0.0, 0.1, 0.2])
    ```
    """
    rows: List[IVRow] = []
    state = rest_state(config)
    for bias in biases:
        cfg = config.with_bias(bias)
        start = state if continuation else rest_state(cfg)
        run = device_run(start, cfg, steady=True, tol=tol, max_steps=max_steps)
        flux = run.state.momentum
        sonic = sonic_diagnostics(run.state, cfg)
        if run.converged:
            current = float(jnp.median(flux))
            state = run.state
        else:
            logger.warning("bias %g did not reach a steady state in %d steps", bias, run.steps)
            current = float("nan")
        rows.append(IVRow(float(bias), current, float(jnp.max(flux) - jnp.min(flux)), run.converged,
                          run.steps, len(sonic.points), len(sonic.shocks)))
    return rows
