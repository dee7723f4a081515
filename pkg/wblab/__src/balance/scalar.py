import logging
import jax
import jax.numpy as jnp
from dataclasses import dataclass, field
from flax import struct
from functools import partial
from jax.experimental.ode import odeint
from typing import Callable, List, Optional, Sequence, Tuple, Union

from wblab.__src.utils.errors import (
    InvalidInputError,
    NonConvergenceError,
    ResonanceError,
    StepRejectedError,
)

logger = logging.getLogger(__name__)

BOUNDARIES = ("outflow", "periodic")
_PATH_NODES = 9


@struct.dataclass
class ScalarLaw:
    """
    Scalar balance law  u_t + f(u, a)_x = g(u, a) a_x  written as a Temple system
    with the stationary "fake" variable a, a_x = k(x).

    Attributes:
        flux (Callable): f(u, a).
        source (Callable): g(u, a).
        sonic_state (Callable): u_s(a), the root of ∂u f(., a).
        source_coefficient (Callable, optional): k(x) >= 0; None means k ≡ 0.
        flux_u (Callable, optional): ∂u f; obtained with `jax.grad` when omitted.
        flux_a (Callable, optional): ∂a f; obtained with `jax.grad` when omitted.
        convexity (int): +1 for convex, -1 for concave fluxes.
        name (str): Label.

    Example usage:
    ```
        >>> law = ScalarLaw(flux=lambda u, a: 0.5 * u ** 2,
        ...                 source=lambda u, a: -u,
        ...                 sonic_state=lambda a: 0.0 * a,
        ...                 source_coefficient=lambda x: jnp.where(jnp.abs(x) <= 1, 1.0, 0.0))
    ```
    """
    flux: Callable = struct.field(pytree_node=False)
    source: Callable = struct.field(pytree_node=False)
    sonic_state: Callable = struct.field(pytree_node=False)
    source_coefficient: Optional[Callable] = struct.field(pytree_node=False, default=None)
    flux_u: Optional[Callable] = struct.field(pytree_node=False, default=None)
    flux_a: Optional[Callable] = struct.field(pytree_node=False, default=None)
    convexity: int = struct.field(pytree_node=False, default=1)
    name: str = struct.field(pytree_node=False, default="custom")

    def dflux_du(self, u, a):
        if self.flux_u is not None:
            return self.flux_u(u, a)
        return jnp.vectorize(jax.grad(self.flux, argnums=0))(u, a)

    def dflux_da(self, u, a):
        if self.flux_a is not None:
            return self.flux_a(u, a)
        return jnp.vectorize(jax.grad(self.flux, argnums=1))(u, a)


def _zero_source(u, a):
    return jnp.zeros_like(u)


def burgers_law(source: Optional[Callable] = None,
                source_coefficient: Optional[Callable] = None) -> ScalarLaw:
    """Burgers flux u²/2 with an optional source g(u, a) and coefficient k(x)."""
    return ScalarLaw(
        flux=lambda u, a: 0.5 * u ** 2,
        source=source if source is not None else _zero_source,
        sonic_state=lambda a: jnp.zeros_like(a),
        source_coefficient=source_coefficient,
        flux_u=lambda u, a: u + 0.0 * a,
        flux_a=lambda u, a: jnp.zeros_like(u) + 0.0 * a,
        convexity=1,
        name="burgers",
    )


def traffic_law() -> ScalarLaw:
    """Highway traffic flux f(a, u) = 8au - u² with a the number of lanes; resonant at u = 4a."""
    return ScalarLaw(
        flux=lambda u, a: 8.0 * a * u - u ** 2,
        source=_zero_source,
        sonic_state=lambda a: 4.0 * a,
        flux_u=lambda u, a: 8.0 * a - 2.0 * u,
        flux_a=lambda u, a: 8.0 * u + 0.0 * a,
        convexity=-1,
        name="traffic",
    )


def traffic_eigenvalues(a, u) -> Tuple[jnp.ndarray, jnp.ndarray]:
    """Eigenvalues {0, 8a - 2u} of the traffic Temple system."""
    a = jnp.asarray(a, dtype=jnp.float64)
    u = jnp.asarray(u, dtype=jnp.float64)
    return jnp.zeros(jnp.broadcast_shapes(a.shape, u.shape)), 8.0 * a - 2.0 * u


@struct.dataclass
class TempleState:
    """
    Cell averages u_j and piecewise-constant Temple variable a_j on a uniform grid.

    Attributes:
        x (jnp.ndarray): Cell centres.
        u (jnp.ndarray): Cell averages.
        a (jnp.ndarray): Cell values of a, the primitive of k.
        dx (float): Cell width.
    """
    x: jnp.ndarray
    u: jnp.ndarray
    a: jnp.ndarray
    dx: float = struct.field(pytree_node=False)


def temple_state(x, u, law: ScalarLaw, a=None, subcells: int = 16) -> TempleState:
    """
    Builds a TempleState on uniform cell centres `x`.

    Unless `a` is given explicitly, a_j is the integral of k from the left domain edge
    to x_j, computed with `subcells` midpoints per cell so that piecewise-constant k
    with jumps on cell faces is integrated exactly.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise InvalidInputError("cell centres must be a 1D array with at least two cells")
    dx = float(x[1] - x[0])
    if not dx > 0 or not bool(jnp.allclose(jnp.diff(x), dx, rtol=1e-10, atol=0.0)):
        raise InvalidInputError("cell centres must be uniformly increasing")
    u = jnp.broadcast_to(jnp.asarray(u, dtype=jnp.float64), x.shape)
    if a is not None:
        a = jnp.broadcast_to(jnp.asarray(a, dtype=jnp.float64), x.shape)
    elif law.source_coefficient is None:
        a = jnp.zeros_like(x)
    else:
        n = x.shape[0]
        h = dx / subcells
        mids = x[0] - 0.5 * dx + (jnp.arange(n * subcells) + 0.5) * h
        k = jnp.asarray(law.source_coefficient(mids), dtype=jnp.float64)
        if bool(jnp.any(k < 0)):
            raise InvalidInputError("source coefficient k(x) must be nonnegative")
        cumulative = jnp.cumsum(k * h)
        a = cumulative[jnp.arange(n) * subcells + subcells // 2 - 1]
    if not bool(jnp.all(jnp.isfinite(u))):
        raise InvalidInputError("initial state contains non-finite values")
    return TempleState(x, u, a, dx)


def check_convexity(law: ScalarLaw, u_samples, a_samples) -> None:
    """Samples ∂uu f and rejects the law if its sign disagrees with `law.convexity`."""
    fuu = jnp.vectorize(jax.grad(lambda u, a: law.dflux_du(u, a), argnums=0))
    values = fuu(jnp.asarray(u_samples, dtype=jnp.float64), jnp.asarray(a_samples, dtype=jnp.float64))
    if bool(jnp.any(law.convexity * values < 0)):
        raise InvalidInputError(f"flux '{law.name}' is not {'convex' if law.convexity > 0 else 'concave'} "
                                "on the sampled state range")


@partial(jax.jit, static_argnames=("law",))
def _steady_map(law: ScalarLaw,
                u_in: jnp.ndarray,
                a_start: jnp.ndarray,
                delta_a: jnp.ndarray,
                eps_sonic: jnp.ndarray):
    # the path is parametrised by s in [0, 1] with a = a_start + s * delta_a
    s_nodes = jnp.linspace(0.0, 1.0, _PATH_NODES)

    def rhs(u, s, a0, da, eps):
        a = a0 + s * da
        fu = law.dflux_du(u, a)
        fu = jnp.where(jnp.abs(fu) < eps, jnp.where(fu < 0, -eps, eps), fu)
        return da * (law.source(u, a) - law.dflux_da(u, a)) / fu

    def one(u0, a0, da):
        path = odeint(rhs, u0, s_nodes, a0, da, eps_sonic, rtol=1e-10, atol=1e-10, mxstep=5000)
        fu = law.dflux_du(path, a0 + s_nodes * da)
        bad = (jnp.abs(fu) < eps_sonic) | (jnp.sign(fu) != jnp.sign(fu[0])) | ~jnp.isfinite(path)
        still = da == 0
        crossing = a0 + s_nodes[jnp.argmax(bad)] * da
        return jnp.where(still, u0, path[-1]), (~still) & jnp.any(bad), crossing

    return jax.vmap(one)(u_in, a_start, delta_a)


def _raise_resonance(resonant: jnp.ndarray, crossing: jnp.ndarray, offset: int = 0):
    if bool(jnp.any(resonant)):
        i = int(jnp.argmax(resonant))
        raise ResonanceError(
            f"sonic crossing f'(u) = 0 near a = {float(crossing[i]):.6g} at interface {i + offset}",
            location=float(crossing[i]),
            interface=i + offset,
        )


def steady_jump(u_in: float, delta_a: float, law: ScalarLaw,
                a_start: float = 0.0, eps_sonic: float = 1e-8) -> float:
    """
    Integrates the stationary relation d f(u, a)/da = g(u, a) across a jump of a.

    Args:
        u_in (float): State before the jump.
        delta_a (float): Increment of a across the jump.
        law (ScalarLaw): Balance law.
        a_start (float): Value of a before the jump.
        eps_sonic (float): Resonance threshold on |∂u f|.

    Returns:
        float: State after the jump.

    Example usage:
    ```
        >>> steady_jump(1.0, 1.5, burgers_law(source=lambda u, a: jnp.ones_like(u)))  # u²/2 grows by 1.5
        2.0
    ```
    """
    arr = lambda v: jnp.atleast_1d(jnp.asarray(v, dtype=jnp.float64))
    out, resonant, crossing = _steady_map(law, arr(u_in), arr(a_start), arr(delta_a), jnp.float64(eps_sonic))
    _raise_resonance(resonant, crossing)
    return float(out[0])


@partial(jax.jit, static_argnames=("law",))
def _riemann(law: ScalarLaw, u_left, u_right, a):
    lo = jnp.minimum(u_left, u_right)
    hi = jnp.maximum(u_left, u_right)
    candidates = jnp.stack([u_left, u_right, jnp.clip(law.sonic_state(a), lo, hi)])
    values = law.flux(candidates, a)
    pick = jnp.where(u_left <= u_right, jnp.argmin(values, axis=0), jnp.argmax(values, axis=0))
    return jnp.take_along_axis(candidates, pick[None], axis=0)[0]


def riemann_state(u_left, u_right, a, law: ScalarLaw) -> jnp.ndarray:
    """
    Exact Godunov state at x/t = 0 of the Riemann problem for f(., a).

    Minimizes f over [u_left, u_right] when u_left <= u_right and maximizes it over
    [u_right, u_left] otherwise.
    """
    u_left, u_right, a = jnp.broadcast_arrays(*(jnp.asarray(v, dtype=jnp.float64) for v in (u_left, u_right, a)))
    return _riemann(law, u_left, u_right, a)


@partial(jax.jit, static_argnames=("law",))
def _upwind_fluxes(law: ScalarLaw, u_ext, a_ext, u_tilde):
    a_right = a_ext[1:]
    u_star = _riemann(law, u_tilde, u_ext[1:], a_right)
    return u_star, law.flux(u_star, a_right)


@partial(jax.jit, static_argnames=("law",))
def _godunov_update(law: ScalarLaw, u_ext, a_ext, u_tilde, u_star, u_back, f_plus, dt_dx):
    f_minus = jnp.where(u_star == u_tilde,
                        law.flux(u_ext[:-1], a_ext[:-1]),
                        law.flux(u_back, a_ext[:-1]))
    return u_ext[1:-1] - dt_dx * (f_minus[1:] - f_plus[:-1]), f_minus


def _extend(values: jnp.ndarray, boundary: str) -> jnp.ndarray:
    if boundary == "periodic":
        return jnp.concatenate([values[-1:], values, values[:1]])
    return jnp.concatenate([values[:1], values, values[-1:]])


def _check_boundary(boundary: str):
    if boundary not in BOUNDARIES:
        raise InvalidInputError(f"boundary must be one of {BOUNDARIES}, got '{boundary}'")


def _advance(state: TempleState, law: ScalarLaw, dt: Optional[float], cfl: float,
             boundary: str, eps_sonic: float):
    _check_boundary(boundary)
    eps = jnp.float64(eps_sonic)
    u_ext = _extend(state.u, boundary)
    a_ext = _extend(state.a, boundary)
    delta_a = jnp.diff(a_ext)
    if bool(jnp.any(delta_a != 0)):
        u_tilde, resonant, crossing = _steady_map(law, u_ext[:-1], a_ext[:-1], delta_a, eps)
        _raise_resonance(resonant, crossing)
    else:
        u_tilde = u_ext[:-1]

    speed = max(float(jnp.max(jnp.abs(law.dflux_du(u_ext, a_ext)))),
                float(jnp.max(jnp.abs(law.dflux_du(u_tilde, a_ext[1:])))))
    dt_max = cfl * state.dx / speed if speed > 0 else jnp.inf
    if dt is None:
        dt = float(dt_max)
    elif dt > dt_max * (1.0 + 1e-12):
        raise StepRejectedError(f"dt = {dt:.3e} violates the CFL bound {float(dt_max):.3e}", dt, float(dt_max))

    u_star, f_plus = _upwind_fluxes(law, u_ext, a_ext, u_tilde)
    if bool(jnp.any(delta_a != 0)):
        u_back, resonant, crossing = _steady_map(law, u_star, a_ext[1:], -delta_a, eps)
        _raise_resonance(resonant & (u_star != u_tilde), crossing)
    else:
        u_back = u_star
    u_new, f_minus = _godunov_update(law, u_ext, a_ext, u_tilde, u_star, u_back, f_plus, dt / state.dx)
    if not bool(jnp.all(jnp.isfinite(u_new))):
        raise InvalidInputError("non-finite state produced by the Godunov update")
    inflow = dt * float(f_plus[0] - f_minus[-1])
    return state.replace(u=u_new), dt, inflow


def wb_godunov_step(state: TempleState, law: ScalarLaw, dt: float, cfl: float = 0.9,
                    boundary: str = "outflow", eps_sonic: float = 1e-8) -> TempleState:
    """
    One well-balanced Godunov step.

    At each interface the left state is first carried across the jump of a with
    `steady_jump`; the Riemann problem is then solved at the right value of a, and the
    flux seen from the left cell is mapped back through the inverse stationary jump.
    Discrete steady states built by `steady_profile` are reproduced bit for bit.

    Args:
        state (TempleState): Current state.
        law (ScalarLaw): Balance law.
        dt (float): Time step; must satisfy dt·max|∂u f| <= cfl·dx.
        cfl (float): Courant number, at most 1.
        boundary (str): 'outflow' (zero-order extrapolation) or 'periodic'.
        eps_sonic (float): Resonance threshold on |∂u f|.

    Returns:
        TempleState: The updated state.

    Example usage:
    ```
        >>> law = burgers_law()
        >>> x = jnp.linspace(-0.995, 0.995, 200)
        >>> state = temple_state(x, jnp.where(x < 0, 1.0, 0.0), law)
        >>> state = wb_godunov_step(state, law, dt=0.004)
    ```
    """
    if not 0 < cfl <= 1:
        raise InvalidInputError(f"cfl must lie in (0, 1], got {cfl}")
    new_state, _, _ = _advance(state, law, dt, cfl, boundary, eps_sonic)
    return new_state


def steady_profile(u_left: float, state: TempleState, law: ScalarLaw,
                   boundary: str = "outflow", eps_sonic: float = 1e-8) -> TempleState:
    """
    Discrete steady state through the a-profile of `state`, starting from `u_left`
    in the first cell.

    The profile is obtained by sweeping the same batched stationary map the step uses
    until it reproduces itself exactly, so `wb_godunov_step` leaves it unchanged.
    """
    _check_boundary(boundary)
    eps = jnp.float64(eps_sonic)
    a_ext = _extend(state.a, boundary)
    delta_a = jnp.diff(a_ext)
    u = jnp.full_like(state.u, u_left)
    n = u.shape[0]
    for sweep in range(n + 1):
        u_ext = _extend(u, boundary)
        out, resonant, crossing = _steady_map(law, u_ext[:-1], a_ext[:-1], delta_a, eps)
        _raise_resonance(resonant, crossing)
        new_u = u.at[1:].set(out[1:n])
        if bool(jnp.all(new_u == u)):
            logger.debug("steady profile settled after %d sweeps", sweep)
            return state.replace(u=u)
        u = new_u
    raise NonConvergenceError("steady profile sweep did not settle", trace=[float(jnp.max(jnp.abs(new_u - u)))])


@dataclass
class ScalarRun:
    """Result of `run_scalar`: final state, snapshots and boundary mass ledger."""
    state: TempleState
    time: float
    steps: int
    snapshots: List[Tuple[float, TempleState]] = field(default_factory=list)
    boundary_mass: float = 0.0
    min_sonic_distance: float = float("inf")


def run_scalar(state: TempleState, law: ScalarLaw, t_end: float, cfl: float = 0.9,
               snapshot_times: Sequence[float] = (), boundary: str = "outflow",
               dt: Optional[float] = None, eps_sonic: float = 1e-8,
               max_steps: int = 1_000_000) -> ScalarRun:
    """
    CFL-controlled time loop for `wb_godunov_step`.

    Args:
        state (TempleState): Initial state.
        law (ScalarLaw): Balance law.
        t_end (float): Final time.
        cfl (float): Courant number used to pick dt when `dt` is None.
        snapshot_times (Sequence[float]): Times at which states are recorded (hit exactly).
        boundary (str): 'outflow' or 'periodic'.
        dt (float, optional): Fixed step; CFL-checked every step.
        eps_sonic (float): Resonance threshold.
        max_steps (int): Safety cap on the number of steps.

    Returns:
        ScalarRun: Final state, snapshots, mass entering through the boundaries
        (integrated flux, units of u·x) and the smallest |∂u f| seen.
    """
    if t_end < 0:
        raise InvalidInputError("t_end must be nonnegative")
    if not 0 < cfl <= 1:
        raise InvalidInputError(f"cfl must lie in (0, 1], got {cfl}")
    pending = sorted(float(t) for t in snapshot_times if 0 <= t <= t_end)
    run = ScalarRun(state=state, time=0.0, steps=0)
    logger.info("scalar run '%s': %d cells, t_end = %g", law.name, state.u.shape[0], t_end)
    t = 0.0
    while pending and pending[0] <= t:
        run.snapshots.append((pending.pop(0), state))
    while t < t_end * (1.0 - 1e-14):
        run.min_sonic_distance = min(run.min_sonic_distance,
                                     float(jnp.min(jnp.abs(law.dflux_du(state.u, state.a)))))
        target = pending[0] if pending else t_end
        if dt is None:
            new_state, chosen, inflow = _advance(state, law, None, cfl, boundary, eps_sonic)
            if t + chosen > target:
                new_state, chosen, inflow = _advance(state, law, target - t, cfl, boundary, eps_sonic)
        else:
            new_state, chosen, inflow = _advance(state, law, min(dt, target - t), cfl, boundary, eps_sonic)
        state = new_state
        t = target if abs(t + chosen - target) <= 1e-12 * max(1.0, abs(target)) else t + chosen
        run.boundary_mass += inflow
        run.steps += 1
        while pending and pending[0] <= t * (1.0 + 1e-14):
            run.snapshots.append((pending.pop(0), state))
        if run.steps % 500 == 0:
            logger.debug("t = %.6g after %d steps", t, run.steps)
        if run.steps >= max_steps:
            raise NonConvergenceError(f"step cap {max_steps} reached at t = {t:.6g}")
    run.state, run.time = state, t
    logger.info("scalar run finished: %d steps", run.steps)
    return run


@dataclass
class BressanReport:
    """Paired-run resonance diagnostics for the traffic model."""
    x: jnp.ndarray
    a: jnp.ndarray
    u_inflow: float
    u_base: jnp.ndarray
    u_perturbed: jnp.ndarray
    eigenvalues: jnp.ndarray
    min_convective_speed: float
    sensitivity: float
    delta: float
    steps: int
    times: Optional[jnp.ndarray] = None
    eigenvalue_history: Optional[jnp.ndarray] = None
    sensitivity_history: Optional[jnp.ndarray] = None


def bressan_inflow(a_left: float, a_right: float, margin: float = 1e-3) -> float:
    """
    Inflow state just below the value whose steady continuation is exactly resonant
    (u = 4 a_right) after the lane drop.
    """
    if not a_left > a_right > 0:
        raise InvalidInputError("the lane number must drop: a_left > a_right > 0")
    return (1.0 - margin) * 4.0 * (a_left - (a_left ** 2 - a_right ** 2) ** 0.5)


def bressan_demo(a_left: float = 2.0, a_right: float = 1.0,
                 u0: Union[None, float, Callable] = None,
                 n_cells: int = 200, domain: Tuple[float, float] = (-1.0, 1.0),
                 t_end: float = 2.0, delta: float = 1e-6, cfl: float = 0.9,
                 n_snapshots: int = 10) -> BressanReport:
    """
    Traffic flow across a lane drop, run twice from data differing by `delta`.

    Args:
        a_left (float): Lanes upstream of x = 0.
        a_right (float): Lanes downstream of x = 0.
        u0 (float or Callable, optional): Initial density (constant or profile of x);
            defaults to `bressan_inflow(a_left, a_right)`.
        n_cells (int): Number of cells.
        domain (Tuple[float, float]): Interval.
        t_end (float): Final time.
        delta (float): Size of the initial perturbation.
        cfl (float): Courant number.
        n_snapshots (int): Number of equal intervals of [0, t_end]; Λ and the sensitivity
            ratio are recorded at their n_snapshots + 1 end points.

    Returns:
        BressanReport: Final states, eigenvalue field Λ = {0, 8a - 2u} at the end and
        at every recorded time (shape (times, cells, 2)), smallest convective speed met
        and the sensitivity ratio ||u_δ - u|| / δ.

    Example usage:
    ```
        >>> report = bressan_demo(t_end=1.0)
        >>> report.sensitivity
    ```
    """
    law = traffic_law()
    lo, hi = domain
    dx = (hi - lo) / n_cells
    x = lo + (jnp.arange(n_cells) + 0.5) * dx
    a = jnp.where(x < 0.0, a_left, a_right)
    if u0 is None:
        u0 = bressan_inflow(a_left, a_right)
    u_init = u0(x) if callable(u0) else jnp.full_like(x, float(u0))
    if n_snapshots < 1:
        raise InvalidInputError(f"n_snapshots must be at least 1, got {n_snapshots}")
    check_convexity(law, u_init, a)
    times = [t_end * i / n_snapshots for i in range(n_snapshots + 1)]
    base = run_scalar(temple_state(x, u_init, law, a=a), law, t_end, cfl=cfl, snapshot_times=times)
    perturbed = run_scalar(temple_state(x, u_init + delta, law, a=a), law, t_end, cfl=cfl,
                           snapshot_times=times)
    zeros, convective = traffic_eigenvalues(a, base.state.u)
    sensitivity = float(jnp.max(jnp.abs(perturbed.state.u - base.state.u))) / delta
    history = jnp.stack([jnp.stack(traffic_eigenvalues(a, s.u), axis=-1) for _, s in base.snapshots])
    ratios = jnp.array([jnp.max(jnp.abs(p.u - b.u)) / delta
                        for (_, b), (_, p) in zip(base.snapshots, perturbed.snapshots)])
    logger.info("lane drop %g -> %g: sensitivity ratio %.3g", a_left, a_right, sensitivity)
    return BressanReport(
        x=x, a=a, u_inflow=float(u_init[0]),
        u_base=base.state.u, u_perturbed=perturbed.state.u,
        eigenvalues=jnp.stack([zeros, convective], axis=-1),
        min_convective_speed=min(base.min_sonic_distance, float(jnp.min(jnp.abs(convective)))),
        sensitivity=sensitivity, delta=delta, steps=base.steps,
        times=jnp.array([t for t, _ in base.snapshots]), eigenvalue_history=history,
        sensitivity_history=ratios,
    )
