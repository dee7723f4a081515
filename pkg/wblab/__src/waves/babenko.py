import logging
import math
import jax
import jax.numpy as jnp
import numpy as np
from dataclasses import dataclass, field
from functools import partial
from scipy.optimize import brentq
from typing import Callable, List, Optional

from wblab.__src.spectral.fourier import (
    DiagonalSymbol,
    PeriodicGrid,
    RealField,
    _apply_multiplier,
    _dealiased_product,
    symbol_multiplier,
)
from wblab.__src.utils.errors import InvalidInputError, NonConvergenceError, WindowError

logger = logging.getLogger(__name__)

MAX_AMPLITUDE = 0.75
TAIL_TOL = 1e-12
MAX_WINDOW_DOUBLINGS = 3


@dataclass
class SolitaryWave:
    """
    Solitary wave of depth-d water, nondimensional speed and amplitude.

    Attributes:
        amplitude_ratio (float): a/d.
        speed_ratio (float): c/sqrt(gd).
        profile (RealField): Surface elevation above the still level, crest at 0.
            For `source_model='full-euler'` the nodes are conformal abscissae and
            `abscissa` holds the physical ones.
        source_model (str): 'full-euler', 'sgn' or 'esgn'.
        depth (float): d.
        g (float): Gravity.
        alpha (float): eSGN parameter (1 for SGN, NaN for full Euler).
        abscissa (jnp.ndarray, optional): Physical x of each profile node.
        iterations (int): Iterations of the last inner solve.
        residual (float): Final residual of the defining equation.
    """
    amplitude_ratio: float
    speed_ratio: float
    profile: RealField
    source_model: str
    depth: float = 1.0
    g: float = 1.0
    alpha: float = float("nan")
    abscissa: Optional[jnp.ndarray] = None
    iterations: int = 0
    residual: float = 0.0

    @property
    def speed(self) -> float:
        return self.speed_ratio * math.sqrt(self.g * self.depth)


@dataclass
class PetviashviliResult:
    solution: jnp.ndarray
    iterations: int
    update: float
    stabilizer: float
    trace: List[float] = field(default_factory=list)


@partial(jax.jit, static_argnames=("nonlinearity", "max_iter"))
def _petviashvili(l_mult, u0, args, gamma_exp, tol, nonlinearity: Callable, max_iter: int):
    inverse = jnp.where(l_mult == 0, 0.0, 1.0 / jnp.where(l_mult == 0, 1.0, l_mult))

    def stabilizer(u):
        nu = nonlinearity(u, args)
        return jnp.sum(_apply_multiplier(u, l_mult) * u) / jnp.sum(nu * u), nu

    def cond(carry):
        it, _, update, _ = carry
        return (it < max_iter) & ((it == 0) | ((update >= tol) & jnp.isfinite(update)))

    def body(carry):
        it, u, _, trace = carry
        s, nu = stabilizer(u)
        new = s ** gamma_exp * _apply_multiplier(nu, inverse)
        update = jnp.max(jnp.abs(new - u)) / jnp.max(jnp.abs(new))
        return it + 1, new, update, trace.at[it].set(update)

    init = (jnp.int32(0), u0, jnp.float64(jnp.inf), jnp.full(max_iter, jnp.nan, dtype=jnp.float64))
    it, u, update, trace = jax.lax.while_loop(cond, body, init)
    s, _ = stabilizer(u)
    return u, it, update, s, trace


def _run_petviashvili(l_mult, guess, args, nonlinearity, gamma_exp, tol, max_iter) -> PetviashviliResult:
    guess = jnp.asarray(guess, dtype=jnp.float64)
    if not bool(jnp.all(jnp.isfinite(guess))):
        raise InvalidInputError("initial guess contains non-finite samples")
    if not bool(jnp.any(guess != 0)):
        raise NonConvergenceError("zero initial guess: the stabilizing factor is undefined")
    u, it, update, s, trace = _petviashvili(l_mult, guess, args, float(gamma_exp), float(tol),
                                            nonlinearity, int(max_iter))
    it, update, s = int(it), float(update), float(s)
    history = [float(t) for t in trace[:it]]
    if not math.isfinite(update) or not math.isfinite(s):
        raise NonConvergenceError(f"Petviashvili iteration diverged after {it} iterations", trace=history)
    if update >= tol:
        if it >= max_iter and abs(s - 1.0) <= 1e-12 and update <= 1e3 * tol:
            logger.info("Petviashvili stalled at round-off (update %.2e, |S - 1| = %.2e)", update, abs(s - 1.0))
        else:
            raise NonConvergenceError(
                f"Petviashvili iteration did not converge in {it} iterations "
                f"(update {update:.3e}, S = {s:.15g})", trace=history)
    return PetviashviliResult(u, it, update, s, history)


def petviashvili_solve(linear: DiagonalSymbol, nonlinearity: Callable[[RealField], RealField],
                       guess: RealField, gamma_exp: float = 2.0, tol: float = 1e-14,
                       max_iter: int = 10_000) -> RealField:
    """
    Petviashvili iteration for L u = N(u) with N homogeneous.

    u <- S^γ L⁻¹ N(u), S = <L u, u> / <N(u), u>; γ = p/(p - 1) for N of degree p, so 2
    for quadratic nonlinearities. Stops when the relative sup-norm update drops below
    `tol`; after `max_iter` iterations a round-off plateau is accepted when
    |S - 1| <= 1e-12.

    Args:
        linear (DiagonalSymbol): L, invertible on the modes the solution occupies.
        nonlinearity (Callable): N acting on RealField; it runs under `jax.jit`, so it
            must be written with jnp operations only.
        guess (RealField): Starting point, not identically zero.
        gamma_exp (float): Exponent of the stabilizing factor.
        tol (float): Update tolerance.
        max_iter (int): Iteration cap.

    Returns:
        RealField: The fixed point.

    Example usage:
    ```
        >>> grid = PeriodicGrid(1024, 80.0, origin=-40.0)
        >>> linear = DiagonalSymbol(lambda k: 1.0 + k ** 2, 1.0, False, "1 - d²")
        >>> square = lambda u: u.replace(samples=3.0 * u.samples ** 2)
        >>> guess = RealField.from_function(grid, lambda x: 0.4 / jnp.cosh(0.45 * x) ** 2)
        >>> u = petviashvili_solve(linear, square, guess)   # sech²(x/2) / 2
    ```
    """
    grid = guess.grid

    def wrapped(samples, _):
        return nonlinearity(RealField(grid, samples)).samples

    result = _run_petviashvili(symbol_multiplier(linear, grid), guess.samples, None, wrapped,
                               gamma_exp, tol, max_iter)
    logger.info("Petviashvili converged in %d iterations (update %.2e)", result.iterations, result.update)
    return guess.replace(samples=result.solution)


def babenko_symbol(depth: float = 1.0) -> DiagonalSymbol:
    """The operator 𝒞 with symbol k coth(k d) and zero mode 1/d."""
    return DiagonalSymbol(lambda k: k / jnp.tanh(k * depth), 1.0 / depth, False, f"C(d={depth})")


def _babenko_nonlinearity(eta, c_mult):
    n = eta.shape[0]
    c_eta = _apply_multiplier(eta, c_mult)
    return _dealiased_product(eta, c_eta, n) + 0.5 * _apply_multiplier(_dealiased_product(eta, eta, n), c_mult)


@jax.jit
def _babenko_residual(eta, c_mult, mu):
    return (mu * _apply_multiplier(eta, c_mult) - eta) - _babenko_nonlinearity(eta, c_mult)


def decay_rate(froude_squared: float) -> float:
    """Far-field decay rate κd of a solitary wave: the root of tan(κ)/κ = c²/gd in (0, π/2)."""
    if not froude_squared > 1:
        raise InvalidInputError(f"solitary waves need c²/gd > 1, got {froude_squared}")
    return brentq(lambda k: math.tan(k) - froude_squared * k, 1e-12, 0.5 * math.pi - 1e-12, xtol=1e-15)


def solitary_window(amplitude_ratio: float, tail: float = 0.1 * TAIL_TOL) -> float:
    """
    Window length (in units of d) whose edges lie where the tail 4a·exp(-κ|x|) is below `tail`.

    κ is taken from a lower bound of the speed, which makes the window conservative.
    """
    kappa = decay_rate(1.0 + 0.85 * amplitude_ratio)
    return 2.0 * math.log(4.0 * amplitude_ratio / tail) / kappa


def _default_points(window: float) -> int:
    return max(512, 2 ** math.ceil(math.log2(window / 0.08)))


def babenko_solitary(amplitude_ratio: float, window: Optional[float] = None,
                     n_points: Optional[int] = None, depth: float = 1.0, g: float = 1.0,
                     tol: float = 1e-14, max_iter: int = 10_000) -> SolitaryWave:
    """
    Full-Euler solitary wave from Babenko's equation

        μ 𝒞η - η - η 𝒞η - ½ 𝒞(η²) = 0,   μ = c²/gd,

    written in units d = g = 1 in the conformal abscissa α, with 𝒞 = k coth(k) and
    physical abscissa given by x_α = 1 + 𝒞η. Each value of μ is solved with the
    Petviashvili iteration (γ = 2); μ is then adjusted with a bracketed root search
    until the crest height equals the requested amplitude.

    Without an explicit `window` the solve starts from `solitary_window` and doubles the
    window (and a default grid with it) up to `MAX_WINDOW_DOUBLINGS` times until the tail
    at the edges is below `TAIL_TOL`.

    Args:
        amplitude_ratio (float): a/d in (0, 0.75].
        window (float, optional): Window length in units of d; by default long enough
            for the tail to drop below 1e-12.
        n_points (int, optional): Grid size; by default a power of two with spacing <= 0.08 d.
        depth (float): d.
        g (float): Gravity.
        tol (float): Petviashvili update tolerance.
        max_iter (int): Petviashvili iteration cap.

    Returns:
        SolitaryWave: Speed, conformal profile and physical abscissae.

    Example usage:
    ```
        >>> wave = babenko_solitary(0.1)
        >>> wave.speed_ratio   # 1.048548...
    ```
    """
    a = float(amplitude_ratio)
    if not 0 < a <= MAX_AMPLITUDE:
        raise InvalidInputError(f"amplitude ratio must lie in (0, {MAX_AMPLITUDE}], got {a}")
    if window is not None:
        return _babenko_on_window(a, float(window), n_points, depth, g, tol, max_iter)
    window = solitary_window(a)
    for doubling in range(MAX_WINDOW_DOUBLINGS + 1):
        try:
            return _babenko_on_window(a, window, n_points, depth, g, tol, max_iter)
        except WindowError as err:
            if doubling == MAX_WINDOW_DOUBLINGS:
                raise
            logger.info("babenko: edge tail %.2e on a window of %.1f d, doubling it", err.tail, window)
            window *= 2.0
            if n_points is not None:
                n_points *= 2


def _babenko_on_window(a: float, window: float, n_points: Optional[int], depth: float, g: float,
                       tol: float, max_iter: int) -> SolitaryWave:
    if n_points is None:
        n_points = _default_points(window)
    grid = PeriodicGrid(int(n_points), float(window), -0.5 * float(window))
    crest = grid.n_points // 2
    c_mult = symbol_multiplier(babenko_symbol(1.0), grid)
    alpha = grid.nodes
    cache = {"eta": None, "result": None}

    def solve(mu: float) -> PetviashviliResult:
        if cache["eta"] is None:
            amp = mu - 1.0
            guess = amp / jnp.cosh(0.5 * jnp.sqrt(3.0 * amp) * alpha) ** 2
        else:
            guess = cache["eta"]
        result = _run_petviashvili(mu * c_mult - 1.0, guess, c_mult, _babenko_nonlinearity, 2.0, tol, max_iter)
        cache["eta"], cache["result"] = result.solution, result
        return result

    def mismatch(mu: float) -> float:
        return float(solve(mu).solution[crest]) - a

    low, high = 1.0 + 0.8 * a, 1.0 + 1.02 * a
    logger.info("babenko solitary wave a/d = %g on a window of %.1f d with %d points", a, window, grid.n_points)
    f_low, f_high = mismatch(low), mismatch(high)
    if f_low * f_high > 0:
        raise NonConvergenceError(
            f"speed bracket [{low}, {high}] does not enclose amplitude {a}", trace=[f_low, f_high])
    mu = brentq(mismatch, low, high, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    result = solve(mu)
    eta = result.solution
    edge = float(jnp.abs(eta[0]))
    if edge > TAIL_TOL:
        raise WindowError(f"solitary wave tail {edge:.3e} at the window edge exceeds {TAIL_TOL}", tail=edge)
    residual = float(jnp.max(jnp.abs(_babenko_residual(eta, c_mult, mu))))
    k = grid.wavenumbers
    primitive = jnp.where(k == 0, 0.0, c_mult / (1j * jnp.where(k == 0, 1.0, k)))
    primitive = primitive.at[grid.n_points // 2].set(0.0)
    # x_α = 1 + 𝒞η: mean part stretches the window, the rest integrates spectrally
    x = (1.0 + jnp.mean(eta)) * alpha + _apply_multiplier(eta, primitive)
    logger.info("babenko: c/sqrt(gd) = %.12f after %d iterations (residual %.2e)", math.sqrt(mu),
                result.iterations, residual)
    profile = RealField(PeriodicGrid(grid.n_points, grid.length * depth, grid.origin * depth), depth * eta)
    return SolitaryWave(a, math.sqrt(mu), profile, "full-euler", depth, g, float("nan"),
                        depth * x, result.iterations, residual)
