import logging
import math
import jax
import jax.numpy as jnp
import numpy as np
from dataclasses import dataclass, field
from flax import struct
from jax.experimental.ode import odeint
from scipy.optimize import brentq
from typing import List, Optional, Sequence, Union

from wblab.__src.spectral.fourier import (
    PeriodicGrid,
    RealField,
    _apply_multiplier,
    _dealiased_product,
    _require_same_grid,
    derivative_symbol,
    symbol_multiplier,
)
from wblab.__src.waves.babenko import SolitaryWave, babenko_solitary
from wblab.__src.utils.errors import IllPosedError, InvalidInputError, LabError, NonConvergenceError

logger = logging.getLogger(__name__)

ALPHA_OPT = 6.0 / 5.0
MODELS = ("sgn", "esgn", "euler")
PROFILE_TAIL = 1e-13

# Taylor coefficients of tanh(x)/x in powers of x².
THC_SERIES = (
    1.0,
    -1.0 / 3.0,
    2.0 / 15.0,
    -17.0 / 315.0,
    62.0 / 2835.0,
    -1382.0 / 155925.0,
    21844.0 / 6081075.0,
    -929569.0 / 638512875.0,
)
SERIES_CUTOFF = 0.2


def _check_alpha(alpha: float):
    if not alpha >= 1.0:
        raise IllPosedError(f"the extended Serre system is ill-posed for alpha < 1, got {alpha}")


@struct.dataclass
class ShallowState:
    """
    Depth-averaged shallow-water state of the Serre-Green-Naghdi family.

    Attributes:
        h (RealField): Total depth, positive everywhere.
        u_bar (RealField): Depth-averaged horizontal velocity.
        d (float): Still-water depth.
        g (float): Gravity.
        alpha (float): Closure parameter, 1 for the classical equations.
    """
    h: RealField
    u_bar: RealField
    d: float = struct.field(pytree_node=False, default=1.0)
    g: float = struct.field(pytree_node=False, default=1.0)
    alpha: float = struct.field(pytree_node=False, default=1.0)

    def __post_init__(self):
        _check_alpha(self.alpha)
        _require_same_grid(self.h, self.u_bar)
        if not bool(jnp.all(self.h.samples > 0)):
            raise InvalidInputError("depth must be positive everywhere")


def vertical_acceleration(h: RealField, u_bar: RealField, u_bar_t: RealField,
                          alpha: float = 1.0, g: float = 1.0) -> RealField:
    """
    Fluid vertical acceleration at the free surface,

        γ = 2h ū_x² + (1 - α) g h h_xx - α h ∂x[ū_t + ū ū_x].

    `alpha = 1` is the classical closure. Derivatives are spectral and products dealiased.

    Args:
        h (RealField): Total depth.
        u_bar (RealField): Depth-averaged velocity.
        u_bar_t (RealField): Its time derivative.
        alpha (float): Closure parameter.
        g (float): Gravity.

    Returns:
        RealField: γ on the common grid.

    Example usage:
    ```
        >>> grid = PeriodicGrid(64, 2 * jnp.pi)
        >>> u = RealField.from_function(grid, jnp.sin)
        >>> one = RealField.from_function(grid, jnp.ones_like)
        >>> vertical_acceleration(one, u, u.replace(samples=jnp.zeros(64))).samples   # all ones
    ```
    """
    _require_same_grid(h, u_bar)
    _require_same_grid(h, u_bar_t)
    _check_alpha(alpha)
    grid = h.grid
    n = grid.n_points
    d_mult = symbol_multiplier(derivative_symbol(1), grid)
    u_x = _apply_multiplier(u_bar.samples, d_mult)
    h_xx = _apply_multiplier(h.samples, symbol_multiplier(derivative_symbol(2), grid))
    material = u_bar_t.samples + _dealiased_product(u_bar.samples, u_x, n)
    gamma = (2.0 * _dealiased_product(h.samples, _dealiased_product(u_x, u_x, n), n)
             + (1.0 - alpha) * g * _dealiased_product(h.samples, h_xx, n)
             - alpha * _dealiased_product(h.samples, _apply_multiplier(material, d_mult), n))
    return h.replace(samples=gamma)


@dataclass
class TravelingResidual:
    """Mass and momentum residuals of a profile moving at constant speed."""
    mass: jnp.ndarray
    momentum: jnp.ndarray

    @property
    def max_abs(self) -> float:
        return float(max(jnp.max(jnp.abs(self.mass)), jnp.max(jnp.abs(self.momentum))))


def traveling_residual(h: RealField, u_bar: RealField, c: float, alpha: float = 1.0,
                       g: float = 1.0) -> TravelingResidual:
    """
    Residuals of the Serre equations for fields moving rigidly at speed `c`.

    With ∂t = -c ∂x:

        mass:     (ū - c) h' + h ū',
        momentum: (ū - c) ū' + g h' + (h² γ)' / (3h),

    γ from `vertical_acceleration` with ū_t = -c ū'. Both residuals only see ū - c, so
    shifting ū and c by the same constant leaves them unchanged.
    """
    _require_same_grid(h, u_bar)
    grid = h.grid
    n = grid.n_points
    d_mult = symbol_multiplier(derivative_symbol(1), grid)
    h_x = _apply_multiplier(h.samples, d_mult)
    u_x = _apply_multiplier(u_bar.samples, d_mult)
    relative = u_bar.samples - c
    gamma = vertical_acceleration(h, u_bar, u_bar.replace(samples=-c * u_x), alpha, g)
    h2_gamma = _dealiased_product(_dealiased_product(h.samples, h.samples, n), gamma.samples, n)
    mass = _dealiased_product(relative, h_x, n) + _dealiased_product(h.samples, u_x, n)
    momentum = (_dealiased_product(relative, u_x, n) + g * h_x
                + _apply_multiplier(h2_gamma, d_mult) / (3.0 * h.samples))
    return TravelingResidual(mass, momentum)


def esgn_dispersion(kd, alpha: float):
    """
    Linear phase speed c²/(gd) = (3 + (α - 1)(kd)²) / (3 + α(kd)²) of the extended system.

    Example usage:
    ```
        >>> float(esgn_dispersion(0.0, ALPHA_OPT))
        1.0
    ```
    """
    _check_alpha(alpha)
    kd = jnp.asarray(kd, dtype=jnp.float64)
    if bool(jnp.any(kd < 0)):
        raise InvalidInputError("kd must be nonnegative")
    kd2 = kd ** 2
    return (3.0 + (alpha - 1.0) * kd2) / (3.0 + alpha * kd2)


def exact_dispersion(kd):
    """Full-Euler phase speed c²/(gd) = tanh(kd)/kd, equal to 1 at kd = 0."""
    kd = jnp.asarray(kd, dtype=jnp.float64)
    if bool(jnp.any(kd < 0)):
        raise InvalidInputError("kd must be nonnegative")
    safe = jnp.where(kd == 0, 1.0, kd)
    return jnp.where(kd == 0, 1.0, jnp.tanh(safe) / safe)


def dispersion_mismatch(kd, alpha: float):
    """
    esgn_dispersion - exact_dispersion, summed term by term from the two Taylor series
    for kd < 0.2 so that the leading power survives cancellation.
    """
    _check_alpha(alpha)
    kd = jnp.asarray(kd, dtype=jnp.float64)
    kd2 = kd ** 2
    series = jnp.zeros_like(kd2)
    for n in range(1, len(THC_SERIES)):
        esgn_coeff = (-1.0) ** n * alpha ** (n - 1) / 3.0 ** n
        series = series + (esgn_coeff - THC_SERIES[n]) * kd2 ** n
    direct = esgn_dispersion(kd, alpha) - exact_dispersion(kd)
    return jnp.where(kd < SERIES_CUTOFF, series, direct)


@dataclass
class DispersionCurve:
    kd_samples: jnp.ndarray
    c2_over_gd: jnp.ndarray
    exact: jnp.ndarray
    alpha: float


def dispersion_curve(kd_samples: Sequence[float], alpha: float = ALPHA_OPT) -> DispersionCurve:
    kd = jnp.asarray(kd_samples, dtype=jnp.float64)
    curve = DispersionCurve(kd, esgn_dispersion(kd, alpha), exact_dispersion(kd), alpha)
    if kd.size and not bool(jnp.all(curve.c2_over_gd > 0)):
        raise IllPosedError(f"nonpositive c² on the dispersion curve for alpha = {alpha}")
    return curve


def _check_amplitude(amplitude_ratio: float):
    if not amplitude_ratio > 0:
        raise InvalidInputError(f"amplitude ratio must be positive, got {amplitude_ratio}")


def _window(amplitude_ratio: float, kappa: float, tail: float = PROFILE_TAIL) -> float:
    return 2.0 * math.log(4.0 * amplitude_ratio / tail) / kappa


def _window_grid(amplitude_ratio: float, kappa: float, d: float, n_points: Optional[int]) -> PeriodicGrid:
    length = _window(amplitude_ratio, kappa * d) * d
    if n_points is None:
        n_points = max(512, 1 << math.ceil(math.log2(length / (0.2 * d))))
    return PeriodicGrid(n_points, length, -0.5 * length)


def _shallow_wave(grid: PeriodicGrid, h: jnp.ndarray, c: float, amplitude_ratio: float, model: str,
                  alpha: float, d: float, g: float, iterations: int = 0) -> SolitaryWave:
    h_field = RealField(grid, h)
    u_field = RealField(grid, c * (1.0 - d / h))
    residual = traveling_residual(h_field, u_field, c, alpha, g).max_abs
    return SolitaryWave(amplitude_ratio, c / math.sqrt(g * d), RealField(grid, h - d), model,
                        depth=d, g=g, alpha=alpha, iterations=iterations, residual=residual)


def shallow_state(wave: SolitaryWave) -> ShallowState:
    """Depth and velocity fields of a Serre solitary wave, ū = c(1 - d/h)."""
    if wave.source_model not in ("sgn", "esgn"):
        raise InvalidInputError(f"shallow states need an 'sgn' or 'esgn' wave, got '{wave.source_model}'")
    h = wave.profile.samples + wave.depth
    u = wave.speed * (1.0 - wave.depth / h)
    grid = wave.profile.grid
    return ShallowState(RealField(grid, h), RealField(grid, u), wave.depth, wave.g, wave.alpha)


def sgn_solitary(amplitude_ratio: float, d: float = 1.0, g: float = 1.0,
                 n_points: Optional[int] = None) -> SolitaryWave:
    """
    Closed-form solitary wave of the classical Serre-Green-Naghdi equations.

    c = sqrt(g(d + a)), h = d + a sech²(κx/2) with κ² = 3a / (d²(d + a)).

    Example usage:
    ```
        >>> sgn_solitary(0.1).speed_ratio    # sqrt(1.1)
    ```
    """
    _check_amplitude(amplitude_ratio)
    a = amplitude_ratio * d
    c = math.sqrt(g * (d + a))
    kappa = math.sqrt(3.0 * a / (d * d * (d + a)))
    grid = _window_grid(amplitude_ratio, kappa, d, n_points)
    h = d + a / jnp.cosh(0.5 * kappa * grid.nodes) ** 2
    wave = _shallow_wave(grid, h, c, amplitude_ratio, "sgn", 1.0, d, g)
    if wave.residual > 1e-10:
        logger.warning("SGN profile residual %.2e on %d points", wave.residual, grid.n_points)
    return wave


def _coefficients(h, c, alpha, d, g):
    cd2 = (c * d) ** 2
    lead = (1.0 - alpha) * g * h + alpha * cd2 / h ** 2
    slope = (2.0 - 3.0 * alpha) * cd2 / h ** 3
    source = 3.0 / h ** 2 * (0.5 * g * (d * d - h * h) + c * c * d * (h - d) / h)
    return lead, slope, source


def _slope_rhs(p, h, c, alpha, d, g):
    lead, slope, source = _coefficients(h, c, alpha, d, g)
    return 2.0 * (source - slope * p) / lead


def _crest_slope(c: float, a: float, alpha: float, d: float, g: float) -> float:
    """(h')² at h = d + a along the orbit leaving the still level."""
    p = odeint(_slope_rhs, jnp.float64(0.0), jnp.array([d, d + a], dtype=jnp.float64),
               c, alpha, d, g, rtol=1e-12, atol=1e-14)
    return float(p[-1])


def decay_kappa(c: float, alpha: float, d: float = 1.0, g: float = 1.0) -> float:
    """Far-field decay rate, h - d ~ exp(-κ|x|), κ² = 3(c² - gd) / (d²((1 - α)gd + αc²))."""
    return math.sqrt(3.0 * (c * c - g * d) / (d * d * ((1.0 - alpha) * g * d + alpha * c * c)))


def esgn_speed(amplitude_ratio: float, alpha: float = ALPHA_OPT, d: float = 1.0, g: float = 1.0,
               n_scan: int = 24) -> float:
    """
    Speed c of the extended-Serre solitary wave of amplitude a = amplitude_ratio·d.

    In the moving frame the equations integrate to

        [(1 - α) g h + α c² d²/h²] h'' + (2 - 3α) c² d² h'² / h³ = γ(h),
        γ(h) = (3/h²) [g(d² - h²)/2 + c² d (h - d)/h],

    and p = h'² solves the regular first-order problem dp/dh = 2(γ - Bp)/A, p(d) = 0.
    The speed is the root of p(d + a) = 0, bracketed by a scan below the classical
    speed and polished with Brent's method.

    Example usage:
    ```
        >>> esgn_speed(0.45, ALPHA_OPT)    # about 1.1999
    ```
    """
    _check_amplitude(amplitude_ratio)
    _check_alpha(alpha)
    a = amplitude_ratio * d
    c_hi = 1.02 * math.sqrt(g * (d + a))
    c_lo = math.sqrt(g * d * (1.0 + 0.3 * amplitude_ratio))
    speeds = np.linspace(c_hi, c_lo, n_scan)
    trace: List[float] = []
    previous = None
    for c in speeds:
        value = _crest_slope(float(c), a, alpha, d, g)
        trace.append(value)
        if not math.isfinite(value):
            previous = None
            continue
        if previous is not None and previous[1] * value <= 0:
            root = brentq(_crest_slope, float(c), previous[0], args=(a, alpha, d, g),
                          xtol=1e-13, rtol=4 * np.finfo(float).eps)
            logger.debug("eSGN speed a/d = %g, alpha = %g: c = %.15g", amplitude_ratio, alpha, root)
            return root
        previous = (float(c), value)
    raise NonConvergenceError(
        f"no speed bracket for a/d = {amplitude_ratio}, alpha = {alpha} in [{c_lo:.6g}, {c_hi:.6g}]",
        trace=trace)


def _profile_equations(unknowns, d1, d2, mirror_crest: int, a, alpha, d, g):
    h, c = unknowns[:-1], unknowns[-1]
    h_x = _apply_multiplier(h, d1)
    h_xx = _apply_multiplier(h, d2)
    lead, slope, source = _coefficients(h, c, alpha, d, g)
    residual = lead * h_xx + slope * h_x ** 2 - source
    return jnp.concatenate([residual, (h[mirror_crest] - (d + a))[None]])


def esgn_solitary(amplitude_ratio: float, alpha: float = ALPHA_OPT, d: float = 1.0, g: float = 1.0,
                  n_points: Optional[int] = None, tol: float = 1e-12, max_iter: int = 40) -> SolitaryWave:
    """
    Solitary wave of the extended Serre system.

    The speed comes from `esgn_speed`; the profile is then computed by Newton iterations
    on the collocated moving-frame equation, with the speed as an extra unknown and the
    crest height pinned. Iterates are kept even about the crest.

    Args:
        amplitude_ratio (float): a/d > 0.
        alpha (float): Closure parameter, >= 1.
        d (float): Still-water depth.
        g (float): Gravity.
        n_points (int, optional): Grid size, chosen from the window when omitted.
        tol (float): Newton update tolerance.
        max_iter (int): Newton iteration cap.

    Returns:
        SolitaryWave: Profile h - d with source_model 'esgn'.
    """
    _check_amplitude(amplitude_ratio)
    _check_alpha(alpha)
    a = amplitude_ratio * d
    c = esgn_speed(amplitude_ratio, alpha, d, g)
    kappa = decay_kappa(c, alpha, d, g)
    grid = _window_grid(amplitude_ratio, kappa, d, n_points)
    n = grid.n_points
    crest = n // 2
    mirror = (2 * crest - np.arange(n)) % n
    d1 = symbol_multiplier(derivative_symbol(1), grid)
    d2 = symbol_multiplier(derivative_symbol(2), grid)
    equations = jax.jit(_profile_equations)
    jacobian = jax.jit(jax.jacfwd(_profile_equations))
    guess = d + a / jnp.cosh(0.5 * kappa * grid.nodes) ** 2
    unknowns = jnp.concatenate([guess, jnp.array([c])])
    trace: List[float] = []
    for it in range(1, max_iter + 1):
        residual = equations(unknowns, d1, d2, crest, a, alpha, d, g)
        step = jnp.linalg.lstsq(jacobian(unknowns, d1, d2, crest, a, alpha, d, g), -residual)[0]
        unknowns = unknowns + step
        h = unknowns[:-1]
        unknowns = unknowns.at[:-1].set(0.5 * (h + h[mirror]))
        size = float(jnp.max(jnp.abs(step)))
        trace.append(size)
        logger.debug("eSGN Newton %d: |residual| = %.3e, |step| = %.3e",
                     it, float(jnp.max(jnp.abs(residual))), size)
        if not math.isfinite(size):
            break
        if size < tol:
            break
    else:
        raise NonConvergenceError(f"eSGN profile Newton did not converge in {max_iter} iterations", trace=trace)
    if not math.isfinite(trace[-1]):
        raise NonConvergenceError("eSGN profile Newton diverged", trace=trace)
    speed = float(unknowns[-1])
    if abs(speed - c) > 1e-8 * c:
        logger.warning("collocated speed %.12f differs from the shooting speed %.12f", speed, c)
    return _shallow_wave(grid, unknowns[:-1], speed, amplitude_ratio, "esgn", alpha, d, g, iterations=len(trace))


@dataclass
class SweepRow:
    """One amplitude of a speed-amplitude table; NaN marks a failed model."""
    amplitude_ratio: float
    speeds: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def speed_amplitude_sweep(amplitudes: Sequence[float], alpha: float = ALPHA_OPT,
                          models: Union[str, Sequence[str]] = MODELS) -> List[SweepRow]:
    """
    Solitary-wave speed c/sqrt(gd) against a/d for the classical, extended and full-Euler
    models. A model failing at one amplitude records NaN there and the sweep goes on.

    `models` takes several model tags so that one pass fills a comparison table; a single
    tag such as `"esgn"` is accepted too and gives rows with that one column.

    Example usage:
    ```
        >>> rows = speed_amplitude_sweep([0.1, 0.45, 0.7])
        >>> [row.speeds["esgn"] for row in rows]
    ```
    """
    _check_alpha(alpha)
    if isinstance(models, str):
        models = (models,)
    for model in models:
        if model not in MODELS:
            raise InvalidInputError(f"unknown model '{model}', expected one of {MODELS}")
    amplitudes = [float(a) for a in amplitudes]
    if any(b <= a for a, b in zip(amplitudes, amplitudes[1:])):
        raise InvalidInputError("amplitudes must be strictly increasing")
    solvers = {
        "sgn": lambda a: sgn_solitary(a).speed_ratio,
        "esgn": lambda a: esgn_speed(a, alpha),
        "euler": lambda a: babenko_solitary(a).speed_ratio,
    }
    rows = []
    for amplitude in amplitudes:
        row = SweepRow(amplitude)
        for model in models:
            try:
                row.speeds[model] = solvers[model](amplitude)
            except LabError as err:
                logger.warning("sweep: %s failed at a/d = %g: %s", model, amplitude, err)
                row.speeds[model] = float("nan")
                row.failures[model] = str(err)
        rows.append(row)
        logger.info("sweep a/d = %g: %s", amplitude,
                    ", ".join(f"{m} = {row.speeds[m]:.8f}" for m in models))
    return rows
