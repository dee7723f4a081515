import jax
import jax.numpy as jnp
from flax import struct
from functools import partial
from typing import Callable, Optional

from wblab.__src.utils.errors import InvalidInputError, PreconditionError


@struct.dataclass
class PeriodicGrid:
    """
    Uniform periodic grid with its Fourier wavenumbers.

    Nodes are `origin + j * length / n_points` for j = 0..n_points-1 (the right
    endpoint is excluded). Wavenumbers follow the standard FFT ordering, scaled by
    2π/length, so index 0 is exactly zero and, for even n_points, index
    n_points // 2 is the (negative) Nyquist mode.

    Attributes:
        n_points (int): Number of nodes, a power of two is recommended.
        length (float): Period of the domain.
        origin (float): Position of node 0, e.g. `-length / 2` for crest-centred windows.

    Example usage:
    ```
        >>> grid = PeriodicGrid(64, 2 * jnp.pi)
        >>> x = grid.nodes
        >>> k = grid.wavenumbers
    ```
    """
    n_points: int = struct.field(pytree_node=False)
    length: float = struct.field(pytree_node=False)
    origin: float = struct.field(pytree_node=False, default=0.0)

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise InvalidInputError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.length > 0:
            raise InvalidInputError(f"length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def nodes(self) -> jnp.ndarray:
        return self.origin + jnp.arange(self.n_points) * self.spacing

    @property
    def wavenumbers(self) -> jnp.ndarray:
        return 2.0 * jnp.pi * jnp.fft.fftfreq(self.n_points, d=self.spacing)

    @property
    def max_wavenumber(self) -> float:
        return jnp.pi * self.n_points / self.length


@struct.dataclass
class RealField:
    """
    Real samples of a periodic function, one per grid node.

    Example usage:
    ```
        >>> grid = PeriodicGrid(32, 2 * jnp.pi)
        >>> f = RealField(grid, jnp.sin(grid.nodes))
        >>> df = spectral_derivative(f, 1)
    ```
    """
    grid: PeriodicGrid = struct.field(pytree_node=False)
    samples: jnp.ndarray

    def __post_init__(self):
        shape = getattr(self.samples, "shape", None)
        if shape is not None and shape != (self.grid.n_points,):
            raise InvalidInputError(
                f"field has shape {shape}, grid expects ({self.grid.n_points},)")

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn: Callable) -> "RealField":
        return cls(grid, jnp.asarray(fn(grid.nodes), dtype=jnp.float64))

    def mean(self) -> float:
        return float(jnp.mean(self.samples))


@struct.dataclass
class DiagonalSymbol:
    """
    Fourier multiplier s(k) with an explicit value at k = 0.

    Attributes:
        evaluator (Callable): Maps nonzero wavenumbers to complex multipliers.
        zero_mode_rule (complex): Multiplier used at k = 0.
        mean_free_required (bool): Reject inputs with nonzero average (symbols singular at k = 0).
        name (str): Label used in error messages.
    """
    evaluator: Callable = struct.field(pytree_node=False)
    zero_mode_rule: complex = struct.field(pytree_node=False, default=0.0)
    mean_free_required: bool = struct.field(pytree_node=False, default=False)
    name: str = struct.field(pytree_node=False, default="symbol")


def hilbert_symbol(h0: float) -> DiagonalSymbol:
    """
    Finite-depth Hilbert-type operator with symbol i coth(k h0).

    The k = 0 multiplier is 0 and inputs must be mean-free. `h0 = jnp.inf` gives the
    deep-water symbol i sign(k).
    """
    return DiagonalSymbol(lambda k: 1j / jnp.tanh(k * h0), 0.0, True, f"H(h0={h0})")


def stream_symbol(h0: float) -> DiagonalSymbol:
    """Operator with symbol i tanh(k h0), mapping φ_ξ to ψ_ξ on the surface."""
    return DiagonalSymbol(lambda k: 1j * jnp.tanh(k * h0), 0.0, False, f"S(h0={h0})")


def derivative_symbol(order: int) -> DiagonalSymbol:
    return DiagonalSymbol(lambda k: (1j * k) ** order, 0.0, False, f"d^{order}")


def symbol_multiplier(symbol: DiagonalSymbol, grid: PeriodicGrid) -> jnp.ndarray:
    """
    Samples the symbol on the grid wavenumbers.

    For even grids the Nyquist multiplier is replaced by its real part so that real
    fields map to real fields.
    """
    k = grid.wavenumbers
    safe_k = jnp.where(k == 0, 1.0, k)
    values = jnp.asarray(symbol.evaluator(safe_k), dtype=jnp.complex128)
    mult = jnp.where(k == 0, jnp.complex128(symbol.zero_mode_rule), values)
    if grid.n_points % 2 == 0:
        nyquist = grid.n_points // 2
        mult = mult.at[nyquist].set(mult[nyquist].real)
    return mult


def _require_finite(samples: jnp.ndarray, what: str = "field"):
    if not bool(jnp.all(jnp.isfinite(samples))):
        raise InvalidInputError(f"{what} contains non-finite samples")


def _require_same_grid(f: RealField, g: RealField):
    if f.grid != g.grid:
        raise InvalidInputError(f"grid mismatch: {f.grid} vs {g.grid}")


@jax.jit
def _apply_multiplier(samples: jnp.ndarray, mult: jnp.ndarray) -> jnp.ndarray:
    return jnp.fft.ifft(mult * jnp.fft.fft(samples)).real


def spectrum(f: RealField) -> jnp.ndarray:
    """Unnormalized forward transform; the inverse carries the 1/n factor."""
    return jnp.fft.fft(f.samples)


def spectral_derivative(f: RealField, order: int = 1) -> RealField:
    """
    Fourier-collocation derivative of a periodic field.

    Args:
        f (RealField): Field to differentiate.
        order (int): Derivative order, at least 1.

    Returns:
        RealField: The derivative, whose mean is exactly zero.

    Example usage:
    ```
        >>> grid = PeriodicGrid(64, 2 * jnp.pi)
        >>> f = RealField.from_function(grid, lambda x: jnp.sin(3 * x) + jnp.cos(5 * x))
        >>> df = spectral_derivative(f, 1)  # 3 cos(3x) - 5 sin(5x)
    ```
    """
    if int(order) != order or order < 1:
        raise InvalidInputError(f"derivative order must be a positive integer, got {order}")
    _require_finite(f.samples)
    mult = symbol_multiplier(derivative_symbol(int(order)), f.grid)
    return f.replace(samples=_apply_multiplier(f.samples, mult))


def apply_symbol(f: RealField, symbol: DiagonalSymbol) -> RealField:
    """
    Applies a diagonal pseudo-differential operator modewise.

    Args:
        f (RealField): Input field.
        symbol (DiagonalSymbol): Multiplier, e.g. `hilbert_symbol(h0)`.

    Returns:
        RealField: Inverse transform of s(k) times the input spectrum.

    Example usage:
    ```
        >>> grid = PeriodicGrid(64, 2 * jnp.pi)
        >>> f = RealField.from_function(grid, jnp.cos)
        >>> hf = apply_symbol(f, hilbert_symbol(1.0))  # -coth(1) sin(x)
    ```
    """
    _require_finite(f.samples)
    if symbol.mean_free_required:
        scale = max(1.0, float(jnp.max(jnp.abs(f.samples))))
        if abs(f.mean()) > 1e-12 * scale:
            raise PreconditionError(
                f"{symbol.name} is singular at k = 0 and needs a mean-free field (mean {f.mean():.3e})")
    return f.replace(samples=_apply_multiplier(f.samples, symbol_multiplier(symbol, f.grid)))


def _pad_spectrum(fh: jnp.ndarray, n: int, m: int) -> jnp.ndarray:
    # n -> m > n modes; an even-grid Nyquist coefficient is split between ±n/2
    half = n // 2
    out = jnp.zeros(m, dtype=jnp.complex128)
    if n % 2 == 0:
        out = out.at[:half].set(fh[:half])
        out = out.at[m - half + 1:].set(fh[half + 1:])
        out = out.at[half].set(0.5 * fh[half])
        out = out.at[m - half].set(0.5 * fh[half])
    else:
        out = out.at[:half + 1].set(fh[:half + 1])
        out = out.at[m - half:].set(fh[half + 1:])
    return out


def _truncate_spectrum(ph: jnp.ndarray, n: int, m: int) -> jnp.ndarray:
    # m -> n < m modes; ±n/2 are folded back into the Nyquist slot
    half = n // 2
    out = jnp.zeros(n, dtype=jnp.complex128)
    if n % 2 == 0:
        out = out.at[:half].set(ph[:half])
        out = out.at[half + 1:].set(ph[m - half + 1:])
        out = out.at[half].set(ph[half] + ph[m - half])
    else:
        out = out.at[:half + 1].set(ph[:half + 1])
        out = out.at[half + 1:].set(ph[m - half:])
    return out


def dealiased_size(n: int) -> int:
    return (3 * n + 1) // 2


@partial(jax.jit, static_argnames=("n",))
def _dealiased_product(f: jnp.ndarray, g: jnp.ndarray, n: int) -> jnp.ndarray:
    m = dealiased_size(n)
    f_pad = jnp.fft.ifft(_pad_spectrum(jnp.fft.fft(f), n, m)).real * (m / n)
    g_pad = jnp.fft.ifft(_pad_spectrum(jnp.fft.fft(g), n, m)).real * (m / n)
    ph = jnp.fft.fft(f_pad * g_pad)
    return jnp.fft.ifft(_truncate_spectrum(ph, n, m) * (n / m)).real


def dealiased_product(f: RealField, g: RealField) -> RealField:
    """
    Product of two fields with 3/2-rule dealiasing.

    Both factors are zero-padded to 3n/2 modes, multiplied pointwise and truncated
    back, which equals the exact spectral truncation of f·g to the grid's band.

    Example usage:
    ```
        >>> grid = PeriodicGrid(32, 2 * jnp.pi)
        >>> f = RealField.from_function(grid, lambda x: jnp.cos(2 * x))
        >>> g = RealField.from_function(grid, lambda x: jnp.cos(3 * x))
        >>> fg = dealiased_product(f, g)  # cos(x)/2 + cos(5x)/2
    ```
    """
    _require_same_grid(f, g)
    _require_finite(f.samples)
    _require_finite(g.samples)
    return f.replace(samples=_dealiased_product(f.samples, g.samples, f.grid.n_points))


def spectral_antiderivative(f: RealField) -> RealField:
    """Mean-free periodic primitive of the mean-free part of `f`."""
    _require_finite(f.samples)
    k = f.grid.wavenumbers
    mult = jnp.where(k == 0, 0.0, 1.0 / (1j * jnp.where(k == 0, 1.0, k)))
    if f.grid.n_points % 2 == 0:
        mult = mult.at[f.grid.n_points // 2].set(0.0)
    return f.replace(samples=_apply_multiplier(f.samples, mult))


@jax.jit
def _interpolate(samples: jnp.ndarray, k: jnp.ndarray, offsets: jnp.ndarray) -> jnp.ndarray:
    coeffs = jnp.fft.fft(samples) / samples.shape[0]
    return jnp.real(jnp.exp(1j * jnp.outer(offsets, k)) @ coeffs)


def fourier_interpolate(f: RealField, points) -> jnp.ndarray:
    """
    Evaluates the trigonometric interpolant of `f` at arbitrary points.

    Args:
        f (RealField): Sampled field.
        points (array-like): Evaluation abscissae (any real values, taken modulo the period).

    Returns:
        jnp.ndarray: Interpolated values, same shape as `points`.
    """
    points = jnp.atleast_1d(jnp.asarray(points, dtype=jnp.float64))
    values = _interpolate(f.samples, f.grid.wavenumbers, points.ravel() - f.grid.origin)
    return values.reshape(points.shape)


def resample(f: RealField, n_points: int) -> RealField:
    """Spectral zero-padding or truncation onto a grid with the same length and origin."""
    n = f.grid.n_points
    grid = PeriodicGrid(n_points, f.grid.length, f.grid.origin)
    fh = jnp.fft.fft(f.samples)
    if n_points >= n:
        gh = _pad_spectrum(fh, n, n_points)
    else:
        gh = _truncate_spectrum(fh, n_points, n)
    return RealField(grid, jnp.fft.ifft(gh * (n_points / n)).real)


def exponential_filter(f: RealField, order: int = 36, strength: float = 36.0) -> RealField:
    """Damps the top of the spectrum by exp(-strength (|k|/k_max)^order)."""
    k = jnp.abs(f.grid.wavenumbers) / f.grid.max_wavenumber
    return f.replace(samples=_apply_multiplier(f.samples, jnp.exp(-strength * k ** order)))


def spectral_tail(f: RealField, fraction: float = 2.0 / 3.0) -> float:
    """Largest spectral magnitude above `fraction` of k_max, relative to the peak magnitude."""
    mag = jnp.abs(jnp.fft.fft(f.samples))
    high = jnp.abs(f.grid.wavenumbers) > fraction * f.grid.max_wavenumber
    peak = jnp.max(mag)
    if float(peak) == 0.0:
        return 0.0
    return float(jnp.max(jnp.where(high, mag, 0.0)) / peak)
