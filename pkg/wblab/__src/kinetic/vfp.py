import logging
import math
import jax
import jax.numpy as jnp
import numpy as np
from dataclasses import dataclass
from einops import einsum, rearrange
from flax import struct
from functools import partial
from typing import Optional, Tuple, Union

from wblab.__src.spectral.hermite import _hermite_poly, hermite_functions
from wblab.__src.utils.errors import InvalidInputError, TruncationError

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
# largest |C_jj / v_j| times slab width before the layer is cut further
LAYER_STEP = 0.25


@struct.dataclass
class VfpParams:
    """
    Constant drift u, diffusion κ > 0 and truncation N of the stationary
    Vlasov-Fokker-Planck operator  v ∂x f = ∂v((v - u) f + κ ∂v f).
    """
    u: float = struct.field(pytree_node=False)
    kappa: float = struct.field(pytree_node=False)
    n_modes: int = struct.field(pytree_node=False, default=4)

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidInputError(f"kappa must be positive, got {self.kappa}")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise InvalidInputError(f"n_modes must be a positive integer, got {self.n_modes}")


def _sign(sign: Union[int, str]) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise InvalidInputError(f"sign must be +1 or -1, got {sign!r}")


def vfp_eigenvalue(n: int, sign: Union[int, str], params: VfpParams) -> float:
    """
    Eigenvalue μ±n of the Sturm-Liouville reduction, the roots of κμ² + uμ - n = 0.

    For n = 0: μ0+ = -min(u, 0)/κ and μ0- = -max(u, 0)/κ.

    Example usage:
    ```
        >>> vfp_eigenvalue(4, +1, VfpParams(u=0.0, kappa=1.0))    # 2.0
        >>> vfp_eigenvalue(0, -1, VfpParams(u=3.0, kappa=1.0))    # -3.0
    ```
    """
    if int(n) != n or n < 0:
        raise InvalidInputError(f"mode index must be a nonnegative integer, got {n}")
    s = _sign(sign)
    u, kappa = float(params.u), float(params.kappa)
    if n == 0:
        return -min(u, 0.0) / kappa if s > 0 else -max(u, 0.0) / kappa
    return (-u + s * (u * u + 4.0 * kappa * n) ** 0.5) / (2.0 * kappa)


def _eigenvalues(u, kappa, n_modes: int):
    n = jnp.arange(1, n_modes + 1)
    root = jnp.sqrt(u ** 2 + 4.0 * kappa * n)
    return (-u + root) / (2.0 * kappa), (-u - root) / (2.0 * kappa)


def translated_velocity(v, mu, params: VfpParams):
    """ṽ = (v - 2μκ - u) / sqrt(2κ)."""
    return (v - 2.0 * mu * params.kappa - params.u) / jnp.sqrt(2.0 * params.kappa)


def _exprel(z):
    safe = jnp.where(z == 0, 1.0, z)
    return jnp.where(jnp.abs(z) < 1e-6, 1.0 + z / 2.0 + z ** 2 / 6.0, jnp.expm1(safe) / safe)


def _hermite_mode(n: int, mu, u, kappa, x, v):
    vt = (v - 2.0 * mu * kappa - u) / jnp.sqrt(2.0 * kappa)
    return _hermite_poly(n, vt) * jnp.exp(-mu * (x + v) - vt ** 2)


def vfp_mode(n: int, sign: Union[int, str], x, v, params: VfpParams) -> jnp.ndarray:
    """
    Eigenfunction Ψ±n(x, v) = exp(-μ±n (x + v)) Hn(ṽ±n) exp(-ṽ±n²) for n >= 1, and the
    diffusion modes
    Ψ0+ = exp(min(u, 0)(x + v)/κ - (v - |u|)²/2κ),
    Ψ0- = exp(max(u, 0)(x + v)/κ - (v + |u|)²/2κ) for n = 0.

    Example usage:
    ```
        >>> params = VfpParams(u=0.0, kappa=1.0)
        >>> vfp_mode(1, +1, 0.0, 2.0, params)   # zero: ṽ+1 = 0 is the root of H1
    ```
    """
    s = _sign(sign)
    x = jnp.asarray(x, dtype=jnp.float64)
    v = jnp.asarray(v, dtype=jnp.float64)
    u, kappa = params.u, params.kappa
    if n == 0:
        if s > 0:
            return jnp.exp(min(u, 0.0) * (x + v) / kappa - (v - abs(u)) ** 2 / (2.0 * kappa))
        return jnp.exp(max(u, 0.0) * (x + v) / kappa - (v + abs(u)) ** 2 / (2.0 * kappa))
    mu = vfp_eigenvalue(n, s, params)
    if n > 64:
        raise InvalidInputError(f"mode index {n} exceeds the Hermite order limit")
    return _hermite_mode(int(n), mu, u, kappa, x, v)


def stationary_residual(n: int, sign: Union[int, str], params: VfpParams, x, v) -> float:
    """
    Largest relative residual of v Ψx + u Ψv - ∂v(v Ψ + κ Ψv) over the points (x, v),
    computed with automatic differentiation and scaled by the largest term.
    """
    f = lambda xx, vv: vfp_mode(n, sign, xx, vv, params)
    fx = jax.grad(f, argnums=0)
    fv = jax.grad(f, argnums=1)
    fvv = jax.grad(fv, argnums=1)

    def terms(xx, vv):
        psi = f(xx, vv)
        return jnp.stack([vv * fx(xx, vv), params.u * fv(xx, vv), -psi, -vv * fv(xx, vv),
                          -params.kappa * fvv(xx, vv)])

    x, v = jnp.broadcast_arrays(jnp.asarray(x, dtype=jnp.float64), jnp.asarray(v, dtype=jnp.float64))
    t = jax.vmap(terms)(x.ravel(), v.ravel())
    scale = jnp.max(jnp.abs(t), axis=1)
    scale = jnp.where(scale > 0, scale, 1.0)
    return float(jnp.max(jnp.abs(jnp.sum(t, axis=1)) / scale))


@struct.dataclass
class VfpBasis:
    """
    Truncated spectral basis of the stationary operator at fixed (u, κ).

    Attributes:
        params (VfpParams): Drift, diffusion, truncation.
        mu_plus (jnp.ndarray): μ+n, n = 1..N (positive, decaying in x).
        mu_minus (jnp.ndarray): μ-n, n = 1..N (negative, growing in x).
        mu0 (Tuple[float, float]): (μ0+, μ0-).
    """
    params: VfpParams = struct.field(pytree_node=False)
    mu_plus: jnp.ndarray
    mu_minus: jnp.ndarray
    mu0: Tuple[float, float] = struct.field(pytree_node=False)

    @classmethod
    def build(cls, params: VfpParams) -> "VfpBasis":
        mu_p, mu_m = _eigenvalues(params.u, params.kappa, params.n_modes)
        return cls(params, mu_p, mu_m, (vfp_eigenvalue(0, 1, params), vfp_eigenvalue(0, -1, params)))

    def mode(self, n: int, sign: Union[int, str], x, v) -> jnp.ndarray:
        return vfp_mode(n, sign, x, v, self.params)


@struct.dataclass
class VelocityGrid:
    """
    Gauss-Hermite discrete ordinates v_j = sqrt(2κ) x_j with weights ω_j for ∫ dv and the
    orthogonal matrix Q_jn = sqrt(W_j) ψ_n(x_j), W_j = w_j exp(x_j²).
    """
    nodes: jnp.ndarray
    velocities: jnp.ndarray
    weights: jnp.ndarray
    hermite: jnp.ndarray
    gauss_weights: jnp.ndarray
    kappa: float = struct.field(pytree_node=False)

    @property
    def size(self) -> int:
        return self.velocities.shape[0]

    @property
    def positive(self) -> jnp.ndarray:
        return self.velocities > 0


def gauss_hermite_grid(n_ordinates: int = 32, kappa: float = 1.0) -> VelocityGrid:
    """
    Discrete ordinates for the velocity variable, scaled by sqrt(2κ).

    Example usage:
    ```
        >>> grid = gauss_hermite_grid(32, kappa=1.0)
        >>> mass = jnp.sum(grid.weights * jnp.exp(-grid.velocities ** 2 / 2))   # sqrt(2π)
    ```
    """
    if int(n_ordinates) != n_ordinates or n_ordinates < 2 or n_ordinates % 2:
        raise InvalidInputError(f"n_ordinates must be an even integer >= 2, got {n_ordinates}")
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    x, w = np.polynomial.hermite.hermgauss(int(n_ordinates))
    x = jnp.asarray(x)
    big_w = jnp.asarray(w) * jnp.exp(x ** 2)
    scale = (2.0 * kappa) ** 0.5
    psi = hermite_functions(int(n_ordinates) - 1, x)
    q = rearrange(psi, "n j -> j n") * jnp.sqrt(big_w)[:, None]
    return VelocityGrid(x, scale * x, scale * big_w, q, big_w, float(kappa))


def _mode_columns(u, kappa, n_modes: int, length, x, v):
    mu_p, mu_m = _eigenvalues(u, kappa, n_modes)
    drifting = jnp.exp(-(v - u) ** 2 / (2.0 * kappa))
    # (B - D)/u with B the Boltzmann mode; tends to (x - v) M / κ as u -> 0
    response = drifting * ((x - v) / kappa) * _exprel(u * (x - v) / kappa)
    cols = [drifting, response]
    cols += [_hermite_mode(k, mu_p[k - 1], u, kappa, x, v) for k in range(1, n_modes + 1)]
    cols += [_hermite_mode(k, mu_m[k - 1], u, kappa, x - length, v) for k in range(1, n_modes + 1)]
    return jnp.stack(cols, axis=-1)


@partial(jax.jit, static_argnames=("n_modes",))
def _collocation(u, kappa, n_modes: int, length, velocities, weights):
    pos = velocities > 0
    x_in = jnp.where(pos, 0.0, length)
    x_out = jnp.where(pos, length, 0.0)
    m_in = _mode_columns(u, kappa, n_modes, length, x_in, velocities)
    m_out = _mode_columns(u, kappa, n_modes, length, x_out, velocities)
    w = jnp.sqrt(weights)[:, None]
    norms = jnp.linalg.norm(w * m_in, axis=0)
    norms = jnp.where(norms > 0, norms, 1.0)
    a = w * m_in / norms
    s = jnp.linalg.svd(a, compute_uv=False)
    condition = s[0] / s[-1]
    return a, norms, m_in, m_out, condition


def _check_condition(condition: float, params_text: str):
    if not condition <= MAX_CONDITION:
        raise TruncationError(
            f"collocation matrix is ill-conditioned (cond ~ {condition:.2e}) for {params_text}; "
            "reduce the number of modes or lengthen the cell", condition=condition)


def _assemble(f_left: jnp.ndarray, f_right: jnp.ndarray, grid: VelocityGrid) -> jnp.ndarray:
    # incoming data on the full ordinate vector: v > 0 from the left wall, v < 0 from the right
    pos = np.asarray(grid.positive)
    return jnp.zeros(grid.size).at[np.nonzero(pos)[0]].set(f_left).at[np.nonzero(~pos)[0]].set(f_right)


@dataclass
class Decomposition:
    """
    Coefficients of the stationary solution on a cell of length L.

    `alpha`, `beta`, `a` and `b` refer to the printed modes Ψ0+, Ψ0-, Ψ+n, Ψ-n.
    Internally the diffusion pair is (D, R) with D the drifting Maxwellian and
    R = (B - D)/u, and Ψ-n is anchored at x = L; `pair` and `b_anchored` hold those
    coefficients, which is what `reconstruct` uses.
    """
    params: VfpParams
    length: float
    alpha: float
    beta: float
    a: jnp.ndarray
    b: jnp.ndarray
    pair: Tuple[float, float]
    b_anchored: jnp.ndarray
    condition: float
    residual: float


def half_range_decompose(f_in_left, f_in_right, basis: VfpBasis, length: float,
                         grid: Optional[VelocityGrid] = None) -> Decomposition:
    """
    Least-squares fit of the 2N + 2 modes to incoming half-range data.

    Args:
        f_in_left (jnp.ndarray): f(0, v_j) at the positive ordinates.
        f_in_right (jnp.ndarray): f(L, v_j) at the negative ordinates.
        basis (VfpBasis): Spectral basis.
        length (float): Cell length L.
        grid (VelocityGrid, optional): Ordinates; Gauss-Hermite with 32 nodes by default.

    Returns:
        Decomposition: Coefficients, condition estimate and weighted reconstruction error.

    Example usage:
    ```
        >>> params = VfpParams(u=0.5, kappa=1.0, n_modes=3)
        >>> grid = gauss_hermite_grid(32, 1.0)
        >>> v = grid.velocities
        >>> data = vfp_mode(3, +1, jnp.where(v > 0, 0.0, 1.0), v, params)
        >>> dec = half_range_decompose(data[v > 0], data[v < 0], VfpBasis.build(params), 1.0, grid)
        >>> dec.a   # [0, 0, 1]
    ```
    """
    params = basis.params
    if grid is None:
        grid = gauss_hermite_grid(32, params.kappa)
    if not length > 0:
        raise InvalidInputError(f"cell length must be positive, got {length}")
    pos = grid.positive
    n_pos = int(jnp.sum(pos))
    f_left = jnp.asarray(f_in_left, dtype=jnp.float64)
    f_right = jnp.asarray(f_in_right, dtype=jnp.float64)
    if f_left.shape != (n_pos,) or f_right.shape != (grid.size - n_pos,):
        raise InvalidInputError("incoming data must match the positive / negative ordinates")
    if not bool(jnp.all(jnp.isfinite(f_left)) and jnp.all(jnp.isfinite(f_right))):
        raise InvalidInputError("incoming data contains non-finite values")
    if 2 * params.n_modes + 2 > grid.size:
        raise TruncationError(f"{2 * params.n_modes + 2} modes exceed {grid.size} ordinates", condition=float("inf"))

    a, norms, m_in, _, condition = _collocation(params.u, params.kappa, params.n_modes, float(length),
                                                grid.velocities, grid.weights)
    condition = float(condition)
    _check_condition(condition, f"u = {params.u}, kappa = {params.kappa}, N = {params.n_modes}")
    data = _assemble(f_left, f_right, grid)
    w = jnp.sqrt(grid.weights)
    scaled, *_ = jnp.linalg.lstsq(a, w * data)
    coeffs = scaled / norms
    residual = float(jnp.sqrt(jnp.sum((m_in @ coeffs - data) ** 2 * grid.weights)))

    n = params.n_modes
    c_d, c_r = float(coeffs[0]), float(coeffs[1])
    u = params.u
    if u > 0:
        alpha, beta = c_d - c_r / u, c_r / u
    elif u < 0:
        alpha, beta = c_r / u, c_d - c_r / u
    else:
        # Ψ0+ = Ψ0- at u = 0; the second diffusion mode is the linear response R
        alpha, beta = c_d, 0.0
    mu_m = basis.mu_minus
    b_anchored = coeffs[2 + n:]
    return Decomposition(
        params=params, length=float(length), alpha=alpha, beta=beta,
        a=coeffs[2:2 + n], b=b_anchored * jnp.exp(mu_m * length),
        pair=(c_d, c_r), b_anchored=b_anchored, condition=condition, residual=residual,
    )


def reconstruct(decomposition: Decomposition, x, v, part: str = "all") -> jnp.ndarray:
    """
    Evaluates the decomposed stationary solution.

    Args:
        decomposition (Decomposition): Output of `half_range_decompose`.
        x, v (array-like): Evaluation points (broadcast together).
        part (str): 'all', 'macroscopic' (diffusion modes) or 'knudsen' (n >= 1 modes,
            the boundary layers).
    """
    if part not in ("all", "macroscopic", "knudsen"):
        raise InvalidInputError(f"part must be 'all', 'macroscopic' or 'knudsen', got '{part}'")
    p = decomposition.params
    x, v = jnp.broadcast_arrays(jnp.asarray(x, dtype=jnp.float64), jnp.asarray(v, dtype=jnp.float64))
    cols = _mode_columns(p.u, p.kappa, p.n_modes, decomposition.length, x.ravel(), v.ravel())
    coeffs = jnp.concatenate([jnp.asarray(decomposition.pair), decomposition.a, decomposition.b_anchored])
    if part == "macroscopic":
        coeffs = coeffs.at[2:].set(0.0)
    elif part == "knudsen":
        coeffs = coeffs.at[:2].set(0.0)
    return (cols @ coeffs).reshape(x.shape)


@dataclass
class ScatteringMatrix:
    """
    Linear map from incoming to outgoing half-range data of one cell.

    Rows and columns follow the ordinate order of the grid: incoming entries are
    (x = L, v < 0) and (x = 0, v > 0); outgoing ones are (x = 0, v < 0) and (x = L, v > 0).
    """
    matrix: jnp.ndarray
    condition: float
    min_entry: float


@partial(jax.jit, static_argnames=("n_modes",))
def _scattering(u, kappa, n_modes: int, length, velocities, weights):
    a, norms, _, m_out, condition = _collocation(u, kappa, n_modes, length, velocities, weights)
    w = jnp.sqrt(weights)
    fit = jnp.linalg.pinv(a) * w[None, :]
    return m_out @ (fit / norms[:, None]), condition


def scattering_matrix(params: VfpParams, length: float, grid: Optional[VelocityGrid] = None) -> ScatteringMatrix:
    """
    Scattering matrix of a cell of length L: decompose the incoming data, evaluate the
    stationary solution's outgoing traces.

    Example usage:
    ```
        >>> grid = gauss_hermite_grid(32, 1.0)
        >>> s = scattering_matrix(VfpParams(0.0, 1.0, 3), 0.5, grid)
        >>> maxwell = jnp.exp(-grid.velocities ** 2 / 2)
        >>> s.matrix @ maxwell   # maxwell again
    ```
    """
    if grid is None:
        grid = gauss_hermite_grid(32, params.kappa)
    if not length > 0:
        raise InvalidInputError(f"cell length must be positive, got {length}")
    matrix, condition = _scattering(params.u, params.kappa, params.n_modes, float(length),
                                    grid.velocities, grid.weights)
    condition = float(condition)
    _check_condition(condition, f"u = {params.u}, kappa = {params.kappa}, N = {params.n_modes}")
    min_entry = float(jnp.min(matrix))
    if min_entry < -1e-10:
        logger.warning("scattering matrix has negative entries (min %.3e) for u = %g, L = %g",
                       min_entry, params.u, length)
    return ScatteringMatrix(matrix, condition, min_entry)


def _ordinate_generator(u, kappa, velocities, weights):
    """
    Fokker-Planck collisions on the ordinates as a rate matrix acting on f.

    Neighbouring ordinates exchange mass at rates κ/(Δv ω) sqrt(M_to / M_from), M the
    Maxwellian drifting at u. Off-diagonal entries are nonnegative, ω-weighted columns
    sum to zero and M is an exact null vector.
    """
    log_m = -(velocities - u) ** 2 / (2.0 * kappa)
    dv = velocities[1:] - velocities[:-1]
    half = 0.5 * (log_m[1:] - log_m[:-1])
    up = kappa / (dv * weights[:-1]) * jnp.exp(half)
    down = kappa / (dv * weights[1:]) * jnp.exp(-half)
    idx = jnp.arange(velocities.shape[0] - 1)
    rates = jnp.zeros((velocities.shape[0],) * 2).at[idx + 1, idx].set(up).at[idx, idx + 1].set(down)
    rates = rates - jnp.diag(jnp.sum(rates, axis=0))
    # mass form g = ω f to density form f
    return rates * weights[None, :] / weights[:, None]


def _star(first, second):
    """Scattering blocks of two adjacent slabs, `first` on the left."""
    t1a, r1a, t2a, r2a = first
    t1b, r1b, t2b, r2b = second
    bounce = jnp.linalg.inv(jnp.eye(t1a.shape[0]) - r2a @ r1b)
    t1 = t1b @ bounce @ t1a
    r2 = t1b @ bounce @ r2a @ t2b + r2b
    r1 = r1a + t2a @ r1b @ bounce @ t1a
    t2 = t2a @ (r1b @ bounce @ r2a @ t2b + t2b)
    return t1, r1, t2, r2


@partial(jax.jit, static_argnames=("doublings",))
def _layer_scattering(u, kappa, length, velocities, weights, doublings: int):
    # ordinates are ascending and symmetric: the first half moves left
    half = velocities.shape[0] // 2
    generator = _ordinate_generator(u, kappa, velocities, weights) / velocities[:, None]
    transfer = jax.scipy.linalg.expm((length / 2 ** doublings) * generator)
    e_nn, e_np = transfer[:half, :half], transfer[:half, half:]
    e_pn, e_pp = transfer[half:, :half], transfer[half:, half:]
    t2 = jnp.linalg.inv(e_nn)
    r1 = -t2 @ e_np
    blocks = (e_pp + e_pn @ r1, r1, t2, e_pn @ t2)
    for _ in range(doublings):
        blocks = _star(blocks, blocks)
    t1, r1, t2, r2 = blocks
    matrix = jnp.block([[t2, r1], [r2, t1]])
    return matrix, jnp.linalg.cond(e_nn)


def _layer_doublings(u, kappa: float, length: float, grid: VelocityGrid) -> int:
    u = jnp.atleast_1d(jnp.asarray(u, dtype=jnp.float64))
    diag = jax.vmap(lambda w: jnp.diagonal(_ordinate_generator(w, kappa, grid.velocities, grid.weights)))(u)
    stiffness = float(jnp.max(jnp.abs(diag / grid.velocities[None, :])))
    return max(0, math.ceil(math.log2(max(length * stiffness / LAYER_STEP, 1.0))))


def layer_scattering_matrix(u: float, kappa: float, length: float,
                            grid: Optional[VelocityGrid] = None) -> ScatteringMatrix:
    """
    Exact scattering matrix of a layer of length L for the discrete-ordinates problem

        v_j ∂x f_j = Σ_k C_jk(u) f_k,

    C the Fokker-Planck collisions on the ordinates (nearest-neighbour exchange in
    detailed balance with the Maxwellian drifting at u). The layer is cut into 2^m thin
    slabs whose transfer matrices are well conditioned, and the slabs are joined by
    repeated doubling. Entries are nonnegative up to round-off, so the map keeps
    densities nonnegative, and the drifting Maxwellian passes through unchanged.

    Rows and columns follow the ordinate order, as in `ScatteringMatrix`.

    Example usage:
    ```
        >>> grid = gauss_hermite_grid(16, 1.0)
        >>> s = layer_scattering_matrix(0.3, 1.0, 0.1, grid)
        >>> s.min_entry   # >= -1e-12
    ```
    """
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    if not length > 0:
        raise InvalidInputError(f"layer length must be positive, got {length}")
    if grid is None:
        grid = gauss_hermite_grid(32, kappa)
    elif grid.kappa != kappa:
        raise InvalidInputError(f"velocity grid is scaled for kappa = {grid.kappa}, not {kappa}")
    doublings = _layer_doublings(u, kappa, float(length), grid)
    matrix, condition = _layer_scattering(float(u), float(kappa), float(length), grid.velocities,
                                          grid.weights, doublings)
    return ScatteringMatrix(matrix, float(condition), float(jnp.min(matrix)))


def to_hermite(f: jnp.ndarray, grid: VelocityGrid) -> jnp.ndarray:
    """Ordinate values -> Hermite-function coefficients (last axis)."""
    scale = jnp.sqrt(grid.gauss_weights) * jnp.exp(0.5 * grid.nodes ** 2)
    return einsum(grid.hermite, f * scale, "j n, ... j -> ... n")


def from_hermite(c: jnp.ndarray, grid: VelocityGrid) -> jnp.ndarray:
    """Hermite-function coefficients -> ordinate values (last axis)."""
    scale = jnp.sqrt(grid.gauss_weights) * jnp.exp(0.5 * grid.nodes ** 2)
    return einsum(grid.hermite, c, "j n, ... n -> ... j") / scale


def fokker_planck_matrix(u, grid: VelocityGrid) -> jnp.ndarray:
    """
    Matrix of ∂v((v - u) f + κ ∂v f) in Hermite-function coefficient space.

    Lower bidiagonal: diagonal -n, subdiagonal (u / sqrt(2κ)) sqrt(2n). Mass (mode 0) is
    conserved exactly and the momentum relaxes at the exact rate -(J - uρ). A batch of
    drifts gives a batch of matrices.
    """
    k = grid.size
    n = jnp.arange(k, dtype=jnp.float64)
    a = jnp.asarray(u, dtype=jnp.float64) / jnp.sqrt(2.0 * grid.kappa)
    sub = a[..., None] * jnp.sqrt(2.0 * n[1:])
    idx = jnp.arange(1, k)
    lower = jnp.zeros(sub.shape[:-1] + (k, k)).at[..., idx, idx - 1].set(sub)
    return jnp.diag(-n) + lower


def moments(f: jnp.ndarray, grid: VelocityGrid) -> Tuple[jnp.ndarray, jnp.ndarray]:
    """Density ∫ f dv and current J = ∫ v f dv by quadrature over the last axis."""
    return (einsum(f, grid.weights, "... j, j -> ..."),
            einsum(f, grid.weights * grid.velocities, "... j, j -> ..."))
