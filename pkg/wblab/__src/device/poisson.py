import jax
import jax.numpy as jnp
from flax import struct

from wblab.__src.device.state import DeviceConfig
from wblab.__src.utils.errors import InvalidConfigError, InvalidInputError


@struct.dataclass
class PotentialField:
    """
    Electrostatic potential on cell centres plus the exact Dirichlet values at x = ±1.

    Attributes:
        phi (jnp.ndarray): φ at the cell centres.
        phi_left (float): φ(-1) = 0.
        phi_right (float): φ(1) = -V.
        e_field (jnp.ndarray): E = -∂x φ at the n + 1 cell faces.
    """
    phi: jnp.ndarray
    e_field: jnp.ndarray
    phi_left: float = struct.field(pytree_node=False, default=0.0)
    phi_right: float = struct.field(pytree_node=False, default=0.0)

    @property
    def ghost_phi(self) -> jnp.ndarray:
        """φ extended by mirror ghosts 2φ_b - φ_0 on both sides."""
        return _ghosts(self.phi, self.phi_left, self.phi_right)


def _ghosts(phi, phi_left, phi_right):
    return jnp.concatenate([2.0 * phi_left - phi[:1], phi, 2.0 * phi_right - phi[-1:]])


def _poisson_system(debye, dx):
    n = debye.shape[0]
    # interior: (φ_{j+1} - 2φ_j + φ_{j-1})/dx²; boundary cells use the half-cell distance dx/2
    lower = jnp.full(n, 1.0 / dx ** 2).at[0].set(0.0)
    upper = jnp.full(n, 1.0 / dx ** 2).at[-1].set(0.0)
    diag = jnp.full(n, -2.0 / dx ** 2)
    edge = 1.0 / (0.75 * dx)
    diag = diag.at[0].set(-edge * (1.0 / dx + 2.0 / dx)).at[-1].set(-edge * (1.0 / dx + 2.0 / dx))
    upper = upper.at[0].set(edge / dx)
    lower = lower.at[-1].set(edge / dx)
    boundary_weight = edge * 2.0 / dx
    return debye * lower, debye * diag, debye * upper, debye * boundary_weight


@jax.jit
def _solve(rho, doping, debye, phi_left, phi_right, dx):
    lower, diag, upper, bw = _poisson_system(debye, dx)
    rhs = doping - rho
    rhs = rhs.at[0].add(-bw[0] * phi_left).at[-1].add(-bw[-1] * phi_right)
    phi = jax.lax.linalg.tridiagonal_solve(lower, diag, upper, rhs[:, None])[:, 0]
    faces = jnp.concatenate([jnp.array([phi_left]), phi, jnp.array([phi_right])])
    widths = jnp.concatenate([jnp.array([0.5 * dx]), jnp.full(phi.shape[0] - 1, dx), jnp.array([0.5 * dx])])
    return phi, -jnp.diff(faces) / widths


def poisson_residual(potential: PotentialField, rho, config: DeviceConfig) -> jnp.ndarray:
    """Residual λ (D²φ) - (ρ_D - ρ) of the discrete system, one entry per cell."""
    lower, diag, upper, bw = _poisson_system(config.debye, config.dx)
    phi = potential.phi
    lhs = diag * phi
    lhs = lhs.at[1:].add(lower[1:] * phi[:-1]).at[:-1].add(upper[:-1] * phi[1:])
    lhs = lhs.at[0].add(bw[0] * potential.phi_left).at[-1].add(bw[-1] * potential.phi_right)
    return lhs - (config.doping - jnp.asarray(rho, dtype=jnp.float64))


def poisson_solve(rho, config: DeviceConfig) -> PotentialField:
    """
    Finite-difference solution of λ(x) φ'' = ρ_D - ρ on (-1, 1) with φ(-1) = 0,
    φ(1) = -V.

    Unknowns sit at the cell centres; the first and last rows use the non-uniform
    three-point stencil reaching the boundary at distance dx/2. The tridiagonal system
    is solved with `jax.lax.linalg.tridiagonal_solve`.

    Args:
        rho (jnp.ndarray): Cell densities, nonnegative.
        config (DeviceConfig): Device description (doping, Debye length, bias).

    Returns:
        PotentialField: Potential and face electric field.

    Example usage:
    ```
        >>> config = device_config(n_cells=64, bias=0.5, doping=1.0)
        >>> potential = poisson_solve(config.doping, config)   # linear from 0 to -0.5
    ```
    """
    rho = jnp.asarray(rho, dtype=jnp.float64)
    if rho.shape != config.doping.shape:
        raise InvalidInputError(f"density has shape {rho.shape}, device has {config.doping.shape}")
    if not bool(jnp.all(config.debye > 0)):
        raise InvalidConfigError("singular Poisson system: Debye length must be positive everywhere")
    phi_right = -float(config.bias)
    phi, e_field = _solve(rho, config.doping, config.debye, 0.0, phi_right, config.dx)
    return PotentialField(phi, e_field, 0.0, phi_right)
