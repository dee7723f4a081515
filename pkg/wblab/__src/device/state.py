import jax.numpy as jnp
from flax import struct
from typing import Callable, Optional, Union

from wblab.__src.utils.errors import InvalidConfigError, InvalidInputError

DOMAIN = (-1.0, 1.0)


@struct.dataclass
class MomentState:
    """
    Cell densities and momenta of the γ = 3 Euler system.

    The Riemann invariants u± = u ± ρ/2 diagonalize the system; `u_plus >= u_minus`
    is equivalent to ρ >= 0.

    Example usage:
    ```
        >>> state = MomentState.from_invariants(jnp.array([1.0]), jnp.array([-1.0]))
        >>> state.rho, state.momentum   # (2.0, 0.0)
    ```
    """
    rho: jnp.ndarray
    momentum: jnp.ndarray

    @classmethod
    def from_invariants(cls, u_plus, u_minus) -> "MomentState":
        up = jnp.asarray(u_plus, dtype=jnp.float64)
        um = jnp.asarray(u_minus, dtype=jnp.float64)
        return cls(up - um, 0.5 * (up ** 2 - um ** 2))

    @property
    def velocity(self) -> jnp.ndarray:
        return jnp.where(self.rho > 0, self.momentum / jnp.where(self.rho > 0, self.rho, 1.0), 0.0)

    @property
    def u_plus(self) -> jnp.ndarray:
        return self.velocity + 0.5 * self.rho

    @property
    def u_minus(self) -> jnp.ndarray:
        return self.velocity - 0.5 * self.rho

    @property
    def mach(self) -> jnp.ndarray:
        return jnp.where(self.rho > 0, 2.0 * self.velocity / jnp.where(self.rho > 0, self.rho, 1.0), 0.0)


def doping_profile(x) -> jnp.ndarray:
    """
    Default n+ n n+ doping: 1 on |x| >= 0.4, 0.2 on |x| <= 0.3, linear in between.
    """
    ax = jnp.abs(jnp.asarray(x, dtype=jnp.float64))
    return jnp.clip(0.2 + 8.0 * (ax - 0.3), 0.2, 1.0)


@struct.dataclass
class DeviceConfig:
    """
    Ballistic diode on (-1, 1): cell-sampled doping, Debye length and damping time,
    applied bias and scheme switches.

    Attributes:
        doping (jnp.ndarray): ρ_D per cell, in (0, 1].
        debye (jnp.ndarray): λ per cell, > 0.
        damping_tau (jnp.ndarray): τ per cell, > 0 or inf (no damping).
        bias (float): V >= 0, applied as φ(1) = -V.
        cfl (float): Courant number of the kinetic scheme.
        literal_damping (bool): Use (u_left + u_right)/(2τ) without the mesh factor.
    """
    doping: jnp.ndarray
    debye: jnp.ndarray
    damping_tau: jnp.ndarray
    bias: float = struct.field(pytree_node=False, default=0.0)
    cfl: float = struct.field(pytree_node=False, default=0.5)
    literal_damping: bool = struct.field(pytree_node=False, default=False)

    @property
    def n_cells(self) -> int:
        return self.doping.shape[0]

    @property
    def dx(self) -> float:
        return (DOMAIN[1] - DOMAIN[0]) / self.n_cells

    @property
    def x(self) -> jnp.ndarray:
        return DOMAIN[0] + (jnp.arange(self.n_cells) + 0.5) * self.dx

    def with_bias(self, bias: float) -> "DeviceConfig":
        return self.replace(bias=float(bias))


Profile = Union[None, float, Callable]


def _sample(profile: Profile, x: jnp.ndarray, default) -> jnp.ndarray:
    if profile is None:
        profile = default
    if callable(profile):
        return jnp.asarray(profile(x), dtype=jnp.float64) * jnp.ones_like(x)
    return jnp.full_like(x, float(profile))


def device_config(n_cells: int = 64, bias: float = 0.0, debye: Profile = 0.15,
                  damping_tau: Profile = jnp.inf, doping: Profile = None,
                  cfl: float = 0.5, literal_damping: bool = False) -> DeviceConfig:
    """
    Samples the device profiles on `n_cells` cells and validates them.

    Args:
        n_cells (int): Number of cells on (-1, 1).
        bias (float): Applied voltage V >= 0.
        debye (float or Callable): λ(x).
        damping_tau (float or Callable): τ(x); `jnp.inf` disables damping.
        doping (float or Callable, optional): ρ_D(x); defaults to `doping_profile`.
        cfl (float): Courant number.
        literal_damping (bool): Drop the dx factor in the augmented jump.

    Returns:
        DeviceConfig: Validated configuration.

    Example usage:
    ```
        >>> config = device_config(n_cells=64, bias=0.15, debye=0.15)
    ```
    """
    if int(n_cells) != n_cells or n_cells < 4:
        raise InvalidConfigError(f"n_cells must be an integer >= 4, got {n_cells}")
    if not bias >= 0:
        raise InvalidConfigError(f"bias must be nonnegative, got {bias}")
    if not 0 < cfl <= 1:
        raise InvalidConfigError(f"cfl must lie in (0, 1], got {cfl}")
    x = DOMAIN[0] + (jnp.arange(int(n_cells)) + 0.5) * (DOMAIN[1] - DOMAIN[0]) / n_cells
    rho_d = _sample(doping, x, doping_profile)
    lam = _sample(debye, x, 0.15)
    tau = _sample(damping_tau, x, jnp.inf)
    if not bool(jnp.all((rho_d > 0) & (rho_d <= 1))):
        raise InvalidConfigError("doping must take values in (0, 1]")
    if not bool(jnp.all(lam > 0)):
        raise InvalidConfigError("Debye length must be strictly positive")
    if not bool(jnp.all(tau > 0)):
        raise InvalidConfigError("damping time must be strictly positive (use inf for none)")
    return DeviceConfig(rho_d, lam, tau, float(bias), float(cfl), bool(literal_damping))


def rest_state(config: DeviceConfig) -> MomentState:
    """Neutral state ρ = ρ_D, u = 0."""
    return MomentState(config.doping, jnp.zeros_like(config.doping))


def check_state(state: MomentState):
    if not bool(jnp.all(jnp.isfinite(state.rho) & jnp.isfinite(state.momentum))):
        raise InvalidInputError("moment state contains non-finite values")
