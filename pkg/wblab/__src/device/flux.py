import jax.numpy as jnp
from typing import Tuple

from wblab.__src.utils.errors import InvalidConfigError, InvalidInputError


def _pair_flux(wp: jnp.ndarray, wm: jnp.ndarray) -> jnp.ndarray:
    # moments of the indicator between wm and wp: (∫ v dv, ∫ v² dv)
    return jnp.stack([0.5 * (wp ** 2 - wm ** 2), (wp ** 3 - wm ** 3) / 3.0], axis=-1)


def _split(up: jnp.ndarray, um: jnp.ndarray) -> Tuple[jnp.ndarray, jnp.ndarray]:
    f_plus = _pair_flux(jnp.maximum(0.0, up), jnp.maximum(0.0, um))
    f_minus = _pair_flux(-jnp.maximum(0.0, -up), -jnp.maximum(0.0, -um))
    return f_plus, f_minus


def _wb_flux(up_l, um_l, up_r, um_r, delta_phi):
    def root(v):
        return jnp.sqrt(jnp.maximum(0.0, v))

    cross_p = _pair_flux(root(jnp.maximum(0.0, up_l) ** 2 - 2.0 * delta_phi),
                         root(jnp.maximum(0.0, um_l) ** 2 - 2.0 * delta_phi))
    back_p = _pair_flux(jnp.minimum(jnp.maximum(0.0, -up_r), root(-2.0 * delta_phi)),
                        jnp.minimum(jnp.maximum(0.0, -um_r), root(-2.0 * delta_phi)))
    cross_m = _pair_flux(-root(jnp.minimum(0.0, up_r) ** 2 + 2.0 * delta_phi),
                         -root(jnp.minimum(0.0, um_r) ** 2 + 2.0 * delta_phi))
    back_m = _pair_flux(-jnp.minimum(jnp.maximum(0.0, up_l), root(2.0 * delta_phi)),
                        -jnp.minimum(jnp.maximum(0.0, um_l), root(2.0 * delta_phi)))
    return cross_p - back_p, cross_m - back_m


def _require_ordered(up, um):
    up = jnp.asarray(up, dtype=jnp.float64)
    um = jnp.asarray(um, dtype=jnp.float64)
    if bool(jnp.any(up < um)):
        raise InvalidInputError("invalid state: u+ < u- means negative density")
    return up, um


def euler_flux(up, um) -> jnp.ndarray:
    """
    Physical flux of the γ = 3 Euler system in Riemann invariants.

    Args:
        up (float or jnp.ndarray): u + ρ/2.
        um (float or jnp.ndarray): u - ρ/2, with um <= up.

    Returns:
        jnp.ndarray: ((up² - um²)/2, (up³ - um³)/3) stacked on the last axis,
        i.e. (ρu, ρu² + ρ³/12).

    Example usage:
    ```
        >>> euler_flux(1.0, -1.0)   # [0, 2/3]
    ```
    """
    up, um = _require_ordered(up, um)
    return _pair_flux(up, um)


def split_flux(up, um) -> Tuple[jnp.ndarray, jnp.ndarray]:
    """
    Kinetic flux-vector splitting f = f+ + f-, with f± = f(±max(0, ±u)) componentwise
    on the invariants.

    Example usage:
    ```
        >>> f_plus, f_minus = split_flux(1.0, -1.0)   # (1/2, 1/3), (-1/2, 1/3)
    ```
    """
    up, um = _require_ordered(up, um)
    return _split(up, um)


def wb_interface_flux(left, right, delta_phi) -> Tuple[jnp.ndarray, jnp.ndarray]:
    """
    Well-balanced interface fluxes across a potential jump Δφ = φ_right - φ_left.

    F+ carries particles entering the right cell: those of the left cell that climb
    the barrier, plus left-movers of the right cell reflected by it. F- is the mirror
    quantity for the left cell. With Δφ = 0 they reduce to f+(left) and f-(right).

    Args:
        left (Tuple): (u+, u-) of the left cell.
        right (Tuple): (u+, u-) of the right cell.
        delta_phi (float or jnp.ndarray): Potential jump.

    Returns:
        Tuple[jnp.ndarray, jnp.ndarray]: (F+, F-), each a (mass, momentum) pair.
    """
    up_l, um_l = _require_ordered(*left)
    up_r, um_r = _require_ordered(*right)
    return _wb_flux(up_l, um_l, up_r, um_r, jnp.asarray(delta_phi, dtype=jnp.float64))


def _augment(delta_phi, u_left, u_right, tau, dx, literal: bool):
    scale = 1.0 if literal else dx
    return delta_phi + scale / (2.0 * tau) * (u_left + u_right)


def augmented_jump(delta_phi, u_left, u_right, tau, dx: float, literal: bool = False):
    """
    Potential jump augmented by the damping term (dx / 2τ)(u_left + u_right).

    `literal=True` drops the mesh factor. τ = inf leaves the jump unchanged.
    """
    tau = jnp.asarray(tau, dtype=jnp.float64)
    if bool(jnp.any(tau <= 0)):
        raise InvalidConfigError("damping time must be strictly positive")
    return _augment(jnp.asarray(delta_phi, dtype=jnp.float64), u_left, u_right, tau, dx, literal)
