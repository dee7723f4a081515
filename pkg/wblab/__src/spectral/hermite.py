import jax
import jax.numpy as jnp
from functools import partial

from wblab.__src.utils.errors import CapabilityError, InvalidInputError

MAX_HERMITE_ORDER = 64


def _check_order(n: int, max_order: int):
    if int(n) != n or n < 0:
        raise InvalidInputError(f"Hermite order must be a nonnegative integer, got {n}")
    if n > max_order:
        raise CapabilityError(f"Hermite order {n} exceeds the supported maximum {max_order}")


@partial(jax.jit, static_argnames=("n",))
def _hermite_poly(n: int, x: jnp.ndarray) -> jnp.ndarray:
    if n == 0:
        return jnp.ones_like(x)

    def body(j, carry):
        h_prev, h = carry
        return h, 2.0 * x * h - 2.0 * j * h_prev

    _, h = jax.lax.fori_loop(1, n, body, (jnp.ones_like(x), 2.0 * x))
    return h


def hermite_poly(n: int, x, max_order: int = MAX_HERMITE_ORDER) -> jnp.ndarray:
    """
    Physicists' Hermite polynomial H_n(x) evaluated by the three-term recurrence
    H_{n+1} = 2x H_n - 2n H_{n-1}.

    Args:
        n (int): Order, 0 <= n <= max_order.
        x (float or jnp.ndarray): Evaluation points.
        max_order (int): Largest order accepted.

    Returns:
        jnp.ndarray: H_n(x), same shape as `x`.

    Example usage:
    ```
        >>> hermite_poly(2, 1.0)   # 4x^2 - 2
        Array(2., dtype=float64)
    ```
    """
    _check_order(n, max_order)
    return _hermite_poly(int(n), jnp.asarray(x, dtype=jnp.float64))


@partial(jax.jit, static_argnames=("n_max",))
def _hermite_functions(n_max: int, x: jnp.ndarray) -> jnp.ndarray:
    psi0 = jnp.pi ** -0.25 * jnp.exp(-0.5 * x ** 2)
    if n_max == 0:
        return psi0[None]
    psi1 = jnp.sqrt(2.0) * x * psi0
    if n_max == 1:
        return jnp.stack([psi0, psi1])

    def body(carry, n):
        prev, cur = carry
        nxt = jnp.sqrt(2.0 / (n + 1)) * x * cur - jnp.sqrt(n / (n + 1.0)) * prev
        return (cur, nxt), nxt

    _, rest = jax.lax.scan(body, (psi0, psi1), jnp.arange(1, n_max, dtype=jnp.float64))
    return jnp.concatenate([psi0[None], psi1[None], rest], axis=0)


def hermite_functions(n_max: int, x, max_order: int = MAX_HERMITE_ORDER) -> jnp.ndarray:
    """
    Orthonormal Hermite functions psi_n(x) = H_n(x) exp(-x^2/2) / sqrt(2^n n! sqrt(pi))
    for n = 0..n_max, stacked along the first axis.

    The normalized recurrence never forms H_n or n! explicitly, so it stays finite
    where the polynomials themselves overflow.
    """
    _check_order(n_max, max_order)
    x = jnp.asarray(x, dtype=jnp.float64)
    return _hermite_functions(int(n_max), x)
