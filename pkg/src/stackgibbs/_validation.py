"""Input validation helpers shared across the package."""

import numbers

import numpy as np

SIMPLEX_TOL = 1e-9


def check_simplex(w, n_components=None, name="weights"):
    """Validate and return ``w`` as a float array on the probability simplex.

    Parameters
    ----------
    w : array_like of shape (C,)
    n_components : int, optional
        Expected length.
    name : str
        Used in error messages.

    Returns
    -------
    ndarray of shape (C,)
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array, got shape {w.shape}")
    if n_components is not None and w.size != n_components:
        raise ValueError(f"{name} has length {w.size}, expected {n_components}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(w < 0):
        raise ValueError(f"{name} must be nonnegative")
    if abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name} must sum to 1 (sum={w.sum()!r})")
    return w


def normalize_log_weights(logw):
    """Exponentiate and normalize log-weights with max subtraction."""
    logw = np.asarray(logw, dtype=float)
    m = np.max(logw)
    if not np.isfinite(m):
        raise ValueError("all log-weights are -inf; weights are undefined")
    e = np.exp(logw - m)
    return e / e.sum()


def renormalize(w):
    """Clip tiny negative drift and rescale to sum exactly to one."""
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    return w / w.sum()


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_probability(p, name="probability", open_interval=True):
    p = float(p)
    if open_interval and not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p!r}")
    if not open_interval and not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_discount(discount):
    discount = float(discount)
    if not 0.0 < discount <= 1.0:
        raise ValueError(f"discount must lie in (0, 1], got {discount!r}")
    return discount


def discount_weights(n, discount):
    """Geometric weights ``discount**(n - t)`` for t = 1..n (newest gets 1)."""
    return discount ** np.arange(n - 1, -1, -1, dtype=float)
