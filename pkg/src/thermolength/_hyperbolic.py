"""Overflow-safe hyperbolic functions of ``z = beta*hbar*omega/2``.

All routines accept scalars or arrays with ``z > 0``.
"""

import numpy as np

# above this argument coth == 1 and csch == 0 to double precision
ASYMPTOTIC_ARG = 350.0


def coth(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        out = 1.0 + 2.0 / np.expm1(np.minimum(2.0 * z, 2.0 * ASYMPTOTIC_ARG))
    out = np.where(z > ASYMPTOTIC_ARG, 1.0, out)
    return out[()] if out.ndim == 0 else out


def csch(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(under="ignore"):
        out = 2.0 * np.exp(-z) / -np.expm1(-2.0 * z)
    return out[()] if out.ndim == 0 else out


def log_sinh(z):
    """ln sinh(z) without overflow for large ``z``."""
    z = np.asarray(z, dtype=float)
    out = z - np.log(2.0) + np.log(-np.expm1(-2.0 * z))
    return out[()] if out.ndim == 0 else out


def is_asymptotic(z) -> bool:
    return bool(np.all(np.asarray(z) > ASYMPTOTIC_ARG))
