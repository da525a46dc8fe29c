"""Elementary functions that accept any scalar type used in the package.

Rigorous scalar types (Interval, AffineForm, Dual1, Dual2) carry their own
methods.  Plain floats and numpy arrays fall through to numpy.
"""

from __future__ import annotations

import numpy as np

from .interval import DomainError


def _dispatch(name: str, x, fallback):
    method = getattr(x, name, None)
    if method is not None and not isinstance(x, np.ndarray):
        return method()
    return fallback(x)


def _float_log(x):
    if np.ndim(x) == 0 and x <= 0.0:
        raise DomainError(f"log of {x!r}")
    return np.log(x)


def _float_sqrt(x):
    if np.ndim(x) == 0 and x < 0.0:
        raise DomainError(f"sqrt of {x!r}")
    return np.sqrt(x)


def exp(x):
    return _dispatch("exp", x, np.exp)


def log(x):
    return _dispatch("log", x, _float_log)


def sin(x):
    return _dispatch("sin", x, np.sin)


def cos(x):
    return _dispatch("cos", x, np.cos)


def sqrt(x):
    return _dispatch("sqrt", x, _float_sqrt)


def reciprocal(x):
    method = getattr(x, "reciprocal", None)
    if method is not None and not isinstance(x, np.ndarray):
        return method()
    if np.ndim(x) == 0 and x == 0.0:
        raise DomainError("division by 0")
    return 1.0 / x


def pow_int(x, n: int):
    method = getattr(x, "pow_int", None)
    if method is not None and not isinstance(x, np.ndarray):
        return method(n)
    if n < 0 and np.ndim(x) == 0 and x == 0.0:
        raise DomainError("negative power of 0")
    return x**n


FUNCTIONS = {"exp": exp, "log": log, "sin": sin, "cos": cos, "sqrt": sqrt}
