"""Univariate function systems on [0, 1].

Every system starts with the constant function, so a product basis built
from them always contains the intercept and "entry equal to 1" means "this
dimension does not vary".
"""

from __future__ import annotations

import enum
import math

import numpy as np

SQRT2 = math.sqrt(2.0)


class BasisKind(str, enum.Enum):
    COSINE = "cosine"
    SINE = "sine"
    LEGENDRE = "legendre"

    @classmethod
    def parse(cls, value: "BasisKind | str") -> "BasisKind":
        if isinstance(value, BasisKind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Unknown basis kind: {value!r}") from None


def sup_norm(kind: BasisKind | str, J: int) -> float:
    """Bound on max_{j<=J} sup_x |phi_j(x)|."""
    kind = BasisKind.parse(kind)
    if kind is BasisKind.COSINE:
        return SQRT2 if J > 1 else 1.0
    if kind is BasisKind.SINE:
        return 1.0
    return math.sqrt(2 * J - 1)


def _check_domain(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("basis argument must be finite")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("basis argument outside [0, 1]")


def basis_table(kind: BasisKind | str, J: int, x) -> np.ndarray:
    """Evaluate phi_1..phi_J at every point of ``x``.

    Parameters
    ----------
    kind : BasisKind or str
    J : int
        Number of functions, J >= 1.
    x : array_like
        Points in [0, 1], any shape.

    Returns
    -------
    np.ndarray
        Array of shape ``x.shape + (J,)``; the last axis is the frequency.
    """
    kind = BasisKind.parse(kind)
    J = int(J)
    if J < 1:
        raise ValueError(f"basis index must be >= 1, got J={J}")
    x = np.asarray(x, dtype=np.float64)
    _check_domain(x)
    out = np.empty(x.shape + (J,), dtype=np.float64)
    out[..., 0] = 1.0
    if J == 1:
        return out
    if kind is BasisKind.COSINE:
        freq = np.arange(1, J, dtype=np.float64)
        out[..., 1:] = SQRT2 * np.cos(np.pi * x[..., None] * freq)
    elif kind is BasisKind.SINE:
        freq = np.arange(2, J + 1, dtype=np.float64) + 0.5
        out[..., 1:] = np.sin(np.pi * x[..., None] * freq)
    else:
        # three-term recurrence for P_k on [-1, 1], then unit L2([0,1]) scaling
        t = 2.0 * x - 1.0
        p_prev = np.ones_like(t)
        p_cur = t
        out[..., 1] = p_cur
        for k in range(1, J - 1):
            p_next = ((2 * k + 1) * t * p_cur - k * p_prev) / (k + 1)
            out[..., k + 1] = p_next
            p_prev, p_cur = p_cur, p_next
        out[..., 1:] *= np.sqrt(2.0 * np.arange(2, J + 1) - 1.0)
    return out


def eval_basis(kind: BasisKind | str, j: int, x: float) -> float:
    """Value of the j-th function (1-based) of the system at ``x``."""
    j = int(j)
    if j < 1:
        raise ValueError(f"basis index must be >= 1, got j={j}")
    return float(basis_table(kind, j, x)[..., j - 1])


def eval_basis_row(kind: BasisKind | str, J: int, x: float) -> np.ndarray:
    """[phi_1(x), ..., phi_J(x)]."""
    return basis_table(kind, J, float(x))
