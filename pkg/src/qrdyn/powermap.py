"""Lattès-type power map ``P`` solving ``P o Z = Z o d`` with ``d(x) = m^2 x``.

``P(y)`` is evaluated as ``Z(m^2 x)`` for a preimage ``x`` of ``y`` on the
canonical branch: beam (0, 0) over the closed upper half-space and beam
(1, 0) over the lower one.  For odd ``m`` the result does not depend on the
preimage chosen; :func:`branch_consistency` measures the discrepancy for
even ``m``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TruncationError
from .numerics import MapHandle, dilatation_field
from .zorich import (
    MAX_EXPONENT,
    POLE,
    BeamAddress,
    zorich_eval,
    zorich_eval_displaced,
    zorich_invert,
    zorich_invert_displaced,
)

ESCAPE_RADIUS = 1e150


@dataclass(frozen=True)
class PowerMapParams:
    m: int = 3

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 2:
            raise ValueError(f"power map degree m must be an integer >= 2, got {self.m!r}")

    @property
    def factor(self) -> int:
        """The similarity ratio ``m^2``."""
        return self.m * self.m


def _points(y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"expected points with 3 coordinates, got shape {arr.shape}")
    return arr


def _scaled_exponent_guard(x: np.ndarray, factor: int) -> None:
    if np.any(np.abs(factor * x[..., 2]) > MAX_EXPONENT):
        raise TruncationError("m^2 log|y| exceeds 700: power map overflows")


def power_eval(y, params: PowerMapParams = PowerMapParams()) -> np.ndarray:
    """Evaluate ``P(y) = Z(m^2 Z^{-1}(y))``; ``|P(y)| = |y|^(m^2)``."""
    y = _points(y)
    if np.any(np.linalg.norm(y, axis=-1) == 0.0):
        raise DomainError("the power map is defined on R^3 minus the origin")
    x = zorich_invert(y, branch=None)
    _scaled_exponent_guard(x, params.factor)
    return zorich_eval(params.factor * x)


def power_increment(delta, params: PowerMapParams = PowerMapParams()) -> np.ndarray:
    """``P((0,0,1) + delta) - (0,0,1)``, accurate for tiny ``delta``."""
    x = zorich_invert_displaced(delta, branch=None)
    _scaled_exponent_guard(x, params.factor)
    return zorich_eval_displaced(params.factor * x)


def power_handle(params: PowerMapParams = PowerMapParams()) -> MapHandle:
    def evaluate(y):
        return power_eval(y, params)

    def increment(base, delta):
        base = np.asarray(base, dtype=float)
        if np.array_equal(base, POLE):
            return power_increment(delta, params)
        return power_eval(base + delta, params) - power_eval(base, params)

    return MapHandle(3, evaluate, f"P(m={params.m})", increment=increment)


def schroder_residual(x, params: PowerMapParams = PowerMapParams()) -> np.ndarray:
    """Normalized defect ``|P(Z(x)) - Z(m^2 x)| / (1 + |Z(m^2 x)|)``."""
    x = _points(x)
    rhs = zorich_eval(params.factor * x)
    lhs = power_eval(zorich_eval(x), params)
    return np.linalg.norm(lhs - rhs, axis=-1) / (1.0 + np.linalg.norm(rhs, axis=-1))


def branch_consistency(y, params: PowerMapParams, addresses) -> float:
    """Largest pairwise distance between ``Z(m^2 x)`` over preimages ``x`` in the given beams."""
    y = _points(y).reshape(3)
    values = [zorich_eval(params.factor * zorich_invert(y, BeamAddress(*addr)))
              for addr in addresses]
    if len(values) < 2:
        return 0.0
    return float(max(np.linalg.norm(p - q) for p, q in itertools.combinations(values, 2)))


@dataclass(frozen=True)
class Orbit:
    points: np.ndarray
    truncated: bool = False

    @property
    def moduli(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=-1)

    def __len__(self) -> int:
        return len(self.points)


def orbit(y, params: PowerMapParams = PowerMapParams(), k: int = 10) -> Orbit:
    """``[y, P(y), ..., P^k(y)]``, stopping early (flagged) before overflow."""
    y = _points(y).reshape(3)
    if np.linalg.norm(y) == 0.0:
        raise DomainError("the power map is defined on R^3 minus the origin")
    pts = [y]
    for _ in range(k):
        try:
            nxt = power_eval(pts[-1], params)
        except TruncationError:
            return Orbit(np.array(pts), truncated=True)
        if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt) > ESCAPE_RADIUS:
            return Orbit(np.array(pts), truncated=True)
        pts.append(nxt)
    return Orbit(np.array(pts))


def power_iterate(y, params: PowerMapParams, t: int) -> np.ndarray:
    """``P^t(y)`` by repeated application (vectorized)."""
    out = _points(y)
    for _ in range(t):
        out = power_eval(out, params)
    return out


def escape_steps(start, params: PowerMapParams, center=POLE, radius: float = 0.1,
                 max_steps: int = 50) -> int | None:
    """Iterations until ``P^t(start)`` leaves ``B(center, radius)``; ``None`` if it never does."""
    y = _points(start).reshape(3)
    for t in range(max_steps + 1):
        if np.linalg.norm(y - center) >= radius:
            return t
        y = power_eval(y, params)
    return None


def iterate_dilatation(samples, params: PowerMapParams, t: int, rel_step: float = 1e-6) -> np.ndarray:
    """Finite-difference dilatation of ``P^t`` at each sample.

    The step shrinks like ``m^(-2t)`` so the differenced points stay within
    one beam after the ``t``-fold expansion.
    """
    Y = np.atleast_2d(_points(samples))
    step = rel_step * np.linalg.norm(Y, axis=-1) / params.factor ** t
    return dilatation_field(lambda q: power_iterate(q, params, t), Y, step)
