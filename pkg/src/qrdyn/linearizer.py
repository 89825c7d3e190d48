"""Poincaré linearizers ``L_k(x) = f^k(x0 + rho_k x)`` and relations between them.

Iterates are carried as displacements from the fixed point ``x0`` so that
the tiny starting offsets ``rho_k x`` keep full relative precision; the map
handle's ``increment`` supplies ``f(x0 + d) - f(x0)``.

Given two linearizers ``L`` and ``M`` with multipliers ``phi`` and ``psi``
(``f o L = L o phi``, ``f o M = M o psi``), the conjugacy ``G = L^{-1} o M``
is computed near 0 by local inversion and continued outward through
``G(x) = phi^j G(psi^{-j} x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError, EstimateFailure, TruncationError
from .linmap import batch_max_dilatation
from .numerics import MapHandle, as_linear, fd_jacobian, newton_solve
from .powermap import PowerMapParams, power_handle

ESCAPE_RADIUS = 1e150
FIXED_POINT_TOL = 1e-10


@dataclass(frozen=True)
class RescaleSequence:
    """``rho_k = factor * base^(-k)``, or an explicit list ``rho_0, rho_1, ...``."""

    base: float | None = None
    values: tuple[float, ...] | None = None
    factor: float = 1.0

    def __post_init__(self):
        if (self.base is None) == (self.values is None):
            raise ValueError("give exactly one of base or values")
        if self.factor <= 0:
            raise ValueError("factor must be positive")
        if self.base is not None and not self.base > 1.0:
            raise ValueError("geometric base must exceed 1")
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if np.any(vals <= 0) or np.any(np.diff(vals) >= 0):
                raise ValueError("explicit rescale values must be positive and strictly decreasing")

    @classmethod
    def geometric(cls, base: float, factor: float = 1.0) -> "RescaleSequence":
        return cls(base=float(base), factor=float(factor))

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "RescaleSequence":
        return cls(values=tuple(float(v) for v in values))

    def rho(self, k: int) -> float:
        if self.values is not None:
            if k >= len(self.values):
                raise IndexError(f"explicit rescale sequence has no entry for k={k}")
            return self.factor * self.values[k]
        return self.factor * self.base ** (-k)


@dataclass(frozen=True)
class LinearizerApprox:
    map: MapHandle
    x0: tuple[float, ...]
    rescale: RescaleSequence
    depth: int
    escape: float = ESCAPE_RADIUS

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        object.__setattr__(self, "x0", tuple(float(t) for t in x0))
        if x0.shape != (self.map.dimension,):
            raise ValueError("x0 dimension does not match the map")
        defect = float(np.linalg.norm(self.map(x0[None, :])[0] - x0))
        if defect > FIXED_POINT_TOL:
            raise DomainError(f"x0 is not a fixed point of {self.map.label} (defect {defect:.3g})")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")

    @property
    def dimension(self) -> int:
        return self.map.dimension

    def at_depth(self, k: int) -> "LinearizerApprox":
        return replace(self, depth=k)

    def __call__(self, x) -> np.ndarray:
        return linearizer_approx(self, x)


def linearizer_approx(approx: LinearizerApprox, x) -> np.ndarray:
    """``f^k(x0 + rho_k x)`` by iterated application."""
    x = np.asarray(x, dtype=float)
    base = np.asarray(approx.x0)
    delta = approx.rescale.rho(approx.depth) * x
    for step in range(approx.depth):
        try:
            nxt = approx.map.increment_at(base, delta)
        except TruncationError as exc:
            raise TruncationError(f"orbit overflowed after {step} steps", last=base + delta,
                                  steps=step) from exc
        if not np.all(np.isfinite(nxt)) or np.max(np.linalg.norm(base + nxt, axis=-1)) > approx.escape:
            raise TruncationError(f"orbit escaped past {approx.escape:g} after {step + 1} steps",
                                  last=base + delta, steps=step)
        delta = nxt
    return base + delta


def generalized_derivative_approx(f: MapHandle, x0, rho: float, x) -> np.ndarray:
    """The difference quotient ``(f(x0 + rho x) - f(x0)) / rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    x0 = np.asarray(x0, dtype=float)
    return f.increment_at(x0, rho * np.asarray(x, dtype=float)) / rho


# ---------------------------------------------------------------- planar maps

def _to_complex(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (2,):
        raise ValueError("planar points are real pairs")
    return z[..., 0] + 1j * z[..., 1]


def _to_pairs(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def _coefficients(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs)
    if np.iscomplexobj(arr):
        return arr.astype(complex).ravel()
    arr = arr.astype(float)
    if arr.ndim == 1:
        return arr.astype(complex)
    return _to_complex(arr)


def _taylor_shift(c: np.ndarray, z0: complex) -> np.ndarray:
    """Coefficients of ``p(z0 + d) - p(z0)`` in powers of ``d``."""
    out = np.zeros_like(c)
    deriv = c.copy()
    for j in range(1, len(c)):
        deriv = npoly.polyder(deriv)
        out[j] = npoly.polyval(z0, deriv) / math.factorial(j)
    return out


def polynomial_handle(coeffs, label: str | None = None) -> MapHandle:
    """A complex polynomial as a self-map of R^2.

    ``coeffs`` are in ascending order, either complex numbers or real pairs.
    """
    c = _coefficients(coeffs)

    def evaluate(x):
        return _to_pairs(npoly.polyval(_to_complex(x), c))

    def increment(base, delta):
        shifted = _taylor_shift(c, complex(*np.asarray(base, dtype=float)))
        return _to_pairs(npoly.polyval(_to_complex(delta), shifted))

    return MapHandle(2, evaluate, label or f"poly{list(c)}", increment=increment)


def complex_exp_handle(scale: complex = 1.0) -> MapHandle:
    """``z -> exp(scale z)`` on R^2."""
    def evaluate(x):
        return _to_pairs(np.exp(scale * _to_complex(x)))

    return MapHandle(2, evaluate, f"exp({scale}z)")


def koenigs_polynomial(coeffs, z0, k: int, z) -> np.ndarray:
    """Koenigs approximant ``p^k(z0 + z / lambda^k)`` with ``lambda = p'(z0)``.

    ``coeffs`` are ascending real pairs (or complex numbers), ``z0`` and
    ``z`` real pairs; ``z`` may be an array of pairs.
    """
    c = _coefficients(coeffs)
    z0c = complex(*np.asarray(z0, dtype=float))
    if abs(npoly.polyval(z0c, c) - z0c) > 1e-12:
        raise DomainError("z0 is not a fixed point of p")
    lam = complex(npoly.polyval(z0c, npoly.polyder(c)))
    if abs(lam) <= 1.0:
        raise DomainError(f"multiplier |p'(z0)| = {abs(lam):.6g} is not repelling")
    shifted = _taylor_shift(c, z0c)
    d = _to_complex(z) / lam ** k
    for _ in range(k):
        d = npoly.polyval(d, shifted)
    return _to_pairs(z0c + d)


def koenigs_handle(coeffs, z0, k: int) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: koenigs_polynomial(coeffs, z0, k, z)


# ---------------------------------------------------------------- relations

def _apply(psi, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x @ as_linear(psi, x.shape[-1]).T


def functional_equation_residual(L, f, psi, grid) -> float:
    """``max |f(L(x)) - L(psi x)| / (1 + |L(psi x)|)`` over the grid."""
    X = np.atleast_2d(np.asarray(grid, dtype=float))
    rhs = np.asarray(L(_apply(psi, X)))
    lhs = np.asarray(f(np.asarray(L(X))))
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1) / (1.0 + np.linalg.norm(rhs, axis=-1))))


def commutation_defect(G0, A) -> float:
    """Operator norm of the commutator ``G0 A - A G0``."""
    G0 = np.asarray(G0, dtype=float)
    A = np.asarray(A, dtype=float)
    if G0.shape != A.shape:
        raise ValueError("matrices must share a dimension")
    return float(np.linalg.norm(G0 @ A - A @ G0, 2))


class Conjugacy:
    """``G = L^{-1} o M`` near 0, continued by ``G(x) = phi^j G(psi^{-j} x)``.

    ``L`` and ``M`` are callables on arrays of points.  Local inverses are
    found by damped Newton; ``L_inverse``/``M_inverse`` may supply exact
    local inverses instead.  Failed inversions come back as NaN rows.
    """

    def __init__(self, L, M, psi_L, psi_M, dim: int, *, local_radius: float = 0.5,
                 newton_tol: float = 1e-10, L_inverse=None, M_inverse=None, seed: int = 0):
        self.L = L
        self.M = M
        self.dim = dim
        self.phi = as_linear(psi_L, dim)
        self.psi = as_linear(psi_M, dim)
        self.phi_inv = np.linalg.inv(self.phi)
        self.psi_inv = np.linalg.inv(self.psi)
        self.local_radius = local_radius
        self.newton_tol = newton_tol
        self.L_inverse = L_inverse
        self.M_inverse = M_inverse
        self.seed = seed

    @staticmethod
    def _power(A: np.ndarray, j: int) -> np.ndarray:
        return np.linalg.matrix_power(A, j)

    def _solve(self, F, inverse, targets, guesses) -> np.ndarray:
        if inverse is not None:
            return np.asarray(inverse(targets), dtype=float)
        res = newton_solve(F, targets, guesses, tol=self.newton_tol, seed=self.seed)
        out = res.solution.copy()
        out[~res.converged] = np.nan
        return out

    def local(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._solve(self.L, self.L_inverse, np.asarray(self.M(X)), X)

    def local_inverse(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return self._solve(self.M, self.M_inverse, np.asarray(self.L(Y)), Y)

    def _depths(self, X, contraction) -> np.ndarray:
        X = np.atleast_2d(X)
        depth = np.zeros(len(X), dtype=int)
        cur = X.copy()
        for _ in range(200):
            far = np.linalg.norm(cur, axis=1) > self.local_radius
            if not far.any():
                break
            depth[far] += 1
            cur[far] = cur[far] @ contraction.T
        return depth

    def extended(self, X, j: int) -> np.ndarray:
        """``phi^j G(psi^{-j} x)`` at a fixed extension depth ``j``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inner = X @ self._power(self.psi_inv, j).T
        return self.local(inner) @ self._power(self.phi, j).T

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty_like(X)
        depths = self._depths(X, self.psi_inv)
        for j in np.unique(depths):
            sel = depths == j
            out[sel] = self.extended(X[sel], int(j))
        return out

    def inverse(self, Y) -> np.ndarray:
        """``G^{-1}(y) = psi^j (M^{-1} o L)(phi^{-j} y)``."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.empty_like(Y)
        depths = self._depths(Y, self.phi_inv)
        for j in np.unique(depths):
            sel = depths == j
            inner = Y[sel] @ self._power(self.phi_inv, int(j)).T
            out[sel] = self.local_inverse(inner) @ self._power(self.psi, int(j)).T
        return out


@dataclass
class ConjugacyEstimate:
    points: np.ndarray
    values: np.ndarray
    linear_fit: np.ndarray
    linear_residual: float
    scalar_fit: float
    scalar_residual: float
    dilatation: list[dict]
    dropped: int
    attempted: int
    conjugacy: Conjugacy = field(repr=False)

    @property
    def dilatation_ratio(self) -> float:
        """Largest per-depth maximum of K over the depth-0 maximum."""
        base = self.dilatation[0]["max"]
        return max(d["max"] for d in self.dilatation) / base

    def as_dict(self) -> dict:
        return {
            "scalar_fit": self.scalar_fit,
            "scalar_residual": self.scalar_residual,
            "linear_fit": self.linear_fit.tolist(),
            "linear_residual": self.linear_residual,
            "dilatation": self.dilatation,
            "dilatation_ratio": self.dilatation_ratio,
            "dropped": self.dropped,
            "attempted": self.attempted,
        }


def ball_samples(n: int, dim: int, radius: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (radius * rng.random(n) ** (1.0 / dim))[:, None]


def conjugacy_estimate(L, M, psi_L, psi_M, depth: int = 3, *, samples=None,
                       dim: int | None = None, n_samples: int = 32, radius: float = 0.25,
                       seed: int = 0, fd_step: float = 1e-6, local_radius: float = 0.5,
                       L_inverse=None, M_inverse=None) -> ConjugacyEstimate:
    """Sample ``G = L^{-1} o M`` near 0 and follow its dilatation outward.

    At extension depth ``j`` the samples are pushed to ``psi^j x`` and the
    finite-difference dilatation of ``x -> phi^j G(psi^{-j} x)`` is taken
    there with an absolute step ``fd_step``.  Samples whose inversion fails
    are dropped; more than half dropped raises :class:`EstimateFailure`.
    """
    if samples is None:
        if dim is None:
            dim = getattr(L, "dimension", None)
        if dim is None:
            raise ValueError("give samples or dim")
        samples = ball_samples(n_samples, dim, radius, seed)
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    dim = X.shape[1]
    conj = Conjugacy(L, M, psi_L, psi_M, dim, local_radius=local_radius,
                     L_inverse=L_inverse, M_inverse=M_inverse, seed=seed)
    G = conj.local(X)
    ok = np.all(np.isfinite(G), axis=1)
    dropped = int(np.count_nonzero(~ok))
    if dropped > 0.5 * len(X):
        raise EstimateFailure(f"{dropped} of {len(X)} samples failed to invert")
    Xk, Gk = X[ok], G[ok]

    r = float(np.sum(Xk * Gk) / np.sum(Xk * Xk))
    scalar_residual = float(np.max(np.linalg.norm(Gk - r * Xk, axis=1)))
    A, *_ = np.linalg.lstsq(Xk, Gk, rcond=None)
    linear_fit = A.T
    linear_residual = float(np.max(np.linalg.norm(Gk - Xk @ A, axis=1)))

    stats = []
    for j in range(depth + 1):
        Pj = Xk @ np.linalg.matrix_power(conj.psi, j).T
        J = fd_jacobian(lambda q: conj.extended(q, j), Pj, fd_step)
        K = batch_max_dilatation(J)
        K = K[np.isfinite(K)]
        stats.append({"depth": j, "max": float(K.max()), "mean": float(K.mean()),
                      "min": float(K.min()), "count": int(K.size)})

    return ConjugacyEstimate(Xk, Gk, linear_fit, linear_residual, r, scalar_residual,
                             stats, dropped, len(X), conj)


@dataclass(frozen=True)
class TransferCheck:
    residual: float
    dropped: int
    evaluated: int


def automorphy_transfer_check(L, G: Conjugacy | None, gens, grid) -> TransferCheck:
    """``max |L(G(gamma(G^{-1}(x)))) - L(x)|`` over grid points and generators.

    ``G=None`` stands for the identity conjugacy.
    """
    X = np.atleast_2d(np.asarray(grid, dtype=float))
    ref = np.asarray(L(X))
    pre = X if G is None else G.inverse(X)
    worst = 0.0
    dropped = 0
    evaluated = 0
    for gamma in gens:
        moved = gamma(pre)
        img = moved if G is None else G(moved)
        ok = np.all(np.isfinite(img), axis=1)
        dropped += int(np.count_nonzero(~ok))
        if ok.any():
            diff = np.linalg.norm(np.asarray(L(img[ok])) - ref[ok], axis=1)
            worst = max(worst, float(diff.max()))
            evaluated += int(np.count_nonzero(ok))
    return TransferCheck(worst, dropped, evaluated)


def power_linearizer(m: int = 3, depth: int = 12, factor: float = 1.0) -> LinearizerApprox:
    """``L_k`` for the power map at (0, 0, 1) with ``rho_k = factor * (m^2)^(-k)``."""

    params = PowerMapParams(m)
    return LinearizerApprox(power_handle(params), (0.0, 0.0, 1.0),
                            RescaleSequence.geometric(params.factor, factor), depth)


def koenigs_linearizer(coeffs, z0, depth: int = 30, factor: float = 1.0) -> LinearizerApprox:
    """``L_k`` for a real-multiplier polynomial with ``rho_k = factor * |p'(z0)|^(-k)``."""
    c = _coefficients(coeffs)
    z0c = complex(*np.asarray(z0, dtype=float))
    lam = abs(npoly.polyval(z0c, npoly.polyder(c)))
    return LinearizerApprox(polynomial_handle(c), tuple(np.asarray(z0, dtype=float)),
                            RescaleSequence.geometric(lam, factor), depth)
