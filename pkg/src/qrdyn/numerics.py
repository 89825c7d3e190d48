"""Map handles, finite-difference Jacobians and batched Newton inversion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linmap import batch_max_dilatation

Evaluator = Callable[[np.ndarray], np.ndarray]
Increment = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MapHandle:
    """A self-map of R^n.

    ``evaluator`` must accept arrays of shape (..., n).  ``increment``, when
    given, returns ``f(base + delta) - f(base)`` without forming
    ``base + delta`` first; iterations near a fixed point use it to keep
    full relative precision in tiny displacements.
    """

    dimension: int
    evaluator: Evaluator
    label: str = ""
    increment: Increment | None = None

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))

    def increment_at(self, base, delta) -> np.ndarray:
        base = np.asarray(base, dtype=float)
        delta = np.asarray(delta, dtype=float)
        if self.increment is not None:
            return self.increment(base, delta)
        return self.evaluator(base + delta) - self.evaluator(base)


def linear_handle(A, label: str = "linear") -> MapHandle:
    A = np.atleast_2d(np.asarray(A, dtype=float))

    def evaluate(x):
        return np.asarray(x, dtype=float) @ A.T

    return MapHandle(A.shape[0], evaluate, label, increment=lambda base, d: d @ A.T)


def as_linear(psi, dim: int) -> np.ndarray:
    """Scalar or matrix to an explicit ``dim x dim`` matrix."""
    arr = np.asarray(psi, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    return arr


def fd_jacobian(f: Evaluator, X, step: float | np.ndarray = 1e-6) -> np.ndarray:
    """Central-difference Jacobians of ``f`` at every row of ``X``.

    Returns shape (N, n_out, n_in).  ``step`` may be a scalar or one step
    per point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    h = np.broadcast_to(np.asarray(step, dtype=float), (N,))
    offsets = np.eye(n)[None, :, :] * h[:, None, None]
    stacked = np.concatenate([X[:, None, :] + offsets, X[:, None, :] - offsets], axis=1)
    values = np.asarray(f(stacked.reshape(-1, n)), dtype=float).reshape(N, 2 * n, -1)
    diff = (values[:, :n, :] - values[:, n:, :]) / (2.0 * h[:, None, None])
    return np.swapaxes(diff, 1, 2)


def dilatation_field(f: Evaluator, X, step: float | np.ndarray = 1e-6) -> np.ndarray:
    """Pointwise maximal dilatation K of ``f`` from finite-difference Jacobians."""
    return batch_max_dilatation(fd_jacobian(f, X, step))


@dataclass
class NewtonResult:
    solution: np.ndarray
    converged: np.ndarray
    residual: np.ndarray


def newton_solve(f: Evaluator, targets, guesses, *, tol: float = 1e-10,
                 max_iter: int = 50, step: float = 1e-6, restarts: int = 8,
                 restart_scale: float = 0.1, seed: int = 0) -> NewtonResult:
    """Solve ``f(z) = target`` row by row with damped Newton steps.

    Jacobians are central differences with step ``step * max(1, |z|)``.
    A row converges when ``|f(z) - target| <= tol * (1 + |target|)``.
    Rows that fail are retried from ``restarts`` perturbed seeds drawn
    from a generator seeded with ``seed``.
    """
    Y = np.atleast_2d(np.asarray(targets, dtype=float))
    Z0 = np.atleast_2d(np.asarray(guesses, dtype=float)).copy()
    result = _damped_newton(f, Y, Z0, tol, max_iter, step)
    if restarts and not result.converged.all():
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            bad = np.flatnonzero(~result.converged)
            if bad.size == 0:
                break
            scale = restart_scale * np.maximum(1.0, np.linalg.norm(Z0[bad], axis=1))
            kick = rng.standard_normal(Z0[bad].shape) * scale[:, None]
            retry = _damped_newton(f, Y[bad], Z0[bad] + kick, tol, max_iter, step)
            better = retry.converged | (retry.residual < result.residual[bad])
            idx = bad[better]
            result.solution[idx] = retry.solution[better]
            result.converged[idx] = retry.converged[better]
            result.residual[idx] = retry.residual[better]
    return result


def _safe_eval(f: Evaluator, Z: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        try:
            return np.asarray(f(Z), dtype=float)
        except (ArithmeticError, ValueError):
            # evaluator refused part of the batch: fall back to rows one at a time
            out = np.full(Z.shape[:-1] + (Z.shape[-1],), np.nan)
            for idx in np.ndindex(Z.shape[:-1]):
                try:
                    out[idx] = f(Z[idx][None, :])[0]
                except (ArithmeticError, ValueError):
                    pass
            return out


def _damped_newton(f, Y, Z, tol, max_iter, step) -> NewtonResult:
    N, n = Y.shape
    Z = Z.copy()
    thresh = tol * (1.0 + np.linalg.norm(Y, axis=1))
    F = _safe_eval(f, Z) - Y
    res = np.linalg.norm(F, axis=1)
    res = np.where(np.isfinite(res), res, np.inf)
    done = res <= thresh
    polished = np.zeros(N, dtype=bool)
    for _ in range(max_iter):
        # one extra step after reaching tolerance pushes the solution to rounding level
        active = np.flatnonzero(~polished)
        if active.size == 0:
            break
        za = Z[active]
        h = step * np.maximum(1.0, np.linalg.norm(za, axis=1))
        J = fd_jacobian(lambda q: _safe_eval(f, q), za, h)
        ok = np.all(np.isfinite(J), axis=(1, 2)) & np.isfinite(res[active])
        delta = np.zeros_like(za)
        if ok.any():
            try:
                delta[ok] = np.linalg.solve(J[ok], -F[active][ok][..., None])[..., 0]
            except np.linalg.LinAlgError:
                for i in np.flatnonzero(ok):
                    delta[i] = np.linalg.lstsq(J[i], -F[active][i], rcond=None)[0]
        t = np.ones(active.size)
        accepted = np.zeros(active.size, dtype=bool)
        for _halve in range(30):
            trial_idx = np.flatnonzero(~accepted & ok)
            if trial_idx.size == 0:
                break
            trial = za[trial_idx] + t[trial_idx, None] * delta[trial_idx]
            Ft = _safe_eval(f, trial) - Y[active[trial_idx]]
            rt = np.linalg.norm(Ft, axis=1)
            rt = np.where(np.isfinite(rt), rt, np.inf)
            good = rt < res[active[trial_idx]] + 1e-300
            was_done = done[active[trial_idx]]
            # converged rows accept any step that stays within tolerance
            good |= was_done & (rt <= thresh[active[trial_idx]])
            rows = active[trial_idx[good]]
            Z[rows] = trial[good]
            F[rows] = Ft[good]
            res[rows] = rt[good]
            accepted[trial_idx[good]] = True
            t[trial_idx[~good]] *= 0.5
        newly_done = res[active] <= thresh[active]
        polished[active[done[active]]] = True
        polished[active[~accepted]] = True
        done[active] = newly_done
    return NewtonResult(Z, res <= thresh, res)
