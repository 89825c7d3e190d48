"""Mean radius, rescaled maps and the homogeneous blow-up model of Z^{-1}.

The radial stretch ``s(x) = (|x|_2 / |x|_inf) x`` sends circles onto
max-norm squares.  The model map is ``g(u, v, w) = C (s(u, v), t w)``; with
the default vertical factor ``t = 1/e`` the volume-normalizing constant is
``C = (pi e / 4)^(1/3)``, and in general ``C^3 * 16 t / 3 = 4 pi / 3``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linearizer import RescaleSequence
from .numerics import MapHandle, fd_jacobian
from .powermap import PowerMapParams, power_eval
from .zorich import zorich_eval, zorich_invert_displaced

OMEGA_3 = 4.0 * math.pi / 3.0
MODEL_CONSTANT = (math.pi * math.e / 4.0) ** (1.0 / 3.0)
CHUNK = 1 << 16


def unit_ball_volume(n: int) -> float:
    if n == 3:
        return OMEGA_3
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def radial_stretch(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    l2 = np.hypot(x[..., 0], x[..., 1])
    linf = np.maximum(np.abs(x[..., 0]), np.abs(x[..., 1]))
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(linf > 0.0, l2 / np.where(linf > 0.0, linf, 1.0), 0.0)
    return x * factor[..., None]


def inverse_radial_stretch(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    l2 = np.hypot(y[..., 0], y[..., 1])
    linf = np.maximum(np.abs(y[..., 0]), np.abs(y[..., 1]))
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(l2 > 0.0, linf / np.where(l2 > 0.0, l2, 1.0), 0.0)
    return y * factor[..., None]


def model_constant(vertical_scale: float | None = None) -> float:
    """The constant C making ``|g(B(0,1))| = |B(0,1)|``."""
    if vertical_scale is None:
        return MODEL_CONSTANT
    return (math.pi / (4.0 * vertical_scale)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class HomogeneousModel:
    """``g(u, v, w) = C (s(u, v), vertical_scale * w)``; homogeneous of degree 1."""

    vertical_scale: float = 1.0 / math.e
    C: float | None = None

    def __post_init__(self):
        if self.C is None:
            default = self.vertical_scale == 1.0 / math.e
            object.__setattr__(self, "C", MODEL_CONSTANT if default else model_constant(self.vertical_scale))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = radial_stretch(x[..., :2])
        return self.C * np.concatenate([s, self.vertical_scale * x[..., 2:3]], axis=-1)

    def inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float) / self.C
        s = inverse_radial_stretch(y[..., :2])
        return np.concatenate([s, y[..., 2:3] / self.vertical_scale], axis=-1)

    def handle(self) -> MapHandle:
        return MapHandle(3, self, f"g(t={self.vertical_scale:.6g})")


DEFAULT_MODEL = HomogeneousModel()
# blow-up of the central branch of Z^{-1} at (0, 0, 1): no vertical compression
BLOWUP_MODEL = HomogeneousModel(vertical_scale=1.0)


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    stderr: float
    n_samples: int


def _chunk_rngs(n_samples: int, seed: int):
    n_chunks = max(1, -(-n_samples // CHUNK))
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK, n_samples - c * CHUNK) for c in range(n_chunks)]
    return [(np.random.default_rng(s), size) for s, size in zip(streams, sizes)]


def _map_chunks(fn, n_samples: int, seed: int, workers: int):
    jobs = _chunk_rngs(n_samples, seed)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(*job) for job in jobs]


def uniform_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (rng.random(n) ** (1.0 / dim))[:, None]


def model_volume_mc(model: HomogeneousModel = DEFAULT_MODEL, n_samples: int = 1_000_000,
                    seed: int = 0, workers: int = 1) -> VolumeEstimate:
    """Hit-or-miss estimate of ``|g(B(0,1))|``.

    Uniform points in the bounding box of the image are pulled back by the
    explicit inverse of ``g`` and tested for membership in the unit ball.
    Chunks use independent substreams, so the result does not depend on
    ``workers``.
    """
    half = np.array([model.C, model.C, model.C * model.vertical_scale])
    box = float(np.prod(2.0 * half))

    def chunk(rng, size):
        y = (2.0 * rng.random((size, 3)) - 1.0) * half
        return int(np.count_nonzero(np.sum(model.inverse(y) ** 2, axis=1) <= 1.0))

    hits = sum(_map_chunks(chunk, n_samples, seed, workers))
    p = hits / n_samples
    return VolumeEstimate(box * p, box * math.sqrt(p * (1.0 - p) / n_samples), n_samples)


def homogeneity_defect(f, r: float, x, degree: float = 1.0) -> np.ndarray:
    """``|f(r x) - r^D f(x)|``."""
    if not r > 0:
        raise ValueError("r must be positive")
    x = np.asarray(x, dtype=float)
    return np.linalg.norm(np.asarray(f(r * x)) - r ** degree * np.asarray(f(x)), axis=-1)


@dataclass(frozen=True)
class MeanRadiusEstimate:
    value: float
    rho: float
    n_samples: int
    stderr: float
    dropped: int = 0

    def as_dict(self) -> dict:
        return {"value": self.value, "rho": self.rho, "n_samples": self.n_samples,
                "stderr": self.stderr, "dropped": self.dropped}


def mean_radius(f: MapHandle, x0, rho: float, n_samples: int = 100_000, seed: int = 0,
                workers: int = 1, rel_step: float = 1e-6) -> MeanRadiusEstimate:
    """``(|f(B(x0, rho))| / Omega_n)^(1/n)`` with the volume from ``E|J_f|``.

    ``f`` must be injective on the ball; that is not checked.  Jacobians
    are central differences of the displacement ``d -> f(x0 + d) - f(x0)``
    with step ``rel_step * rho``.  Non-finite Jacobians are dropped.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    step = rel_step * rho

    def chunk(rng, size):
        pts = rho * uniform_ball(rng, size, n)
        J = fd_jacobian(lambda d: f.increment_at(x0, d), pts, step)
        det = np.abs(np.linalg.det(J))
        good = np.isfinite(det)
        return det[good], int(np.count_nonzero(~good))

    parts = _map_chunks(chunk, n_samples, seed, workers)
    dets = np.concatenate([p[0] for p in parts])
    dropped = sum(p[1] for p in parts)
    ball = unit_ball_volume(n) * rho ** n
    volume = ball * float(np.mean(dets))
    vol_se = ball * float(np.std(dets, ddof=1)) / math.sqrt(len(dets))
    value = (volume / unit_ball_volume(n)) ** (1.0 / n)
    return MeanRadiusEstimate(value, rho, n_samples, value * vol_se / (n * volume), dropped)


def rescaled_map(f: MapHandle, x0, rho: float, x, n_samples: int = 100_000, seed: int = 0,
                 radius: MeanRadiusEstimate | None = None) -> np.ndarray:
    """``(f(x0 + rho x) - f(x0)) / r(x0, f, rho)``."""
    x0 = np.asarray(x0, dtype=float)
    if radius is None:
        radius = mean_radius(f, x0, rho, n_samples, seed)
    return f.increment_at(x0, rho * np.asarray(x, dtype=float)) / radius.value


def l1_family_check(r: float, params: PowerMapParams, grid,
                    model: HomogeneousModel = DEFAULT_MODEL) -> float:
    """``max |P(Z(g(r x))) - Z(g(r m^2 x))| / (1 + |Z(g(r m^2 x))|)`` over the grid."""
    if not r > 0:
        raise ValueError("r must be positive")
    X = np.atleast_2d(np.asarray(grid, dtype=float))
    rhs = zorich_eval(model(r * params.factor * X))
    lhs = power_eval(zorich_eval(model(r * X)), params)
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1) / (1.0 + np.linalg.norm(rhs, axis=-1))))


def sphere_grid(n: int = 256) -> np.ndarray:
    """Fibonacci lattice of ``n`` nearly uniform points on the unit sphere."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    rr = np.sqrt(1.0 - z * z)
    return np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=-1)


def _best_scalar_gap(F: np.ndarray, T: np.ndarray) -> tuple[float, float]:
    """``min over c > 0 of max |c F - T|`` by golden-section search on c."""
    from scipy.optimize import minimize_scalar

    def gap(c):
        return float(np.max(np.linalg.norm(c * F - T, axis=-1)))

    nf = np.linalg.norm(F, axis=-1)
    nt = np.linalg.norm(T, axis=-1)
    mask = nf > 0
    if not mask.any():
        return gap(1.0), 1.0
    ratios = nt[mask] / nf[mask]
    lo, hi = 0.5 * float(ratios.min()), 2.0 * float(ratios.max())
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.fun), float(res.x)


@dataclass(frozen=True)
class ShapeDefect:
    value: float
    per_depth: list[float]
    scalars: list[float]


def non_identity_shape_defect(rho_seq: RescaleSequence, grid=None,
                              params: PowerMapParams = PowerMapParams(), depth: int = 12,
                              target=None) -> ShapeDefect:
    """How far ``d^k Z^{-1}((0,0,1) + rho_k x)`` stays from ``target`` up to scaling.

    For each ``k <= depth`` the best positive scalar ``c`` is chosen and the
    gap ``max_x |c d^k Z^{-1}(x0 + rho_k x) - target(x)|`` recorded; the
    result is the minimum over ``k``.  ``target`` defaults to the identity;
    a positive value then means no rescaling of these maps approaches the
    identity on the grid.
    """
    X = sphere_grid() if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    T = X if target is None else np.asarray(target(X))
    gaps, scalars = [], []
    for k in range(1, depth + 1):
        F = params.factor ** k * zorich_invert_displaced(rho_seq.rho(k) * X, branch=None)
        g, c = _best_scalar_gap(F, T)
        gaps.append(g)
        scalars.append(c)
    return ShapeDefect(min(gaps), gaps, scalars)
