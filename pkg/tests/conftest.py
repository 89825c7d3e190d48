from __future__ import annotations

import numpy as np
import pytest


def cube_grid(lo: float, hi: float, n: int) -> np.ndarray:
    ax = np.linspace(lo, hi, n)
    return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)


def disk_grid(n_radii: int = 8, n_angles: int = 64) -> np.ndarray:
    th = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    r = np.linspace(0.0, 1.0, n_radii)
    return np.array([(a * np.cos(t), a * np.sin(t)) for a in r for t in th])


def near_unit_sphere(rng: np.random.Generator, n: int, spread: float = 0.01) -> np.ndarray:
    S = rng.standard_normal((n, 3))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    return S * np.exp(rng.uniform(-spread, spread, (n, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
