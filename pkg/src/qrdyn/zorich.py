"""The three-dimensional Zorich map.

The square ``[-pi/2, pi/2]^2`` is sent onto the closed upper unit hemisphere
by ``h(u, v) = (u sin M / r, v sin M / r, cos M)`` with ``M = max(|u|, |v|)``
and ``r = sqrt(u^2 + v^2)``.  On the central beam ``Z(u, v, w) = e^w h(u, v)``;
elsewhere ``Z`` is continued by reflecting in beam walls in the domain and
in the plane ``{c = 0}`` in the image.

All point functions are vectorized over leading axes; points are arrays
whose last axis has length 3.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BranchError, DomainError, TruncationError
from .numerics import MapHandle, dilatation_field

PI = math.pi
HALF_PI = 0.5 * math.pi
MAX_EXPONENT = 700.0
POLE = np.array([0.0, 0.0, 1.0])

_SQUARE_SLACK = 1e-12
_UNIT_TOL = 1e-9


class BeamAddress(NamedTuple):
    """Index of the square ``[i pi - pi/2, i pi + pi/2] x [j pi - pi/2, j pi + pi/2]``."""

    i: int
    j: int

    @property
    def parity(self) -> int:
        return (self.i + self.j) % 2


CENTRAL = BeamAddress(0, 0)


def _points(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"expected points with 3 coordinates, got shape {arr.shape}")
    return arr


def hemisphere_map(u, v) -> np.ndarray:
    """Send the square of side pi centred at 0 onto the upper unit hemisphere."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(u) > HALF_PI + _SQUARE_SLACK) or np.any(np.abs(v) > HALF_PI + _SQUARE_SLACK):
        raise DomainError("hemisphere_map is defined on [-pi/2, pi/2]^2 only")
    return _h(u, v)


def _h(u, v) -> np.ndarray:
    M = np.maximum(np.abs(u), np.abs(v))
    r = np.hypot(u, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(r > 0.0, np.sin(M) / np.where(r > 0.0, r, 1.0), 0.0)
    return np.stack([u * ratio, v * ratio, np.cos(M)], axis=-1)


def hemisphere_inverse(p) -> np.ndarray:
    """Inverse of :func:`hemisphere_map`; returns (..., 2)."""
    p = _points(p)
    norm = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norm - 1.0) > _UNIT_TOL):
        raise DomainError("hemisphere_inverse needs points on the unit sphere")
    if np.any(p[..., 2] < -_UNIT_TOL):
        raise DomainError("hemisphere_inverse needs points with c >= 0")
    return _h_inverse(p[..., 0], p[..., 1], np.maximum(p[..., 2], 0.0))


def _h_inverse(a, b, c) -> np.ndarray:
    # atan2 keeps full relative accuracy for small angles where arccos(c) would not
    M = np.arctan2(np.hypot(a, b), c)
    mx = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(mx > 0.0, M / np.where(mx > 0.0, mx, 1.0), 0.0)
    return np.stack([a * scale, b * scale], axis=-1)


@dataclass(frozen=True)
class FoldResult:
    """A point folded into the central beam.

    ``local`` lies in ``[-pi/2, pi/2]^2 x R``; ``i``, ``j`` give the beam the
    input came from and ``parity`` the number of wall reflections mod 2.
    """

    local: np.ndarray
    i: np.ndarray
    j: np.ndarray
    parity: np.ndarray

    @property
    def address(self) -> BeamAddress | np.ndarray:
        if np.ndim(self.i) == 0:
            return BeamAddress(int(self.i), int(self.j))
        return np.stack([self.i, self.j], axis=-1)

    def unfold(self) -> np.ndarray:
        return unfold_from_central(self.local, self.i, self.j)


def _beam_index(t: np.ndarray) -> np.ndarray:
    # nearest integer, ties (exact wall points) to the lower index
    return np.ceil(t / PI - 0.5).astype(np.int64)


def fold_to_central(x) -> FoldResult:
    """Fold ``x`` into the central beam by repeated wall reflections."""
    x = _points(x)
    i = _beam_index(x[..., 0])
    j = _beam_index(x[..., 1])
    su = np.where(i % 2 == 0, 1.0, -1.0)
    sv = np.where(j % 2 == 0, 1.0, -1.0)
    local = np.stack([su * (x[..., 0] - i * PI), sv * (x[..., 1] - j * PI), x[..., 2]], axis=-1)
    return FoldResult(local, i, j, (i + j) % 2)


def unfold_from_central(local, i, j) -> np.ndarray:
    local = _points(local)
    i = np.asarray(i)
    j = np.asarray(j)
    su = np.where(i % 2 == 0, 1.0, -1.0)
    sv = np.where(j % 2 == 0, 1.0, -1.0)
    return np.stack([i * PI + su * local[..., 0], j * PI + sv * local[..., 1], local[..., 2]
                     * np.ones_like(su)], axis=-1)


def _check_exponent(w) -> None:
    if np.any(np.abs(w) > MAX_EXPONENT):
        raise TruncationError("|w| > 700: Zorich value leaves floating range")


def zorich_eval(x) -> np.ndarray:
    """Evaluate the Zorich map; ``|Z(u, v, w)| = e^w``."""
    folded = fold_to_central(x)
    w = folded.local[..., 2]
    _check_exponent(w)
    out = np.exp(w)[..., None] * _h(folded.local[..., 0], folded.local[..., 1])
    out[..., 2] *= np.where(folded.parity == 1, -1.0, 1.0)
    return out


def zorich_eval_displaced(x) -> np.ndarray:
    """``Z(x) - (0, 0, 1)`` with full relative accuracy for small ``x``."""
    folded = fold_to_central(x)
    u, v, w = folded.local[..., 0], folded.local[..., 1], folded.local[..., 2]
    _check_exponent(w)
    hv = _h(u, v)
    ew = np.exp(w)
    M = np.maximum(np.abs(u), np.abs(v))
    # e^w cos M - 1 = expm1(w) cos M - 2 sin^2(M/2)
    c_even = np.expm1(w) * np.cos(M) - 2.0 * np.sin(0.5 * M) ** 2
    c_odd = -ew * hv[..., 2] - 1.0
    return np.stack([ew * hv[..., 0], ew * hv[..., 1],
                     np.where(folded.parity == 1, c_odd, c_even)], axis=-1)


def _invert(a, b, c, w, i, j) -> np.ndarray:
    i = np.broadcast_to(np.asarray(i, dtype=np.int64), np.shape(a))
    j = np.broadcast_to(np.asarray(j, dtype=np.int64), np.shape(a))
    odd = (i + j) % 2 == 1
    if np.any(odd & (c > 0.0)):
        raise BranchError("upper half-space images live over even beams")
    if np.any(~odd & (c < 0.0)):
        raise BranchError("lower half-space images live over odd beams")
    uv = _h_inverse(a, b, np.abs(c))
    local = np.stack([uv[..., 0], uv[..., 1], w], axis=-1)
    return unfold_from_central(local, i, j)


def _branch_arrays(branch, shape):
    if branch is None:
        return None
    arr = np.asarray(branch, dtype=np.int64)
    if arr.shape == (2,):
        return arr[0], arr[1]
    arr = np.broadcast_to(arr, shape + (2,))
    return arr[..., 0], arr[..., 1]


def canonical_branch(c) -> tuple[np.ndarray, np.ndarray]:
    """(0, 0) over the closed upper half-space, (1, 0) over the lower."""
    c = np.asarray(c)
    return np.where(c < 0.0, 1, 0), np.zeros(c.shape, dtype=np.int64)


def zorich_invert(y, branch=CENTRAL) -> np.ndarray:
    """Preimage of ``y`` under ``Z`` inside the beam ``branch``.

    ``branch=None`` selects the canonical beam per point.
    """
    y = _points(y)
    r = np.linalg.norm(y, axis=-1)
    if np.any(r == 0.0):
        raise DomainError("the origin is omitted by the Zorich map")
    a, b, c = y[..., 0], y[..., 1], y[..., 2]
    ij = _branch_arrays(branch, a.shape) or canonical_branch(c)
    return _invert(a, b, c, np.log(r), *ij)


def zorich_invert_displaced(delta, branch=CENTRAL) -> np.ndarray:
    """Preimage of ``(0, 0, 1) + delta``, accurate for tiny ``delta``."""
    d = _points(delta)
    a, b = d[..., 0], d[..., 1]
    c = 1.0 + d[..., 2]
    q = 2.0 * d[..., 2] + np.sum(d * d, axis=-1)
    if np.any(q <= -1.0):
        raise DomainError("the origin is omitted by the Zorich map")
    w = 0.5 * np.log1p(q)
    ij = _branch_arrays(branch, a.shape) or canonical_branch(c)
    return _invert(a, b, c, w, *ij)


def fiber(y, radius: int = 2) -> tuple[list[BeamAddress], np.ndarray]:
    """All preimages of a single point ``y`` over beams with ``|i|, |j| <= radius``."""
    y = _points(y).reshape(3)
    c = y[2]
    addresses = [BeamAddress(i, j)
                 for i, j in itertools.product(range(-radius, radius + 1), repeat=2)
                 if c == 0.0 or (i + j) % 2 == (1 if c < 0 else 0)]
    pts = np.array([zorich_invert(y, addr) for addr in addresses])
    return addresses, pts


@dataclass(frozen=True)
class IsometryElement:
    """``(u, v, w) -> (s_u u + t_u, s_v v + t_v, w)`` with ``s`` in {+1, -1}."""

    signs: tuple[float, float] = (1.0, 1.0)
    translation: tuple[float, float] = (0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        if any(s not in (1.0, -1.0) for s in self.signs):
            raise ValueError("isometry signs must be +1 or -1")

    @classmethod
    def identity(cls) -> "IsometryElement":
        return cls(label="identity")

    @classmethod
    def translate(cls, tu: float, tv: float) -> "IsometryElement":
        return cls((1.0, 1.0), (tu, tv), f"translate({tu:g},{tv:g})")

    @classmethod
    def point_rotation(cls, cu: float, cv: float) -> "IsometryElement":
        """Rotation by pi about the vertical line through ``(cu, cv)``."""
        return cls((-1.0, -1.0), (2.0 * cu, 2.0 * cv), f"rotate({cu:g},{cv:g})")

    @classmethod
    def between_beams(cls, src: BeamAddress, dst: BeamAddress) -> "IsometryElement":
        """The fold-compatible isometry carrying beam ``src`` onto beam ``dst``."""
        su = 1.0 if (src.i + dst.i) % 2 == 0 else -1.0
        sv = 1.0 if (src.j + dst.j) % 2 == 0 else -1.0
        return cls((su, sv), (dst.i * PI - su * src.i * PI, dst.j * PI - sv * src.j * PI),
                   f"beam{tuple(src)}->{tuple(dst)}")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([self.signs[0], self.signs[1], 1.0])

    def __call__(self, x) -> np.ndarray:
        x = _points(x)
        return np.stack([self.signs[0] * x[..., 0] + self.translation[0],
                         self.signs[1] * x[..., 1] + self.translation[1],
                         x[..., 2]], axis=-1)

    def inverse(self) -> "IsometryElement":
        su, sv = self.signs
        return IsometryElement(self.signs, (-su * self.translation[0], -sv * self.translation[1]),
                               f"inv({self.label})")

    def compose(self, other: "IsometryElement") -> "IsometryElement":
        """``self o other``."""
        su, sv = self.signs
        return IsometryElement(
            (su * other.signs[0], sv * other.signs[1]),
            (su * other.translation[0] + self.translation[0],
             sv * other.translation[1] + self.translation[1]),
            f"{self.label}*{other.label}")


def pi_translations() -> list[IsometryElement]:
    """Translations by pi along each axis; they move Z-values to their mirror image."""
    return [IsometryElement.translate(PI, 0.0), IsometryElement.translate(0.0, PI)]


def invariance_generators() -> list[IsometryElement]:
    """Generators of the group that leaves Z invariant and acts transitively on fibers."""
    return [IsometryElement.translate(2 * PI, 0.0),
            IsometryElement.translate(0.0, 2 * PI),
            IsometryElement.point_rotation(HALF_PI, HALF_PI)]


def invariance_residual(g: IsometryElement, samples) -> float:
    """``max |Z(g(x)) - Z(x)|`` over the samples."""
    X = np.atleast_2d(_points(samples))
    if X.shape[0] == 0:
        raise ValueError("need at least one sample")
    return float(np.max(np.linalg.norm(zorich_eval(g(X)) - zorich_eval(X), axis=-1)))


def generator_report(samples, generators=None) -> dict[str, float]:
    """Invariance residual of each generator, the pi-translations included."""
    gens = list(generators) if generators is not None else pi_translations() + invariance_generators()
    return {g.label: invariance_residual(g, samples) for g in gens}


def zorich_handle() -> MapHandle:
    def increment(base, delta):
        base = np.asarray(base, dtype=float)
        if np.array_equal(base, np.zeros(3)):
            return zorich_eval_displaced(delta)
        return zorich_eval(base + delta) - zorich_eval(base)

    return MapHandle(3, zorich_eval, "Z", increment=increment)


def zorich_inverse_handle(branch=CENTRAL) -> MapHandle:
    """A branch of ``Z^{-1}`` as a map handle, accurate near (0, 0, 1)."""
    def evaluate(y):
        return zorich_invert(y, branch)

    def increment(base, delta):
        base = np.asarray(base, dtype=float)
        if np.array_equal(base, POLE):
            return zorich_invert_displaced(delta, branch) - zorich_invert(POLE, branch)
        return zorich_invert(base + delta, branch) - zorich_invert(base, branch)

    return MapHandle(3, evaluate, f"Zinv{tuple(branch)}", increment=increment)


def beam_dilatation(points, beams, step: float = 1e-7) -> dict[BeamAddress, np.ndarray]:
    """Finite-difference dilatation of Z at ``points`` carried into each beam.

    Points given in the central beam are moved by the fold-compatible
    isometry onto every requested beam, so entries line up point by point.
    """
    X = np.atleast_2d(_points(points))
    out = {}
    for addr in beams:
        addr = BeamAddress(*addr)
        moved = IsometryElement.between_beams(CENTRAL, addr)(X)
        out[addr] = dilatation_field(zorich_eval, moved, step)
    return out
