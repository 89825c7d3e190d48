"""Dilatation of linear maps and the uniform-quasiconformality test.

A linear map ``A`` of R^n has outer dilatation ``sigma_max^n / |det A|`` and
inner dilatation ``|det A| / sigma_min^n``.  A linear map is uniformly
quasiconformal exactly when its eigenvalues share one modulus and it is
diagonalizable over C; both conditions are tested here independently, with
the growth of ``K(A^m)`` as an empirical cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AnalysisError, DegenerateMapError

DET_FLOOR = 1e-300
OVERFLOW_ENTRY = 1e300
DEFAULT_TOL = 1e-8
_LOG_DET_FLOOR = math.log(DET_FLOOR)


def as_real_matrix(A) -> np.ndarray:
    """Validate ``A`` as a finite real square matrix of dimension >= 2."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] < 2:
        raise ValueError("matrix dimension must be at least 2")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def parse_matrix(text: str) -> np.ndarray:
    """Read a matrix from JSON (array of rows) or whitespace-separated text."""
    stripped = text.strip()
    if stripped.startswith("["):
        rows = json.loads(stripped)
    else:
        rows = [[float(tok) for tok in line.replace(",", " ").split()]
                for line in stripped.splitlines() if line.strip()]
    return as_real_matrix(rows)


def inf_norm(A) -> float:
    """Maximum absolute row sum.  Diagnostic only; dilatation uses the 2-norm."""
    return float(np.max(np.sum(np.abs(np.asarray(A, dtype=float)), axis=1)))


@dataclass(frozen=True)
class DilatationReport:
    outer: float
    inner: float
    max_dilatation: float

    def as_dict(self) -> dict:
        return {"outer": self.outer, "inner": self.inner, "max": self.max_dilatation}


def _report_from_singular_values(sigma: np.ndarray) -> DilatationReport:
    n = sigma.shape[-1]
    log_sigma = np.log(sigma)
    log_det = float(np.sum(log_sigma))
    # clamp: sigma_max^n >= prod(sigma) >= sigma_min^n holds exactly, rounding can dip below 1
    outer = max(1.0, math.exp(n * float(log_sigma[0]) - log_det))
    inner = max(1.0, math.exp(log_det - n * float(log_sigma[-1])))
    return DilatationReport(outer, inner, max(outer, inner))


def singular_dilatation(A) -> DilatationReport:
    """Outer, inner and maximal dilatation of the linear map ``A``.

    >>> singular_dilatation([[1.0, 0.0], [0.0, 2.0]]).outer
    2.0
    """
    M = as_real_matrix(A)
    sigma = np.linalg.svd(M, compute_uv=False)
    if sigma[-1] == 0.0 or float(np.sum(np.log(sigma))) <= _LOG_DET_FLOOR:
        raise DegenerateMapError("matrix is singular (|det| <= 1e-300)")
    return _report_from_singular_values(sigma)


def batch_max_dilatation(J: np.ndarray) -> np.ndarray:
    """Maximal dilatation ``K`` for a stack of Jacobians of shape (..., n, n).

    Degenerate Jacobians map to ``inf``.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sigma = np.linalg.svd(J, compute_uv=False)
        log_sigma = np.log(sigma)
        log_det = np.sum(log_sigma, axis=-1)
        outer = np.exp(n * log_sigma[..., 0] - log_det)
        inner = np.exp(log_det - n * log_sigma[..., -1])
        K = np.maximum(np.maximum(outer, inner), 1.0)
    return np.where(np.isfinite(K), K, np.inf)


@dataclass(frozen=True)
class PowerProfile:
    """Dilatation of ``A^m`` for ``m = 1 .. len(reports)``.

    ``truncated_at`` is the first power that could not be formed (entries past
    1e300 or determinant below 1e-300); ``None`` when the profile is complete.
    """

    reports: list[DilatationReport]
    requested: int
    truncated_at: int | None = None

    @property
    def values(self) -> list[float]:
        return [r.max_dilatation for r in self.reports]

    def __len__(self) -> int:
        return len(self.reports)

    def __getitem__(self, idx):
        return self.reports[idx]


def power_dilatation_profile(A, m_max: int) -> PowerProfile:
    """K(A^m) for m = 1..m_max by repeated multiplication."""
    M = as_real_matrix(A)
    if m_max < 1:
        raise ValueError("m_max must be positive")
    singular_dilatation(M)
    reports: list[DilatationReport] = []
    power = np.eye(M.shape[0])
    for m in range(1, m_max + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            power = power @ M
        if not np.all(np.isfinite(power)) or np.max(np.abs(power)) > OVERFLOW_ENTRY:
            return PowerProfile(reports, m_max, truncated_at=m)
        sigma = np.linalg.svd(power, compute_uv=False)
        if sigma[-1] == 0.0 or float(np.sum(np.log(sigma))) <= _LOG_DET_FLOOR:
            return PowerProfile(reports, m_max, truncated_at=m)
        reports.append(_report_from_singular_values(sigma))
    return PowerProfile(reports, m_max)


class Verdict(str, Enum):
    UNIFORMLY_QC = "uniformly_qc"
    NOT_UQC_MODULI = "not_uqc_moduli"
    NOT_UQC_JORDAN = "not_uqc_jordan"


@dataclass
class UqcCertificate:
    eigenvalues: list[complex]
    eigen_moduli: list[float]
    moduli_spread: float
    diagonalizable: bool
    condition_number: float
    defective_clusters: list[dict]
    growth_profile: list[float]
    profile_truncated_at: int | None
    profile_bound: float
    profile_consistent: bool
    verdict: Verdict
    tol: float = DEFAULT_TOL
    notes: list[str] = field(default_factory=list)

    @property
    def is_uniformly_qc(self) -> bool:
        return self.verdict is Verdict.UNIFORMLY_QC

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "eigen_moduli": self.eigen_moduli,
            "moduli_spread": self.moduli_spread,
            "diagonalizable": self.diagonalizable,
            "condition_number": self.condition_number,
            "defective_clusters": self.defective_clusters,
            "growth_profile": self.growth_profile,
            "profile_truncated_at": self.profile_truncated_at,
            "profile_bound": self.profile_bound,
            "profile_consistent": self.profile_consistent,
            "tol": self.tol,
            "notes": self.notes,
        }


def _cluster_eigenvalues(lam: np.ndarray, rtol: float) -> list[list[int]]:
    scale = float(np.max(np.abs(lam)))
    parent = list(range(len(lam)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(lam)):
        for j in range(i + 1, len(lam)):
            if abs(lam[i] - lam[j]) <= rtol * scale:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(lam)):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _profile_only_verdict(values: list[float]) -> Verdict:
    if len(values) < 4 or max(values) <= 10.0 * values[0]:
        return Verdict.UNIFORMLY_QC
    logs = np.log(values)
    q = len(values) // 4
    late = logs[-1] - logs[2 * q - 1]
    early = logs[2 * q - 1] - logs[q - 1]
    # exponential growth doubles the log increment over a doubled window; polynomial does not
    if early > 0 and late / early > 1.5:
        return Verdict.NOT_UQC_MODULI
    return Verdict.NOT_UQC_JORDAN


def uqc_verdict(A, tol: float = DEFAULT_TOL, m_max: int = 50,
                cluster_rtol: float = 1e-4, rank_rtol: float = 1e-7) -> UqcCertificate:
    """Decide whether the linear map ``A`` is uniformly quasiconformal.

    Eigenvalue moduli come from a complex eigensolver and are compared
    relatively (``max/min - 1 <= tol``).  Diagonalizability is settled
    without a Jordan decomposition: nearly equal eigenvalues are clustered
    and each cluster's geometric multiplicity is read off the numerical
    null space of ``A - mean*I``; the assembled eigenbasis must then have
    condition number at most ``1/tol``.

    The growth profile ``K(A^m)`` is an independent check.  For a
    uniformly quasiconformal verdict it must respect
    ``K(A^m) <= cond(V)^(2(n-1)) (1+spread)^(m(n-1))``.
    """
    M = as_real_matrix(A)
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    n = M.shape[0]
    profile = power_dilatation_profile(M, m_max)
    values = profile.values

    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(f"eigensolver failed: {exc}",
                            fallback=_profile_only_verdict(values)) from exc

    moduli = np.abs(lam)
    spread = float(moduli.max() / moduli.min() - 1.0)

    norm_A = float(np.linalg.norm(M, 2))
    Mc = M.astype(complex)
    defective = []
    basis = []
    for group in _cluster_eigenvalues(lam, cluster_rtol):
        mean = complex(np.mean(lam[group]))
        _, sigma, vh = np.linalg.svd(Mc - mean * np.eye(n))
        null = sigma <= rank_rtol * norm_A
        geometric = int(np.count_nonzero(null))
        if geometric == 0:
            # a lone mean that is not an eigenvalue: the cluster holds distinct values
            vecs = np.linalg.eig(M)[1][:, group]
            basis.append(vecs)
            continue
        if geometric < len(group):
            defective.append({"eigenvalue": [mean.real, mean.imag],
                              "algebraic": len(group), "geometric": geometric})
            continue
        basis.append(vh[null].conj().T[:, :len(group)])

    if defective:
        cond = math.inf
    else:
        V = np.hstack(basis)
        cond = float(np.linalg.cond(V))
    diagonalizable = not defective and cond <= 1.0 / tol

    if not diagonalizable:
        verdict = Verdict.NOT_UQC_JORDAN
    elif spread > tol:
        verdict = Verdict.NOT_UQC_MODULI
    else:
        verdict = Verdict.UNIFORMLY_QC

    notes = []
    if math.isfinite(cond):
        log_bound = 2 * (n - 1) * math.log(cond)
        consistent_uqc = all(
            math.log(v) <= log_bound + m * (n - 1) * math.log1p(spread) + 1e-6
            for m, v in enumerate(values, start=1))
        bound = math.exp(min(log_bound, 700.0))
    else:
        consistent_uqc = False
        bound = math.inf
    if verdict is Verdict.UNIFORMLY_QC:
        consistent = consistent_uqc
        if not consistent:
            notes.append("growth profile exceeds the eigenbasis bound")
    else:
        consistent = len(values) >= 2 and values[-1] > values[0]
        if not consistent:
            notes.append("growth profile did not increase over the sampled powers")
    if profile.truncated_at is not None:
        notes.append(f"profile truncated at m={profile.truncated_at}")

    return UqcCertificate(
        eigenvalues=[complex(z) for z in lam],
        eigen_moduli=[float(x) for x in moduli],
        moduli_spread=spread,
        diagonalizable=diagonalizable,
        condition_number=cond,
        defective_clusters=defective,
        growth_profile=values,
        profile_truncated_at=profile.truncated_at,
        profile_bound=bound,
        profile_consistent=consistent,
        verdict=verdict,
        tol=tol,
        notes=notes,
    )


def is_loxodromic_repelling(A, tol: float = DEFAULT_TOL) -> bool:
    """True when ``A`` is uniformly quasiconformal and every orbit ``A^m x``, x != 0, escapes."""
    cert = uqc_verdict(A, tol)
    return cert.is_uniformly_qc and min(cert.eigen_moduli) > 1.0 + tol
