"""Twenty matrices with known uniform-quasiconformality structure."""

from __future__ import annotations

import numpy as np

from qrdyn.linmap import Verdict


def _rot2(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def _rot3(axis, t):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(t) * K + (1 - np.cos(t)) * K @ K


def _conj(A, seed):
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    while True:
        P = rng.standard_normal((n, n)) + 2.0 * np.eye(n)
        if np.linalg.cond(P) < 20:
            return np.linalg.inv(P) @ A @ P


def battery() -> list[tuple[str, np.ndarray, Verdict]]:
    U, M, J = Verdict.UNIFORMLY_QC, Verdict.NOT_UQC_MODULI, Verdict.NOT_UQC_JORDAN
    cases = [
        ("scalar 2, n=2", 2.0 * np.eye(2), U),
        ("scalar 3, n=3", 3.0 * np.eye(3), U),
        ("scalar 0.5, n=3", 0.5 * np.eye(3), U),
        ("2 rotation, n=2", 2.0 * _rot2(np.pi / 2), U),
        ("1.5 rotation, n=2", 1.5 * _rot2(0.7), U),
        ("2 rotation, n=3", 2.0 * _rot3([1, 2, 3], 1.1), U),
        ("diag(1,2)", np.diag([1.0, 2.0]), M),
        ("diag(1,1,4)", np.diag([1.0, 1.0, 4.0]), M),
        ("diag(2,3,2)", np.diag([2.0, 3.0, 2.0]), M),
        ("rotation + stretch", np.block([[2.0 * _rot2(0.4), np.zeros((2, 1))],
                                         [np.zeros((1, 2)), np.array([[3.0]])]]), M),
        ("jordan 2", np.array([[2.0, 1.0], [0.0, 2.0]]), J),
        ("jordan 3", np.array([[1.5, 1.0, 0.0], [0.0, 1.5, 1.0], [0.0, 0.0, 1.5]]), J),
        ("jordan 2 + 1", np.array([[2.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]), J),
        ("jordan unipotent", np.array([[1.0, 1.0], [0.0, 1.0]]), J),
        ("conj scalar", _conj(2.0 * np.eye(3), 1), U),
        ("conj rotation n=2", _conj(2.0 * _rot2(0.9), 2), U),
        ("conj rotation n=3", _conj(1.5 * _rot3([0, 1, 1], 2.0), 3), U),
        ("conj diag", _conj(np.diag([1.0, 2.0, 2.0]), 4), M),
        ("conj jordan 2", _conj(np.array([[2.0, 1.0], [0.0, 2.0]]), 5), J),
        ("conj jordan 3", _conj(np.array([[1.5, 1.0, 0.0], [0.0, 1.5, 1.0], [0.0, 0.0, 1.5]]), 6), J),
    ]
    return cases
