"""Acceptance criteria, one test per criterion.

Each check prints a single ``[PASS]``/``[FAIL]`` line with its measured
values.  Run directly (``python tests/test_acceptance.py``) for just the
summary lines.
"""

from __future__ import annotations

import itertools
import math
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from battery import battery  # noqa: E402
from conftest import cube_grid, disk_grid  # noqa: E402
from qrdyn.infspace import (  # noqa: E402
    DEFAULT_MODEL,
    OMEGA_3,
    homogeneity_defect,
    l1_family_check,
    model_volume_mc,
    non_identity_shape_defect,
)
from qrdyn.linearizer import (  # noqa: E402
    Conjugacy,
    RescaleSequence,
    automorphy_transfer_check,
    conjugacy_estimate,
    koenigs_polynomial,
    power_linearizer,
)
from qrdyn.linmap import Verdict, power_dilatation_profile, uqc_verdict  # noqa: E402
from qrdyn.powermap import PowerMapParams, escape_steps, power_eval, schroder_residual  # noqa: E402
from qrdyn.zorich import (  # noqa: E402
    POLE,
    fold_to_central,
    hemisphere_map,
    invariance_generators,
    invariance_residual,
    zorich_eval,
    zorich_invert,
)

P3 = PowerMapParams(3)


def _report(number: int, title: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}", flush=True)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def criterion_1():
    Z = disk_grid(16, 128)
    ez = np.exp(Z[:, 0] + 1j * Z[:, 1])
    w, dt = _timed(lambda: koenigs_polynomial([0, 0, 1], (1, 0), 30, Z))
    err = float(np.max(np.abs(w[:, 0] + 1j * w[:, 1] - ez)))
    return err < 1e-6 and dt < 1.0, f"max |L_30 - exp| = {err:.3g} (< 1e-6), {dt:.3f} s (< 1 s)"


def criterion_2():
    res, dt = _timed(lambda: schroder_residual(cube_grid(-2, 2, 10), P3).max())
    return res < 1e-9 and dt < 10.0, f"max residual = {res:.3g} (< 1e-9), {dt:.3f} s (< 10 s)"


def criterion_3():
    fixed = float(np.max(np.abs(power_eval(POLE, P3) - POLE)))
    dirs = [np.array(d, dtype=float) for d in itertools.product((-1, 0, 1), repeat=3) if any(d)]
    steps = [escape_steps(POLE + 1e-3 * d / np.linalg.norm(d), P3, radius=0.1, max_steps=20) for d in dirs]
    worst = max(s if s is not None else math.inf for s in steps)
    ok = fixed <= 1e-12 and len(dirs) == 26 and worst <= 6
    return ok, f"|P(pole) - pole| = {fixed:.3g}, slowest of 26 directions escapes after {worst} steps (<= 6)"


def criterion_4():
    def run():
        wrong, weak = [], []
        for name, A, truth in battery():
            if uqc_verdict(A).verdict is not truth:
                wrong.append(name)
            if truth is not Verdict.UNIFORMLY_QC:
                vals = power_dilatation_profile(A, 40).values
                if not vals[-1] / vals[0] > 10:
                    weak.append(name)
        return wrong, weak

    (wrong, weak), dt = _timed(run)
    ok = not wrong and not weak and len(battery()) == 20 and dt < 5.0
    return ok, f"{20 - len(wrong)}/20 verdicts correct, {len(weak)} weak not-uqc profiles, {dt:.3f} s (< 5 s)"


def criterion_5():
    L = power_linearizer(3, 12)
    M = power_linearizer(3, 12, factor=2.0)
    est = conjugacy_estimate(L, M, 9, 9, depth=3, dim=3, seed=0)
    ratio = est.dilatation_ratio
    ok = abs(est.scalar_fit - 2.0) < 1e-5 and est.scalar_residual < 1e-5 and ratio <= 1.2
    return ok, (f"r = {est.scalar_fit:.12g}, residual = {est.scalar_residual:.3g} (< 1e-5), "
                f"dilatation ratio over 3 depths = {ratio:.6f} (<= 1.2)")


def criterion_6():
    L = power_linearizer(3, 20)
    G = Conjugacy(L, zorich_eval, 9, 9, 3)
    check = automorphy_transfer_check(L, G, invariance_generators(), cube_grid(-1, 1, 5))
    ok = check.residual < 1e-5 and check.evaluated > 0
    return ok, f"transfer residual = {check.residual:.3g} (< 1e-5), {check.dropped} dropped"


def criterion_7():
    est = model_volume_mc(n_samples=1_000_000, seed=0)
    rel = abs(est.value / OMEGA_3 - 1.0)
    rng = np.random.default_rng(0)
    r = np.exp(rng.uniform(math.log(0.1), math.log(10.0), 100))
    x = rng.uniform(-1, 1, (100, 3))
    homog = max(float(homogeneity_defect(DEFAULT_MODEL, ri, xi)) for ri, xi in zip(r, x))
    ok = rel < 0.01 and homog <= 1e-12
    return ok, f"volume = {est.value:.5f} vs 4pi/3 = {OMEGA_3:.5f} (rel {rel:.2e} < 1%), homogeneity defect = {homog:.3g}"


def criterion_8():
    grid = cube_grid(-1, 1, 5)
    l1 = max(l1_family_check(r, P3, grid) for r in (0.5, 1.0, 2.0))
    shape = non_identity_shape_defect(RescaleSequence.geometric(9)).value
    ok = l1 < 1e-8 and shape > 0.1
    return ok, f"max l1 family residual = {l1:.3g} (< 1e-8), shape defect vs identity = {shape:.4f} (> 0.1)"


def _wall_gap(rng, n):
    pi = math.pi
    k = rng.integers(-5, 5, n)
    other = rng.uniform(-10, 10, n)
    j = np.ceil(other / pi - 0.5).astype(int)
    w = rng.uniform(-3, 3, n)
    X = np.stack([k * pi + pi / 2, other, w], axis=-1)

    def side(i):
        su = np.where(i % 2 == 0, 1.0, -1.0)
        sv = np.where(j % 2 == 0, 1.0, -1.0)
        lu = np.clip(su * (X[:, 0] - i * pi), -pi / 2, pi / 2)
        lv = np.clip(sv * (X[:, 1] - j * pi), -pi / 2, pi / 2)
        y = np.exp(w)[:, None] * hemisphere_map(lu, lv)
        y[:, 2] *= np.where((i + j) % 2 == 1, -1.0, 1.0)
        return y

    return float(np.max(np.abs(side(k) - side(k + 1))))


def criterion_9():
    rng = np.random.default_rng(0)
    wall = _wall_gap(rng, 10_000)
    X = rng.uniform([-12, -12, -5], [12, 12, 5], (10_000, 3))
    Y = zorich_eval(X)
    modulus = float(np.max(np.abs(np.linalg.norm(Y, axis=1) / np.exp(X[:, 2]) - 1.0)))
    S = rng.uniform([-4, -4, -1], [4, 4, 1], (2000, 3))
    invariance = max(invariance_residual(g, S) for g in invariance_generators())
    trip = float(np.max(np.abs(zorich_invert(Y, fold_to_central(X).address) - X)))
    ok = wall < 1e-10 and modulus < 1e-10 and invariance <= 1e-12 and trip < 1e-9
    return ok, (f"wall gap = {wall:.3g}, modulus error = {modulus:.3g}, "
                f"invariance = {invariance:.3g}, round trip = {trip:.3g}")


CLI_RUNS = {
    2: ["power", "residual", "--m", "3", "--grid", "-2,2,10"],
    5: ["linearize", "relate", "--m", "3", "--k", "12", "--seed", "0"],
    7: ["infspace", "model", "--samples", "1000000", "--seed", "0"],
}


def criterion_10():
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        for crit, argv in CLI_RUNS.items():
            blobs = []
            for rep in range(2):
                out = Path(tmp) / f"c{crit}_{rep}.out"
                subprocess.run([sys.executable, "-m", "qrdyn.cli", *argv, "--out", str(out)],
                               check=True, capture_output=True)
                blobs.append(out.read_bytes())
            same[crit] = blobs[0] == blobs[1] and len(blobs[0]) > 0
    ok = all(same.values())
    return ok, ", ".join(f"criterion {c}: {'identical' if v else 'DIFFERENT'}" for c, v in same.items())


CRITERIA = [
    (1, "Koenigs exponential", criterion_1),
    (2, "Schroeder identity", criterion_2),
    (3, "repelling fixed point", criterion_3),
    (4, "uniform quasiconformality battery", criterion_4),
    (5, "scaled linearizer relation", criterion_5),
    (6, "automorphy transfer", criterion_6),
    (7, "model constant", criterion_7),
    (8, "L1 family and shape defect", criterion_8),
    (9, "Zorich integrity", criterion_9),
    (10, "determinism", criterion_10),
]


@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, check, capsys):
    passed, detail = check()
    with capsys.disabled():
        print()
        _report(number, title, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    failures = 0
    for number, title, check in CRITERIA:
        passed, detail = check()
        _report(number, title, passed, detail)
        failures += not passed
    sys.exit(1 if failures else 0)
