"""``qrdyn`` command-line front end.

Exit status: 0 on success, 1 on domain/precondition errors or unwritable
output, 2 on parse or configuration errors.  Configuration precedence is
built-in defaults < ``--config`` JSON file < command-line flags.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import infspace, linearizer, linmap, powermap, zorich
from .errors import QrdynError
from .export import GridTable, atomic_write, dumps_json, fmt_point
from .numerics import linear_handle

FORMATS = ("csv", "json")


class ConfigError(Exception):
    """Invalid configuration; maps to exit status 2."""


@dataclass(frozen=True)
class GridSpec:
    lo: float = -2.0
    hi: float = 2.0
    resolution: int = 10

    @classmethod
    def parse(cls, text) -> "GridSpec":
        if isinstance(text, dict):
            if "lo" in text:
                return cls(float(text["lo"]), float(text["hi"]), int(text["resolution"]))
            c, hw = float(text["center"]), float(text["half_width"])
            return cls(c - hw, c + hw, int(text["resolution"]))
        parts = str(text).split(",")
        if len(parts) != 3:
            raise ConfigError(f"grid must be lo,hi,n; got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"grid must be lo,hi,n; got {text!r}") from exc

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def axis(self) -> np.ndarray:
        if self.resolution == 1:
            return np.array([self.center])
        return np.linspace(self.lo, self.hi, self.resolution)

    def points(self, dim: int = 3) -> np.ndarray:
        """Grid points in lexicographic index order."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * dim), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, dim)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str = ""
    map: str = "zinv"
    m: int = 3
    k: int | None = None
    rho_base: float | None = None
    factor: float = 2.0
    tol: float = 1e-8
    seed: int = 0
    samples: int = 1_000_000
    rho: float = 1e-3
    r: float = 1.0
    grid: GridSpec = field(default_factory=GridSpec)
    point: tuple[float, ...] | None = None
    matrix: str | None = None
    coeffs: str | None = None
    branch: tuple[int, int] | None = None
    branches: str | None = None
    out: str | None = None
    format: str = "csv"

    def validate(self) -> "RunConfig":
        try:
            powermap.PowerMapParams(self.m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.grid.resolution < 1:
            raise ConfigError("grid resolution must be at least 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.samples < 1:
            raise ConfigError("samples must be positive")
        if self.k is not None and self.k < 0:
            raise ConfigError("k must be non-negative")
        return self


_CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"subcommand"}


def _coerce(key: str, value):
    if key == "grid":
        return GridSpec.parse(value)
    if key == "point":
        return _parse_point(value) if isinstance(value, str) else tuple(float(t) for t in value)
    if key == "branch":
        return _parse_branch(value) if isinstance(value, str) else tuple(int(t) for t in value)
    if key in ("m", "seed", "samples", "k") and value is not None:
        if isinstance(value, bool) or float(value) != int(value):
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if key in ("tol", "rho_base", "factor", "rho", "r") and value is not None:
        return float(value)
    return value


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
    values: dict = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                              f"{exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = set(data) - _CONFIG_KEYS - {"rho-base"}
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        for key, value in data.items():
            key = key.replace("-", "_")
            values[key] = _coerce(key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _coerce(key, value)
    try:
        return replace(RunConfig(), **values).validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"point must be comma-separated reals, got {text!r}") from exc


def _parse_branch(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"branch must be i,j; got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_branches(text: str) -> list[zorich.BeamAddress]:
    return [zorich.BeamAddress(*_parse_branch(chunk)) for chunk in text.split(";") if chunk.strip()]


def _require_point(cfg: RunConfig, dim: int) -> np.ndarray:
    if cfg.point is None:
        raise ConfigError("--point is required")
    if len(cfg.point) != dim:
        raise ConfigError(f"--point needs {dim} coordinates")
    return np.array(cfg.point)


def _emit(cfg: RunConfig, payload, table: GridTable | None = None) -> None:
    """Print a JSON payload, or write it (or a table) to ``--out``."""
    if cfg.out is None:
        if table is not None:
            sys.stdout.write(table.to_csv() if cfg.format == "csv" else table.to_json())
        else:
            sys.stdout.write(dumps_json(payload))
        return
    if table is not None:
        table.write(cfg.out, cfg.format)
        sys.stdout.write(dumps_json(table.summary()))
    else:
        atomic_write(cfg.out, dumps_json(payload))


# ------------------------------------------------------------------ commands

def cmd_zorich_eval(cfg):
    print(fmt_point(zorich.zorich_eval(_require_point(cfg, 3))))


def cmd_zorich_invert(cfg):
    branch = cfg.branch if cfg.branch is not None else None
    print(fmt_point(zorich.zorich_invert(_require_point(cfg, 3), branch)))


def cmd_zorich_invariance(cfg):
    X = cfg.grid.points()
    _emit(cfg, {"residuals": zorich.generator_report(X), "grid": asdict(cfg.grid)})


def cmd_power_eval(cfg):
    print(fmt_point(powermap.power_eval(_require_point(cfg, 3), powermap.PowerMapParams(cfg.m))))


def cmd_power_residual(cfg):
    params = powermap.PowerMapParams(cfg.m)
    X = cfg.grid.points()
    table = GridTable(["u", "v", "w"], ["residual"], {"m": cfg.m, "grid": asdict(cfg.grid)})
    table.extend(X, powermap.schroder_residual(X, params))
    _emit(cfg, None, table)


def cmd_power_orbit(cfg):
    params = powermap.PowerMapParams(cfg.m)
    orb = powermap.orbit(_require_point(cfg, 3), params, 5 if cfg.k is None else cfg.k)
    _emit(cfg, {"m": cfg.m, "points": orb.points, "moduli": orb.moduli, "truncated": orb.truncated})


def cmd_power_branches(cfg):
    params = powermap.PowerMapParams(cfg.m)
    y = _require_point(cfg, 3)
    if cfg.branches:
        addrs = _parse_branches(cfg.branches)
    else:
        addrs = zorich.fiber(y, 2)[0]
    _emit(cfg, {"m": cfg.m, "addresses": [list(a) for a in addrs],
                "discrepancy": powermap.branch_consistency(y, params, addrs)})


def cmd_linearize_koenigs(cfg):
    if cfg.coeffs is None:
        raise ConfigError("--coeffs is required (JSON list of [re, im] pairs, ascending)")
    coeffs = json.loads(cfg.coeffs)
    z0 = cfg.point if cfg.point is not None else (1.0, 0.0)
    k = 30 if cfg.k is None else cfg.k
    X = cfg.grid.points(2)
    values = linearizer.koenigs_polynomial(coeffs, z0, k, X)
    table = GridTable(["x", "y"], ["re", "im"], {"coeffs": coeffs, "z0": list(z0), "k": k})
    table.extend(X, values)
    _emit(cfg, None, table)


def _power_linearizer(cfg, factor: float = 1.0, default_k: int = 12):
    params = powermap.PowerMapParams(cfg.m)
    base = params.factor if cfg.rho_base is None else cfg.rho_base
    return linearizer.LinearizerApprox(
        powermap.power_handle(params), (0.0, 0.0, 1.0),
        linearizer.RescaleSequence.geometric(base, factor),
        default_k if cfg.k is None else cfg.k)


def cmd_linearize_approx(cfg):
    L = _power_linearizer(cfg)
    X = cfg.grid.points()
    table = GridTable(["u", "v", "w"], ["a", "b", "c"], {"m": cfg.m, "k": L.depth})
    table.extend(X, L(X))
    _emit(cfg, None, table)


def cmd_linearize_relate(cfg):
    L = _power_linearizer(cfg)
    M = _power_linearizer(cfg, factor=cfg.factor)
    psi = powermap.PowerMapParams(cfg.m).factor
    est = linearizer.conjugacy_estimate(L, M, psi, psi, depth=3, dim=3, seed=cfg.seed)
    _emit(cfg, {"m": cfg.m, "k": L.depth, "factor": cfg.factor, **est.as_dict()})


def cmd_linearize_transfer(cfg):
    L = _power_linearizer(cfg, default_k=20)
    psi = powermap.PowerMapParams(cfg.m).factor
    G = linearizer.Conjugacy(L, zorich.zorich_eval, psi, psi, 3, seed=cfg.seed)
    check = linearizer.automorphy_transfer_check(L, G, zorich.invariance_generators(),
                                                 cfg.grid.points())
    _emit(cfg, {"m": cfg.m, "k": L.depth, "residual": check.residual,
                "dropped": check.dropped, "evaluated": check.evaluated})


def _load_matrix(cfg) -> np.ndarray:
    if cfg.matrix is None:
        raise ConfigError("--matrix is required")
    path = Path(cfg.matrix)
    text = path.read_text() if path.exists() else cfg.matrix
    try:
        return linmap.parse_matrix(text)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse matrix: {exc}") from exc


def cmd_uqc_check(cfg):
    cert = linmap.uqc_verdict(_load_matrix(cfg), cfg.tol)
    _emit(cfg, cert.as_dict())


def cmd_uqc_profile(cfg):
    A = _load_matrix(cfg)
    prof = linmap.power_dilatation_profile(A, 50 if cfg.k is None else cfg.k)
    table = GridTable(["power"], ["outer", "inner", "K"], {"truncated_at": prof.truncated_at})
    for m, rep in enumerate(prof.reports, start=1):
        table.add([m], [rep.outer, rep.inner, rep.max_dilatation])
    _emit(cfg, None, table)


def cmd_infspace_stretch(cfg):
    print(fmt_point(infspace.radial_stretch(_require_point(cfg, 2))))


def cmd_infspace_model(cfg):
    est = infspace.model_volume_mc(n_samples=cfg.samples, seed=cfg.seed)
    _emit(cfg, {"C": infspace.model_constant(), "volume": est.value, "stderr": est.stderr,
                "target": infspace.OMEGA_3, "relative_error": est.value / infspace.OMEGA_3 - 1.0,
                "samples": est.n_samples, "seed": cfg.seed})


_MEAN_RADIUS_MAPS = {
    "zinv": lambda cfg: (zorich.zorich_inverse_handle(), zorich.POLE),
    "identity": lambda cfg: (linear_handle(np.eye(3), "identity"), np.zeros(3)),
    "power": lambda cfg: (powermap.power_handle(powermap.PowerMapParams(cfg.m)), zorich.POLE),
}


def cmd_infspace_meanradius(cfg):
    if cfg.map not in _MEAN_RADIUS_MAPS:
        raise ConfigError(f"--map must be one of {sorted(_MEAN_RADIUS_MAPS)}")
    f, x0 = _MEAN_RADIUS_MAPS[cfg.map](cfg)
    if cfg.point is not None:
        x0 = _require_point(cfg, 3)
    est = infspace.mean_radius(f, x0, cfg.rho, cfg.samples, cfg.seed)
    _emit(cfg, {"map": cfg.map, "x0": x0, **est.as_dict(), "ratio": est.value / cfg.rho})


def cmd_infspace_l1check(cfg):
    params = powermap.PowerMapParams(cfg.m)
    X = cfg.grid.points()
    _emit(cfg, {"m": cfg.m, "r": cfg.r, "residual": infspace.l1_family_check(cfg.r, params, X)})


def cmd_scan_dilatation(cfg):
    beams = _parse_branches(cfg.branches) if cfg.branches else [zorich.CENTRAL, zorich.BeamAddress(1, 0)]
    X = cfg.grid.points()
    if np.any(np.abs(X[:, :2]) > zorich.HALF_PI):
        raise ConfigError("dilatation scan grid must lie in the central beam (|u|, |v| <= pi/2)")
    fields_ = zorich.beam_dilatation(X, beams)
    first = fields_[beams[0]]
    table = GridTable(["i", "j", "u", "v", "w"], ["K", "rel_diff"], {"beams": [list(b) for b in beams]})
    for addr in beams:
        K = fields_[addr]
        rel = np.abs(K - first) / first
        for x, kv, rv in zip(X, K, rel):
            table.add([addr.i, addr.j, *x], [kv, rv])
    _emit(cfg, None, table)


COMMANDS = {
    "zorich": {"eval": (cmd_zorich_eval, ["point"]),
               "invert": (cmd_zorich_invert, ["point", "branch"]),
               "invariance": (cmd_zorich_invariance, ["grid", "out", "format"])},
    "power": {"eval": (cmd_power_eval, ["point", "m"]),
              "residual": (cmd_power_residual, ["m", "grid", "out", "format"]),
              "orbit": (cmd_power_orbit, ["point", "m", "k", "out"]),
              "branches": (cmd_power_branches, ["point", "m", "branches", "out"])},
    "linearize": {"koenigs": (cmd_linearize_koenigs, ["coeffs", "point", "k", "grid", "out", "format"]),
                  "approx": (cmd_linearize_approx, ["m", "k", "rho-base", "grid", "out", "format"]),
                  "relate": (cmd_linearize_relate, ["m", "k", "rho-base", "factor", "seed", "out"]),
                  "transfer": (cmd_linearize_transfer, ["m", "k", "rho-base", "grid", "seed", "out"])},
    "uqc": {"check": (cmd_uqc_check, ["matrix", "tol", "out"]),
            "profile": (cmd_uqc_profile, ["matrix", "k", "out", "format"])},
    "infspace": {"stretch": (cmd_infspace_stretch, ["point"]),
                 "model": (cmd_infspace_model, ["samples", "seed", "out"]),
                 "meanradius": (cmd_infspace_meanradius, ["map", "point", "rho", "samples", "seed", "m", "out"]),
                 "l1check": (cmd_infspace_l1check, ["m", "r", "grid", "out"])},
    "scan": {"dilatation": (cmd_scan_dilatation, ["grid", "branches", "out", "format"])},
}

_FLAG_HELP = {
    "point": ("comma-separated coordinates", str),
    "matrix": ("matrix file (JSON rows or whitespace text) or inline JSON", str),
    "m": ("power map degree, similarity m^2 x (default 3)", int),
    "k": ("iteration depth / number of powers", int),
    "rho-base": ("geometric base of the rescale sequence (default m^2)", float),
    "factor": ("rescale prefactor of the second linearizer (default 2)", float),
    "grid": ("lo,hi,n per axis (default -2,2,10)", str),
    "tol": ("tolerance (default 1e-8)", float),
    "seed": ("random seed (default 0)", int),
    "samples": ("Monte Carlo sample count (default 1e6)", int),
    "rho": ("ball radius for the mean radius (default 1e-3)", float),
    "r": ("scale r of the L1 family member Z(g(r x)) (default 1)", float),
    "map": ("map for the mean radius: zinv, identity or power", str),
    "coeffs": ("polynomial coefficients, JSON list of [re, im] in ascending order", str),
    "branch": ("beam address i,j", str),
    "branches": ("beam addresses i,j;i,j;...", str),
    "out": ("output file (written atomically)", str),
    "format": ("csv or json", str),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrdyn", description="Quasiregular linearizer toolkit")
    groups = parser.add_subparsers(dest="group", metavar="GROUP", required=True)
    for group, actions in COMMANDS.items():
        gp = groups.add_parser(group, help=f"{group} commands")
        sub = gp.add_subparsers(dest="action", metavar="ACTION", required=True)
        for action, (_, flags) in actions.items():
            ap = sub.add_parser(action, help=f"{group} {action}")
            ap.add_argument("--config", help="JSON config file; flags override its values")
            for flag in flags:
                text, typ = _FLAG_HELP[flag]
                kwargs = {"help": text, "default": None, "type": typ}
                if flag == "format":
                    kwargs["choices"] = FORMATS
                ap.add_argument(f"--{flag}", **kwargs)
    return parser


_NEGATIVE = re.compile(r"^-[0-9.]")


def _join_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--grid -2,2,10`` as ``--grid=-2,2,10`` so argparse keeps the value."""
    out: list[str] = []
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    overrides = {k: v for k, v in vars(args).items() if k not in ("group", "action", "config")}
    try:
        cfg = load_config(args.config, overrides)
        cfg = replace(cfg, subcommand=f"{args.group} {args.action}")
        handler = COMMANDS[args.group][args.action][0]
        handler(cfg)
    except ConfigError as exc:
        print(f"qrdyn: configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"qrdyn: {exc}", file=sys.stderr)
        return 2 if args.config and exc.filename == args.config else 1
    except (QrdynError, ValueError, OSError) as exc:
        print(f"qrdyn: {exc}", file=sys.stderr)
        return 1
    return 0


def dispatch(argv) -> int:
    return main(list(argv))


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
