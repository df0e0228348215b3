"""Command-line experiment runner.

Every subcommand that needs a model reads one JSON config (see
``DEFAULT_CONFIG``); missing keys take the defaults, which describe the
reference problem: ``q = 0.6``, ``T = 1``, 20 modes, a pointwise sensor at
``b = 1/3``, subregion ``[1/4, 1/2]``, initial state ``sin(2 pi x)`` and the
envelopes ``|y0| -+ 1/2``.  Paths inside a config are relative to its directory.

Exit codes: 0 success, 2 bad command line, 3 accuracy/convergence failure,
4 invalid config, 5 system not observable, 1 solver iteration limit.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .enlarged_observability import ConstraintPair, decide_e_observability, observability_gramian, regional_state
from .errors import AccuracyError, ConvergenceError, DomainError, FracObsError, MaxIterError, NotObservableError
from .frac_calc import TimeGrid
from .hum_reconstruct import ReconstructionProblem, SolverSettings, solve
from .quadrature import TimeQuadrature
from .sensing import MeasurementTrace, OmegaGrid, SensorSpec, Subregion, observe, restrict
from .spectral_model import SpectralBasis, SpectralState, evaluate, project, trajectory
from .special_functions import mittag_leffler_two, xi_moment

DEFAULT_CONFIG: dict = {
    "q": 0.6,
    "T": 1.0,
    "n_time_steps": 1000,
    "n_modes": 20,
    "modes": None,
    "sensor": {"kind": "pointwise", "b": 1.0 / 3.0},
    "omega": {"w0": 0.25, "w1": 0.5, "grid": {"kind": "gauss", "n_panels": 8, "order": 8}},
    "envelopes": {"kind": "absolute-band", "half_width": 0.5},
    "truth": {"kind": "sin2pix"},
    "noise": {"sigma": 0.0, "seed": 0},
    "solver": {"cg_tol": 1e-10, "cg_max_iter": 500, "tikhonov_eps": None, "method": "cr"},
    "time_quadrature": {"n_panels": 64, "order": 8, "grading_levels": 33},
    "eig_tol": None,
    "snapshots": [0.0, 0.01, 0.1, 0.5, 1.0],
    "output_dir": "out",
}


class ConfigError(FracObsError, ValueError):
    """The experiment config is malformed or references missing files."""


# ---------------------------------------------------------------------------- config


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("sensor", "envelopes", "truth"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG), Path.cwd()
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return _merge(DEFAULT_CONFIG, raw), p.resolve().parent


def _table(root: Path, name) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(name, str):
        raise ConfigError("table references must be file names")
    f = root / name
    if not f.is_file():
        raise ConfigError(f"referenced file {f} does not exist")
    try:
        data = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"cannot read table {f}: {exc}") from None
    if data.shape[1] != 2 or data.shape[0] < 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError(f"table {f} needs two columns and increasing abscissae")
    return data[:, 0], data[:, 1]


class Experiment:
    """Model objects built from a resolved config."""

    def __init__(self, cfg: dict, root: Path):
        self.cfg = cfg
        self.root = root
        try:
            self._build()
        except ConfigError:
            raise
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None

    def _build(self) -> None:
        c = self.cfg
        self.q = float(c["q"])
        if not 0.0 < self.q <= 1.0:
            raise ConfigError(f"q must lie in (0, 1], got {self.q}")
        self.T = float(c["T"])
        self.tgrid = TimeGrid(self.T, int(c["n_time_steps"]))
        tq = c["time_quadrature"]
        self.tquad = TimeQuadrature(self.T, int(tq["n_panels"]), int(tq["order"]), int(tq["grading_levels"]))
        self.basis = SpectralBasis(int(c["n_modes"])) if not c["modes"] else SpectralBasis(modes=tuple(c["modes"]))
        self.sensor = self._sensor(c["sensor"])
        om = c["omega"]
        g = om.get("grid", {})
        self.omega = Subregion(float(om["w0"]), float(om["w1"]))
        self.wgrid = OmegaGrid(self.omega, int(g.get("n_panels", 8)), int(g.get("order", 8)), g.get("kind", "gauss"))
        self.y0 = self._truth(c["truth"])
        self.constraints = self._envelopes(c["envelopes"])
        s = c["solver"]
        self.solver = SolverSettings(
            float(s["cg_tol"]),
            int(s["cg_max_iter"]),
            None if s["tikhonov_eps"] is None else float(s["tikhonov_eps"]),
            s.get("method", "cr"),
            bool(s.get("clip_to_envelope", False)),
        )
        n = c["noise"]
        self.sigma = float(n.get("sigma", 0.0))
        self.seed = None if n.get("seed") is None else int(n["seed"])
        if self.sigma < 0:
            raise ConfigError("noise sigma must be non-negative")
        self.eig_tol = None if c["eig_tol"] is None else float(c["eig_tol"])

    def _sensor(self, s: dict) -> SensorSpec:
        kind = s.get("kind")
        if kind == "pointwise":
            return SensorSpec.pointwise(float(s["b"]))
        if kind == "zone":
            prof = s.get("profile", "uniform")
            if prof == "uniform":
                return SensorSpec.zone(float(s["d0"]), float(s["d1"]))
            if prof == "custom-table":
                xs, fs = _table(self.root, s.get("table"))
                return SensorSpec.zone_table(xs, fs)
            raise ConfigError(f"unknown sensor profile {prof!r}")
        raise ConfigError(f"unknown sensor kind {kind!r}")

    def _truth(self, t: dict) -> SpectralState:
        kind = t.get("kind")
        if kind == "sin2pix":
            return project(lambda x: np.sin(2.0 * np.pi * x), self.basis)
        if kind == "zero":
            return SpectralState.zero(self.basis)
        if kind == "mode":
            return SpectralState.mode(self.basis, int(t["i"]))
        if kind == "custom-table":
            xs, fs = _table(self.root, t.get("file"))
            return project(lambda x: np.interp(x, xs, fs, left=0.0, right=0.0), self.basis)
        raise ConfigError(f"unknown truth kind {kind!r}")

    def _envelopes(self, e: dict) -> ConstraintPair:
        kind = e.get("kind")
        # the longer name is kept as an alias for older configs
        if kind in ("absolute-band", "paper-absolute-band"):
            return ConstraintPair.absolute_band(self.y0, self.wgrid, float(e.get("half_width", 0.5)))
        if kind == "explicit-tables":
            xa, fa = _table(self.root, e.get("alpha"))
            xb, fb = _table(self.root, e.get("beta"))
            x = self.wgrid.nodes
            return ConstraintPair(self.wgrid, np.interp(x, xa, fa), np.interp(x, xb, fb))
        raise ConfigError(f"unknown envelope kind {kind!r}")


# --------------------------------------------------------------------------- writers


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _outdir(args, cfg: dict, root: Path) -> Path:
    out = Path(args.out) if args.out else root / cfg["output_dir"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    return x


# -------------------------------------------------------------------------- commands


def cmd_mlf(args) -> int:
    beta = 1.0 if args.beta is None else args.beta
    try:
        res = mittag_leffler_two(args.q, beta, args.z, tol=args.tol)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    name = f"E_{{{args.q:g}}}" if args.beta is None else f"E_{{{args.q:g},{beta:g}}}"
    print(f"{name}({args.z:g}) = {res.value:.17g} method={res.method} err<={res.est_abs_error:.3e}")
    return 0


def _setup(args) -> tuple[Experiment, Path]:
    cfg, root = load_config(args.config)
    if args.seed is not None:
        cfg["noise"]["seed"] = args.seed
    exp = Experiment(cfg, root)
    return exp, _outdir(args, cfg, root)


def cmd_simulate(args) -> int:
    exp, out = _setup(args)
    for conv, name in (("direct", "trace.csv"), ("reversed", "trace_reversed.csv")):
        tr = observe(exp.y0, exp.q, exp.sensor, exp.tgrid, conv, noise_sigma=exp.sigma, seed=exp.seed)
        tr.to_csv(out / name)
    times = [float(t) for t in exp.cfg["snapshots"] if 0.0 <= float(t) <= exp.T]
    x = np.linspace(0.0, 1.0, 101)
    coeffs = trajectory(exp.y0, exp.q, np.array(times)) if times else np.zeros((exp.basis.n_modes, 0))
    cols = [evaluate(SpectralState(exp.basis, coeffs[:, k]), x) for k in range(len(times))]
    _write_csv(out / "state_t.csv", ["x", *[f"t={_fmt(t)}" for t in times]], zip(x, *cols))
    return 0


def cmd_observe_check(args) -> int:
    exp, out = _setup(args)
    gram = observability_gramian(exp.q, exp.sensor, exp.wgrid, exp.tquad, exp.basis)
    rep = decide_e_observability(gram, exp.constraints, exp.eig_tol)
    rep.config_echo = exp.cfg
    _write_json(out / "observability.json", _json_safe(rep.to_dict()))
    print(f"e_observable={rep.e_observable} kernel_dim={rep.kernel_dim} margin={rep.margin:.6g}")
    return 0


def _problem(exp: Experiment, trace: MeasurementTrace) -> ReconstructionProblem:
    truth = restrict(exp.y0, exp.wgrid)
    return ReconstructionProblem(
        exp.q, exp.basis, exp.sensor, exp.wgrid, exp.constraints, trace, exp.tquad, exp.solver, truth
    )


def cmd_reconstruct(args) -> int:
    exp, out = _setup(args)
    if args.trace:
        trace = MeasurementTrace.from_csv(args.trace, exp.T, args.convention)
    else:
        # the sensor records the regional state; samples sit on the time-quadrature nodes
        trace = observe(
            regional_state(exp.y0, exp.wgrid), exp.q, exp.sensor, exp.tquad, "reversed",
            noise_sigma=exp.sigma, seed=exp.seed,
        )
    prob = _problem(exp, trace)
    code = 0
    try:
        rep = solve(prob, config_echo=exp.cfg)
    except MaxIterError as exc:
        rep, code = exc.report, 1
        print(f"warning: {exc}", file=sys.stderr)
    _write_json(out / "reconstruction.json", _json_safe(rep.to_dict()))
    rep.to_csv(out / "phi0.csv")
    err = "n/a" if rep.l2_error_vs_truth is None else f"{rep.l2_error_vs_truth:.3e}"
    print(f"iterations={rep.iterations} l2_error={err} in_envelope={str(rep.in_envelope).lower()}")
    return code


def cmd_density_check(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for nu in args.nu:
        m = xi_moment(args.q, nu)
        rows.append((nu, m.quadrature, m.closed_form, m.abs_diff))
    _write_csv(out / "moments.csv", ["nu", "quadrature", "closed_form", "abs_diff"], rows)
    for r in rows:
        print(",".join(_fmt(v) for v in r))
    return 0


def cmd_sweep_sensor(args) -> int:
    exp, out = _setup(args)
    rows = []
    for b in np.linspace(args.b_min, args.b_max, args.n):
        sensor = SensorSpec.pointwise(float(b))
        gram = observability_gramian(exp.q, sensor, exp.wgrid, exp.tquad, exp.basis)
        rep = decide_e_observability(gram, exp.constraints, exp.eig_tol)
        rows.append((b, rep.e_observable, rep.margin, rep.gramian_max_eig, rep.gramian_rank))
    _write_csv(out / "sweep.csv", ["b", "e_observable", "margin", "max_eig", "rank"], rows)
    return 0


# ---------------------------------------------------------------------------- parser


def _nu_list(s: str) -> list[float]:
    try:
        vals = [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {s!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("moment orders must be non-negative")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracobs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mlf", help="evaluate a Mittag-Leffler function")
    m.add_argument("--q", type=float, required=True)
    m.add_argument("--beta", type=float)
    m.add_argument("--z", type=float, required=True)
    m.add_argument("--tol", type=float, default=1e-10)
    m.set_defaults(func=cmd_mlf)

    def with_config(name, func, help):
        s = sub.add_parser(name, help=help)
        s.add_argument("--config")
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        s.set_defaults(func=func)
        return s

    with_config("simulate", cmd_simulate, "forward traces and field snapshots")
    with_config("observe-check", cmd_observe_check, "constrained observability decision")
    r = with_config("reconstruct", cmd_reconstruct, "reconstruct the initial state on the subregion")
    r.add_argument("--trace", help="measured trace CSV (t,z) instead of a simulated one")
    r.add_argument("--convention", choices=("direct", "reversed"), default="direct")
    s = with_config("sweep-sensor", cmd_sweep_sensor, "decision and margin over sensor positions")
    s.add_argument("--b-min", type=float, default=0.05)
    s.add_argument("--b-max", type=float, default=0.95)
    s.add_argument("--n", type=int, default=19)

    d = sub.add_parser("density-check", help="moments of the subordinator density")
    d.add_argument("--q", type=float, required=True)
    d.add_argument("--nu", type=_nu_list, default=[0.0, 1.0, 2.0])
    d.add_argument("--out")
    d.set_defaults(func=cmd_density_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AccuracyError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NotObservableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (ConfigError, FracObsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
