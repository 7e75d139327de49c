"""Command-line entry point: ``sovchain <verify|separate|evolve|reconstruct>``.

Reports are JSON with complex numbers written as ``[re, im]``.  Exit status is
0 when every check passes, 1 when a check fails and 2 on configuration errors.
"""

import argparse
import datetime
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, _kernels
from .errors import ConfigInvalid, SovChainError
from .flows import (
    abel_coordinate_matrix, abel_momentum_matrix, angle_solution, conservation_report,
    fit_angle_slopes, integrate_flow, trajectory_to_csv,
)
from .model import (
    ChainSpec, TwistMatrix, casimir_observables, check_sklyanin_bracket,
    check_symmetry_conditions, check_twist_compatibility, integral_gradients, integrals,
    rmatrix,
)
from .poisson import MODELS, RATIONAL, TRIGONOMETRIC, build_bivector
from .reconstruct import POLES, CasimirSet, bracket_preservation_check, chain_spec, \
    reconstruct, round_trip
from .sampling import XorShift64Star, random_phase_point, reduce_point
from .sov import (
    CONVENTIONS, NONSTANDARD, bracket_matrix, check_separating_algebra, separate,
    separation_residual,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    model: str
    N: int
    nu: list
    twist: list
    seed: int = 0
    samples: int = 20
    tol: float = 1e-10
    convention: str = NONSTANDARD
    flow: int = 1
    t_end: float = 1.0
    point: list = None
    reduced: bool = False
    extra: dict = field(default_factory=dict)

    def spec(self):
        try:
            return ChainSpec(self.model, self.N, tuple(self.nu), TwistMatrix(self.twist))
        except ConfigInvalid:
            raise
        except SovChainError as exc:
            raise ConfigInvalid(getattr(exc, "field", "config"), str(exc)) from exc


def _complex(value, name):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and \
            all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigInvalid(name, f"expected a number or [re, im], got {value!r}")


def parse_config(data):
    if not isinstance(data, dict):
        raise ConfigInvalid("config", "top level must be an object")
    for key in ("model", "N", "nu", "twist"):
        if key not in data:
            raise ConfigInvalid(key, "missing required field")
    model = data["model"]
    if model not in MODELS:
        raise ConfigInvalid("model", f"expected one of {list(MODELS)}")
    n = data["N"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigInvalid("N", "must be a positive integer")
    nu = data["nu"]
    if not isinstance(nu, list) or len(nu) != n:
        raise ConfigInvalid("nu", f"expected a list of {n} values")
    nu = [_complex(v, "nu") for v in nu]
    tw = data["twist"]
    if not isinstance(tw, list) or len(tw) != 2 or any(
            not isinstance(r, list) or len(r) != 2 for r in tw):
        raise ConfigInvalid("twist", "expected a 2x2 array")
    twist = [[_complex(v, "twist") for v in row] for row in tw]
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigInvalid("seed", "must be an unsigned integer")
    samples = data.get("samples", 20)
    if not isinstance(samples, int) or isinstance(samples, bool) or samples < 1:
        raise ConfigInvalid("samples", "must be a positive integer")
    tol = data.get("tol", 1e-10)
    if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not tol > 0:
        raise ConfigInvalid("tol", "must be a positive number")
    convention = data.get("convention", NONSTANDARD)
    if convention not in CONVENTIONS:
        raise ConfigInvalid("convention", f"expected one of {list(CONVENTIONS)}")
    flow = data.get("flow", 1)
    if not isinstance(flow, int) or isinstance(flow, bool) or not 0 <= flow <= n:
        raise ConfigInvalid("flow", f"must be an integer in 0..{n}")
    t_end = data.get("t_end", 1.0)
    if not isinstance(t_end, (int, float)) or isinstance(t_end, bool) or not math.isfinite(t_end):
        raise ConfigInvalid("t_end", "must be a finite number")
    point = data.get("point")
    if point is not None:
        if not isinstance(point, list):
            raise ConfigInvalid("point", "expected a list of coordinates")
        point = [_complex(v, "point") for v in point]
    known = {"model", "N", "nu", "twist", "seed", "samples", "tol", "convention", "flow",
             "t_end", "point", "reduced"}
    cfg = RunConfig(model, n, nu, twist, seed, samples, float(tol), convention, flow,
                    float(t_end), point, bool(data.get("reduced", False)),
                    {k: v for k, v in data.items() if k not in known})
    spec = cfg.spec()
    if point is not None and len(point) != spec.dim:
        raise ConfigInvalid("point", f"expected {spec.dim} coordinates")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("config", f"invalid JSON: {exc}") from exc
    return data


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------

def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return _float(obj)
    return obj


def _float(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _complex_list(values):
    return np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in values])


def config_echo(cfg):
    d = asdict(cfg)
    d["nu"] = [complex(v) for v in cfg.nu]
    d["twist"] = [[complex(v) for v in row] for row in cfg.twist]
    if cfg.point is not None:
        d["point"] = [complex(v) for v in cfg.point]
    return d


def make_report(command, cfg, records, extra=None):
    report = {
        "command": command,
        "tool": "sovchain",
        "version": __version__,
        "backend": _kernels.BACKEND,
        "config": config_echo(cfg) if cfg else None,
        "records": records,
        "pass": all(r["pass"] for r in records),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        report.update(extra)
    return report


def record(name, anchor, residual, threshold, samples, extra=None):
    ok = bool(np.isfinite(residual) and residual < threshold)
    r = {"name": name, "paper_anchor": anchor, "max_residual": float(residual),
         "threshold": float(threshold), "pass": ok, "samples_used": int(samples)}
    if extra:
        r.update(extra)
    return r


def failed_record(name, anchor, threshold, exc, samples=0):
    return {"name": name, "paper_anchor": anchor, "max_residual": float("inf"),
            "threshold": float(threshold), "pass": False, "samples_used": samples,
            "error": type(exc).__name__, "message": str(exc)}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _spectral_param(rng, spec, avoid=()):
    while True:
        u = rng.complex_square(2.0)
        if all(abs(u - v) > 0.05 for v in tuple(spec.nu) + tuple(avoid)):
            return u


def _points(spec, cfg, rng, n):
    return [random_phase_point(spec, rng, convention=cfg.convention) for _ in range(n)]


def _is_degenerate(spec):
    return spec.twist.degenerate


def _special_case(spec):
    c = spec.twist.c
    s = max(spec.twist.scale, 1e-300)
    if abs(c[0, 0]) <= 1e-12 * s:
        return False
    if spec.model == RATIONAL:
        return abs(c[0, 1]) <= 1e-12 * s and abs(c[1, 1]) <= 1e-12 * s
    return abs(c[1, 1]) <= 1e-12 * s


def _run_check(records, name, anchor, threshold, fn, samples):
    try:
        residual, extra = fn()
        records.append(record(name, anchor, residual, threshold, samples, extra))
    except (SovChainError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        records.append(failed_record(name, anchor, threshold, exc, samples))


def cmd_verify(cfg):
    spec = cfg.spec()
    rng = XorShift64Star(cfg.seed)
    n = cfg.samples
    r = rmatrix(spec)
    records = []
    bv = build_bivector(spec)

    def symmetry():
        res = check_symmetry_conditions(r, samples=200, rng=rng.spawn())
        return res["max_violation"], {"conditions": res["conditions"]}
    _run_check(records, "rmatrix_symmetry_conditions",
               "seven component conditions on the r-matrix for separating functions",
               1e-12, symmetry, 200)

    def twist():
        res = check_twist_compatibility(r, spec.twist, samples=n, rng=rng.spawn())
        return res["max_residual"] / res["scale"], {}
    _run_check(records, "twist_compatibility", "[r(u,v), C (x) C] = 0", 1e-10, twist, n)

    state = {}

    def points():
        if "points" not in state:
            state["points"] = _points(spec, cfg, rng.spawn(), n)
        return state["points"]

    def sklyanin():
        worst = 0.0
        prng = rng.spawn()
        for xi in points():
            u = _spectral_param(prng, spec)
            v = _spectral_param(prng, spec, (u,))
            worst = max(worst, check_sklyanin_bracket(spec, xi, u, v)["relative"])
        return worst, {}
    _run_check(records, "sklyanin_bracket", "quadratic bracket {L(u) (x) L(v)} = [r, L(u) (x) L(v)]",
               1e-9, sklyanin, n)

    def commutation():
        worst = 0.0
        for xi in points():
            vals, g = integral_gradients(spec, xi)
            pi = bv.matrix(xi)
            m = g @ pi @ g.T
            scale = max(1.0, float(np.max(np.abs(g)) ** 2 * np.max(np.abs(pi))))
            worst = max(worst, float(np.max(np.abs(m))) / scale)
        return worst, {}
    _run_check(records, "integral_commutation", "{I_j, I_k} = 0", 1e-9, commutation, n)

    def casimirs():
        worst = 0.0
        obs = casimir_observables(spec)
        for xi in points():
            pi = bv.matrix(xi)
            for _, o in obs:
                g = o.gradient(xi)
                scale = max(1.0, float(np.max(np.abs(g)) * np.max(np.abs(pi))))
                worst = max(worst, float(np.max(np.abs(pi @ g))) / scale)
        return worst, {}
    _run_check(records, "casimir_annihilation", "Casimir functions of the site algebras",
               1e-9, casimirs, n)

    def sepalg():
        worst = 0.0
        prng = rng.spawn()
        for xi in points():
            u = _spectral_param(prng, spec)
            v = _spectral_param(prng, spec, (u,))
            worst = max(worst, check_separating_algebra(spec, xi, u, v)["max_relative"])
        return worst, {}
    _run_check(records, "separating_algebra", "brackets among A(u) and B(v)", 1e-9, sepalg, n)

    def brackets():
        worst = 0.0
        for xi in points():
            worst = max(worst, bracket_matrix(spec, xi, cfg.convention)["relative"])
        return worst, {}
    _run_check(records, "quasi_canonical_brackets",
               "{x_i, p_j} = delta_ij p_i (rational) or delta_ij x_i p_i (trigonometric)",
               1e-8, brackets, n)

    def sep_residual():
        worst = 0.0
        for xi in points():
            worst = max(worst, separation_residual(spec, xi, cfg.convention)["max_relative"])
        return worst, {}
    _run_check(records, "separation_residual",
               "equation of separation c12 p_i = c11 I(x_i); needs det C = 0",
               1e-9, sep_residual, n)

    if cfg.convention == NONSTANDARD and _is_degenerate(spec) and abs(spec.twist.c[0, 0]) > 0:
        if spec.model == RATIONAL and abs(spec.twist.c[0, 1]) > 1e-12 * spec.twist.scale:
            def abel_coord():
                worst = max(float(np.max(np.abs(abel_coordinate_matrix(spec, xi))))
                            for xi in points())
                return worst, {}
            _run_check(records, "abel_coordinates_instantaneous",
                       "Abel-type equations for the separated coordinates", 1e-8, abel_coord, n)
        if _special_case(spec):
            def abel_mom():
                worst = max(float(np.max(np.abs(abel_momentum_matrix(spec, xi))))
                            for xi in points())
                return worst, {}
            _run_check(records, "abel_momenta_instantaneous",
                       "Abel-type equations for the momenta (special degenerate twist)",
                       1e-8, abel_mom, n)

    if spec.N == 2 and abs(spec.twist.c[0, 0]) > 0:
        c11 = complex(spec.twist.c[0, 0])
        c12 = complex(spec.twist.c[0, 1]) if spec.model == RATIONAL else 0.0

        def round_trips():
            rspec = chain_spec(spec.model, c11, c12)
            prng = rng.spawn()
            worst = 0.0
            for _ in range(n):
                xi = random_phase_point(rspec, prng, reduced=True)
                worst = max(worst, round_trip(spec.model, xi, c11, c12)["error"])
            return worst, {"poles": [1.0, -1.0]}
        _run_check(records, "reconstruction_round_trip",
                   "N=2 reconstruction from separated variables and Casimirs", 1e-7,
                   round_trips, n)

        def preserve():
            res = bracket_preservation_check(spec.model, samples=min(n, 20), seed=cfg.seed,
                                             c11=c11, c12=c12)
            return res["relative"], {}
        _run_check(records, "reconstruction_bracket_preservation",
                   "reconstructed coordinates satisfy the site brackets", 1e-7, preserve,
                   min(n, 20))
    return make_report("verify", cfg, records)


def _point_from_config(cfg, spec, rng):
    if cfg.point is not None:
        return np.array(cfg.point, dtype=np.complex128)
    return random_phase_point(spec, rng, reduced=cfg.reduced, convention=cfg.convention)


def cmd_separate(cfg):
    spec = cfg.spec()
    rng = XorShift64Star(cfg.seed)
    out = {}
    records = []
    try:
        xi = _point_from_config(cfg, spec, rng)
        if cfg.reduced:
            xi = reduce_point(spec, xi)
        out["coords"] = xi
        sp = separate(spec, xi, cfg.convention)
        sr = separation_residual(spec, xi, cfg.convention)
        bm = bracket_matrix(spec, xi, cfg.convention)
        out.update({"x": sp.x, "p": sp.p, "convention": cfg.convention,
                    "root_condition": sp.root_condition,
                    "integrals": integrals(spec, xi).coeffs,
                    "separation_residual": sr["max_relative"],
                    "bracket_deviation": bm["relative"]})
        if spec.N == 2:
            out["casimirs"] = asdict(CasimirSet.from_point(spec.model, xi))
        records.append(record("separation_residual", "equation of separation",
                              sr["max_relative"], 1e-9, 1))
    except (SovChainError, RuntimeError) as exc:
        out["error"] = type(exc).__name__
        out["message"] = str(exc)
        records.append(failed_record("separate", "separated variables", 1e-9, exc, 1))
    return make_report("separate", cfg, records, {"result": out})


def cmd_reconstruct(cfg, input_data=None):
    spec = cfg.spec()
    if spec.N != 2:
        raise ConfigInvalid("N", "reconstruction requires N = 2")
    if not np.allclose(np.asarray(spec.nu, dtype=complex), POLES, rtol=0, atol=1e-12):
        raise ConfigInvalid("nu", "reconstruction uses poles nu = (1, -1)")
    c11 = complex(spec.twist.c[0, 0])
    c12 = complex(spec.twist.c[0, 1]) if spec.model == RATIONAL else 0.0
    rspec = chain_spec(spec.model, c11, c12)
    out = {}
    records = []
    try:
        if input_data is not None:
            res_in = input_data.get("result", input_data)
            x = _complex_list(res_in["x"])
            p = _complex_list(res_in["p"])
            cas_raw = res_in["casimirs"]
            cas = CasimirSet(spec.model, **{
                k: (complex(v[0], v[1]) if isinstance(v, list) else v)
                for k, v in cas_raw.items() if k != "model"})
            reference = _complex_list(res_in["coords"]) if "coords" in res_in else None
            if reference is not None and len(reference) == rspec.dim and \
                    np.max(np.abs(reduce_point(rspec, reference) - reference)) > 1e-12 * \
                    max(1.0, float(np.max(np.abs(reference)))):
                raise ConfigInvalid("input", "point is not on the reduced stratum; "
                                             "produce it with 'separate --reduced'")
        else:
            rng = XorShift64Star(cfg.seed)
            reference = random_phase_point(rspec, rng, reduced=True)
            sp = separate(rspec, reference)
            x, p = sp.x, sp.p
            cas = CasimirSet.from_point(spec.model, reference)
        res = reconstruct(spec.model, x, p, cas, c11)
        out.update({"coords": res.coords, "branch": res.branch,
                    "forward_residual": res.forward_residual,
                    "candidates": [{"branch": b, "coords": c} for b, c, _ in res.candidates]})
        records.append(record("forward_map", "reconstructed point reproduces (x, p, Casimirs)",
                              res.forward_residual["max"], 1e-7, 1))
        if reference is not None:
            _, nearest, _ = res.nearest(reference)
            err = float(np.max(np.abs(nearest - reference)) / max(1.0, np.max(np.abs(reference))))
            out["round_trip_error"] = err
            out["nearest"] = nearest
            records.append(record("round_trip", "reconstruction inverts separation", err,
                                  1e-7, 1))
    except ConfigInvalid:
        raise
    except (SovChainError, RuntimeError, KeyError, TypeError, ValueError) as exc:
        out["error"] = type(exc).__name__
        out["message"] = str(exc)
        records.append(failed_record("reconstruct", "N=2 reconstruction", 1e-7, exc, 1))
    return make_report("reconstruct", cfg, records, {"result": out})


def cmd_evolve(cfg, csv_path=None, n_times=None):
    spec = cfg.spec()
    rng = XorShift64Star(cfg.seed)
    records = []
    out = {"flow": cfg.flow, "t_end": cfg.t_end}
    try:
        xi = _point_from_config(cfg, spec, rng)
        samples = 1 if cfg.t_end == 0 else (n_times or 201)
        traj = integrate_flow(spec, xi, cfg.flow, cfg.t_end, tol=cfg.tol, samples=samples,
                              convention=cfg.convention)
    except (SovChainError, RuntimeError) as exc:
        out["error"] = type(exc).__name__
        out["message"] = str(exc)
        out["failed_at"] = getattr(exc, "t", None)
        records.append(failed_record("integration", "Hamiltonian flow of I_k", cfg.tol, exc))
        return make_report("evolve", cfg, records, {"result": out})
    if csv_path:
        trajectory_to_csv(traj, csv_path)
        out["csv"] = str(csv_path)
    out["stats"] = asdict(traj.stats)
    drift = conservation_report(spec, traj)
    out["drift"] = drift
    records.append(record("conservation", "integrals and Casimirs are conserved",
                          max(drift.values()) if drift else 0.0, 1e-8, len(traj.times)))
    if cfg.convention == NONSTANDARD and _is_degenerate(spec):
        if spec.model == RATIONAL and abs(spec.twist.c[0, 1]) > 1e-12 * spec.twist.scale:
            worst = max(float(np.max(np.abs(abel_coordinate_matrix(spec, s))))
                        for s in traj.states)
            records.append(record("abel_coordinates", "Abel-type equations for coordinates",
                                  worst, 1e-6, len(traj.times)))
        if _special_case(spec):
            worst = max(float(np.max(np.abs(abel_momentum_matrix(spec, s))))
                        for s in traj.states)
            records.append(record("abel_momenta", "Abel-type equations for momenta",
                                  worst, 1e-6, len(traj.times)))
            x_drift = float(np.max(np.abs(traj.x - traj.x[0])))
            records.append(record("action_drift", "separated coordinates are actions",
                                  x_drift, 1e-8, len(traj.times)))
            if len(traj.times) > 2 and cfg.flow >= 1:
                try:
                    pred = angle_solution(spec, xi).slopes[:, cfg.flow - 1]
                    fit = fit_angle_slopes(traj)
                    rel = float(np.max(np.abs(fit["slopes"] - pred)
                                       / np.maximum(np.abs(pred), 1e-300)))
                    out["angle_slopes"] = {"fitted": fit["slopes"], "predicted": pred,
                                           "r2": fit["r2"]}
                    records.append(record("angle_slopes", "phi_i = ln p_i moves linearly",
                                          rel, 1e-6, len(traj.times)))
                except SovChainError as exc:
                    records.append(failed_record("angle_slopes", "angle variables", 1e-6, exc))
    return make_report("evolve", cfg, records, {"result": out})


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="sovchain", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["verify", "separate", "evolve", "reconstruct"])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--out", help="report path (CSV trajectory path for evolve)")
    ap.add_argument("--convention", choices=list(CONVENTIONS))
    ap.add_argument("--flow", type=int)
    ap.add_argument("--t-end", type=float, dest="t_end")
    ap.add_argument("--input", help="separate output to reconstruct from ('-' for stdin)")
    ap.add_argument("--reduced", action="store_true", help="sample on the reduced stratum")
    return ap


def _emit(report, path=None, stream=None):
    text = json.dumps(to_jsonable(report), indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        (stream or sys.stdout).write(text + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data = load_config(args.config)
        for key in ("seed", "samples", "tol", "convention", "flow", "t_end"):
            val = getattr(args, key)
            if val is not None:
                data[key] = val
        if args.reduced:
            data["reduced"] = True
        cfg = parse_config(data)
        if args.command == "verify":
            report = cmd_verify(cfg)
        elif args.command == "separate":
            report = cmd_separate(cfg)
        elif args.command == "reconstruct":
            input_data = None
            if args.input:
                try:
                    fh = sys.stdin if args.input == "-" else open(args.input)
                    with fh:
                        input_data = json.load(fh)
                except (OSError, json.JSONDecodeError) as exc:
                    raise ConfigInvalid("input", str(exc)) from exc
            report = cmd_reconstruct(cfg, input_data)
        else:
            csv_path = args.out or "trajectory.csv"
            report = cmd_evolve(cfg, csv_path)
            _emit(report)
            return EXIT_OK if report["pass"] else EXIT_FAIL
    except ConfigInvalid as exc:
        err = {"error": "ConfigInvalid", "field": exc.field, "message": str(exc),
               "pass": False, "version": __version__}
        _emit(err, stream=sys.stdout)
        return EXIT_CONFIG
    _emit(report, args.out)
    return EXIT_OK if report["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
