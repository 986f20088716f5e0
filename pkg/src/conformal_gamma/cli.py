"""Command-line front end.

Configuration is layered: built-in defaults, then a JSON file (``--config``),
then ``CGAMMA_<KEY>`` environment variables, then command-line flags.
Unknown keys are rejected. Exit status is 0 only when every check passes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import report as rp
from .counterexample import (A, B, LIMIT_CLOSED_FORM, REFERENCE, UPPER_BOUND, counterexample_metric,
                             run_counterexample)
from .fields import GridField, ScalarField, distance_to
from .functionals import default_pairs
from .gamma import CompactExhaustion, MetricSequence, gamma_F_check, gamma_J_check, gamma_L_check
from .geometry import Domain
from .metric import Curve, EuclideanOracle, RefinementPolicy, curve_length
from .solver import ConformalMetric, DistanceSolver, extend_closure, validate_membership

COMMANDS = ("distance", "geodesic", "membership", "counterexample", "gamma")
ENV_PREFIX = "CGAMMA_"
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_ERROR = 3


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"config key '{key}': {msg}")
        self.key = key


@dataclass
class ExperimentConfig:
    command: str = "counterexample"
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    weight: dict | None = None
    h: float = 2.0 ** -12
    stencil: int = 2
    tol: float = 7e-3
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1
    x: tuple = A
    y: tuple = B
    alpha: float = 2.0
    pair_samples: int = 512
    length_pairs: int = 64
    membership_tol: float = 1e-6
    n_values: tuple = tuple(range(2, 10))
    mono_tol: float = 1e-3
    cross_check: bool = False
    plots: bool = True
    gamma_sequence: str = "constant"
    gamma_length: int = 3

    def __post_init__(self):
        if self.weight is None:
            self.weight = {"kind": "constant", "c": 1.0}

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FIELD_NAMES = [f.name for f in fields(ExperimentConfig)]
WEIGHT_KEYS = {"constant": {"kind", "c"}, "counterexample": {"kind", "n"},
               "grid": {"kind", "path", "w_min", "w_max"}}


def _num(key, v, kind=float, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if kind is int and float(v) != int(v):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    v = kind(v)
    if not np.isfinite(v):
        raise ConfigError(key, "must be finite")
    if positive and not v > 0:
        raise ConfigError(key, f"must be > 0, got {v}")
    if nonneg and v < 0:
        raise ConfigError(key, f"must be >= 0, got {v}")
    return v


def _point(key, v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(key, "expected [x1, x2]")
    return tuple(_num(f"{key}[{i}]", c) for i, c in enumerate(v))


def validate(raw: dict) -> ExperimentConfig:
    """Check types and ranges of a merged raw config and build the config object."""
    unknown = sorted(set(raw) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    c = ExperimentConfig(**raw)
    if c.command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}, got {c.command!r}")
    if not isinstance(c.domain, (list, tuple)) or len(c.domain) != 4:
        raise ConfigError("domain", "expected [x1_lo, x1_hi, x2_lo, x2_hi]")
    c.domain = tuple(_num(f"domain[{i}]", v) for i, v in enumerate(c.domain))
    try:
        Domain(*c.domain)
    except ValueError as e:
        raise ConfigError("domain", str(e)) from None
    c.h = _num("h", c.h, positive=True)
    c.stencil = _num("stencil", c.stencil, int)
    if c.stencil not in (1, 2):
        raise ConfigError("stencil", f"must be 1 or 2, got {c.stencil}")
    for k in ("tol", "mono_tol", "membership_tol"):
        setattr(c, k, _num(k, getattr(c, k), positive=True))
    c.seed = _num("seed", c.seed, int, nonneg=True)
    for k in ("threads", "pair_samples", "length_pairs", "gamma_length"):
        setattr(c, k, _num(k, getattr(c, k), int, positive=True))
    c.alpha = _num("alpha", c.alpha, positive=True)
    if c.alpha <= 1:
        raise ConfigError("alpha", f"must be > 1, got {c.alpha}")
    c.x = _point("x", c.x)
    c.y = _point("y", c.y)
    if not isinstance(c.n_values, (list, tuple)) or not c.n_values:
        raise ConfigError("n_values", "expected a nonempty list of integers >= 2")
    c.n_values = tuple(_num(f"n_values[{i}]", v, int) for i, v in enumerate(c.n_values))
    if min(c.n_values) < 2:
        raise ConfigError("n_values", "entries must be >= 2")
    for k in ("cross_check", "plots"):
        if not isinstance(getattr(c, k), bool):
            raise ConfigError(k, "expected true or false")
    if not isinstance(c.out_dir, str) or not c.out_dir:
        raise ConfigError("out_dir", "expected a nonempty path")
    if c.gamma_sequence not in ("constant", "counterexample"):
        raise ConfigError("gamma_sequence", "must be 'constant' or 'counterexample'")
    w = c.weight
    if not isinstance(w, dict) or w.get("kind") not in WEIGHT_KEYS:
        raise ConfigError("weight.kind", f"must be one of {', '.join(WEIGHT_KEYS)}")
    extra = sorted(set(w) - WEIGHT_KEYS[w["kind"]])
    if extra:
        raise ConfigError(f"weight.{extra[0]}", "unknown key")
    if w["kind"] == "constant":
        _num("weight.c", w.get("c", 1.0), positive=True)
    elif w["kind"] == "counterexample":
        if "n" not in w:
            raise ConfigError("weight.n", "missing")
        if _num("weight.n", w["n"], int) < 2:
            raise ConfigError("weight.n", "must be >= 2")
    else:
        if not isinstance(w.get("path"), str):
            raise ConfigError("weight.path", "missing grid file path")
        for k in ("w_min", "w_max"):
            if k in w:
                _num(f"weight.{k}", w[k], positive=True)
    return c


def _env_layer(environ) -> dict:
    out = {}
    for name in FIELD_NAMES:
        key = ENV_PREFIX + name.upper()
        if key in environ:
            text = environ[key]
            try:
                out[name] = json.loads(text)
            except json.JSONDecodeError:
                out[name] = text
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conformal-gamma", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--h", type=float, help="grid step")
    p.add_argument("--stencil", type=int, help="1 (8 neighbours) or 2 (16 neighbours)")
    p.add_argument("--tol", type=float, help="check tolerance")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--out-dir", dest="out_dir", help="report directory")
    p.add_argument("--threads", type=int, help="worker threads for independent runs")
    return p


def parse_config(argv=None, environ=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    raw = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError("config", f"cannot read {args.config}: {e.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"malformed JSON at line {e.lineno}: {e.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        raw.update(data)
    raw.update(_env_layer(os.environ if environ is None else environ))
    for k in ("h", "stencil", "tol", "seed", "out_dir", "threads"):
        v = getattr(args, k)
        if v is not None:
            raw[k] = v
    if args.command:
        raw["command"] = args.command
    return validate(raw)


# experiment dispatch ---------------------------------------------------------


def make_metric(c: ExperimentConfig) -> ConformalMetric:
    w = c.weight
    if w["kind"] == "constant":
        return ConformalMetric.constant(float(w.get("c", 1.0)))
    if w["kind"] == "counterexample":
        return counterexample_metric(int(w["n"]))
    g = GridField.read_csv(w["path"])
    lo, hi = g.bounds
    return ConformalMetric(g, float(w.get("w_min", lo)), float(w.get("w_max", hi)))


def make_solver(c: ExperimentConfig, metric: ConformalMetric | None = None) -> DistanceSolver:
    return DistanceSolver(Domain(*c.domain), metric or make_metric(c), c.h, c.stencil)


def _interior(solver, pts) -> bool:
    return bool(solver.domain.contains(np.asarray(pts)).all())


def cmd_distance(c: ExperimentConfig, out: Path) -> dict:
    s = make_solver(c)
    if _interior(s, [c.x, c.y]):
        value, converged = s.distance(c.x, c.y), True
    else:
        ext = extend_closure(s, c.x, c.y)
        value, converged = ext.value, ext.converged
    res = {"command": "distance", "x": c.x, "y": c.y, "h": c.h, "stencil": c.stencil,
           "weight": c.weight, "distance": value, "converged": converged,
           "error_bound": s.error_model.bound(c.x, c.y), "passed": bool(converged and np.isfinite(value))}
    rp.write_json(out / "distance.json", res)
    return res


def cmd_geodesic(c: ExperimentConfig, out: Path) -> dict:
    s = make_solver(c)
    g = s.geodesic(c.x, c.y)
    d = s.distance(c.x, c.y)
    L = curve_length(s, g, RefinementPolicy(stop_tol=1e-6, max_levels=3)).value
    allowed = 2 * s.error_model.bound(c.x, c.y)
    res = {"command": "geodesic", "x": c.x, "y": c.y, "h": c.h, "stencil": c.stencil, "weight": c.weight,
           "distance": d, "length": L, "gap": abs(L - d), "allowed_gap": allowed,
           "samples": len(g), "passed": bool(abs(L - d) <= allowed)}
    rp.write_json(out / "geodesic.json", res)
    rp.write_csv(out / "geodesic.csv", ["t", "x1", "x2"],
                 [(t, p[0], p[1]) for t, p in zip(g.t, g.points)], "geodesic")
    if c.plots:
        rp.write_svg(out / "geodesic.svg", rp.svg_lines({"geodesic": (g.points[:, 0], g.points[:, 1])},
                                                        title="geodesic", xlabel="x1", ylabel="x2"))
    return res


def cmd_membership(c: ExperimentConfig, out: Path) -> dict:
    s = make_solver(c)
    rep = validate_membership(s, c.alpha, c.pair_samples, c.membership_tol, seed=c.seed,
                              length_pairs=c.length_pairs)
    res = {"command": "membership", "h": c.h, "stencil": c.stencil, "weight": c.weight, **rep.to_dict()}
    rp.write_json(out / "membership.json", res)
    return res


def cmd_counterexample(c: ExperimentConfig, out: Path) -> dict:
    rep = run_counterexample(c.n_values, c.h, c.tol, c.stencil, c.mono_tol,
                             cross_check_h=c.h / 2 if c.cross_check else None, threads=c.threads)
    res = {"command": "counterexample", **rep.to_dict()}
    rp.write_json(out / "counterexample.json", res)
    rp.write_csv(out / "counterexample.csv", ["n", "d_n_ab", "bound_ok"], rep.rows(), "counterexample")
    if c.plots:
        rp.write_svg(out / "counterexample.svg", rp.svg_lines(
            {"d_n(a,b)": (rep.n_values, rep.distances)}, title="counterexample distances",
            xlabel="n", ylabel="d_n(a,b)",
            hlines={"11/8": UPPER_BOUND, "7/4": REFERENCE, "oracle": LIMIT_CLOSED_FORM}))
    return res


def cmd_gamma(c: ExperimentConfig, out: Path) -> dict:
    dom = Domain(*c.domain)
    if c.gamma_sequence == "constant":
        d = make_solver(c)
        seq = MetricSequence.constant(d, c.alpha, c.gamma_length)
        limit = d
    else:
        seq = MetricSequence([DistanceSolver(dom, counterexample_metric(n), c.h, c.stencil) for n in c.n_values],
                             c.alpha, list(c.n_values))
        limit = EuclideanOracle(2.0, dom)
    curve = Curve.segment(c.x, c.y)
    lrep = gamma_L_check(seq, limit, [curve], tol=c.tol)
    jrep = gamma_J_check(seq, limit, [(c.x, c.y)], tol=c.tol)
    x0 = np.asarray(c.x)
    u = distance_to(limit, x0) if hasattr(limit, "distances_from") else ScalarField(
        lambda p: 2.0 * np.hypot(p[:, 0] - x0[0], p[:, 1] - x0[1]), tag="2|x-x0|")
    ex = CompactExhaustion(dom)
    frep = gamma_F_check(seq, limit, [u], ex, eval_pairs=default_pairs(dom, 9, 64, seed=c.seed), tol=c.tol)
    reports = {"L": lrep, "J": jrep, "F": frep}
    res = {"command": "gamma", "sequence": c.gamma_sequence, "h": c.h,
           "reports": {k: v.to_dict() for k, v in reports.items()},
           "passed": all(v.passed for v in reports.values())}
    rp.write_json(out / "gamma.json", res)
    rows = []
    for k, v in reports.items():
        for i, it in enumerate(v.items):
            rows.append((k, i, it["liminf_margin"], it["limsup_margin"], it["passed"]))
    rp.write_csv(out / "gamma.csv", ["functional", "item", "liminf_margin", "limsup_margin", "passed"],
                 rows, "gamma")
    return res


DISPATCH = {"distance": cmd_distance, "geodesic": cmd_geodesic, "membership": cmd_membership,
            "counterexample": cmd_counterexample, "gamma": cmd_gamma}
MODULE_OF = {"distance": "conformal-solver", "geodesic": "conformal-solver", "membership": "conformal-solver",
             "counterexample": "counterexample", "gamma": "gamma-harness"}


def run_experiment(c: ExperimentConfig) -> int:
    out = Path(c.out_dir)
    try:
        res = DISPATCH[c.command](c, out)
    except (ValueError, RuntimeError, OSError) as e:
        echo = json.dumps(rp.to_jsonable(c.to_dict()), sort_keys=True)
        print(f"error in {MODULE_OF[c.command]} ({type(e).__name__}): {e}\ninput: {echo}", file=sys.stderr)
        return EXIT_ERROR
    ok = bool(res["passed"])
    print(f"{c.command}: {'PASS' if ok else 'FAIL'} (reports in {out})")
    if not ok:
        print("failing checks: " + ", ".join(failures(res)), file=sys.stderr)
    return 0 if ok else EXIT_FAIL


def failures(res: dict) -> list:
    if "checks" in res:
        return [k for k, v in sorted(res["checks"].items()) if not v]
    if "reports" in res:
        return [k for k, v in sorted(res["reports"].items()) if not v["passed"]]
    found = [k for k in ("bounds_ok", "length_ok", "converged") if res.get(k) is False]
    return found or ["passed"]


def main(argv=None) -> int:
    try:
        c = parse_config(argv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(c)


if __name__ == "__main__":
    sys.exit(main())
