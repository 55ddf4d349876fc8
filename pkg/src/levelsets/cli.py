"""Command-line front end.

Exit codes: 0 success, 1 self-test failure, 2 usage or validation error,
3 runtime failure. A ``--config`` file is a flat JSON object keyed by flag
name; explicit flags override its values.
"""
from __future__ import annotations

import argparse
import dataclasses
import functools
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ComputationError, LevelSetError, OutputExists, ValidationError

SUBCOMMANDS = ("estimate", "rates", "equivalence", "limit", "compare", "selftest")


def body_record(body) -> dict:
    from .geometry import Ball, Ellipsoid, Interval, Square

    if isinstance(body, Interval):
        return {"type": "interval", "a": body.a, "b": body.b}
    if isinstance(body, Ball):
        return {"type": "ball", "center": list(body.center), "radius": body.radius}
    if isinstance(body, Ellipsoid):
        return {"type": "ellipsoid", "center": list(body.center), "shape": [list(r) for r in body.shape]}
    if isinstance(body, Square):
        return {"type": "square", "center": list(body.center), "side": body.side}
    raise ValidationError(f"cannot serialise {type(body).__name__}")


def _dump(obj, out: str | None, force: bool = True):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.exists() and not force:
        raise OutputExists(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _workers(args) -> int:
    from .experiments import default_workers

    if getattr(args, "workers", None) is None:
        return default_workers()
    if args.workers < 1:
        raise ValidationError("--workers must be at least 1")
    return args.workers


# ---------------------------------------------------------------- subcommands

def cmd_estimate(args) -> int:
    from .estimators import SearchConfig, estimate
    from .experiments import estimator_kind
    from .geometry import hausdorff_distance, sym_diff_volume
    from .models import builtin_model, probability_symdiff

    model = builtin_model(args.model, args.lam)
    if args.n < 1:
        raise ValidationError("--n must be at least 1")
    cls = args.set_class or ("intervals" if model.dimension == 1 else "balls")
    if (model.dimension == 1) != (cls == "intervals"):
        raise ValidationError(f"set class {cls!r} does not fit the {model.dimension}D model {model.name}")
    x = model.sample(args.n, args.seed)
    kind = estimator_kind(args.estimator, model)
    res = estimate(x, kind, "balls" if cls == "intervals" else cls,
                   SearchConfig(restarts=args.restarts, seed=args.seed))
    L = model.oracle.body
    count = int(res.empirical_mass * res.n)
    _dump({
        "model": model.name, "lambda": model.lam, "estimator": args.estimator, "class": cls,
        "n": res.n, "seed": args.seed,
        "set": body_record(res.set),
        "objective": res.objective,
        "diagnostics": {
            "tie_count": res.diagnostics["tie_count"],
            "search_restarts": res.diagnostics["search_restarts"],
            "empirical_count": count,
            "empirical_mass": f"{count}/{res.n}",
        },
        "oracle": {
            "level_set": body_record(L),
            "mu_symdiff": float(sym_diff_volume(res.set, L)),
            "p_symdiff": float(probability_symdiff(model, res.set)),
            "hausdorff": float(hausdorff_distance(res.set, L)),
        },
    }, args.out, args.force)
    return 0


def _experiment_config(args, **override):
    from .experiments import ExperimentConfig

    fields = dict(model=args.model, lam=args.lam, set_class=args.set_class or None,
                  n_grid=tuple(args.n_grid), replications=args.replications, seed=args.seed,
                  limit_draws=args.draws, limit_step=args.step, limit_c_max=args.c_max,
                  search_restarts=args.restarts, output_dir=getattr(args, "out_dir", None),
                  force=args.force, estimators=tuple(args.estimators), experiment_id=args.experiment_id)
    fields.update(override)
    if fields["set_class"] is None:
        from .models import builtin_model

        fields["set_class"] = "intervals" if builtin_model(args.model, args.lam).dimension == 1 else "balls"
    return ExperimentConfig(**fields)


def _print_summary(summary: dict):
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_rates(args) -> int:
    from .experiments import run_rates

    _, summary = run_rates(_experiment_config(args), _workers(args))
    if args.out_dir is None:
        _print_summary(summary)
    return 0


def cmd_equivalence(args) -> int:
    from .experiments import run_rates

    cfg = _experiment_config(args, estimators=("min-volume", "max-prob"))
    _, summary = run_rates(cfg, _workers(args))
    if args.out_dir is None:
        _print_summary(summary["equivalence"])
    return 0 if summary["equivalence"]["pass"] or not args.strict else 1


def cmd_limit(args) -> int:
    from .cylinder import DriftSpec
    from .limit import PlanarGrid, WienerGrid, draw_Z_ball2d, draw_Z_interval, draw_Z_interval_constrained, z_distribution
    from .models import builtin_model

    model = builtin_model(args.model, args.lam)
    drift = DriftSpec.from_model(model)
    if model.dimension == 1:
        op = draw_Z_interval_constrained if args.constrained else draw_Z_interval
        draw = functools.partial(op, drift, model.lam, WienerGrid(args.step, args.c_max))
    else:
        draw = functools.partial(draw_Z_ball2d, drift, model.lam, model.oracle.body,
                                 PlanarGrid(step=args.step, c_max=args.c_max), constrained=args.constrained)
    dist = z_distribution(draw, args.draws, args.seed, _workers(args))
    if args.out is None:
        sys.stdout.write(dist.to_csv())
    else:
        path = Path(args.out)
        if path.exists() and not args.force:
            raise OutputExists(f"{path} exists; pass --force to overwrite")
        path.parent.mkdir(parents=True, exist_ok=True)
        dist.to_csv(path)
    return 0


def cmd_compare(args) -> int:
    from .experiments import run_limit_comparison

    cfg = _experiment_config(args, n_grid=(args.n_grid[-1],))
    result = run_limit_comparison(cfg, _workers(args))
    if not args.samples:
        result.pop("samples")
    _dump(result, args.out, args.force)
    return 0


# ---------------------------------------------------------------- self-test

def _check_oracle_equivalence():
    from .estimators import ExcessMass, MaxProb, MaxProbEqualVol, MinVolume, brute_force_oracle_1d, estimate_1d

    rng = np.random.default_rng(20240601)
    for it in range(300):
        if it % 2:
            x = np.sort(rng.random(int(rng.integers(1, 51))))
            lam = float(rng.uniform(0, 3))
        else:
            # dyadic data with exact ties exercise the tie rule
            x = np.sort(rng.integers(0, 8, int(2 ** rng.integers(0, 6))) / 8)
            lam = float(rng.choice([0.25, 0.5, 1.0, 2.0, 4.0]))
        for kind in (ExcessMass(lam), MinVolume(float(rng.choice([0.25, 0.5, 0.75, 1.0]))),
                     MaxProb(float(rng.choice([0.125, 0.25, 0.5]))), MaxProbEqualVol(0.25)):
            fast, slow = estimate_1d(x, kind), brute_force_oracle_1d(x, kind)
            if fast.objective != slow.objective or fast.set != slow.set:
                return f"{kind} on n={x.size}: fast {fast.set} vs oracle {slow.set}"
    return None


def _check_analytic_oracles():
    from .models import builtin_model, excess_mass_of, probability

    m = builtin_model("triangular1d", 0.5)
    L = m.oracle.body
    got = (probability(m, L), L.volume, excess_mass_of(m, L))
    if max(abs(a - b) for a, b in zip(got, (0.75, 1.0, 0.25))) > 1e-10:
        return f"triangular oracle {got}"
    r = builtin_model("cone2d", 3 / (2 * math.pi)).oracle.body.radius
    if abs(r - 0.5) > 1e-10:
        return f"cone radius {r}"
    return None


def _check_steiner():
    from .geometry import Ball, Interval, Square, parallel_set_volume, steiner_data

    for body in (Ball((0.0, 0.0), 1.0), Interval(0.0, 1.0), Square((0.0, 0.0), 1.0)):
        data = steiner_data(body)
        for eps in (0.01, 0.1, 0.5):
            a, b = parallel_set_volume(body, eps), data.outer_shell_volume(eps)
            if abs(a - b) > 4 * np.finfo(float).eps * max(1.0, a):
                return f"{type(body).__name__} eps={eps}: {a} vs {b}"
    disc = parallel_set_volume(Ball((0.0, 0.0), 1.0), 0.1)
    if abs(disc - (2 * math.pi * 0.1 + math.pi * 0.01)) > 1e-15:
        return f"disc shell {disc}"
    return None


def _check_round_trips():
    from .cylinder import demagnify, magnify
    from .geometry import Ball, Interval, sym_diff_volume

    L = Interval(-0.5, 0.5)
    for A in (Interval(-0.6, 0.55), Interval(-0.45, 0.7), L):
        back = demagnify(L, magnify(L, A, 0.1), 0.1)
        if sym_diff_volume(A, back) > 1e-9:
            return f"interval {A} -> {back}"
    D = Ball((0.0, 0.0), 1.0)
    A = Ball((0.02, -0.01), 1.03)
    back = demagnify(D, magnify(D, A, 0.05), 0.05)
    if sym_diff_volume(A, back) > 1e-3:
        return f"disc {A} -> {back}"
    return None


def _check_drift():
    from .cylinder import DriftSpec, IntervalShifts, drift_D, empirical_drift_Dn, shifted_interval
    from .models import builtin_model

    m = builtin_model("triangular1d", 0.5)
    spec = DriftSpec.from_model(m)
    if abs(drift_D(IntervalShifts(1.0, 1.0), spec) - 1.0) > 1e-15:
        return "closed form for shifts (1, 1)"
    for n in (10 ** 3, 10 ** 6):
        eps = n ** (-1 / 3)
        A = shifted_interval(m.oracle.body, 0.5, -1.0, eps)
        gap = abs(empirical_drift_Dn(m, A, n) - drift_D(IntervalShifts(0.5, -1.0), spec))
        if gap > 1e-9:
            return f"finite-n drift off by {gap} at n={n}"
    return None


def _check_constraints():
    from .estimators import max_prob_1d, min_volume_1d, required_count
    from .models import builtin_model

    m = builtin_model("triangular1d", 0.5)
    for seed in range(20):
        n = 10 + 37 * seed
        x = np.sort(m.sample(n, seed))
        r = min_volume_1d(x, m.oracle.p_lambda)
        if r.empirical_mass * n != required_count(n, m.oracle.p_lambda):
            return f"min-volume mass {r.empirical_mass} at n={n}"
        if max_prob_1d(x, m.oracle.v_lambda).set.volume > m.oracle.v_lambda:
            return f"max-prob volume at n={n}"
    return None


SELFTEST_CHECKS = (
    ("oracle-equivalence", _check_oracle_equivalence),
    ("analytic-oracles", _check_analytic_oracles),
    ("steiner-identities", _check_steiner),
    ("round-trips", _check_round_trips),
    ("drift-closed-forms", _check_drift),
    ("constraint-identities", _check_constraints),
)


def cmd_selftest(args) -> int:
    from .estimators.interval import flipped_tie_rule

    failures = 0
    start = time.perf_counter()
    for name, check in SELFTEST_CHECKS:
        try:
            if args.inject_fault == "tie-rule" and name == "oracle-equivalence":
                with flipped_tie_rule():
                    problem = check()
            else:
                problem = check()
        except LevelSetError as exc:
            problem = f"{type(exc).__name__}: {exc}"
        if problem is None:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {problem}")
    print(f"{'PASS' if failures == 0 else 'FAIL'} selftest: {len(SELFTEST_CHECKS) - failures}/"
          f"{len(SELFTEST_CHECKS)} checks in {time.perf_counter() - start:.1f}s")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------- parser

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_model(p, lam_default=0.5):
    p.add_argument("--model", default="triangular1d")
    p.add_argument("--lambda", dest="lam", type=float, default=lam_default)
    p.add_argument("--class", dest="set_class", choices=("intervals", "balls", "ellipsoids"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=_positive_int, default=16, help="2D search restarts")


def _add_experiment(p):
    p.add_argument("--n-grid", dest="n_grid", type=_positive_int, nargs="+", default=[1000, 8000, 64000])
    p.add_argument("--replications", type=int, default=500)
    p.add_argument("--estimators", nargs="+", default=["excess-mass", "min-volume", "max-prob"])
    p.add_argument("--experiment-id", dest="experiment_id", default=None)
    p.add_argument("--draws", type=_positive_int, default=10_000, help="limit draws")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--c-max", dest="c_max", type=float, default=8.0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--force", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelsets", description="Level-set estimation over convex classes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="sample from a model and run one estimator")
    _add_model(p)
    p.add_argument("--estimator", default="excess-mass",
                   choices=("excess-mass", "min-volume", "max-prob", "max-prob-equal-vol"))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_estimate)

    for name, func, helptext in (("rates", cmd_rates, "Monte Carlo rates of the symmetric difference"),
                                 ("equivalence", cmd_equivalence, "min-volume versus max-prob distance")):
        p = sub.add_parser(name, help=helptext)
        _add_model(p)
        _add_experiment(p)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        if name == "equivalence":
            p.add_argument("--strict", action="store_true", help="exit 1 when the summary does not pass")
        p.set_defaults(func=func)

    p = sub.add_parser("limit", help="simulate the limiting argmax set")
    _add_model(p)
    p.add_argument("--draws", type=_positive_int, default=10_000)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--c-max", dest="c_max", type=float, default=8.0)
    p.add_argument("--constrained", action="store_true", help="balanced class (equal outside/inside mass)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("compare", help="KS distance between finite-n and limit laws")
    _add_model(p)
    _add_experiment(p)
    p.add_argument("--out", default=None)
    p.add_argument("--samples", action="store_true", help="include the compared samples")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("selftest", help="fast invariant checks")
    p.add_argument("--inject-fault", dest="inject_fault", choices=("tie-rule",), default=None,
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> list:
    """Strip ``--config PATH`` from argv and install its values as subcommand defaults."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    try:
        values = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(values, dict):
        raise ValidationError("config file must hold a flat JSON object")
    command = next((a for a in rest if a in SUBCOMMANDS), None)
    if command is None:
        raise ValidationError("a subcommand is required")
    subparser = parser._subparsers._group_actions[0].choices[command]
    dests = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in values.items():
        dest = {"lambda": "lam", "class": "set_class"}.get(key, key.replace("-", "_"))
        if dest not in dests or dest in ("help", "func", "inject_fault"):
            raise ValidationError(f"unknown config key {key!r} for {command}")
        defaults[dest] = value
    subparser.set_defaults(**defaults)
    return rest


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "experiment_id", "unset") is None:
        args.experiment_id = args.command
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ComputationError, LevelSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
