"""Command-line interface.

Exit codes: 0 ok, 2 input error, 3 numerical or solver error.
"""
import argparse
import sys

import numpy as np

from . import io as fio
from .averaging import IrlsConfig, Method, as_signature, flag_mean, flag_median
from .errors import FlagstatError, InvalidInput, NumericalFailure, SignatureMismatch
from .flag import FlagSignature, chordal_distance
from .motion import RigidMotion, average_motions_detailed, pose_error, rotation_angle
from .numerics import RngStream
from .plotting import sweep_chart
from .stiefel import TrustRegionConfig
from . import synthlab

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3

PRESETS = {
    "init-robustness": synthlab.init_robustness_config,
    "outliers": synthlab.outlier_sweep_config,
    "noise": synthlab.noise_sweep_config,
    "init": synthlab.init_ablation_config,
    "motion-noise": synthlab.motion_noise_config,
    "motion-outliers": synthlab.motion_outlier_config,
    "lambda": synthlab.lambda_ablation_config,
    "rotation-noise": synthlab.rotation_noise_config,
}


def _parse_signature(text):
    """'1,3;10' or '1,3' (ambient taken from the file)."""
    dims, _, ambient = text.partition(";")
    try:
        return [int(x) for x in dims.split(",")], (int(ambient) if ambient else None)
    except ValueError:
        raise InvalidInput(f"--signature: cannot parse {text!r}; expected e.g. 1,3;10") from None


def _load_points(args):
    _, points = fio.read_flag_set(args.input)
    if args.signature:
        dims, ambient = _parse_signature(args.signature)
        sig = FlagSignature(dims, ambient or points[0].signature.ambient)
        if sig.ambient != points[0].signature.ambient or sig.dk != points[0].signature.dk:
            raise SignatureMismatch(f"--signature {sig} does not fit points of type {points[0].signature}")
        points = [as_signature(p, sig) for p in points]
    return points


def _weights(args, count):
    return None if args.weights is None else fio.read_weights(args.weights, count)


def _rtr_config(args):
    kw = {"rng": RngStream(args.seed)}
    if args.tol is not None:
        kw["gradient_norm_tolerance"] = args.tol
    if args.max_iter is not None:
        kw["max_outer_iterations"] = args.max_iter
    return TrustRegionConfig(**kw)


def _irls_config(args):
    kw = {"inner": TrustRegionConfig(rng=RngStream(args.seed))}
    if args.epsilon is not None:
        kw["epsilon"] = args.epsilon
    if args.tol is not None:
        kw["convergence_tolerance"] = args.tol
    if args.max_iter is not None:
        kw["max_iterations"] = args.max_iter
    return IrlsConfig(**kw)


def _emit_report(args, report):
    text = fio.dumps(report) + "\n"
    if args.report:
        fio.write_text(args.report, text)
    else:
        sys.stdout.write(text)


def _average_report(rep):
    return {
        "method": rep.method.value,
        "objective": rep.objective,
        "iterations": rep.iterations,
        "objectives": [float(v) for v in rep.objectives],
        "signature": list(rep.centroid.signature.dims),
        "ambient": rep.centroid.signature.ambient,
    }


def cmd_mean(args):
    points = _load_points(args)
    rep = flag_mean(points, _weights(args, len(points)), _rtr_config(args))
    if args.out:
        fio.write_flag_set(args.out, [rep.centroid])
    _emit_report(args, _average_report(rep))
    return EXIT_OK


def cmd_median(args):
    points = _load_points(args)
    rep = flag_median(points, _weights(args, len(points)), _irls_config(args))
    if args.out:
        fio.write_flag_set(args.out, [rep.centroid])
    _emit_report(args, _average_report(rep))
    return EXIT_OK


def _single_point(path):
    _, points = fio.read_flag_set(path)
    if len(points) != 1:
        raise InvalidInput(f"{path}: expected exactly one point, found {len(points)}")
    return points[0]


def cmd_dist(args):
    d = chordal_distance(_single_point(args.file_a), _single_point(args.file_b))
    print(fio.format_real(d))
    return EXIT_OK


def _motion_report(args, result, q, errors):
    return {
        "method": (Method.FLAG_MEDIAN if q == 1 else Method.FLAG_MEAN).value,
        "objective": result.report.objective,
        "iterations": result.report.iterations,
        "lambda": float(args.lam),
        "pose_errors": [float(e) for e in errors],
    }


def cmd_motion_avg(args):
    motions = fio.read_motion_set(args.input)
    result = average_motions_detailed(
        motions, _weights(args, len(motions)), args.q, args.lam, _rtr_config(args), _irls_config(args)
    )
    errors = [pose_error(g, result.motion, args.lambda_t) for g in motions]
    if args.out:
        fio.write_motion_set(args.out, [result.motion])
    report = _motion_report(args, result, args.q, errors)
    report["lambda_t"] = float(args.lambda_t)
    _emit_report(args, report)
    return EXIT_OK


def _read_rotations(path):
    doc = fio._load_json(path)
    if isinstance(doc, dict) and "rotations" in doc:
        rots = doc["rotations"]
        if not isinstance(rots, list):
            raise fio.FormatError(f"{path}: 'rotations' must be a list")
        wrapped = {"motions": [{"rotation": r, "translation": [0.0, 0.0, 0.0]} for r in rots]}
        motions = fio.parse_motion_set(wrapped, str(path))
    else:
        motions = fio.parse_motion_set(doc, str(path))
    return [RigidMotion(g.rotation, np.zeros(3)) for g in motions]


def cmd_rotation_avg(args):
    motions = _read_rotations(args.input)
    args.lam = 1.0
    result = average_motions_detailed(
        motions, _weights(args, len(motions)), args.q, 1.0, _rtr_config(args), _irls_config(args)
    )
    if np.linalg.norm(result.motion.translation) > 1e-8:
        raise NumericalFailure(f"rotation average produced translation {result.motion.translation}")
    out = RigidMotion(result.motion.rotation, np.zeros(3))
    errors = [rotation_angle(g.rotation.T @ out.rotation) for g in motions]
    if args.out:
        fio.write_json(args.out, {"rotations": [[float(v) for v in out.rotation.reshape(-1)]]})
    report = _motion_report(args, result, args.q, errors)
    del report["lambda"]
    report["angle_errors"] = report.pop("pose_errors")
    _emit_report(args, report)
    return EXIT_OK


def _bench_config(args):
    if args.config:
        doc = fio._load_json(args.config)
        if not isinstance(doc, dict):
            raise fio.FormatError(f"{args.config}: top level must be an object")
        try:
            cfg = synthlab.ExperimentConfig.from_dict(doc)
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"{args.config}: {exc}") from exc
    elif args.experiment in PRESETS:
        kw = {"base_seed": args.seed}
        if args.trials is not None:
            kw["trials"] = args.trials
        cfg = PRESETS[args.experiment](**kw)
    else:
        raise InvalidInput(f"unknown experiment {args.experiment!r}; choose one of {sorted(PRESETS)} or pass --config")
    overrides = {}
    if args.config and args.trials is not None:
        overrides["trials"] = args.trials
    if args.timing:
        overrides["timing"] = True
    if overrides:
        fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        fields.update(overrides)
        cfg = synthlab.ExperimentConfig(**fields)
    return cfg


def cmd_bench(args):
    cfg = _bench_config(args)
    rows = synthlab.run_experiment(cfg)
    text = synthlab.rows_to_csv(rows)
    if args.out:
        fio.write_text(args.out, text)
    else:
        sys.stdout.write(text)
    summary = synthlab.aggregate(rows)
    for s in summary:
        print(
            f"{s['params']}  {s['method']:<14} error {s['error_mean']:.4g} +/- {s['error_std']:.3g}"
            f"  iterations {s['iterations_mean']:.3g}  failures {s['failures']}",
            file=sys.stderr,
        )
    if args.plot:
        fio.write_text(args.plot, sweep_chart(summary, title=cfg.kind, log_y=args.log_y))
    return EXIT_OK


def cmd_validate(args):
    doc = fio._load_json(args.input)
    if isinstance(doc, dict) and "motions" in doc:
        motions = fio.parse_motion_set(doc, args.input)
        print(f"ok: {len(motions)} rigid motions")
    elif isinstance(doc, dict) and "rotations" in doc:
        rots = _read_rotations(args.input)
        print(f"ok: {len(rots)} rotations")
    else:
        sig, points = fio.parse_flag_set(doc, args.input)
        print(f"ok: {len(points)} points on {sig}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="flagstat", description="Chordal flag-means and flag-medians, motion averaging and synthetic benchmarks.")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp, median_flags=True):
        sp.add_argument("--weights", help="JSON list of nonnegative weights, one per input")
        sp.add_argument("--max-iter", type=int, help="outer iteration cap (RTR for mean, IRLS for median)")
        sp.add_argument("--tol", type=float, help="gradient tolerance (mean) or objective-change tolerance (median)")
        sp.add_argument("--seed", type=int, default=0, help="seed for the random solver start")
        if median_flags:
            sp.add_argument("--epsilon", type=float, help="IRLS distance floor")
        sp.add_argument("--out", help="write the average here")
        sp.add_argument("--report", help="write the JSON report here instead of stdout")

    for name, fn, median in (("mean", cmd_mean, False), ("median", cmd_median, True)):
        sp = sub.add_parser(name, help=f"chordal flag-{name} of a flag-set file")
        sp.add_argument("input")
        sp.add_argument("--signature", help="reinterpret points under another type, e.g. 1,3;10")
        solver_flags(sp, median)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("dist", help="chordal distance between two single-point files")
    sp.add_argument("file_a")
    sp.add_argument("file_b")
    sp.set_defaults(func=cmd_dist)

    sp = sub.add_parser("motion-avg", help="average rigid motions through SO(4) flags")
    sp.add_argument("input")
    sp.add_argument("--q", type=int, choices=(1, 2), default=2, help="1 = flag-median, 2 = flag-mean")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0, help="contraction scale")
    sp.add_argument("--lambda-t", dest="lambda_t", type=float, default=1.0, help="translation weight in pose error")
    solver_flags(sp)
    sp.set_defaults(func=cmd_motion_avg)

    sp = sub.add_parser("rotation-avg", help="average rotations (translations ignored)")
    sp.add_argument("input")
    sp.add_argument("--q", type=int, choices=(1, 2), default=2)
    solver_flags(sp)
    sp.set_defaults(func=cmd_rotation_avg)

    sp = sub.add_parser("bench", help="run a synthetic sweep and emit CSV")
    sp.add_argument("experiment", nargs="?", default=None, help=f"preset: {', '.join(PRESETS)}")
    sp.add_argument("--config", help="ExperimentConfig as JSON")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--timing", action="store_true", help="fill the wall_time_ms column")
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.add_argument("--plot", help="SVG line chart of mean error per cell")
    sp.add_argument("--log-y", action="store_true")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("validate", help="check that a flag-set or motion-set file loads")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"flagstat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidInput, FlagstatError) as exc:
        print(f"flagstat: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"flagstat: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
