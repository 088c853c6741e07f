"""Seeded synthetic data and experiment sweeps.

Every trial draws from its own :class:`RngStream`, derived from the base seed,
the grid cell and the trial index, so rows do not depend on execution order.
"""
import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .averaging import (
    IrlsConfig,
    Method,
    as_signature,
    euclidean_mean_baseline,
    flag_mean,
    flag_median,
    gr_mean_baseline,
)
from .errors import FlagstatError, InvalidInput, RankDeficient
from .flag import FlagSignature, chordal_distance, make_flag
from .motion import RigidMotion, average_motions_detailed, contract, expand, pose_error, rotation_angle
from .numerics import RngStream, thin_qr
from .stiefel import TrustRegionConfig

MAX_DRAWS = 8

FLAG_KINDS = ("FlagNoiseSweep", "FlagOutlierSweep", "InitAblation")
MOTION_KINDS = ("MotionNoiseSweep", "MotionOutlierSweep", "LambdaAblation", "RotationNoiseSweep")
KINDS = FLAG_KINDS + MOTION_KINDS

# motion noise grid
MOTION_ROTATION_NOISE_DEG = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
MOTION_TRANSLATION_NOISE = (0.0, 0.02, 0.05, 0.1, 0.2, 0.3)
LAMBDA_GRID = (0.002, 0.025, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.8, 2.0, 2.25, 2.5)

CSV_COLUMNS = ("experiment", "params", "trial", "seed", "method", "error", "objective", "iterations", "wall_time_ms", "status")


# ---------------------------------------------------------------- flag data


@dataclass(frozen=True)
class FlagClusterSpec:
    signature: FlagSignature
    count: int
    noise: float
    outlier_count: int = 0
    outlier_noise: float = 1.0
    rng: RngStream = field(default_factory=lambda: RngStream(0))

    def __post_init__(self):
        if self.count < 1:
            raise InvalidInput("count must be >= 1")
        if not 0 <= self.outlier_count <= self.count:
            raise InvalidInput("outlier_count must lie in [0, count]")
        if self.noise < 0 or self.outlier_noise < 0:
            raise InvalidInput("noise levels must be >= 0")


def _perturbed_flag(gen, center, noise, sig):
    d, k = center.shape
    for _ in range(MAX_DRAWS):
        try:
            return make_flag(thin_qr(center + noise * gen.uniform(-0.5, 0.5, (d, k)))[0], sig)
        except RankDeficient:
            continue
    raise RankDeficient(k - 1, f"no full-rank draw after {MAX_DRAWS} attempts")


def gen_flag_cluster(spec):
    """Center C = QR(U[-.5,.5)); inliers QR(C + noise Z), then outliers QR(C + outlier_noise Z)."""
    sig = spec.signature
    gen = spec.rng.generator()
    center = _perturbed_flag(gen, np.zeros((sig.ambient, sig.dk)), 1.0, sig)
    inliers = spec.count - spec.outlier_count
    points = [_perturbed_flag(gen, center.rep, spec.noise, sig) for _ in range(inliers)]
    points += [_perturbed_flag(gen, center.rep, spec.outlier_noise, sig) for _ in range(spec.outlier_count)]
    return center, points


# -------------------------------------------------------------- motion data


NOISE_MODELS = ("se3", "so4")
GENERATION_LAMBDA = 1.0


@dataclass(frozen=True)
class MotionClusterSpec:
    """Noisy copies of a random center motion plus uniform outliers.

    ``noise_model="se3"`` perturbs rotation and translation separately.
    ``noise_model="so4"`` perturbs the contracted center on SO(4) and maps back
    with scale ``GENERATION_LAMBDA``, so that scale is the natural one for the data.
    """

    count: int
    axis_noise_deg: float = 0.0
    translation_noise: float = 0.0
    outlier_fraction: float = 0.0
    scene_radius: float = 1.0
    rng: RngStream = field(default_factory=lambda: RngStream(0))
    noise_model: str = "se3"

    def __post_init__(self):
        if self.count < 1:
            raise InvalidInput("count must be >= 1")
        if self.noise_model not in NOISE_MODELS:
            raise InvalidInput(f"noise_model must be one of {NOISE_MODELS}, got {self.noise_model!r}")
        if self.axis_noise_deg < 0 or self.translation_noise < 0:
            raise InvalidInput("noise levels must be >= 0")
        if not 0 <= self.outlier_fraction < 1:
            raise InvalidInput("outlier_fraction must lie in [0, 1)")
        if not self.scene_radius > 0:
            raise InvalidInput("scene_radius must be > 0")

    @property
    def outlier_count(self):
        return int(round(self.outlier_fraction * self.count))


def random_rotation(gen):
    """Haar-uniform rotation: QR of a Gaussian 3x3 with the determinant fixed to +1."""
    q, r = np.linalg.qr(gen.standard_normal((3, 3)))
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_in_ball(gen, radius):
    v = gen.standard_normal(3)
    v /= np.linalg.norm(v)
    return radius * gen.uniform() ** (1.0 / 3.0) * v


def axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = _skew3(axis)
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def random_motion(gen, radius):
    return RigidMotion(random_rotation(gen), random_in_ball(gen, radius))


def _skew3(w):
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])


def _so4_perturbation(gen, sigma, translation_noise):
    """exp of a random so(4) element: rotation part about a random axis with
    angle ~ N(0, sigma), coupling part sized so the expanded translation noise
    has standard deviation about ``translation_noise`` per axis."""
    axis = gen.standard_normal(3)
    w = sigma * gen.standard_normal() * axis / np.linalg.norm(axis)
    v = 0.5 * translation_noise / GENERATION_LAMBDA * gen.standard_normal(3)
    xi = np.zeros((4, 4))
    xi[:3, :3] = _skew3(w)
    xi[:3, 3] = v
    xi[3, :3] = -v
    return expm(xi)


def gen_motion_cluster(spec):
    """Noisy copies of a random center motion followed by uniform random outliers.

    Inlier rotations are the center rotated about a uniform random axis by an
    angle with standard deviation ``axis_noise_deg``; translations get
    isotropic Gaussian noise with standard deviation ``translation_noise``.
    """
    gen = spec.rng.generator()
    center = random_motion(gen, spec.scene_radius)
    sigma = math.radians(spec.axis_noise_deg)
    motions = []
    if spec.noise_model == "so4":
        m_c = contract(center, GENERATION_LAMBDA)
        for _ in range(spec.count - spec.outlier_count):
            motions.append(expand(_so4_perturbation(gen, sigma, spec.translation_noise) @ m_c, GENERATION_LAMBDA))
    else:
        for _ in range(spec.count - spec.outlier_count):
            axis = gen.standard_normal(3)
            angle = sigma * gen.standard_normal()
            t_noise = spec.translation_noise * gen.standard_normal(3)
            motions.append(RigidMotion(axis_angle(axis, angle) @ center.rotation, center.translation + t_noise))
    motions += [random_motion(gen, spec.scene_radius) for _ in range(spec.outlier_count)]
    return center, motions


# -------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative sweep: one row per (cell, trial, method).

    ``grid`` is a list of cells, each a dict of parameters that override
    ``params``. ``shared_data`` keeps one data set per trial across all cells
    (ablations); otherwise every cell draws fresh data.
    """

    kind: str
    grid: tuple
    trials: int = 1
    base_seed: int = 0
    methods: tuple = ()
    params: dict = field(default_factory=dict)
    shared_data: bool = False
    random_init: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.trials < 1:
            raise InvalidInput("trials must be >= 1")
        if not self.grid:
            raise InvalidInput("grid must be nonempty")
        object.__setattr__(self, "grid", tuple(dict(c) for c in self.grid))
        methods = tuple(Method(m) if not isinstance(m, Method) else m for m in (self.methods or default_methods(self.kind)))
        allowed = default_methods(self.kind) if self.kind in MOTION_KINDS else tuple(Method)
        for m in methods:
            if m not in allowed:
                raise InvalidInput(f"method {m.value} is not available for {self.kind}")
        object.__setattr__(self, "methods", methods)

    def cell_params(self, index):
        merged = dict(DEFAULT_PARAMS[self.kind])
        merged.update(self.params)
        merged.update(self.grid[index])
        return merged

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidInput(f"unknown config fields: {sorted(unknown)}")
        if "grid" in data and isinstance(data["grid"], dict):
            data["grid"] = expand_grid(data["grid"])
        return cls(**data)


def expand_grid(axes):
    """Cartesian product of ``{name: [values]}`` as a list of cells."""
    cells = [{}]
    for name, values in axes.items():
        cells = [dict(c, **{name: v}) for c in cells for v in values]
    return cells


def default_methods(kind):
    if kind in MOTION_KINDS:
        return (Method.FLAG_MEAN, Method.FLAG_MEDIAN)
    if kind == "InitAblation":
        return (Method.FLAG_MEAN, Method.FLAG_MEDIAN)
    return (Method.FLAG_MEAN, Method.FLAG_MEDIAN, Method.EUCLIDEAN_MEAN, Method.GR_MEAN)


DEFAULT_PARAMS = {
    "FlagNoiseSweep": {"dims": [1, 3], "ambient": 10, "count": 100, "delta": 0.001},
    "FlagOutlierSweep": {"dims": [1, 3], "ambient": 10, "count": 100, "delta": 0.001, "delta_out": 1.0, "outliers": 0},
    "InitAblation": {"dims": [1, 2, 3], "ambient": 10, "count": 100, "delta": 0.2, "delta_init": 0.0},
    "MotionNoiseSweep": {"count": 400, "axis_noise_deg": 0.0, "translation_noise": 0.0, "outlier_fraction": 0.0, "scene_radius": 1.0, "lam": 1.0, "lambda_t": 1.0},
    "MotionOutlierSweep": {"count": 400, "axis_noise_deg": 5.0, "translation_noise": 0.05, "outlier_fraction": 0.0, "scene_radius": 1.0, "lam": 1.0, "lambda_t": 1.0},
    "LambdaAblation": {"count": 250, "axis_noise_deg": math.degrees(0.075), "translation_noise": 0.15, "outlier_fraction": 0.0, "scene_radius": 1.0, "lam": 1.0, "lambda_t": 1.0, "noise_model": "so4"},
    "RotationNoiseSweep": {"count": 400, "axis_noise_deg": 5.0, "outlier_fraction": 0.0},
}

_DATA, _INIT = 0, 1


def trial_stream(cfg, cell, trial, purpose):
    cell_key = 0 if (cfg.shared_data and purpose == _DATA) else cell + 1
    return RngStream(cfg.base_seed, (cell_key << 40) | (trial << 8) | purpose)


@dataclass
class Row:
    experiment: str
    params: str
    cell: int
    trial: int
    seed: int
    method: str
    error: Optional[float]
    objective: Optional[float]
    iterations: Optional[int]
    wall_time_ms: Optional[float]
    status: str = "ok"


def format_params(params):
    return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def _run_flag_method(method, points, init, inner, weights=None):
    if method is Method.FLAG_MEAN:
        return flag_mean(points, weights, inner, init)
    if method is Method.FLAG_MEDIAN:
        return flag_median(points, weights, IrlsConfig(inner=inner), init)
    if method is Method.EUCLIDEAN_MEAN:
        return euclidean_mean_baseline(points, weights)
    return gr_mean_baseline(points, weights)


def flag_trial_inputs(cfg, cell, trial):
    """Everything a flag trial feeds its estimators: (center, points, init, inner config)."""
    p = cfg.cell_params(cell)
    sig = FlagSignature(tuple(p["dims"]), p["ambient"])
    outliers = int(p.get("outliers", 0))
    data_stream = trial_stream(cfg, cell, trial, _DATA)
    spec = FlagClusterSpec(sig, int(p["count"]), float(p["delta"]), outliers, float(p.get("delta_out", 1.0)), data_stream)
    center, points = gen_flag_cluster(spec)
    init_stream = trial_stream(cfg, cell, trial, _INIT)
    inner = TrustRegionConfig(rng=init_stream)
    init = None
    if cfg.kind == "InitAblation":
        gen = init_stream.generator()
        init = make_flag(thin_qr(center.rep + float(p["delta_init"]) * gen.uniform(-0.5, 0.5, center.rep.shape))[0], sig)
    return center, points, init, inner


def _flag_trial(cfg, cell, trial):
    p = cfg.cell_params(cell)
    data_stream = trial_stream(cfg, cell, trial, _DATA)
    center, points, init, inner = flag_trial_inputs(cfg, cell, trial)
    sig = center.signature
    rows = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            report = _run_flag_method(method, points, init, inner)
            centroid = report.centroid
            if centroid.signature != sig:
                centroid = as_signature(centroid, sig)
            rows.append(_row(cfg, p, cell, trial, data_stream, method, chordal_distance(centroid, center), report.objective, report.iterations, t0))
        except FlagstatError as exc:
            rows.append(_error_row(cfg, p, cell, trial, data_stream, method, exc))
    return rows


def _motion_trial(cfg, cell, trial):
    p = cfg.cell_params(cell)
    data_stream = trial_stream(cfg, cell, trial, _DATA)
    rotation_only = cfg.kind == "RotationNoiseSweep"
    spec = MotionClusterSpec(
        int(p["count"]),
        float(p["axis_noise_deg"]),
        0.0 if rotation_only else float(p["translation_noise"]),
        float(p.get("outlier_fraction", 0.0)),
        1.0 if rotation_only else float(p["scene_radius"]),
        data_stream,
        str(p.get("noise_model", "se3")),
    )
    center, motions = gen_motion_cluster(spec)
    if rotation_only:
        center = RigidMotion(center.rotation, np.zeros(3))
        motions = [RigidMotion(g.rotation, np.zeros(3)) for g in motions]
    lam = 1.0 if rotation_only else float(p["lam"])
    inner = TrustRegionConfig(rng=trial_stream(cfg, cell, trial, _INIT))
    rows = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        q = 2 if method is Method.FLAG_MEAN else 1
        try:
            out = average_motions_detailed(motions, None, q, lam, inner, IrlsConfig(inner=inner))
            if rotation_only:
                err = math.degrees(rotation_angle(center.rotation.T @ out.motion.rotation))
            else:
                err = pose_error(center, out.motion, float(p["lambda_t"]))
            rows.append(_row(cfg, p, cell, trial, data_stream, method, err, out.report.objective, out.report.iterations, t0))
        except FlagstatError as exc:
            rows.append(_error_row(cfg, p, cell, trial, data_stream, method, exc))
    return rows


def _row(cfg, p, cell, trial, stream, method, error, objective, iterations, t0):
    wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
    return Row(cfg.kind, format_params(p), cell, trial, stream.stream_id, method.value, float(error), float(objective), int(iterations), wall)


def _error_row(cfg, p, cell, trial, stream, method, exc):
    msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return Row(cfg.kind, format_params(p), cell, trial, stream.stream_id, method.value, None, None, None, None, msg)


def run_trial(cfg, cell, trial):
    """Rows for one (cell, trial); pure in its arguments."""
    if cfg.kind in FLAG_KINDS:
        return _flag_trial(cfg, cell, trial)
    return _motion_trial(cfg, cell, trial)


def _run_task(args):
    return run_trial(*args)


def thread_count():
    try:
        return max(1, int(os.environ.get("FLAGSTAT_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(cfg, workers=None, order=None):
    """Run every (cell, trial) and return rows sorted by (cell, trial, method order).

    ``order`` permutes execution order (used to check order independence).
    """
    tasks = [(cfg, c, t) for c in range(len(cfg.grid)) for t in range(cfg.trials)]
    if order is not None:
        tasks = [tasks[i] for i in order]
    workers = workers or thread_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    method_rank = {m.value: i for i, m in enumerate(cfg.methods)}
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.cell, r.trial, method_rank[r.method]))
    return rows


def aggregate(rows):
    """Mean and std of error/objective/iterations per (cell, method), skipping error rows."""
    groups = {}
    for r in rows:
        groups.setdefault((r.cell, r.params, r.method), []).append(r)
    out = []
    for (cell, params, method), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        err = np.array([r.error for r in ok])
        obj = np.array([r.objective for r in ok])
        its = np.array([r.iterations for r in ok])
        out.append(
            {
                "cell": cell,
                "params": params,
                "method": method,
                "n": len(ok),
                "failures": len(rs) - len(ok),
                "error_mean": float(err.mean()) if ok else math.nan,
                "error_std": float(err.std()) if ok else math.nan,
                "objective_mean": float(obj.mean()) if ok else math.nan,
                "objective_std": float(obj.std()) if ok else math.nan,
                "iterations_mean": float(its.mean()) if ok else math.nan,
                "iterations_max": int(its.max()) if ok else -1,
            }
        )
    return out


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.experiment,
                r.params,
                r.trial,
                r.seed,
                r.method,
                "" if r.error is None else format(r.error, ".17g"),
                "" if r.objective is None else format(r.objective, ".17g"),
                "" if r.iterations is None else r.iterations,
                "" if r.wall_time_ms is None else format(r.wall_time_ms, ".6g"),
                r.status,
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------- presets


def init_robustness_config(trials=50, base_seed=0):
    """Random-initialization robustness on FL(1,2,3;10): one data set, many starts."""
    return ExperimentConfig(
        "FlagNoiseSweep",
        ({"delta": 0.001},),
        trials=trials,
        base_seed=base_seed,
        methods=(Method.FLAG_MEAN,),
        params={"dims": [1, 2, 3], "ambient": 10, "count": 100},
        shared_data=True,
    )


def outlier_sweep_config(outliers=(0, 10, 20, 30, 40), trials=10, base_seed=0):
    return ExperimentConfig("FlagOutlierSweep", tuple({"outliers": m} for m in outliers), trials=trials, base_seed=base_seed)


def noise_sweep_config(deltas=(0.001, 0.01, 0.1, 1.0), trials=10, base_seed=0):
    return ExperimentConfig("FlagNoiseSweep", tuple({"delta": d} for d in deltas), trials=trials, base_seed=base_seed)


def init_ablation_config(delta_inits=(0.0, 0.25, 0.5, 1.0, 2.0, 4.0), trials=10, base_seed=0):
    return ExperimentConfig("InitAblation", tuple({"delta_init": x} for x in delta_inits), trials=trials, base_seed=base_seed, shared_data=True)


def motion_noise_config(trials=50, base_seed=0, count=400):
    cells = tuple({"axis_noise_deg": a, "translation_noise": t} for a, t in zip(MOTION_ROTATION_NOISE_DEG, MOTION_TRANSLATION_NOISE))
    return ExperimentConfig("MotionNoiseSweep", cells, trials=trials, base_seed=base_seed, params={"count": count})


def motion_outlier_config(fractions=(0.0, 0.1, 0.2, 0.3, 0.4), trials=50, base_seed=0, count=400):
    return ExperimentConfig("MotionOutlierSweep", tuple({"outlier_fraction": f} for f in fractions), trials=trials, base_seed=base_seed, params={"count": count})


def lambda_ablation_config(lams=LAMBDA_GRID, trials=50, base_seed=0, count=250):
    return ExperimentConfig("LambdaAblation", tuple({"lam": x} for x in lams), trials=trials, base_seed=base_seed, params={"count": count}, shared_data=True)


def rotation_noise_config(noise_deg=MOTION_ROTATION_NOISE_DEG, trials=20, base_seed=0, count=400):
    return ExperimentConfig("RotationNoiseSweep", tuple({"axis_noise_deg": a} for a in noise_deg), trials=trials, base_seed=base_seed, params={"count": count})
