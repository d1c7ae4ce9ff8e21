"""Repeatability evaluation protocol: keypoint sampling, ground-truth
correspondence, parameter sweeps, robustness schedules, pose-error checks and
per-axis timing.

Reports are deterministic functions of (pair, method, seed): keypoint samples
are seeded, per-keypoint results are collected in sampling order, and worker
counts never change the outcome.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .axes import ADMISSIBLE_WEIGHTS, AxisMethodSpec, Frame, Neighborhood, compute_axis
from .errors import DegenerateOutcome, NotDisambiguable, NotZDependent, TooFewPoints
from .geometry import PointCloud, RigidTransform, Surface
from .nuisance import (
    BINNING_KINDS,
    NuisanceConfig,
    SceneComposition,
    SYNTHESIZED_KINDS,
    apply_nuisance,
    composition_of,
    distance_to_boundary,
    perturb_keypoints,
)
from .registry import (
    ADMISSIBLE_WEIGHTS,
    CA_METHOD_NAMES,
    METHOD_NAMES,
    WEIGHTED_METHOD_NAMES,
    Z_DEPENDENT_METHOD_NAMES,
    Z_METHOD_NAMES,
    make_spec,
    parse_name,
)

DEFAULT_THRESHOLD_DEG = 5.0
DEFAULT_KEYPOINTS = 1000
DEFAULT_RADII_MR = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
WEIGHT_COLUMNS = ("w0", "wr", "wa", "wh", "wr*wa", "wr*wh")
DISAMBIGUATION_COLUMNS = ("points-mean", "normal-mean")
# Reference radius, in mesh-resolution multiples, used by schedules whose
# levels are stated in support-radius units.
SCHEDULE_RADIUS_MR = 20.0

CSV_HEADER = "method,condition,n,repeatable,degenerate,repeatability_pct,mean_angle_deg,ns_per_axis"


@dataclass
class ScenePair:
    """A model-scene pair with ground truth and derived metadata.

    `mr` is the model's resolution and is the unit for support radii on both
    sides. Correspondence snapping tolerates the coarser of the two scans:
    `snap_tolerance` is twice the larger resolution.
    """

    model: Surface
    scene: Surface
    gt: RigidTransform
    mr: float
    snap_tolerance: float
    composition: SceneComposition | None = None
    tag: str = ""

    def __post_init__(self):
        if self.mr <= 0:
            raise ValueError("mr must be positive")

    @classmethod
    def build(
        cls,
        model: Surface,
        scene: Surface,
        gt: RigidTransform,
        tag: str = "",
        compute_composition: bool = True,
    ) -> "ScenePair":
        mr = model.mr
        snap = 2.0 * max(mr, scene.mr)
        comp = composition_of(model, scene, gt, mr) if compute_composition else None
        return cls(model, scene, gt, mr, snap, comp, tag)

    def with_scene(self, scene: Surface) -> "ScenePair":
        """Same pair with a replaced (e.g. nuisanced) scene; composition is
        inherited from the clean pair."""
        snap = 2.0 * max(self.mr, scene.mr)
        return ScenePair(self.model, scene, self.gt, self.mr, snap, self.composition, self.tag)


@dataclass(frozen=True)
class KeypointCorrespondence:
    scene_index: int
    model_index: int
    snap_distance: float


@dataclass
class RepeatabilityReport:
    method: str
    condition: str
    keypoint_count: int
    repeatable: int
    degenerate: int
    repeatability_pct: float
    mean_angle_deg: float
    ns_per_axis: float | None = None

    @property
    def non_repeatable(self) -> int:
        return self.keypoint_count - self.repeatable - self.degenerate

    def csv_row(self) -> str:
        ns = "" if self.ns_per_axis is None else f"{self.ns_per_axis:.1f}"
        return (
            f"{self.method},{self.condition},{self.keypoint_count},"
            f"{self.repeatable},{self.degenerate},{self.repeatability_pct:.4f},"
            f"{self.mean_angle_deg:.6f},{ns}"
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "condition": self.condition,
            "keypoint_count": self.keypoint_count,
            "repeatable": self.repeatable,
            "degenerate": self.degenerate,
            "non_repeatable": self.non_repeatable,
            "repeatability_pct": self.repeatability_pct,
            "mean_angle_deg": self.mean_angle_deg,
            "ns_per_axis": self.ns_per_axis,
        }


@dataclass
class PoseErrorResult:
    rotation_error_deg: float
    translation_error_mr: float
    correct: bool


@dataclass
class TimingRow:
    method: str
    radius_mr: float
    ns_per_axis: float
    mean_neighbors: float


def reports_to_csv(reports) -> str:
    lines = [CSV_HEADER]
    lines.extend(r.csv_row() for r in reports)
    return "\n".join(lines) + "\n"


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# sampling and correspondence

def sample_keypoints(scene: PointCloud, n: int, seed: int) -> np.ndarray:
    """`n` distinct point indices, uniform without replacement."""
    if n > len(scene):
        raise TooFewPoints(f"cannot sample {n} keypoints from {len(scene)} points")
    rng = np.random.default_rng(seed)
    return rng.choice(len(scene), size=n, replace=False)


def correspond(scene_keypoints, pair: ScenePair) -> list[KeypointCorrespondence]:
    """Map scene keypoints into model space through the inverse ground truth
    and snap to the nearest model point; keypoints snapping farther than the
    pair tolerance lie outside the overlap and are dropped."""
    idx = np.asarray(scene_keypoints, dtype=np.int64)
    scene_pts = pair.scene.cloud.points[idx]
    in_model = pair.gt.inverse().apply_points(scene_pts)
    d, m = pair.model.index.nearest(in_model)
    d = np.atleast_1d(d)
    m = np.atleast_1d(m)
    out = []
    for si, mi, di in zip(idx, m, d):
        if di <= pair.snap_tolerance:
            out.append(KeypointCorrespondence(int(si), int(mi), float(di)))
    return out


def angle_error(v_model, v_scene, gt: RigidTransform) -> float:
    """Angle in degrees between the model axis and the ground-truth-aligned
    scene axis."""
    vm = np.asarray(v_model, dtype=np.float64).reshape(3)
    vs = np.asarray(v_scene, dtype=np.float64).reshape(3)
    for name, v in (("v_model", vm), ("v_scene", vs)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise ValueError(f"{name} must be a unit vector")
    aligned = gt.rotation.T @ vs
    c = float(np.clip(vm @ aligned, -1.0, 1.0))
    return math.degrees(math.acos(c))


# ---------------------------------------------------------------------------
# repeatability

@dataclass
class _KeypointOutcome:
    degenerate: bool
    angle_deg: float | None
    elapsed_ns: int


def _evaluate_correspondences(
    pair: ScenePair,
    spec: AxisMethodSpec,
    corrs,
    *,
    workers: int = 1,
    measure_time: bool = False,
    scene_surface: Surface | None = None,
) -> list[_KeypointOutcome]:
    scene = scene_surface if scene_surface is not None else pair.scene
    model_pts = pair.model.cloud.points
    scene_pts = scene.cloud.points

    def one(corr: KeypointCorrespondence) -> _KeypointOutcome:
        t0 = time.perf_counter_ns() if measure_time else 0
        try:
            vm, _ = compute_axis(
                spec, pair.model, model_pts[corr.model_index], pair.mr,
                keypoint_index=corr.model_index,
            )
            vs, _ = compute_axis(
                spec, scene, scene_pts[corr.scene_index], pair.mr,
                keypoint_index=corr.scene_index,
            )
        except DegenerateOutcome:
            ns = (time.perf_counter_ns() - t0) if measure_time else 0
            return _KeypointOutcome(True, None, ns)
        ns = (time.perf_counter_ns() - t0) if measure_time else 0
        return _KeypointOutcome(False, angle_error(vm, vs, pair.gt), ns)

    if workers <= 1:
        return [one(c) for c in corrs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, corrs))


def _tally(
    method: str,
    condition: str,
    outcomes,
    threshold_deg: float,
    measure_time: bool,
) -> RepeatabilityReport:
    n = len(outcomes)
    degenerate = sum(1 for o in outcomes if o.degenerate)
    angles = [o.angle_deg for o in outcomes if o.angle_deg is not None]
    repeatable = sum(1 for a in angles if a < threshold_deg)
    pct = 100.0 * repeatable / n if n else 0.0
    mean_angle = float(np.mean(angles)) if angles else float("nan")
    ns = None
    if measure_time and n:
        # Each outcome timed two axis evaluations (model and scene side).
        ns = sum(o.elapsed_ns for o in outcomes) / (2.0 * n)
    return RepeatabilityReport(method, condition, n, repeatable, degenerate, pct, mean_angle, ns)


def repeatability_run(
    pair: ScenePair,
    spec: AxisMethodSpec,
    n: int = DEFAULT_KEYPOINTS,
    threshold_deg: float = DEFAULT_THRESHOLD_DEG,
    seed: int = 0,
    *,
    workers: int = 1,
    scene_keypoints=None,
    measure_time: bool = False,
    method: str | None = None,
    condition: str | None = None,
) -> RepeatabilityReport:
    """Axis repeatability of one method over one pair: the share of
    corresponding keypoints whose two axes agree within the threshold after
    ground-truth alignment. Degenerate outcomes on either side count as
    non-repeatable and are tallied separately."""
    if scene_keypoints is None:
        scene_keypoints = sample_keypoints(pair.scene.cloud, n, seed)
    corrs = correspond(scene_keypoints, pair)
    outcomes = _evaluate_correspondences(
        pair, spec, corrs, workers=workers, measure_time=measure_time
    )
    return _tally(
        method or spec.name,
        condition if condition is not None else pair.tag,
        outcomes,
        threshold_deg,
        measure_time,
    )


def aggregate_reports(reports, method: str, condition: str) -> RepeatabilityReport:
    """Dataset-level aggregate: counts pool, percentages average unweighted."""
    reports = list(reports)
    n = sum(r.keypoint_count for r in reports)
    repeatable = sum(r.repeatable for r in reports)
    degenerate = sum(r.degenerate for r in reports)
    pct = float(np.mean([r.repeatability_pct for r in reports])) if reports else 0.0
    angles = [r.mean_angle_deg for r in reports if not math.isnan(r.mean_angle_deg)]
    mean_angle = float(np.mean(angles)) if angles else float("nan")
    times = [r.ns_per_axis for r in reports if r.ns_per_axis is not None]
    ns = float(np.mean(times)) if times else None
    return RepeatabilityReport(method, condition, n, repeatable, degenerate, pct, mean_angle, ns)


def _pair_seeds(seed: int, count: int) -> list[int]:
    return [seed + 7919 * i for i in range(count)]


def _shared_keypoints(pairs, n: int, seed: int) -> list[np.ndarray]:
    """One seeded keypoint sample per pair, shared across methods so method
    comparisons see identical keypoints."""
    return [
        sample_keypoints(p.scene.cloud, n, s)
        for p, s in zip(pairs, _pair_seeds(seed, len(pairs)))
    ]


# ---------------------------------------------------------------------------
# sweeps

def sweep_radius(
    pairs,
    method_name: str,
    radii=DEFAULT_RADII_MR,
    *,
    dataset: str = "synthetic",
    n: int = DEFAULT_KEYPOINTS,
    threshold_deg: float = DEFAULT_THRESHOLD_DEG,
    seed: int = 0,
    workers: int = 1,
) -> dict[float, RepeatabilityReport]:
    """Mean repeatability per support radius (mesh-resolution multiples)."""
    if not len(radii):
        raise ValueError("radii must be non-empty")
    keypoints = _shared_keypoints(pairs, n, seed)
    out: dict[float, RepeatabilityReport] = {}
    for radius in radii:
        spec = make_spec(method_name, dataset, radius_mr=float(radius))
        per_pair = [
            repeatability_run(
                p, spec, threshold_deg=threshold_deg, workers=workers,
                scene_keypoints=kp,
            )
            for p, kp in zip(pairs, keypoints)
        ]
        out[float(radius)] = aggregate_reports(per_pair, method_name, f"R={radius:g}mr")
    return out


def sweep_weights(
    pairs,
    method_name: str,
    *,
    dataset: str = "synthetic",
    n: int = DEFAULT_KEYPOINTS,
    threshold_deg: float = DEFAULT_THRESHOLD_DEG,
    seed: int = 0,
    workers: int = 1,
) -> dict[str, RepeatabilityReport]:
    """Mean repeatability per admissible weight scheme of the method."""
    direction, _ = parse_name(method_name)
    weights = ADMISSIBLE_WEIGHTS[direction]
    keypoints = _shared_keypoints(pairs, n, seed)
    out: dict[str, RepeatabilityReport] = {}
    for w in weights:
        spec = make_spec(method_name, dataset, weight=w)
        per_pair = [
            repeatability_run(
                p, spec, threshold_deg=threshold_deg, workers=workers,
                scene_keypoints=kp,
            )
            for p, kp in zip(pairs, keypoints)
        ]
        out[w] = aggregate_reports(per_pair, method_name, w)
    return out


def sweep_disambiguation(
    pairs,
    method_name: str,
    *,
    dataset: str = "synthetic",
    n: int = DEFAULT_KEYPOINTS,
    threshold_deg: float = DEFAULT_THRESHOLD_DEG,
    seed: int = 0,
    workers: int = 1,
) -> dict[str, RepeatabilityReport]:
    """Points-mean vs normal-mean columns; only covariance methods qualify."""
    if method_name not in CA_METHOD_NAMES:
        raise NotDisambiguable(f"{method_name} has a definite sign")
    keypoints = _shared_keypoints(pairs, n, seed)
    out: dict[str, RepeatabilityReport] = {}
    for rule in DISAMBIGUATION_COLUMNS:
        spec = make_spec(method_name, dataset, disambiguation=rule)
        per_pair = [
            repeatability_run(
                p, spec, threshold_deg=threshold_deg, workers=workers,
                scene_keypoints=kp,
            )
            for p, kp in zip(pairs, keypoints)
        ]
        out[rule] = aggregate_reports(per_pair, method_name, rule)
    return out


def sweep_z_dependency(
    pairs,
    x_method_name: str,
    z_method_names=tuple(Z_METHOD_NAMES),
    *,
    dataset: str = "synthetic",
    n: int = DEFAULT_KEYPOINTS,
    threshold_deg: float = DEFAULT_THRESHOLD_DEG,
    seed: int = 0,
    workers: int = 1,
) -> dict[str, RepeatabilityReport]:
    """Repeatability of a z-dependent x-method under each feeding z-method."""
    if x_method_name not in Z_DEPENDENT_METHOD_NAMES:
        raise NotZDependent(f"{x_method_name} does not take a z-axis")
    keypoints = _shared_keypoints(pairs, n, seed)
    out: dict[str, RepeatabilityReport] = {}
    for zname in z_method_names:
        spec = make_spec(x_method_name, dataset, z_method=zname)
        per_pair = [
            repeatability_run(
                p, spec, threshold_deg=threshold_deg, workers=workers,
                scene_keypoints=kp,
            )
            for p, kp in zip(pairs, keypoints)
        ]
        out[zname] = aggregate_reports(per_pair, x_method_name, zname)
    return out


# ---------------------------------------------------------------------------
# matrix serialization (fixed tabular shapes for the sweep outputs)

def radius_matrix_csv(table: dict[str, dict[float, RepeatabilityReport]], radii=DEFAULT_RADII_MR) -> str:
    header = "method," + ",".join(f"{r:g}mr" for r in radii)
    lines = [header]
    for method in METHOD_NAMES:
        if method not in table:
            continue
        cells = [f"{table[method][float(r)].repeatability_pct:.4f}" for r in radii]
        lines.append(method + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def weights_matrix_csv(table: dict[str, dict[str, RepeatabilityReport]]) -> str:
    header = "method," + ",".join(WEIGHT_COLUMNS)
    lines = [header]
    for method in WEIGHTED_METHOD_NAMES:
        if method not in table:
            continue
        row = table[method]
        cells = [
            f"{row[w].repeatability_pct:.4f}" if w in row else ""
            for w in WEIGHT_COLUMNS
        ]
        lines.append(method + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def disambiguation_matrix_csv(table: dict[str, dict[str, RepeatabilityReport]]) -> str:
    header = "method," + ",".join(DISAMBIGUATION_COLUMNS)
    lines = [header]
    for method in CA_METHOD_NAMES:
        if method not in table:
            continue
        row = table[method]
        cells = [f"{row[r].repeatability_pct:.4f}" for r in DISAMBIGUATION_COLUMNS]
        lines.append(method + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def zdependency_matrix_csv(table: dict[str, dict[str, RepeatabilityReport]]) -> str:
    header = "method," + ",".join(Z_METHOD_NAMES)
    lines = [header]
    for method in Z_DEPENDENT_METHOD_NAMES:
        if method not in table:
            continue
        row = table[method]
        cells = [f"{row[z].repeatability_pct:.4f}" for z in Z_METHOD_NAMES]
        lines.append(method + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# robustness schedules

def default_schedule(kind: str, seed: int = 0, keypoint_error_units: str = "R") -> list[NuisanceConfig]:
    """The benchmark level schedule for each nuisance kind."""
    if kind == "gaussian-noise":
        levels = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    elif kind == "mesh-decimation":
        levels = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]
    elif kind == "shot-noise":
        levels = [0.001, 0.003, 0.005, 0.008, 0.01, 0.03, 0.05]
    elif kind == "keypoint-error":
        if keypoint_error_units == "R":
            levels = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        else:  # magnitudes stated directly in mr
            levels = [0.0, 1.0, 2.0, 3.0, 4.0]
    elif kind == "boundary-binning":
        levels = [0.2, 0.4, 0.6, 0.8, 1.0, float("inf")]
    elif kind == "occlusion-binning":
        levels = [0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 1.0]
    elif kind == "clutter-binning":
        levels = [0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 1.0]
    elif kind == "overlap-binning":
        levels = [0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 1.0]
    else:
        raise ValueError(f"unknown nuisance kind {kind!r}")
    return [NuisanceConfig(kind, lv, seed + i) for i, lv in enumerate(levels)]


def _bin_labels(kind: str, levels) -> list[str]:
    if kind == "boundary-binning":
        labels = []
        prev = 0.0
        for lv in levels:
            labels.append(f">{prev:g}R" if math.isinf(lv) else f"({prev:g}R,{lv:g}R]")
            prev = lv
        return labels
    labels = []
    prev = None
    for i, lv in enumerate(levels):
        if prev is None:
            labels.append(f"<{100 * lv:g}%")
        elif i == len(levels) - 1:
            labels.append(f"[{100 * prev:g}%,{100 * lv:g}%]")
        else:
            labels.append(f"[{100 * prev:g}%,{100 * lv:g}%)")
        prev = lv
    return labels


def robustness_schedule(
    pairs,
    spec: AxisMethodSpec,
    schedule: list[NuisanceConfig],
    *,
    n: int = DEFAULT_KEYPOINTS,
    threshold_deg: float = DEFAULT_THRESHOLD_DEG,
    seed: int = 0,
    workers: int = 1,
    method: str | None = None,
) -> list[tuple[str, RepeatabilityReport | None]]:
    """Repeatability per nuisance level.

    Synthesized kinds regenerate the scene per level; binning kinds group
    measured keypoints (boundary distance) or pairs (composition) into the
    schedule's bins. Empty bins yield None, never a fabricated number.
    """
    if not schedule:
        raise ValueError("schedule must be non-empty")
    kinds = {c.kind for c in schedule}
    if len(kinds) != 1:
        raise ValueError(f"schedule mixes kinds {sorted(kinds)}")
    kind = schedule[0].kind
    label = method or spec.name

    if kind in SYNTHESIZED_KINDS:
        return _synthesized_schedule(
            pairs, spec, schedule, n, threshold_deg, seed, workers, label
        )
    if kind == "boundary-binning":
        return _boundary_binned(pairs, spec, schedule, n, threshold_deg, seed, workers, label)
    return _composition_binned(pairs, spec, schedule, n, threshold_deg, seed, workers, label)


def _synthesized_schedule(pairs, spec, schedule, n, threshold_deg, seed, workers, label):
    keypoints = _shared_keypoints(pairs, n, seed)
    out = []
    for config in schedule:
        condition = f"{config.kind}={config.level:g}"
        per_pair = []
        for p, kp in zip(pairs, keypoints):
            if config.kind == "keypoint-error":
                per_pair.append(
                    _keypoint_error_run(
                        p, spec, kp, config, threshold_deg, workers
                    )
                )
            else:
                scene = apply_nuisance(p.scene, config, p.mr)
                per_pair.append(
                    repeatability_run(
                        p.with_scene(scene), spec,
                        threshold_deg=threshold_deg, workers=workers,
                        scene_keypoints=_resample_on(scene, kp, p.scene),
                    )
                )
        out.append((condition, aggregate_reports(per_pair, label, condition)))
    return out


def _resample_on(scene: Surface, keypoint_indices, original: Surface):
    """Keep keypoint indices when the nuisance preserved the point count;
    re-snap by position otherwise (decimation changes the vertex set)."""
    if len(scene.cloud) == len(original.cloud):
        return keypoint_indices
    pts = original.cloud.points[keypoint_indices]
    _, idx = scene.index.nearest(pts)
    return np.atleast_1d(idx)


def _keypoint_error_run(pair, spec, keypoint_indices, config, threshold_deg, workers):
    """Localization error: correspondences follow the true keypoints, the
    scene axis is computed at the perturbed location."""
    magnitude = config.level * SCHEDULE_RADIUS_MR * pair.mr
    corrs = correspond(keypoint_indices, pair)
    true_pts = pair.scene.cloud.points[[c.scene_index for c in corrs]]
    if len(corrs) == 0:
        return RepeatabilityReport(spec.name, "", 0, 0, 0, 0.0, float("nan"))
    perturbed = perturb_keypoints(true_pts, pair.scene.cloud, magnitude, config.seed)
    _, perturbed_idx = pair.scene.index.nearest(perturbed)
    perturbed_idx = np.atleast_1d(perturbed_idx)
    moved = [
        KeypointCorrespondence(int(pi), c.model_index, c.snap_distance)
        for pi, c in zip(perturbed_idx, corrs)
    ]
    outcomes = _evaluate_correspondences(
        pair, spec, moved, workers=workers
    )
    return _tally(spec.name, f"keypoint-error={config.level:g}", outcomes, threshold_deg, False)


def _find_bin(value: float, levels, upper_inclusive: bool) -> int:
    """Index of the first bin whose upper edge bounds `value`; values past the
    last edge clamp into the last bin."""
    for b, upper in enumerate(levels):
        if value <= upper if upper_inclusive else value < upper:
            return b
    return len(levels) - 1


def _boundary_binned(pairs, spec, schedule, n, threshold_deg, seed, workers, label):
    levels = [c.level for c in schedule]
    labels = _bin_labels("boundary-binning", levels)
    binned: list[list[_KeypointOutcome]] = [[] for _ in levels]
    keypoints = _shared_keypoints(pairs, n, seed)
    for p, kp in zip(pairs, keypoints):
        if p.scene.mesh is None:
            raise ValueError("boundary binning needs a scene mesh")
        corrs = correspond(kp, p)
        outcomes = _evaluate_correspondences(p, spec, corrs, workers=workers)
        radius = SCHEDULE_RADIUS_MR * p.mr
        for c, o in zip(corrs, outcomes):
            d = distance_to_boundary(p.scene.mesh, p.scene.cloud.points[c.scene_index])
            binned[_find_bin(d / radius, levels, upper_inclusive=True)].append(o)
    out = []
    for lab, outcomes in zip(labels, binned):
        if not outcomes:
            out.append((lab, None))
        else:
            out.append((lab, _tally(label, lab, outcomes, threshold_deg, False)))
    return out


def _composition_binned(pairs, spec, schedule, n, threshold_deg, seed, workers, label):
    kind = schedule[0].kind
    field_name = kind.split("-")[0]  # occlusion | clutter | overlap
    levels = [c.level for c in schedule]
    labels = _bin_labels(kind, levels)
    groups: list[list[ScenePair]] = [[] for _ in levels]
    for p in pairs:
        if p.composition is None:
            raise ValueError("composition binning needs pair composition metadata")
        value = getattr(p.composition, field_name)
        if value is None:
            raise ValueError(f"pair {p.tag!r} has no {field_name} measurement")
        groups[_find_bin(value, levels, upper_inclusive=False)].append(p)
    keypoints = {id(p): s for p, s in zip(pairs, _shared_keypoints(pairs, n, seed))}
    out = []
    for lab, members in zip(labels, groups):
        if not members:
            out.append((lab, None))
            continue
        per_pair = [
            repeatability_run(
                p, spec, threshold_deg=threshold_deg, workers=workers,
                scene_keypoints=keypoints[id(p)],
            )
            for p in members
        ]
        out.append((lab, aggregate_reports(per_pair, label, lab)))
    return out


# ---------------------------------------------------------------------------
# rigid-transform primitive and pose errors

def transform_from_frames(model_frame: Frame, scene_frame: Frame) -> RigidTransform:
    """The rigid motion mapping the model frame onto the scene frame; exact
    when the frames truly correspond."""
    rotation = scene_frame.basis() @ model_frame.basis().T
    u, _, vt = np.linalg.svd(rotation)
    rotation = u @ vt
    if np.linalg.det(rotation) < 0:
        u[:, -1] *= -1
        rotation = u @ vt
    translation = scene_frame.origin - rotation @ model_frame.origin
    return RigidTransform(rotation, translation)


def pose_errors(
    estimate: RigidTransform, gt: RigidTransform, model_center, mr: float
) -> PoseErrorResult:
    """Rotation error (degrees) and translation error (mr multiples) of an
    estimated pose, with the translation compared at the model center."""
    if mr <= 0:
        raise ValueError("mr must be positive")
    center = np.asarray(model_center, dtype=np.float64).reshape(3)
    rel = gt.rotation @ estimate.rotation.T
    c = float(np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0))
    eps_r = math.degrees(math.acos(c))
    delta = gt.translation - estimate.translation + (gt.rotation @ center - estimate.rotation @ center)
    eps_t = float(np.linalg.norm(delta)) / mr
    return PoseErrorResult(eps_r, eps_t, eps_r < 5.0 and eps_t < 5.0)


# ---------------------------------------------------------------------------
# timing

def timing_run(
    specs: dict[str, AxisMethodSpec],
    surface: Surface,
    keypoint_indices,
    radii_mr=DEFAULT_RADII_MR,
    mr: float | None = None,
    *,
    evals: int = 120,
) -> list[TimingRow]:
    """Median wall time per axis construction.

    The timed unit is the axis construction from a pre-gathered neighborhood
    (shared across all methods at a radius): subset selection, projections,
    local-mesh extraction, weighting, covariance accumulation, eigensolve and
    disambiguation. The spatial query and any prerequisite z-axis are
    prepared outside the timed region, so rows compare what each method
    itself does. Runs single-threaded; one warm-up evaluation per cell.
    """
    if mr is None:
        mr = surface.mr
    kp_idx = np.asarray(keypoint_indices, dtype=np.int64)
    pts = surface.cloud.points
    normals = surface.cloud.normals
    rows: list[TimingRow] = []
    for radius_mr in radii_mr:
        radius = float(radius_mr) * mr
        hoods = []
        for ki in kp_idx:
            idx = surface.index.radius_neighbors(pts[ki], radius)
            hoods.append(
                Neighborhood(idx, pts[idx], normals[idx] if normals is not None else None)
            )
        z_cache: dict[AxisMethodSpec, list] = {}
        for name, base in specs.items():
            spec = replace(base, support_radius_mr=float(radius_mr))
            z_axes = [None] * len(kp_idx)
            if spec.z_dependency is not None:
                zspec = spec.z_dependency
                if zspec not in z_cache:
                    z_cache[zspec] = [
                        compute_axis(zspec, surface, pts[ki], mr, keypoint_index=int(ki))[0]
                        for ki in kp_idx
                    ]
                z_axes = z_cache[zspec]

            def evaluate(i: int) -> int:
                ki = int(kp_idx[i])
                t0 = time.perf_counter_ns()
                try:
                    compute_axis(
                        spec, surface, pts[ki], mr,
                        keypoint_index=ki, z_axis=z_axes[i], neighborhood=hoods[i],
                    )
                except DegenerateOutcome:
                    pass
                return time.perf_counter_ns() - t0

            evaluate(0)  # warm-up
            samples = [evaluate(j % len(kp_idx)) for j in range(evals)]
            rows.append(
                TimingRow(
                    name,
                    float(radius_mr),
                    float(np.median(samples)),
                    float(np.mean([len(h.indices) for h in hoods])),
                )
            )
    return rows


def timing_csv(rows: list[TimingRow]) -> str:
    lines = ["method,radius_mr,ns_per_axis,mean_neighbors"]
    for r in rows:
        lines.append(f"{r.method},{r.radius_mr:g},{r.ns_per_axis:.1f},{r.mean_neighbors:.2f}")
    return "\n".join(lines) + "\n"
