"""Canonical axis-method names and per-dataset parameter presets.

Method names follow the `<direction>(<axis>)` convention used across the
surface-matching literature, e.g. "CA-M-b(z)" or "GA-mH(x)". The preset
tables carry the support radii, weights, disambiguation rule and the z-axis
feeding the z-dependent x-methods that performed best per benchmark dataset;
the "synthetic" preset mirrors the noise-benchmark (b3r) settings.
"""
from __future__ import annotations

from .axes import AxisMethodSpec, GA_DIRECTIONS, Z_DEPENDENT_DIRECTIONS

Z_METHOD_NAMES = [
    "CA-P-k(z)",
    "CA-P-b(z)",
    "CA-sP-k(z)",
    "CA-sP-b(z)",
    "CA-M-k(z)",
    "CA-M-b(z)",
]
X_METHOD_NAMES = [
    "CA-P-k(x)",
    "CA-P-b(x)",
    "CA-pP-k(x)",
    "CA-M-k(x)",
    "CA-M-b(x)",
    "GA-mpP(x)",
    "GA-mA(x)",
    "GA-mH(x)",
]
METHOD_NAMES = Z_METHOD_NAMES + X_METHOD_NAMES

CA_METHOD_NAMES = [n for n in METHOD_NAMES if n.startswith("CA-")]
GA_METHOD_NAMES = [n for n in METHOD_NAMES if n.startswith("GA-")]
# Methods that admit any weighting at all (salient-point methods do not).
WEIGHTED_METHOD_NAMES = [n for n in METHOD_NAMES if n not in ("GA-mA(x)", "GA-mH(x)")]
Z_DEPENDENT_METHOD_NAMES = ["CA-pP-k(x)", "GA-mpP(x)", "GA-mA(x)", "GA-mH(x)"]

MESH_METHOD_NAMES = [n for n in METHOD_NAMES if n.startswith("CA-M")]
POINT_CA_METHOD_NAMES = [
    n for n in CA_METHOD_NAMES if n not in MESH_METHOD_NAMES
]

DATASETS = ["b3r", "u3m", "u3or", "quld", "k3r", "s3r", "synthetic"]

# Support radius (mesh-resolution multiples) per method and dataset.
_RADII_COLUMNS = ["b3r", "u3m", "u3or", "quld", "k3r", "s3r"]
_RADII_ROWS = {
    "CA-P-k(z)": (20, 10, 10, 20, 20, 20),
    "CA-P-b(z)": (20, 10, 10, 15, 20, 15),
    "CA-sP-k(z)": (20, 15, 10, 20, 20, 20),
    "CA-sP-b(z)": (20, 15, 15, 20, 20, 20),
    "CA-M-k(z)": (20, 10, 5, 15, 20, 20),
    "CA-M-b(z)": (20, 5, 5, 15, 20, 15),
    "CA-P-k(x)": (20, 20, 20, 20, 20, 20),
    "CA-P-b(x)": (20, 20, 20, 20, 20, 20),
    "CA-pP-k(x)": (20, 15, 15, 20, 20, 20),
    "CA-M-k(x)": (20, 20, 20, 20, 20, 20),
    "CA-M-b(x)": (20, 20, 20, 20, 20, 20),
    "GA-mpP(x)": (20, 15, 15, 20, 20, 20),
    "GA-mA(x)": (20, 20, 20, 20, 20, 20),
    "GA-mH(x)": (20, 20, 20, 20, 20, 20),
}
DATASET_RADII = {
    ds: {m: float(row[i]) for m, row in _RADII_ROWS.items()}
    for i, ds in enumerate(_RADII_COLUMNS)
}
DATASET_RADII["synthetic"] = dict(DATASET_RADII["b3r"])

# Best-performing weight per method (uniform elsewhere).
DEFAULT_WEIGHTS = {
    "CA-P-k(z)": "wr",
    "CA-P-b(z)": "w0",
    "CA-sP-k(z)": "wr",
    "CA-sP-b(z)": "w0",
    "CA-M-k(z)": "wr*wa",
    "CA-M-b(z)": "wa",
    "CA-P-k(x)": "w0",
    "CA-P-b(x)": "w0",
    "CA-pP-k(x)": "wr*wh",
    "CA-M-k(x)": "wr*wa",
    "CA-M-b(x)": "wa",
    "GA-mpP(x)": "wr*wh",
    "GA-mA(x)": "w0",
    "GA-mH(x)": "w0",
}

DEFAULT_DISAMBIGUATION = "normal-mean"

# Z-axis recipe feeding the z-dependent x-methods, per dataset.
DEFAULT_Z_METHOD = {
    "b3r": "CA-P-b(z)",
    "u3m": "CA-M-b(z)",
    "u3or": "CA-M-b(z)",
    "quld": "CA-M-b(z)",
    "k3r": "CA-M-b(z)",
    "s3r": "CA-P-b(z)",
    "synthetic": "CA-P-b(z)",
}


def parse_name(name: str) -> tuple[str, str]:
    """Split "CA-M-b(z)" into ("CA-M-b", "z"); raises KeyError on unknowns."""
    if name not in _RADII_ROWS:
        raise KeyError(f"unknown method name {name!r}")
    direction, _, rest = name.partition("(")
    return direction, rest.rstrip(")")


def make_spec(
    name: str,
    dataset: str = "synthetic",
    *,
    radius_mr: float | None = None,
    weight: str | None = None,
    disambiguation: str | None = None,
    z_method: str | None = None,
    z_weight: str | None = None,
    z_radius_mr: float | None = None,
) -> AxisMethodSpec:
    """Resolve a canonical method name into a fully-parameterized spec.

    Unset parameters come from the dataset preset tables. `z_method` (and its
    weight/radius overrides) applies only to the z-dependent x-methods.
    """
    if dataset not in DATASET_RADII:
        raise KeyError(f"unknown dataset preset {dataset!r}")
    direction, axis_kind = parse_name(name)
    radius = radius_mr if radius_mr is not None else DATASET_RADII[dataset][name]
    w = weight if weight is not None else DEFAULT_WEIGHTS[name]
    if direction in GA_DIRECTIONS:
        disamb = "none"
    else:
        disamb = disambiguation if disambiguation is not None else DEFAULT_DISAMBIGUATION
    z_dep = None
    if direction in Z_DEPENDENT_DIRECTIONS:
        zname = z_method if z_method is not None else DEFAULT_Z_METHOD[dataset]
        z_dep = make_spec(
            zname,
            dataset,
            radius_mr=z_radius_mr,
            weight=z_weight,
            disambiguation=disambiguation,
        )
        if z_dep.axis_kind != "z":
            raise ValueError(f"{zname} is not a z-axis method")
    return AxisMethodSpec(
        direction=direction,
        axis_kind=axis_kind,
        weight=w,
        disambiguation=disamb,
        support_radius_mr=radius,
        z_dependency=z_dep,
    )


def resolve_methods(names, dataset: str = "synthetic", **overrides) -> dict[str, AxisMethodSpec]:
    """Specs for a list of names; "all"/"all14" expand to every method."""
    if isinstance(names, str):
        names = [names]
    expanded: list[str] = []
    for n in names:
        if n in ("all", "all14"):
            expanded.extend(METHOD_NAMES)
        else:
            expanded.append(n)
    return {n: make_spec(n, dataset, **overrides) for n in expanded}
