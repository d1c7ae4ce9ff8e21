"""Exception taxonomy shared by all lrfbench modules."""


class LrfError(Exception):
    """Base class for all lrfbench errors."""


class DegenerateOutcome(LrfError):
    """A per-keypoint condition that makes an axis undefined.

    The evaluation harness catches these and tallies the keypoint as a
    degenerate (non-repeatable) outcome instead of aborting a run.
    """


class EmptyRegion(DegenerateOutcome):
    """No geometry inside the requested support region."""


class DegenerateNeighborhood(DegenerateOutcome):
    """Neighborhood covariance has no unique smallest eigenvector."""


class DegenerateSpectrum(DegenerateOutcome):
    """Extremal eigenvalue is not separated from its neighbor."""


class DegenerateAxis(DegenerateOutcome):
    """A geometric-attribute construction produced a near-zero direction."""


class NoBorderPoints(DegenerateOutcome):
    """No neighbors in the border annulus required by a salient-point method."""


class ParallelAxes(DegenerateOutcome):
    """Frame assembly received two (anti)parallel axes."""


class AllZeroWeights(DegenerateOutcome):
    """Every accumulation weight vanished; covariance undefined."""


class ZeroTotalArea(DegenerateOutcome):
    """All triangles in a local mesh are degenerate."""


class DegenerateHeights(LrfError):
    """Height-weight scale is undefined (no neighbor above the keypoint).

    Callers fall back to uniform weights and set a diagnostics flag.
    """


class MissingNormals(LrfError):
    """An operation requiring per-point normals got a cloud without them."""


class TooFewPoints(LrfError):
    """Input cloud has fewer points than the operation needs."""


class TooFewVertices(LrfError):
    """Mesh operation would leave fewer vertices than the minimum."""


class NotDisambiguable(LrfError):
    """Disambiguation sweep requested for a method with a definite sign."""


class NotZDependent(LrfError):
    """Z-dependency sweep requested for a method that needs no z-axis."""


class NotARigidTransform(LrfError):
    """Matrix fails orthonormality or orientation requirements."""


class ParseError(LrfError):
    """Malformed input file; message carries line/byte position."""


class UnsupportedEncoding(ParseError):
    """File encoding recognized but intentionally unsupported."""
