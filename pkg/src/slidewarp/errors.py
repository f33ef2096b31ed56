"""Exception taxonomy shared across the registration pipeline.

Exit-code mapping for the CLI lives in ``slidewarp.cli``; library code only
raises these types and never calls ``sys.exit``.
"""


class SlidewarpError(Exception):
    """Base class for all pipeline errors."""


class InsufficientFeatures(SlidewarpError):
    """Too few keypoints or descriptor matches to attempt an alignment."""


class AlignmentFailed(SlidewarpError):
    """Robust estimation could not reach the minimum inlier consensus."""


class NoTissue(SlidewarpError):
    """Tissue mask is empty; nothing can be landmarked or sampled."""


class DegenerateHistogram(SlidewarpError):
    """Constant image: no threshold separates two classes."""


class FlatPatch(SlidewarpError):
    """Constant patch; registration and phase correlation are undefined."""


class TooFewLandmarks(SlidewarpError):
    """Fewer than 3 accepted landmarks; affine fit impossible."""


class DegenerateFit(SlidewarpError):
    """Rank-deficient (collinear) point configuration in affine fitting."""


class DegenerateTransform(SlidewarpError):
    """Affine with a (near-)singular linear part."""


class NoEvaluablePoints(SlidewarpError):
    """Every evaluation point fell on a flat patch."""


class ParseError(SlidewarpError):
    """Malformed model file, manifest, or spec file."""


class VersionError(SlidewarpError):
    """File schema version is not supported."""
