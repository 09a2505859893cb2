"""Exception hierarchy shared by all modules."""


class PoseExprError(Exception):
    """Base class for every error raised by this package."""


# -- shape math ---------------------------------------------------------------

class DegenerateShape(PoseExprError):
    """Shape has zero scale (all points coincident)."""


class ShapeSizeMismatch(PoseExprError):
    """Two shapes with different point counts where equal counts are required."""


class InvalidPermutation(PoseExprError):
    """Flip table is not an involutive bijection of 0..N-1."""


class WrongPointCount(PoseExprError):
    """Shape does not have the point count an operation requires."""


# -- linear algebra / PCA -----------------------------------------------------

class InsufficientSamples(PoseExprError):
    """Fewer samples than the fit requires."""


class DimensionMismatch(PoseExprError):
    """Vector length does not match the fitted basis or model."""


class NotEnoughDistinctValues(PoseExprError):
    """Too few distinct projection values to place k-1 thresholds."""


class EmptyGroup(PoseExprError):
    """A pose group with no members where a centroid is required."""


# -- image / feature extraction ----------------------------------------------

class ImageTooSmall(PoseExprError):
    """Image smaller than the operation's minimum support."""


class PointOutOfImage(PoseExprError):
    """Keypoint lies outside the image bounds."""


class RingOutOfImage(PoseExprError):
    """LBP ring samples fall outside the image."""


class PatchOutOfImage(PoseExprError):
    """TPLBP center or ring patch falls outside the image."""


class RegionOutOfImage(PoseExprError):
    """Histogram region extends beyond the image."""


# -- classification -----------------------------------------------------------

class SingleClassData(PoseExprError):
    """Training set contains fewer than two classes."""


class EmptyClass(PoseExprError):
    """A class with zero samples where undersampling needs at least one."""


class EmptyMatrix(PoseExprError):
    """Confusion matrix with zero total count."""


# -- fusion net ---------------------------------------------------------------

class ShapeMismatch(PoseExprError):
    """Tensor shape incompatible with the network specification."""


class LabelOutOfRange(PoseExprError):
    """Class label outside the head's class count."""


class TraceMismatch(PoseExprError):
    """Forward trace does not correspond to the given parameters/spec."""


# -- ingestion / harness ------------------------------------------------------

class ParseError(PoseExprError):
    """Malformed pts file, manifest, or serialized model."""


class PointCountMismatch(ParseError):
    """pts header n_points disagrees with the number of coordinate lines."""


class UnknownLabel(ParseError):
    """Manifest label string not in the expression vocabulary."""


class TooFewGroups(PoseExprError):
    """Grouped split needs at least two groups."""
