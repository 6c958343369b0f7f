"""Exception types shared across the package."""


class GridCauseError(Exception):
    """Base class for all errors raised by this package."""


class MissingValue(GridCauseError):
    """A cell in an ingested panel is empty."""

    def __init__(self, row: int, col: str):
        super().__init__(f"missing value at row {row}, column {col!r}")
        self.row = row
        self.col = col


class RaggedRows(GridCauseError):
    """Rows of an ingested file do not all have the same width."""


class DuplicateNodeId(GridCauseError):
    """Two columns share the same node identifier."""


class UnparseableNumber(GridCauseError):
    """A cell could not be parsed as a decimal number."""

    def __init__(self, row: int, col: str, text: str):
        super().__init__(f"cannot parse {text!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col
        self.text = text


class UnstableSpec(GridCauseError):
    """Requested synthetic process is not stationary (companion spectral radius >= 1)."""


class TooShort(GridCauseError):
    """Not enough time steps for the requested operation."""


class SingularDesign(GridCauseError):
    """Regression design is rank deficient (collinear, duplicate, or constant columns)."""


class ZeroVariance(GridCauseError):
    """A node's series has zero variance where variation is required."""

    def __init__(self, node: str):
        super().__init__(f"node {node!r} has zero variance")
        self.node = node


class NonSquare(GridCauseError):
    """Matrix argument must be square."""


class ShapeMismatch(GridCauseError):
    """Array shapes are inconsistent with the model."""


class EmptyMask(GridCauseError):
    """A train or test mask selects no nodes."""


class EmptyGraph(GridCauseError):
    """Graph has no nodes or no edges where at least one is required."""


class GridMismatch(GridCauseError):
    """Percolation curves were sampled on different removal grids."""


class UnknownNode(GridCauseError):
    """A node id does not exist in the referenced panel or spec."""
