import enum
import itertools
import logging
import math
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import DimensionError, QuantizationError

logger = logging.getLogger(__name__)


class SetKind(enum.Enum):
    SIGN = "sign"
    MINIMAL = "minimal"
    CIRCULAR = "circular"
    NORMAL_BASIS = "normal_basis"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value):
        """Accept a SetKind or its name, e.g. "normal_basis" or "normal-basis"."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value == key:
                return kind
        raise QuantizationError(f"Error: unknown quantization set kind {value!r}")


class Direction(object):
    """
    A unit vector of a quantization set
    ...
    Attributes:
    coords : numpy.ndarray
        read-only coordinates, Euclidean norm 1 within 1e-12
    """
    __slots__ = ("coords",)

    def __init__(self, coords):
        coords = np.array(coords, dtype=float).reshape(-1)
        if coords.size == 0:
            raise QuantizationError("Error: a direction needs at least one coordinate")
        if not np.all(np.isfinite(coords)):
            raise QuantizationError("Error: direction coordinates must be finite")
        norm = float(np.linalg.norm(coords))
        if abs(norm - 1.0) > constants.UNIT_NORM_TOLERANCE:
            raise QuantizationError(f"Error: direction must have unit norm, got norm {norm!r}")
        coords.setflags(write=False)
        self.coords = coords

    @property
    def dims(self):
        return self.coords.size

    def __eq__(self, other):
        if not isinstance(other, Direction):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"Direction({self.coords.tolist()!r})"


class QuantizationSet(object):
    """
    A class to represent a finite set D of unit directions in R^N
    ...
    Attributes:
    dims : int
        the dimension N
    kind : SetKind
        construction family
    count : int or None
        number of directions of a circular set
    analytic_cos_theta : float or None
        closed-form covering cosine when the family has one
    size : int
        |D|, known even when the elements are not enumerated

    Methods:
    matrix
        |D| x N array of the elements (raises for lazy sign sets)
    elements
        tuple of Direction objects in index order
    quantize_vector(gradient)
        coordinates of the chosen direction, None when the gradient is held
    """
    def __init__(self, dims, matrix=None, kind=SetKind.CUSTOM, count=None, analytic_cos_theta=None):
        self.dims = int(dims)
        self.kind = kind
        self.count = count
        self.analytic_cos_theta = analytic_cos_theta
        if matrix is None:
            if kind is not SetKind.SIGN:
                raise QuantizationError("Error: only sign sets may be left unenumerated")
            self._matrix = None
            self.size = 2 ** self.dims
            return
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise QuantizationError("Error: a quantization set needs at least one direction")
        if matrix.shape[1] != self.dims:
            raise DimensionError(f"Error: directions have length {matrix.shape[1]}, expected {self.dims}")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(np.abs(norms - 1.0) > constants.UNIT_NORM_TOLERANCE):
            raise QuantizationError("Error: every direction must have unit norm")
        if kind is SetKind.CUSTOM:
            rounded = np.round(matrix, 12)
            if np.unique(rounded, axis=0).shape[0] != matrix.shape[0]:
                raise QuantizationError("Error: duplicate directions in quantization set")
        matrix.setflags(write=False)
        self._matrix = matrix
        self.size = matrix.shape[0]

    @property
    def enumerated(self):
        return self._matrix is not None

    @property
    def matrix(self):
        if self._matrix is None:
            raise QuantizationError(
                f"Error: sign set with N={self.dims} exceeds the enumeration cap "
                f"{constants.SIGN_ENUMERATION_CAP}; its elements are not enumerated"
            )
        return self._matrix

    @property
    def elements(self):
        return tuple(Direction(row) for row in self.matrix)

    def quantize_vector(self, gradient):
        """
        Summary:
        Pick the direction best aligned with a gradient

        Parameters:
        gradient : array_like
            vector of length N

        Return:
        direction : numpy.ndarray or None
            coordinates of the chosen element, None when the gradient norm is at
            most the zero tolerance (the iterate is held)
        """
        gradient = np.asarray(gradient, dtype=float)
        if gradient.shape != (self.dims,):
            raise DimensionError(f"Error: gradient has shape {gradient.shape}, expected ({self.dims},)")
        norm = np.linalg.norm(gradient)
        if norm <= constants.ZERO_TOLERANCE:
            return None
        if self.kind is SetKind.SIGN:
            return np.where(gradient >= 0.0, 1.0, -1.0) / math.sqrt(self.dims)
        scores = self._matrix @ (gradient / norm)
        # lowest index among the (near) maximisers
        index = int(np.argmax(scores >= scores.max() - constants.TIE_TOLERANCE))
        return self._matrix[index]

    def __len__(self):
        return self.size

    def __repr__(self):
        label = self.kind.value if self.count is None else f"{self.kind.value}({self.count})"
        return f"QuantizationSet({label}, N={self.dims}, |D|={self.size})"


def _sign_matrix(dims):
    return np.array(list(itertools.product((1.0, -1.0), repeat=dims))) / math.sqrt(dims)


def _minimal_matrix(dims):
    return np.vstack([np.eye(dims), -np.ones((1, dims)) / math.sqrt(dims)])


def _circular_matrix(count):
    angles = 2.0 * math.pi * np.arange(count) / count
    matrix = np.column_stack([np.cos(angles), np.sin(angles)])
    matrix[np.abs(matrix) < constants.CIRCULAR_SNAP] = 0.0
    return matrix


def _normal_basis_matrix(dims):
    return np.vstack([np.eye(dims), -np.eye(dims)])


def minimal_cos_theta(dims):
    return 1.0 / math.sqrt(dims ** 2 + 2.0 * math.sqrt(dims) * (dims - 1))


def construct_set(kind, dims=None, count=None, enumerate_elements=True):
    """
    Summary:
    Build one of the standard quantization sets

    Parameters:
    kind : SetKind or str
        sign, minimal, circular or normal_basis
    dims : int
        dimension N (circular sets are planar, N defaults to 2)
    count : int
        number n of directions of a circular set, n >= 3
    enumerate_elements : bool
        sign sets only: when False, sets beyond the enumeration cap are built
        lazily and support quantize and bit accounting without their elements

    Return:
    quantization_set : QuantizationSet
        the set with analytic_cos_theta populated
    """
    kind = SetKind.parse(kind)
    if kind is SetKind.CUSTOM:
        raise QuantizationError("Error: custom sets are built with from_vectors or load_set")
    if kind is SetKind.CIRCULAR:
        if dims is None:
            dims = 2
        if dims != 2:
            raise QuantizationError(f"Error: circular sets live in N=2, got N={dims}")
        if count is None or int(count) < 3:
            raise QuantizationError(f"Error: circular sets need n >= 3 directions, got {count!r}")
        count = int(count)
        return QuantizationSet(2, _circular_matrix(count), kind, count, math.cos(math.pi / count))
    if dims is None or int(dims) < 1:
        raise QuantizationError(f"Error: dimension must be at least 1, got {dims!r}")
    dims = int(dims)
    if kind is SetKind.SIGN:
        cos_theta = 1.0 / math.sqrt(dims)
        if dims > constants.SIGN_ENUMERATION_CAP:
            if enumerate_elements:
                raise QuantizationError(
                    f"Error: sign set with N={dims} exceeds the enumeration cap "
                    f"{constants.SIGN_ENUMERATION_CAP} (|D| = 2^N)"
                )
            logger.debug("sign set N=%d built without enumeration", dims)
            return QuantizationSet(dims, None, kind, None, cos_theta)
        return QuantizationSet(dims, _sign_matrix(dims), kind, None, cos_theta)
    if kind is SetKind.MINIMAL:
        return QuantizationSet(dims, _minimal_matrix(dims), kind, None, minimal_cos_theta(dims))
    return QuantizationSet(dims, _normal_basis_matrix(dims), kind, None, 1.0 / math.sqrt(dims))


def from_vectors(vectors):
    """Build a custom set from rows that already have unit norm."""
    matrix = np.atleast_2d(np.asarray(vectors, dtype=float))
    return QuantizationSet(matrix.shape[1], matrix, SetKind.CUSTOM)


def quantize(gradient, quantization_set):
    """
    Summary:
    Quantize a gradient to an element of D

    Parameters:
    gradient : array_like
        vector of length N
    quantization_set : QuantizationSet
        the direction set D

    Return:
    direction : Direction or None
        the element maximising <g/|g|, d>, lowest index on ties; None means hold
    """
    vector = quantization_set.quantize_vector(gradient)
    if vector is None:
        return None
    return Direction(vector)


def bits_per_iteration(quantization_set):
    """
    Summary:
    Number of bits needed to code one element of D

    Return:
    bits : int
        ceil(log2 |D|)
    """
    size = quantization_set.size
    if size < 2:
        raise QuantizationError("Error: a singleton set carries no information per iteration")
    return (size - 1).bit_length()


def load_set(path):
    """
    Summary:
    Read a custom set from a plain-text file

    Parameters:
    path : str or Path
        first line N, then one direction per line as whitespace-separated
        decimals; blank lines and lines starting with '#' are skipped

    Return:
    quantization_set : QuantizationSet
        rows whose norm is within 1e-6 of 1 are normalized, others rejected
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.strip() for line in handle]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines:
        raise QuantizationError(f"Error: {path} is empty")
    try:
        dims = int(lines[0])
        rows = [[float(value) for value in line.split()] for line in lines[1:]]
    except ValueError as err:
        raise QuantizationError(f"Error: malformed quantization set file {path}: {err}") from err
    if dims < 1:
        raise QuantizationError(f"Error: dimension must be at least 1, got {dims}")
    if not rows:
        raise QuantizationError(f"Error: {path} lists no directions")
    for number, row in enumerate(rows, start=2):
        if len(row) != dims:
            raise DimensionError(f"Error: line {number} of {path} has {len(row)} values, expected {dims}")
    matrix = np.array(rows, dtype=float)
    norms = np.linalg.norm(matrix, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > constants.LOAD_NORM_TOLERANCE)
    if bad.size:
        raise QuantizationError(
            f"Error: direction on line {bad[0] + 2} of {path} has norm {norms[bad[0]]!r}, not 1"
        )
    logger.debug("loaded %d directions in N=%d from %s", matrix.shape[0], dims, path)
    return QuantizationSet(dims, matrix / norms[:, None], SetKind.CUSTOM)


def save_set(quantization_set, path):
    """Write a set in the format read by load_set."""
    matrix = quantization_set.matrix
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{quantization_set.dims}\n")
        for row in matrix:
            handle.write(" ".join(repr(float(value)) for value in row) + "\n")
