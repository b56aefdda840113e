"""
Dense symmetric tensor storage and contraction kernels.

A tensor of order m and dimension n is stored as a dense numpy array of
shape (n,) * m. Files and entry lists use 1-based sorted index tuples;
everything internal is 0-based.
"""
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, NamedTuple, Sequence, Tuple, Union

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    InvalidTensorError,
    TensorTooLargeError,
)

DEFAULT_MAX_BYTES = 2 ** 31
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class EntryList:
    """Unique entries of a symmetric tensor, one per sorted index tuple."""

    order: int
    dim: int
    entries: List[Tuple[Tuple[int, ...], float]] = field(default_factory=list)

    def validate(self) -> None:
        if self.order < 2:
            raise InvalidTensorError(f"Tensor order must be >= 2, got {self.order}")
        if self.dim < 1:
            raise InvalidTensorError(f"Tensor dimension must be >= 1, got {self.dim}")

        seen = set()
        for index, value in self.entries:
            index = tuple(index)
            if len(index) != self.order:
                raise InvalidTensorError(
                    f"Index {index} has {len(index)} subscripts, expected {self.order}"
                )
            if any(i < 1 or i > self.dim for i in index):
                raise InvalidTensorError(f"Index {index} out of range [1, {self.dim}]")
            if list(index) != sorted(index):
                raise InvalidTensorError(f"Index {index} is not sorted nondecreasing")
            if index in seen:
                raise InvalidTensorError(f"Duplicate index {index}")
            if not math.isfinite(value):
                raise InvalidTensorError(f"Entry {index} is not finite")
            seen.add(index)


class Contraction(NamedTuple):
    """Results of one pass of contract_all: A x^{m-2}, A x^{m-1}, A x^m."""

    matrix: np.ndarray
    vector: np.ndarray
    scalar: float


@dataclass(frozen=True, eq=False)
class SymmetricTensor:
    """
    Order-m, dimension-n real symmetric tensor with dense storage.

    Instances are immutable: the value array is flagged read-only, so a
    tensor can be shared by concurrent solver runs.
    """

    order: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.dim,) * self.order:
            raise InvalidTensorError(
                f"Expected shape {(self.dim,) * self.order}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidTensorError("Tensor entries must be finite")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    def __getitem__(self, index: Sequence[int]) -> float:
        return float(self.values[tuple(index)])

    def __repr__(self):
        return f"SymmetricTensor(order={self.order}, dim={self.dim})"

    @property
    def nbytes(self) -> int:
        return self.values.nbytes

    def entries(self) -> Iterator[Tuple[Tuple[int, ...], float]]:
        """Yield (1-based sorted index, value) for every nonzero unique entry."""
        for index in itertools.combinations_with_replacement(range(self.dim), self.order):
            value = self.values[index]
            if value != 0.0:
                yield tuple(i + 1 for i in index), float(value)

    def to_entry_list(self) -> EntryList:
        return EntryList(self.order, self.dim, list(self.entries()))

    def asymmetry(self) -> float:
        """Largest deviation between the array and any of its mode permutations."""
        worst = 0.0
        for perm in itertools.permutations(range(self.order)):
            worst = max(worst, float(np.max(np.abs(self.values - self.values.transpose(perm)))))
        return worst


def dense_bytes(order: int, dim: int) -> int:
    """Memory needed by dense float64 storage: n^m * 8 bytes."""
    return dim ** order * 8


def _check_size(order: int, dim: int, max_bytes: int) -> None:
    needed = dense_bytes(order, dim)
    if needed > max_bytes:
        raise TensorTooLargeError(
            f"Dense storage for m={order}, n={dim} needs {needed} bytes "
            f"(cap {max_bytes})"
        )


def from_entries(entry_list: EntryList, max_bytes: int = DEFAULT_MAX_BYTES) -> SymmetricTensor:
    """
    Build a dense symmetric tensor from its unique sorted entries.

    Every permutation of a listed index receives the listed value; all
    other positions are zero.
    """
    entry_list.validate()
    _check_size(entry_list.order, entry_list.dim, max_bytes)

    values = np.zeros((entry_list.dim,) * entry_list.order)
    for index, value in entry_list.entries:
        zero_based = tuple(i - 1 for i in index)
        for perm in set(itertools.permutations(zero_based)):
            values[perm] = value

    return SymmetricTensor(entry_list.order, entry_list.dim, values)


def from_array(array: np.ndarray, tol: float = SYMMETRY_TOL,
               max_bytes: int = DEFAULT_MAX_BYTES) -> SymmetricTensor:
    """Wrap a dense cubical array, rejecting it unless symmetric to ``tol``."""
    array = np.asarray(array, dtype=np.float64)
    if array.ndim < 2 or len(set(array.shape)) != 1:
        raise InvalidTensorError(f"Array of shape {array.shape} is not cubical of order >= 2")
    _check_size(array.ndim, array.shape[0], max_bytes)

    tensor = SymmetricTensor(array.ndim, array.shape[0], array)
    deviation = tensor.asymmetry()
    if deviation > tol:
        raise InvalidTensorError(f"Array is not symmetric (deviation {deviation:.3e})")
    return tensor


def _check_vector(tensor: SymmetricTensor, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tensor.dim,):
        raise DimensionMismatchError(
            f"Vector of shape {x.shape} does not match tensor dimension {tensor.dim}"
        )
    return x


def contract_all(tensor: SymmetricTensor, x) -> Contraction:
    """
    Compute A x^{m-2}, A x^{m-1} and A x^m in one pass.

    The matrix is obtained by contracting the trailing mode m-2 times; the
    vector and scalar are derived from it rather than recomputed. For m = 2
    the matrix is the tensor itself.
    """
    x = _check_vector(tensor, x)

    matrix = tensor.values
    for _ in range(tensor.order - 2):
        matrix = matrix @ x

    matrix = np.array(matrix)
    vector = matrix @ x
    return Contraction(matrix, vector, float(vector @ x))


def brute_force_apply(tensor: SymmetricTensor, x) -> np.ndarray:
    """A x^{m-1} by direct summation over every index tuple."""
    x = _check_vector(tensor, x)
    result = np.zeros(tensor.dim)
    for index in itertools.product(range(tensor.dim), repeat=tensor.order):
        result[index[0]] += tensor.values[index] * math.prod(x[i] for i in index[1:])
    return result


def parse_tensor(text: str, max_bytes: int = DEFAULT_MAX_BYTES) -> SymmetricTensor:
    """
    Parse the tensor text format.

    Line 1 is ``m n``; each further line is ``i_1 ... i_m value`` with sorted
    1-based indices. ``#`` starts a comment.
    """
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if line:
            lines.append((number, line.split()))

    if not lines:
        raise InvalidTensorError("Tensor file is empty")

    number, header = lines[0]
    try:
        order, dim = (int(token) for token in header)
    except ValueError:
        raise InvalidTensorError(f"Line {number}: expected header 'm n', got {' '.join(header)!r}")

    entries = []
    for number, tokens in lines[1:]:
        if len(tokens) != order + 1:
            raise InvalidTensorError(
                f"Line {number}: expected {order} indices and a value, got {len(tokens)} fields"
            )
        try:
            index = tuple(int(token) for token in tokens[:order])
            value = float(tokens[order])
        except ValueError:
            raise InvalidTensorError(f"Line {number}: cannot parse {' '.join(tokens)!r}")
        entries.append((index, value))

    return from_entries(EntryList(order, dim, entries), max_bytes=max_bytes)


def read_tensor(path: Union[str, Path], max_bytes: int = DEFAULT_MAX_BYTES) -> SymmetricTensor:
    return parse_tensor(Path(path).read_text(), max_bytes=max_bytes)


def format_tensor(tensor: SymmetricTensor) -> str:
    """Render the tensor in canonical sorted order, nonzero entries only."""
    lines = [f"{tensor.order} {tensor.dim}"]
    for index, value in tensor.entries():
        lines.append(' '.join(str(i) for i in index) + f" {value!r}")
    return '\n'.join(lines) + '\n'


def write_tensor(tensor: SymmetricTensor, path: Union[str, Path]) -> None:
    Path(path).write_text(format_tensor(tensor))
