"""Random two-phase coefficient fields on the periodic grid.

A realization places ``L**2`` axis-parallel square inclusions of side
``2*alpha/L`` with centers drawn uniformly from the vertices of the
``n x n`` torus grid, ``n = m0*L``.  Everything lives on the wrapped grid:
vertex ``(i, j)`` sits at ``(i*h, j*h)`` and cell ``(i, j)`` is the square
``[i*h, (i+1)*h] x [j*h, (j+1)*h]``; axis 0 is ``x1``, axis 1 is ``x2``.
Flattened degree-of-freedom index is ``i*n + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import ParameterError

__all__ = [
    "EnsembleParams",
    "CoefficientField",
    "SymmetryOp",
    "stream_key",
    "ensemble_seed",
    "sample_field",
    "sample_centers",
    "cover_cells",
    "vertex_fraction",
    "coefficient_on_grid",
    "transform_field",
    "vertex_permutation",
    "refine_field",
    "laminate_field",
]

_MASK64 = (1 << 64) - 1


def _as_fraction(alpha) -> Fraction:
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, float):
        return Fraction(alpha).limit_denominator(1 << 20)
    return Fraction(alpha)


@dataclass(frozen=True)
class EnsembleParams:
    """One RVE configuration.

    ``alpha`` is stored as an exact :class:`~fractions.Fraction`; ``lam`` is
    the contrast (coefficient value outside the inclusions).
    """

    L: int
    m0: int
    alpha: Fraction
    lam: float
    tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_fraction(self.alpha))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "m0", int(self.m0))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "tol", float(self.tol))
        if self.L < 1:
            raise ParameterError(f"L must be >= 1, got {self.L}")
        if self.m0 < 2 or self.m0 & (self.m0 - 1):
            raise ParameterError(f"m0 must be a power of two >= 2, got {self.m0}")
        if not (0 < self.alpha <= Fraction(1, 2)):
            raise ParameterError(f"alpha must lie in (0, 1/2], got {self.alpha}")
        if (self.alpha * self.m0).denominator != 1:
            raise ParameterError(
                f"alpha*m0 must be an integer (grid-aligned inclusions), got {self.alpha * self.m0}"
            )
        if not (0.0 < self.lam <= 1.0):
            raise ParameterError(f"lambda must lie in (0, 1], got {self.lam}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")

    @property
    def n(self) -> int:
        """Grid intervals (= periodic vertices) per dimension."""
        return self.m0 * self.L

    @property
    def M(self) -> int:
        return self.n * self.n

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def k(self) -> int:
        """Inclusion side length in grid cells."""
        return int(2 * self.alpha * self.m0)

    def replace(self, **changes) -> "EnsembleParams":
        values = dict(L=self.L, m0=self.m0, alpha=self.alpha, lam=self.lam, tol=self.tol)
        values.update(changes)
        return EnsembleParams(**values)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CoefficientField:
    params: EnsembleParams
    centers: np.ndarray  # (L**2, 2) int, vertex coordinates of inclusion centers
    cell_indicator: np.ndarray  # (n, n) bool
    vertex_value: np.ndarray  # (n, n) float, covered fraction of the 4 incident cells
    realization_index: int = 0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "centers", _frozen(np.asarray(self.centers, dtype=np.int64).reshape(-1, 2)))
        object.__setattr__(self, "cell_indicator", _frozen(np.asarray(self.cell_indicator, dtype=bool)))
        object.__setattr__(self, "vertex_value", _frozen(np.asarray(self.vertex_value, dtype=float)))
        n = self.params.n
        if self.cell_indicator.shape != (n, n) or self.vertex_value.shape != (n, n):
            raise ParameterError(f"field arrays must have shape {(n, n)}")

    @classmethod
    def from_cells(cls, params, cells, centers=None, realization_index=0, seed=None):
        """Wrap an arbitrary cell indicator (e.g. a laminate) as a field."""
        cells = np.asarray(cells, dtype=bool)
        if centers is None:
            centers = np.empty((0, 2), dtype=np.int64)
        return cls(params, centers, cells, vertex_fraction(cells), realization_index, seed)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def coverage(self) -> float:
        return float(self.cell_indicator.mean())

    def __eq__(self, other):
        if not isinstance(other, CoefficientField):
            return NotImplemented
        return (
            self.params == other.params
            and self.realization_index == other.realization_index
            and self.seed == other.seed
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.cell_indicator, other.cell_indicator)
            and np.array_equal(self.vertex_value, other.vertex_value)
        )

    __hash__ = None


def stream_key(seed: int, index: int) -> np.ndarray:
    """Philox key for realization ``index`` under master ``seed``.

    Each (seed, index) pair owns a whole counter-based stream, so draws for
    different indices never share stream positions.
    """
    return np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)


def ensemble_seed(master_seed: int, L: int) -> int:
    """Field seed used by ensemble runs at RVE size ``L`` (independent per L)."""
    state = np.random.SeedSequence([int(master_seed) & _MASK64, int(L)]).generate_state(1, np.uint64)
    return int(state[0])


def sample_centers(params: EnsembleParams, seed: int, index: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=stream_key(seed, index)))
    return rng.integers(0, params.n, size=(params.L * params.L, 2), dtype=np.int64)


def cover_cells(centers, n: int, k: int) -> np.ndarray:
    """Periodic union of ``k x k`` cell blocks centred at the given vertices."""
    centers = np.asarray(centers, dtype=np.int64).reshape(-1, 2)
    cells = np.zeros((n, n), dtype=bool)
    if len(centers) == 0:
        return cells
    offsets = np.arange(-(k // 2), k - k // 2)
    rows = (centers[:, 0, None] + offsets) % n
    cols = (centers[:, 1, None] + offsets) % n
    cells[rows[:, :, None], cols[:, None, :]] = True
    return cells


def vertex_fraction(cells: np.ndarray) -> np.ndarray:
    """Fraction of the four cells around each vertex that are covered."""
    c = np.asarray(cells, dtype=float)
    left = np.roll(c, 1, axis=0)
    return (c + left + np.roll(c, 1, axis=1) + np.roll(left, 1, axis=1)) / 4.0


def sample_field(params: EnsembleParams, seed: int, index: int) -> CoefficientField:
    """Draw realization ``index`` (>= 1) of the overlapping-squares ensemble."""
    if index < 1:
        raise ParameterError(f"realization index must be >= 1, got {index}")
    centers = sample_centers(params, seed, index)
    cells = cover_cells(centers, params.n, params.k)
    return CoefficientField(params, centers, cells, vertex_fraction(cells), int(index), int(seed))


def coefficient_on_grid(field: CoefficientField, lam: float | None = None) -> np.ndarray:
    """Vertex-sampled coefficient ``lam + (1 - lam) * a_hat`` (n x n)."""
    lam = field.params.lam if lam is None else float(lam)
    return lam + (1.0 - lam) * field.vertex_value


# --- symmetries of the periodic lattice --------------------------------------

_KINDS = ("identity", "translate", "rotate90", "reflect_x1", "reflect_x2", "swap_axes")


@dataclass(frozen=True)
class SymmetryOp:
    """A lattice-preserving isometry of the torus.

    ``rotate90`` is the counter-clockwise quarter turn ``(x1, x2) -> (-x2, x1)``
    about the origin; reflections negate one coordinate.
    """

    kind: str = "identity"
    shift: tuple[int, int] = dc_field(default=(0, 0))

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown symmetry {self.kind!r}")

    @classmethod
    def translate(cls, d1: int, d2: int) -> "SymmetryOp":
        return cls("translate", (int(d1), int(d2)))

    @property
    def matrix(self) -> np.ndarray:
        """Orthogonal 2x2 matrix acting on directions."""
        return {
            "identity": np.eye(2),
            "translate": np.eye(2),
            "rotate90": np.array([[0.0, -1.0], [1.0, 0.0]]),
            "reflect_x1": np.diag([-1.0, 1.0]),
            "reflect_x2": np.diag([1.0, -1.0]),
            "swap_axes": np.array([[0.0, 1.0], [1.0, 0.0]]),
        }[self.kind]

    def map_vertices(self, i, j, n):
        i, j = np.asarray(i), np.asarray(j)
        if self.kind == "identity":
            return i % n, j % n
        if self.kind == "translate":
            return (i + self.shift[0]) % n, (j + self.shift[1]) % n
        if self.kind == "rotate90":
            return (-j) % n, i % n
        if self.kind == "reflect_x1":
            return (-i) % n, j % n
        if self.kind == "reflect_x2":
            return i % n, (-j) % n
        return j % n, i % n

    def map_cells(self, i, j, n):
        # a cell is named by its lower-left vertex; orientation-reversing maps shift it by one
        i, j = np.asarray(i), np.asarray(j)
        if self.kind == "rotate90":
            return (-j - 1) % n, i % n
        if self.kind == "reflect_x1":
            return (-i - 1) % n, j % n
        if self.kind == "reflect_x2":
            return i % n, (-j - 1) % n
        return self.map_vertices(i, j, n)


def _permute_grid(a: np.ndarray, mapper, n: int) -> np.ndarray:
    i, j = np.indices((n, n))
    ti, tj = mapper(i, j, n)
    out = np.empty_like(a)
    out[ti, tj] = a
    return out


def vertex_permutation(op: SymmetryOp, n: int) -> np.ndarray:
    """``perm[old_dof] = new_dof`` for the vertex map of ``op``."""
    i, j = np.indices((n, n))
    ti, tj = op.map_vertices(i, j, n)
    return (ti * n + tj).ravel()


def transform_field(field: CoefficientField, op: SymmetryOp) -> CoefficientField:
    n = field.n
    cells = _permute_grid(field.cell_indicator, op.map_cells, n)
    vertex = _permute_grid(field.vertex_value, op.map_vertices, n)
    if len(field.centers):
        ci, cj = op.map_vertices(field.centers[:, 0], field.centers[:, 1], n)
        centers = np.stack([ci, cj], axis=1)
    else:
        centers = field.centers
    return CoefficientField(field.params, centers, cells, vertex, field.realization_index, field.seed)


def refine_field(field: CoefficientField, factor: int) -> CoefficientField:
    """Same geometry on a grid ``factor`` times finer (``m0 -> m0*factor``)."""
    factor = int(factor)
    if factor < 1 or factor & (factor - 1):
        raise ParameterError(f"refinement factor must be a power of two, got {factor}")
    params = field.params.replace(m0=field.params.m0 * factor)
    cells = np.kron(field.cell_indicator, np.ones((factor, factor), dtype=bool))
    return CoefficientField(
        params, field.centers * factor, cells, vertex_fraction(cells), field.realization_index, field.seed
    )


def laminate_field(params: EnsembleParams, axis: int = 0, fill: float = 0.5) -> CoefficientField:
    """Layered field varying along ``axis`` only (``axis=0``: stripes normal to x1)."""
    n = params.n
    width = int(round(fill * n))
    profile = np.arange(n) < width
    cells = np.broadcast_to(profile[:, None] if axis == 0 else profile[None, :], (n, n))
    return CoefficientField.from_cells(params, cells)
