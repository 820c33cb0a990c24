"""Facet presentation of Delzant polytopes and their products."""

import itertools
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.optimize import linprog

from ..constants import ErrorMessages
from ..exceptions import PolytopeError

logger = logging.getLogger(__name__)


class Facet(BaseModel):
    """Affine function l(x) = <normal, x> + offset with a primitive inward normal."""

    model_config = ConfigDict(frozen=True)

    normal: Tuple[int, ...]
    offset: float

    @field_validator("normal")
    @classmethod
    def _primitive(cls, normal: Tuple[int, ...]) -> Tuple[int, ...]:
        if not normal or all(n == 0 for n in normal):
            raise ValueError(ErrorMessages.NONPRIMITIVE_NORMAL)
        if math.gcd(*(abs(n) for n in normal)) != 1:
            raise ValueError(f"{ErrorMessages.NONPRIMITIVE_NORMAL}: {list(normal)}")
        return normal

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate l at one point (shape (d,)) or many (shape (m, d))."""
        return np.asarray(points, dtype=float) @ np.asarray(self.normal, dtype=float) + self.offset


class ProductSplit(BaseModel):
    """Coordinate blocks of a product polytope together with its two factors."""

    model_config = ConfigDict(frozen=True)

    block1: Tuple[int, ...]
    block2: Tuple[int, ...]
    first: "DelzantPolytope"
    second: "DelzantPolytope"


class DelzantPolytope(BaseModel):
    """Polytope {x : l_k(x) >= 0 for all k}.

    The Delzant vertex condition is not verified; only the built-in
    constructors are guaranteed to produce Delzant polytopes.
    """

    model_config = ConfigDict(frozen=True)

    dim: int
    facets: Tuple[Facet, ...]
    product_split: Optional[ProductSplit] = None

    @model_validator(mode="after")
    def _check_feasible_set(self) -> "DelzantPolytope":
        if self.dim < 1:
            raise PolytopeError("Polytope dimension must be positive")
        for facet in self.facets:
            if len(facet.normal) != self.dim:
                raise PolytopeError(f"{ErrorMessages.DIMENSION_MISMATCH}: {list(facet.normal)}")
        if len(self.facets) <= self.dim:
            raise PolytopeError(ErrorMessages.UNBOUNDED_POLYTOPE)

        normals, offsets = self.normals, self.offsets
        for axis in range(self.dim):
            for sign in (1.0, -1.0):
                cost = np.zeros(self.dim)
                cost[axis] = sign
                result = linprog(cost, A_ub=-normals, b_ub=offsets,
                                 bounds=[(None, None)] * self.dim, method="highs")
                if result.status == 2:
                    raise PolytopeError(ErrorMessages.EMPTY_POLYTOPE)
                if result.status == 3:
                    raise PolytopeError(ErrorMessages.UNBOUNDED_POLYTOPE)

        if self.vertices().shape[0] == 0:
            raise PolytopeError(ErrorMessages.EMPTY_POLYTOPE)
        if np.any(self.evaluate(self.barycenter()) <= 0):
            raise PolytopeError(f"{ErrorMessages.EMPTY_POLYTOPE} (no interior point)")

        if self.product_split is not None:
            split = self.product_split
            for facet in self.facets:
                support = {i for i, n in enumerate(facet.normal) if n != 0}
                if not (support <= set(split.block1) or support <= set(split.block2)):
                    raise PolytopeError(
                        f"Facet normal {list(facet.normal)} mixes the blocks of the product split"
                    )
        return self

    @property
    def normals(self) -> np.ndarray:
        """Facet normals as a (K, d) float array."""
        return np.array([f.normal for f in self.facets], dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.facets], dtype=float)

    @property
    def is_product(self) -> bool:
        return self.product_split is not None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """All facet values: shape (K,) for one point, (m, K) for many."""
        return np.asarray(points, dtype=float) @ self.normals.T + self.offsets

    def vertices(self) -> np.ndarray:
        """Vertices found by intersecting every d-subset of facet hyperplanes."""
        normals, offsets = self.normals, self.offsets
        scale = 1.0 + float(np.max(np.abs(offsets)))
        found: List[np.ndarray] = []
        for subset in itertools.combinations(range(len(self.facets)), self.dim):
            block = normals[list(subset)]
            if abs(np.linalg.det(block)) < 1e-12:
                continue
            point = np.linalg.solve(block, -offsets[list(subset)])
            if np.all(normals @ point + offsets >= -1e-10 * scale):
                if not any(np.allclose(point, other, atol=1e-10 * scale) for other in found):
                    found.append(point)
        if not found:
            return np.zeros((0, self.dim))
        return np.array(sorted(found, key=tuple))

    def barycenter(self) -> np.ndarray:
        """Average of the vertices (an interior point of a full-dimensional polytope)."""
        return self.vertices().mean(axis=0)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        verts = self.vertices()
        return verts.min(axis=0), verts.max(axis=0)

    def factor(self, which: int) -> "DelzantPolytope":
        """Return the first (which=1) or second (which=2) factor of a product."""
        if self.product_split is None:
            raise PolytopeError(ErrorMessages.NOT_A_PRODUCT)
        if which == 1:
            return self.product_split.first
        if which == 2:
            return self.product_split.second
        raise ValueError(f"Factor index must be 1 or 2, got {which}")

    def block(self, which: int) -> Tuple[int, ...]:
        if self.product_split is None:
            raise PolytopeError(ErrorMessages.NOT_A_PRODUCT)
        return self.product_split.block1 if which == 1 else self.product_split.block2

    def same_as(self, other: "DelzantPolytope") -> bool:
        """Facet-wise equality (product structure ignored)."""
        if self.dim != other.dim or len(self.facets) != len(other.facets):
            return False
        return all(
            a.normal == b.normal and math.isclose(a.offset, b.offset, rel_tol=1e-12, abs_tol=1e-12)
            for a, b in zip(self.facets, other.facets)
        )


ProductSplit.model_rebuild()


def build_product(first: DelzantPolytope, second: DelzantPolytope) -> DelzantPolytope:
    """Product P1 x P2 with zero-padded facets and the product split recorded."""
    d1, d2 = first.dim, second.dim
    facets = [Facet(normal=tuple(f.normal) + (0,) * d2, offset=f.offset) for f in first.facets]
    facets += [Facet(normal=(0,) * d1 + tuple(f.normal), offset=f.offset) for f in second.facets]
    split = ProductSplit(
        block1=tuple(range(d1)),
        block2=tuple(range(d1, d1 + d2)),
        first=first,
        second=second,
    )
    return DelzantPolytope(dim=d1 + d2, facets=tuple(facets), product_split=split)


def interval(a: float = 0.0, b: float = 1.0) -> DelzantPolytope:
    """The interval [a, b]."""
    if not b > a:
        raise PolytopeError(f"Interval needs a < b, got [{a}, {b}]")
    return DelzantPolytope(
        dim=1,
        facets=(Facet(normal=(1,), offset=-float(a)), Facet(normal=(-1,), offset=float(b))),
    )


def box(lower: Sequence[float] = (0.0, 0.0), upper: Sequence[float] = (1.0, 1.0)) -> DelzantPolytope:
    """Axis-aligned box, built as an iterated product of intervals."""
    if len(lower) != len(upper) or not lower:
        raise PolytopeError("Box bounds must be nonempty and of equal length")
    if len(lower) == 1:
        return interval(lower[0], upper[0])
    return build_product(interval(lower[0], upper[0]), box(lower[1:], upper[1:]))


def square(side: float = 1.0) -> DelzantPolytope:
    return box((0.0, 0.0), (side, side))


def simplex(dim: int = 2, scale: float = 1.0) -> DelzantPolytope:
    """Standard simplex {x_i >= 0, sum x_i <= scale}."""
    if dim < 1:
        raise PolytopeError("Simplex dimension must be positive")
    facets = [Facet(normal=tuple(1 if j == i else 0 for j in range(dim)), offset=0.0) for i in range(dim)]
    facets.append(Facet(normal=(-1,) * dim, offset=float(scale)))
    return DelzantPolytope(dim=dim, facets=tuple(facets))


class PolytopeFactory:
    """Registry of the built-in (guaranteed Delzant) polytopes."""

    _builders: Dict[str, Callable[..., DelzantPolytope]] = {
        "interval": interval,
        "box": box,
        "square": square,
        "simplex": simplex,
        "simplex2": lambda scale=1.0: simplex(2, scale),  # Alias for the 2-simplex
    }

    @classmethod
    def create(cls, name: str, params: Optional[Dict[str, object]] = None) -> DelzantPolytope:
        """Create a built-in polytope by name."""
        if name not in cls._builders:
            raise PolytopeError(
                f"Unknown builtin polytope: {name}. Available builtins: {list(cls._builders.keys())}"
            )
        try:
            return cls._builders[name](**(params or {}))
        except TypeError as e:
            raise PolytopeError(f"Bad parameters for builtin '{name}': {e}") from e

    @classmethod
    def get_available_builtins(cls) -> List[str]:
        return list(cls._builders.keys())
