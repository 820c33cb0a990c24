"""JSON input files: polytope specs, potential files and flow configs."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from ..constants import ErrorMessages
from ..exceptions import GridError, PolytopeError, SpecFileError
from ..geometry.grid import build_grid
from ..geometry.polytope import DelzantPolytope, Facet, PolytopeFactory, build_product
from ..potential.potential import SmoothPart, SymplecticPotential, guillemin_potential

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class FacetSpec(BaseModel):
    normal: List[int]
    offset: float


class PolytopeSpec(BaseModel):
    """One of {"dim", "facets"}, {"builtin", "params"} or {"product": [spec, spec]}."""

    dim: Optional[int] = None
    facets: Optional[List[FacetSpec]] = None
    builtin: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    product: Optional[List["PolytopeSpec"]] = None

    @model_validator(mode="after")
    def _one_form(self) -> "PolytopeSpec":
        forms = [self.facets is not None, self.builtin is not None, self.product is not None]
        if sum(forms) != 1:
            raise ValueError("Polytope spec needs exactly one of 'facets', 'builtin' or 'product'")
        if self.facets is not None and self.dim is None:
            raise ValueError("Polytope spec with 'facets' needs 'dim'")
        if self.product is not None and len(self.product) != 2:
            raise ValueError("'product' takes exactly two polytope specs")
        return self

    def build(self) -> DelzantPolytope:
        if self.builtin is not None:
            return PolytopeFactory.create(self.builtin, self.params)
        if self.product is not None:
            return build_product(self.product[0].build(), self.product[1].build())
        try:
            facets = tuple(Facet(normal=tuple(f.normal), offset=f.offset) for f in self.facets)
        except ValidationError as e:
            raise PolytopeError(describe_validation_error(e)) from e
        return DelzantPolytope(dim=self.dim, facets=facets)


PolytopeSpec.model_rebuild()


class PotentialFile(BaseModel):
    """A potential u_G + f: polytope, grid resolution and node values of f."""

    polytope: PolytopeSpec
    grid_n: Union[int, List[int]]
    values: List[float]

    def build(self) -> SymplecticPotential:
        polytope = self.polytope.build()
        grid = build_grid(polytope, self.grid_n)
        if len(self.values) != grid.size:
            raise GridError(f"{ErrorMessages.FIELD_LENGTH}: file has {len(self.values)} values, grid has {grid.size} nodes")
        return guillemin_potential(polytope, grid).with_correction(np.asarray(self.values, dtype=float))

    @classmethod
    def from_potential(cls, spec: PolytopeSpec, u: SymplecticPotential) -> "PotentialFile":
        return cls(polytope=spec, grid_n=list(u.grid.n_per_axis), values=u.correction.tolist())


class PerturbationSpec(BaseModel):
    kind: str = "polynomial"
    amplitude: float = 0.01
    coeffs: Optional[List[float]] = None


class FlowConfigFile(BaseModel):
    """Flow run description; `params` overrides the FlowParams defaults."""

    polytope: PolytopeSpec
    grid_n: Optional[Union[int, List[int]]] = None
    perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)
    params: Dict[str, float] = Field(default_factory=dict)
    reference: Optional[str] = None


def describe_validation_error(error: ValidationError) -> str:
    details = error.errors()
    if not details:
        return str(error)
    location = ".".join(str(part) for part in details[0].get("loc", ()))
    message = details[0].get("msg", "invalid value")
    return f"{location}: {message}" if location else message


def load_model(path: Union[str, Path], model: Type[ModelT], missing: str = ErrorMessages.FILE_NOT_FOUND) -> ModelT:
    """Read a JSON file into a pydantic model, raising SpecFileError on any problem."""
    path = Path(path)
    if not path.is_file():
        raise SpecFileError(f"{missing}: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SpecFileError(f"Cannot read {path}: {e}") from e
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise SpecFileError(f"Malformed {path.name}: {describe_validation_error(e)}") from e


def load_polytope(path: Union[str, Path]) -> DelzantPolytope:
    return load_model(path, PolytopeSpec).build()


def load_potential(path: Union[str, Path]) -> SymplecticPotential:
    return load_model(path, PotentialFile).build()


def load_flow_config(path: Union[str, Path]) -> FlowConfigFile:
    return load_model(path, FlowConfigFile, missing=ErrorMessages.CONFIG_NOT_FOUND)


def smooth_part_to_dict(f: SmoothPart) -> Dict[str, Any]:
    """Node values of f in grid order together with the lattice shape."""
    return {"n_per_axis": list(f.grid.n_per_axis), "values": f.values.tolist()}

