"""
Run configuration models for the optimization drivers.
"""

from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gapforge.errors import InvalidParamsError
from gapforge.lattice.bravais import LatticeParams, parse_lattice

LatticeSpec = Union[str, Dict[str, float]]
InitStrategy = Literal["cosine", "random-bangbang", "disk-array"]


def check_lattice(value: LatticeSpec) -> LatticeSpec:
    try:
        parse_lattice(value)
    except InvalidParamsError as e:
        raise ValueError(e.message)
    return value


class KSamplingSpec(BaseModel):
    """IBZ boundary path (square/triangular only) or half-zone grid"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["ibz_path", "half_bz"] = "ibz_path"
    points_per_side: int = Field(8, ge=2)
    resolution: int = Field(6, ge=1)


class OptimizeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    m: int = Field(ge=1)
    V_plus: float = Field(gt=0)
    lattice: LatticeSpec = "square"
    n: int = Field(32, ge=8)
    kpoints: KSamplingSpec = KSamplingSpec()
    mu: int = Field(3, ge=1)
    max_iters: int = Field(30, ge=1)
    eps_v: float = Field(1e-5, gt=0)
    eps_g: float = Field(1e-4, gt=0)
    sdp_tol: float = Field(1e-7, gt=0)
    eig_tol: float = Field(1e-9, gt=0)
    solver: Literal["clarabel", "scs"] = "clarabel"
    init: InitStrategy = "cosine"
    disk_radius: float = Field(0.2, gt=0, lt=0.5)
    seed: int = 0
    restarts: int = Field(5, ge=1)
    threads: Optional[int] = Field(None, ge=1)
    out: str = "out"

    @field_validator("lattice")
    @classmethod
    def _valid_lattice(cls, value: LatticeSpec) -> LatticeSpec:
        return check_lattice(value)

    @model_validator(mode="after")
    def _path_needs_symmetric_lattice(self) -> "OptimizeConfig":
        if self.kpoints.kind == "ibz_path" and self.params.kind == "generic":
            raise ValueError("kpoints.kind 'ibz_path' needs a square or triangular lattice; use 'half_bz'")
        return self

    @property
    def params(self) -> LatticeParams:
        return parse_lattice(self.lattice)


class Optimize1DConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    m: int = Field(ge=1)
    X: float = Field(1.0, gt=0)
    V_plus: float = Field(100.0, gt=0)
    representation: Literal["step", "grid"] = "step"
    n: int = Field(128, ge=8)
    init: Literal["cosine", "barrier"] = "cosine"
    b: float = Field(0.8, ge=0)
    max_iters: int = Field(50, ge=1)
    eps: Optional[float] = Field(None, gt=0)
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    out: str = "out"

    @model_validator(mode="after")
    def _barrier_fits(self) -> "Optimize1DConfig":
        if self.b > self.X:
            raise ValueError(f"barrier length b = {self.b} exceeds the period X = {self.X}")
        return self


class SweepConfig(BaseModel):
    """Contrast sweep (1D or 2D) or lattice sweep over the fundamental domain"""

    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    kind: Literal["contrast", "lattice"]
    dim: Literal[1, 2] = 2
    Vp_list: List[float] = Field(default_factory=list)
    resolution: int = Field(11, ge=2)
    a_range: Tuple[float, float] = (0.0, 0.5)
    b_range: Tuple[float, float] = (0.8, 1.8)
    include_named: bool = True
    cold_compare: bool = False
    optimize: Optional[OptimizeConfig] = None
    optimize1d: Optional[Optimize1DConfig] = None
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    out: str = "out"

    @model_validator(mode="after")
    def _consistent(self) -> "SweepConfig":
        if self.kind == "contrast":
            if not self.Vp_list:
                raise ValueError("Vp_list must be nonempty for a contrast sweep")
            if any(v <= 0 for v in self.Vp_list) or sorted(self.Vp_list) != list(self.Vp_list):
                raise ValueError("Vp_list must be positive and ascending")
        if self.kind == "lattice" and self.dim != 2:
            raise ValueError("lattice sweeps are two-dimensional")
        if self.dim == 2 and self.optimize is None:
            raise ValueError("optimize settings are required for 2D sweeps")
        if self.dim == 1 and self.optimize1d is None:
            raise ValueError("optimize1d settings are required for 1D sweeps")
        return self
