"""Problem descriptions: TOML configuration, initial data and their construction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import tomli
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..hamiltonians import BUILTINS, Hamiltonian
from ..junction import Junction
from ..junction_conditions import CUSTOM_F, FluxLimitedF, compute_A0


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class JunctionSection(_Strict):
    branches: int = Field(ge=1)


class HamiltonianSection(_Strict):
    name: Literal["quadratic", "absolute", "asymmetric"]
    center: float = 0.0
    scale: float = 1.0
    shift: float = 0.0
    mirror: bool = False


class FluxLimitedSection(_Strict):
    type: Literal["flux_limited"]
    A: Union[float, Literal["-inf", "A0"]] = "A0"


class CustomFSection(_Strict):
    type: Literal["custom"]
    name: Literal["exp_sum", "linear_sum"]
    weight: float = 1.0
    offset: Optional[float] = None


class InitialSection(_Strict):
    kind: Literal["zero", "cone", "tent", "table", "affine"]
    slope: float = 1.0
    height: float = 1.0
    width: float = 1.0
    slopes: Optional[list[float]] = None
    offset: float = 0.0
    xs: Optional[list[float]] = None
    values: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _table(self):
        if self.kind == "table":
            if not self.xs or not self.values:
                raise ValueError("table initial datum needs xs and values")
            if self.xs[0] != 0.0 or any(b <= a for a, b in zip(self.xs, self.xs[1:])):
                raise ValueError("table xs must start at 0 and increase strictly")
            if any(len(v) != len(self.xs) for v in self.values):
                raise ValueError("every table row must match xs")
            if len({v[0] for v in self.values}) != 1:
                raise ValueError("table rows must agree at the origin")
        if self.kind == "tent" and self.width <= 0:
            raise ValueError("tent width must be positive")
        return self


class GridSection(_Strict):
    dx: float = Field(default=0.1, gt=0)
    cfl_safety: float = Field(default=0.9, gt=0, le=1)
    boundary_closure: Literal["frozen-slope", "gradient-extrapolation"] = "frozen-slope"
    length: Optional[float] = Field(default=None, gt=0)


class ExperimentSection(_Strict):
    horizon: float = Field(default=0.5, ge=0)
    radius: float = Field(default=2.0, gt=0)
    dx_list: list[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    oracle: Literal["auto", "hopf-lax", "self"] = "auto"
    refinement: int = Field(default=8, ge=2)
    record_every: int = Field(default=1, ge=1)


class VertexSection(_Strict):
    gamma: float = Field(default=0.1, gt=0)
    K: float = Field(default=5.0, gt=0)
    samples: int = Field(default=10_000, ge=1000)
    A: Optional[float] = None


class InvariantSection(_Strict):
    random_data: int = Field(default=20, ge=1)
    steps: int = Field(default=1000, ge=1)
    probes: int = Field(default=1000, ge=1)


class Config(_Strict):
    junction: JunctionSection
    hamiltonians: list[HamiltonianSection]
    junction_function: Union[FluxLimitedSection, CustomFSection] = Field(discriminator="type")
    initial: InitialSection = InitialSection(kind="zero")
    grid: GridSection = GridSection()
    experiment: ExperimentSection = ExperimentSection()
    vertex: VertexSection = VertexSection()
    invariants: InvariantSection = InvariantSection()

    @field_validator("hamiltonians")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one Hamiltonian is required")
        return v

    @model_validator(mode="after")
    def _counts(self):
        n = self.junction.branches
        if len(self.hamiltonians) not in (1, n):
            raise ValueError(f"give 1 or {n} Hamiltonians, got {len(self.hamiltonians)}")
        init = self.initial
        if init.kind == "table" and len(init.values) != n:
            raise ValueError(f"table needs {n} rows of values")
        if init.kind == "affine" and init.slopes is not None and len(init.slopes) not in (1, n):
            raise ValueError(f"affine slopes must have 1 or {n} entries")
        return self


def load_config(path: Union[str, Path]) -> Config:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> Config:
    from pydantic import ValidationError

    try:
        return Config.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# initial data


@dataclass
class InitialDatum:
    """``u0(branch, x)`` on the junction with a declared Lipschitz constant."""

    kind: str
    lipschitz: float
    params: dict

    def __call__(self, branch: int, x):
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k == "zero":
            return np.zeros_like(x)
        if k == "cone":
            return p["slope"] * x
        if k == "tent":
            return p["height"] * np.maximum(0.0, 1.0 - x / p["width"])
        if k == "affine":
            return p["offset"] + p["slopes"][branch - 1] * x
        if k == "table":
            return np.interp(x, p["xs"], p["values"][branch - 1])
        raise ConfigError(f"unknown initial datum {k!r}")

    def breakpoints(self, branch: int) -> np.ndarray:
        """Coordinates where the datum may have kinks on a branch (origin included)."""
        k, p = self.kind, self.params
        if k == "tent":
            return np.array([0.0, p["width"]])
        if k == "table":
            return np.asarray(p["xs"], dtype=float)
        return np.array([0.0])

    def line(self, z):
        """The glued-line datum: branch 1 is ``z >= 0``, branch 2 is ``z <= 0``."""
        z = np.asarray(z, dtype=float)
        return np.where(z >= 0, self(1, np.abs(z)), self(2, np.abs(z)))

    def line_breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self.breakpoints(1), -self.breakpoints(2)]))


def make_initial(sec: InitialSection, n: int) -> InitialDatum:
    if sec.kind == "zero":
        return InitialDatum("zero", 0.0, {})
    if sec.kind == "cone":
        return InitialDatum("cone", abs(sec.slope), {"slope": sec.slope})
    if sec.kind == "tent":
        return InitialDatum("tent", abs(sec.height) / sec.width, {"height": sec.height, "width": sec.width})
    if sec.kind == "affine":
        slopes = sec.slopes if sec.slopes is not None else [sec.slope]
        slopes = list(slopes) * n if len(slopes) == 1 else list(slopes)
        return InitialDatum("affine", max(abs(s) for s in slopes), {"slopes": slopes, "offset": sec.offset})
    xs = np.asarray(sec.xs, dtype=float)
    vals = [np.asarray(v, dtype=float) for v in sec.values]
    lip = max(float(np.max(np.abs(np.diff(v) / np.diff(xs)))) if len(xs) > 1 else 0.0 for v in vals)
    return InitialDatum("table", lip, {"xs": xs, "values": vals})


# ---------------------------------------------------------------------------
# problems


@dataclass
class ProblemSpec:
    junction: Junction
    hamiltonians: list
    F: object
    A: Optional[float]
    initial: InitialDatum
    horizon: float
    radius: float
    glued_line: bool
    line_hamiltonian: Optional[Hamiltonian] = None

    @property
    def n(self) -> int:
        return self.junction.num_branches


def make_hamiltonian(sec: HamiltonianSection) -> Hamiltonian:
    factory = BUILTINS[sec.name]
    H = factory() if sec.name == "asymmetric" else factory(sec.center, sec.scale, sec.shift)
    return H.mirrored() if sec.mirror else H


def _is_even(sec: HamiltonianSection) -> bool:
    return sec.name in ("quadratic", "absolute") and sec.center == 0.0


def build_problem(cfg: Config) -> ProblemSpec:
    n = cfg.junction.branches
    secs = cfg.hamiltonians * n if len(cfg.hamiltonians) == 1 else cfg.hamiltonians
    hs = [make_hamiltonian(s) for s in secs]
    A0 = compute_A0(hs)
    jf = cfg.junction_function
    A: Optional[float]
    if isinstance(jf, FluxLimitedSection):
        A = A0 if jf.A == "A0" else (-math.inf if jf.A == "-inf" else float(jf.A))
        F = FluxLimitedF(hs, A)
    else:
        A = None
        if jf.name == "exp_sum":
            F = CUSTOM_F["exp_sum"](n, jf.weight, 0.0 if jf.offset is None else jf.offset)
        else:
            if jf.offset is not None:
                raise ConfigError("linear_sum takes no offset")
            F = CUSTOM_F["linear_sum"](n, jf.weight)
    glued, line_H = False, None
    if n == 2 and isinstance(F, FluxLimitedF) and F.A <= A0:
        s1, s2 = secs
        same_family = s1.model_dump(exclude={"mirror"}) == s2.model_dump(exclude={"mirror"})
        if same_family and (s1.mirror != s2.mirror or _is_even(s1)):
            glued = True
            line_H = make_hamiltonian(s1)
    return ProblemSpec(
        junction=Junction(n),
        hamiltonians=hs,
        F=F,
        A=A,
        initial=make_initial(cfg.initial, n),
        horizon=cfg.experiment.horizon,
        radius=cfg.experiment.radius,
        glued_line=glued,
        line_hamiltonian=line_H,
    )


__all__ = [
    "Config",
    "ConfigError",
    "InitialDatum",
    "ProblemSpec",
    "build_problem",
    "load_config",
    "make_initial",
    "parse_config",
]
