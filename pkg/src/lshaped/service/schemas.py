"""Pydantic request/response models for the solver service.

Instances travel by value (file contents or generator parameters), so
the service never touches the client filesystem.  Every model forbids
unknown keys: a typo in a config is a usage error, not a silent default.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from ..errors import MissingParameter
from ..oracle import NoiseModel
from ..solver import Constant, Optimal, Practical, SharpConstant, SharpOptimal, SolverConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeneratorSpec(StrictModel):
    name: str
    params: dict[str, Any] = {}


class SmpsSource(StrictModel):
    core: str
    time: str
    stoch: str


class InstanceSpec(StrictModel):
    """Exactly one of: native document text, SMPS file contents, generator."""

    native: Optional[str] = None
    smps: Optional[SmpsSource] = None
    generator: Optional[GeneratorSpec] = None

    @model_validator(mode="after")
    def _one_source(self):
        given = sum(x is not None for x in (self.native, self.smps, self.generator))
        if given != 1:
            raise ValueError("instance needs exactly one of native/smps/generator")
        return self


class PolicySpec(StrictModel):
    type: Literal["constant", "optimal", "practical", "sharp-constant", "sharp-optimal"] = "constant"
    rho: Optional[float] = None
    c_p: Optional[float] = None
    f_star: Optional[float] = None
    eps2: float = 0.0
    mu: Optional[float] = None
    v: Optional[float] = None
    ebar: Optional[float] = None
    D: Optional[float] = None

    def to_policy(self):
        if self.type == "constant":
            if self.rho is None:
                raise MissingParameter("constant policy needs rho")
            return Constant(self.rho)
        if self.type == "practical":
            if self.c_p is None:
                raise MissingParameter("practical policy needs c_p")
            return Practical(self.c_p)
        if self.type == "optimal":
            if self.f_star is None:
                raise MissingParameter("optimal policy needs f_star")
            return Optimal(f_star=self.f_star, eps2=self.eps2, D=self.D)
        if self.type == "sharp-constant":
            if self.mu is None or self.v is None or self.ebar is None:
                raise MissingParameter("sharp-constant policy needs mu, v, ebar")
            return SharpConstant(mu=self.mu, v=self.v, ebar=self.ebar)
        if self.mu is None or self.f_star is None:
            raise MissingParameter("sharp-optimal policy needs mu and f_star")
        return SharpOptimal(mu=self.mu, f_star=self.f_star, eps2=self.eps2)


class SolverSettings(StrictModel):
    beta: float = 0.5
    samples: int = 100          # 0 -> exact oracle
    memory: int = 5
    policy: PolicySpec = PolicySpec(type="constant", rho=1.0)
    max_outer: int = 1000
    max_inner: int = 1000
    max_inner_per_outer: Optional[int] = None
    stop_tol: float = 1e-9
    seed: int = 0
    workers: int = 1
    x0: Optional[list[float]] = None
    eps1: float = 0.0
    eps2: float = 0.0
    grad_bound: Optional[float] = None

    def to_config(self) -> SolverConfig:
        noise = NoiseModel(self.eps1, self.eps2) if (self.eps1 or self.eps2) else None
        cfg = SolverConfig(
            beta=self.beta,
            sample_size=self.samples,
            policy=self.policy.to_policy(),
            memory=self.memory,
            max_outer=self.max_outer,
            max_total_inner=self.max_inner,
            max_inner_per_outer=self.max_inner_per_outer,
            stop_tol=self.stop_tol,
            seed=self.seed,
            workers=self.workers,
            x0=self.x0,
            noise=noise,
            grad_bound=self.grad_bound,
        )
        cfg.check()
        return cfg


class SolveRequest(StrictModel):
    instance: InstanceSpec
    settings: SolverSettings = SolverSettings()
    evaluate: bool = False
    eval_size: int = 1000


class EvaluationResult(StrictModel):
    best_value: float
    best_index: int
    best_x: list[float]
    size: int
    exact: bool


class SolveResponse(StrictModel):
    status: str
    best_value: float
    best_x: list[float]
    summary: dict
    trace_csv: str
    evaluation: Optional[EvaluationResult] = None


class BoundsRequest(StrictModel):
    instance: InstanceSpec
    batches: int = 50
    batch_size: int = 100
    seed: int = 0


class BoundsResponse(StrictModel):
    mean: float
    half_width: Optional[float]
    batches: int
    batch_size: int
    seed: int
    batch_values: list[float]
    document: str


class BenchRequest(StrictModel):
    instance: InstanceSpec
    settings: SolverSettings = SolverSettings()
    constant_rhos: list[float] = []
    practical_cps: list[float] = []
    f_star: Optional[float] = None
    seeds: int = 10
    eval_size: int = 1000


class BenchRowModel(StrictModel):
    policy: str
    param: Optional[float]
    mean: float
    half_width: Optional[float]
    values: list[float]


class BenchResponse(StrictModel):
    rows: list[BenchRowModel]
    best: BenchRowModel
    seeds: list[int]


class GenRequest(StrictModel):
    name: str
    params: dict[str, Any] = {}


class GenResponse(StrictModel):
    name: str
    native: str
    n: int
    m: int
    l: int
    r: int
    scenario_count: int
    diameter: float


class CheckRequest(StrictModel):
    instance: InstanceSpec
    policy: Optional[PolicySpec] = None
    beta: float = 0.5
    G: Optional[float] = None
    eps1: float = 0.0
    eps2: float = 0.0
    f0: Optional[float] = None
    f_star: Optional[float] = None
    mu: Optional[float] = None
    v: Optional[float] = None


class CheckResponse(StrictModel):
    name: str
    n: int
    m: int
    l: int
    r: int
    scenario_count: int
    diameter: float
    feasible_point: list[float]
    theory: Optional[dict] = None


class ErrorBody(StrictModel):
    kind: Literal["usage", "data", "numeric", "internal"]
    message: str
