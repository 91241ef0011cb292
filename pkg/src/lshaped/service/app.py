"""FastAPI application wrapping the solver package.

One POST endpoint per operation (solve, bounds, bench, gen, check); the
CLI is a thin client of these.  Library errors map to a structured
error body whose ``kind`` the client turns into an exit code.
"""

from __future__ import annotations

import dataclasses

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import errors as err
from ..bench import bench_sweep
from ..instance import GENERATORS, TwoStageProblem, validate
from ..saa import evaluate_candidates, saa_lower_bound
from ..smps import SmpsTriplet, parse_native, parse_smps, write_native
from ..solver import run, theory_bounds
from . import schemas as S

app = FastAPI(title="lshaped solver service", version="0.1.0")


def _error_kind(exc: Exception) -> str:
    if isinstance(exc, err.USAGE_ERRORS):
        return "usage"
    if isinstance(exc, err.DATA_ERRORS):
        return "data"
    if isinstance(exc, err.NUMERIC_ERRORS):
        return "numeric"
    return "internal"


@app.exception_handler(err.SolverError)
async def _solver_error(request: Request, exc: err.SolverError):
    return JSONResponse(
        status_code=400,
        content=S.ErrorBody(kind=_error_kind(exc), message=str(exc)).model_dump(),
    )


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(
        status_code=400,
        content=S.ErrorBody(kind="usage", message=str(exc)).model_dump(),
    )


def build_problem(spec: S.InstanceSpec) -> TwoStageProblem:
    if spec.native is not None:
        return parse_native(spec.native)
    if spec.smps is not None:
        return parse_smps(SmpsTriplet(spec.smps.core, spec.smps.time, spec.smps.stoch))
    gen = GENERATORS.get(spec.generator.name)
    if gen is None:
        raise err.BadParameter(
            f"unknown generator {spec.generator.name!r}; have {sorted(GENERATORS)}"
        )
    return gen(**spec.generator.params)


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/solve", response_model=S.SolveResponse)
def solve(req: S.SolveRequest) -> S.SolveResponse:
    problem = build_problem(req.instance)
    config = req.settings.to_config()
    result = run(problem, config)
    evaluation = None
    if req.evaluate:
        ev = evaluate_candidates(
            problem,
            result.last_iterates,
            eval_size=req.eval_size,
            seed=config.seed,
            workers=config.workers,
            exact=config.sample_size == 0,
        )
        evaluation = S.EvaluationResult(
            best_value=ev.best_value,
            best_index=ev.best_index,
            best_x=[float(v) for v in ev.best_x],
            size=req.eval_size,
            exact=config.sample_size == 0,
        )
    return S.SolveResponse(
        status=result.status,
        best_value=result.best_value,
        best_x=[float(v) for v in result.best_x],
        summary=result.summary,
        trace_csv=result.trace.to_csv(),
        evaluation=evaluation,
    )


@app.post("/bounds", response_model=S.BoundsResponse)
def bounds(req: S.BoundsRequest) -> S.BoundsResponse:
    problem = build_problem(req.instance)
    est = saa_lower_bound(problem, batches=req.batches, batch_size=req.batch_size, seed=req.seed)
    return S.BoundsResponse(
        mean=est.mean,
        half_width=est.half_width,
        batches=est.batches,
        batch_size=est.batch_size,
        seed=est.seed,
        batch_values=est.batch_values,
        document=est.to_document(),
    )


@app.post("/bench", response_model=S.BenchResponse)
def bench(req: S.BenchRequest) -> S.BenchResponse:
    problem = build_problem(req.instance)
    base = req.settings.to_config()
    report = bench_sweep(
        problem,
        base,
        constant_rhos=req.constant_rhos,
        practical_cps=req.practical_cps,
        f_star=req.f_star,
        seeds=req.seeds,
        eval_size=req.eval_size,
        workers=base.workers,
    )
    rows = [
        S.BenchRowModel(policy=r.policy, param=r.param, mean=r.mean, half_width=r.half_width, values=r.values)
        for r in report.rows
    ]
    best = next(r for r in rows if r.policy == report.best.policy and r.param == report.best.param)
    return S.BenchResponse(rows=rows, best=best, seeds=report.seeds)


@app.post("/gen", response_model=S.GenResponse)
def gen(req: S.GenRequest) -> S.GenResponse:
    spec = S.InstanceSpec(generator=S.GeneratorSpec(name=req.name, params=req.params))
    problem = build_problem(spec)
    report = validate(problem)
    return S.GenResponse(
        name=problem.name,
        native=write_native(problem),
        n=problem.n,
        m=problem.m,
        l=problem.l,
        r=problem.r,
        scenario_count=report.scenario_count,
        diameter=report.diameter,
    )


@app.post("/check", response_model=S.CheckResponse)
def check(req: S.CheckRequest) -> S.CheckResponse:
    problem = build_problem(req.instance)
    report = validate(problem)
    theory = None
    if req.G is not None and req.f0 is not None and req.f_star is not None:
        policy = (req.policy or S.PolicySpec(type="constant", rho=1.0)).to_policy()
        tb = theory_bounds(
            G=req.G,
            D=report.diameter,
            eps1=req.eps1,
            eps2=req.eps2,
            beta=req.beta,
            policy=policy,
            f0=req.f0,
            f_star=req.f_star,
            mu=req.mu,
            v=req.v,
        )
        theory = {k: v for k, v in dataclasses.asdict(tb).items()}
    return S.CheckResponse(
        name=problem.name,
        n=problem.n,
        m=problem.m,
        l=problem.l,
        r=problem.r,
        scenario_count=report.scenario_count,
        diameter=report.diameter,
        feasible_point=[float(v) for v in report.x_feasible],
        theory=theory,
    )
