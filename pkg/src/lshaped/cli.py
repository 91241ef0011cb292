"""Command-line client for the solver service.

Commands mirror the service endpoints (solve, bounds, bench, gen,
check) plus ``serve`` to run the HTTP server.  By default requests are
dispatched in-process through the ASGI app, so no server needs to be
running; ``--server URL`` targets a remote one instead.

Configuration is a JSON document (instance source, solver settings,
output paths); command-line flags override config values.  Exit codes:
0 success, 2 budget exhaustion, 64 usage error, 65 data error,
70 numeric failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any, Optional

import click
import httpx
from pydantic import ValidationError

from .service.schemas import (
    GeneratorSpec,
    InstanceSpec,
    SmpsSource,
    SolverSettings,
    StrictModel,
)

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NUMERIC = 70

_KIND_CODES = {"usage": EXIT_USAGE, "data": EXIT_DATA, "numeric": EXIT_NUMERIC, "internal": EXIT_NUMERIC}


# ---------------------------------------------------------------------------
# config document
# ---------------------------------------------------------------------------


class SmpsPaths(StrictModel):
    core_path: str
    time_path: str
    stoch_path: str


class InstanceSource(StrictModel):
    generator: Optional[GeneratorSpec] = None
    native_path: Optional[str] = None
    smps: Optional[SmpsPaths] = None


class OutputSpec(StrictModel):
    trace: Optional[str] = None
    summary: Optional[str] = None
    report: Optional[str] = None


class BoundsSpec(StrictModel):
    batches: int = 50
    batch_size: int = 100
    seed: int = 0


class BenchSpec(StrictModel):
    constant_rhos: list[float] = []
    practical_cps: list[float] = []
    f_star: Optional[float] = None
    seeds: int = 10
    eval_size: int = 1000


class CheckSpec(StrictModel):
    G: Optional[float] = None
    eps1: float = 0.0
    eps2: float = 0.0
    f0: Optional[float] = None
    f_star: Optional[float] = None
    mu: Optional[float] = None
    v: Optional[float] = None


class RunConfigDocument(StrictModel):
    """Client-side config; unknown keys are rejected."""

    instance: InstanceSource
    solver: SolverSettings = SolverSettings()
    output: OutputSpec = OutputSpec()
    evaluate: bool = False
    eval_size: int = 1000
    bounds: BoundsSpec = BoundsSpec()
    bench: BenchSpec = BenchSpec()
    check: CheckSpec = CheckSpec()


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        _fail(EXIT_DATA, f"cannot read {path}: {exc}")


def _load_config(path: Optional[str], overrides: dict) -> RunConfigDocument:
    if path is None:
        _fail(EXIT_USAGE, "a --config file is required")
    raw = _read_file(path)
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        _fail(EXIT_USAGE, f"config is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        _fail(EXIT_USAGE, "config must be a JSON object")
    solver = doc.setdefault("solver", {})
    policy = solver.setdefault("policy", {"type": "constant", "rho": 1.0})
    for key in ("seed", "beta", "samples", "memory", "stop_tol"):
        if overrides.get(key) is not None:
            solver[key] = overrides[key]
    if overrides.get("max_inner") is not None:
        solver["max_inner"] = overrides["max_inner"]
    if overrides.get("policy") is not None:
        policy["type"] = overrides["policy"]
    if overrides.get("rho") is not None:
        policy["rho"] = overrides["rho"]
    if overrides.get("cp") is not None:
        policy["c_p"] = overrides["cp"]
    out = doc.setdefault("output", {})
    if overrides.get("trace_out") is not None:
        out["trace"] = overrides["trace_out"]
    if overrides.get("summary_out") is not None:
        out["summary"] = overrides["summary_out"]
    try:
        return RunConfigDocument.model_validate(doc)
    except ValidationError as exc:
        _fail(EXIT_USAGE, f"invalid config: {exc}")


def _instance_payload(src: InstanceSource) -> dict:
    given = sum(x is not None for x in (src.generator, src.native_path, src.smps))
    if given != 1:
        _fail(EXIT_USAGE, "config instance needs exactly one of generator/native_path/smps")
    if src.generator is not None:
        spec = InstanceSpec(generator=src.generator)
    elif src.native_path is not None:
        spec = InstanceSpec(native=_read_file(src.native_path))
    else:
        spec = InstanceSpec(
            smps=SmpsSource(
                core=_read_file(src.smps.core_path),
                time=_read_file(src.smps.time_path),
                stoch=_read_file(src.smps.stoch_path),
            )
        )
    return spec.model_dump()


class ServiceClient:
    """HTTP client; in-process ASGI transport unless --server is given."""

    def __init__(self, server: Optional[str]):
        self._server = server
        self._app = None
        if server is None:
            from .service.app import app

            self._app = app

    def _request(self, path: str, payload: dict) -> httpx.Response:
        if self._server:
            with httpx.Client(base_url=self._server, timeout=None) as client:
                return client.post(path, json=payload)

        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://lshaped.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(go())

    def post(self, path: str, payload: dict) -> dict:
        resp = self._request(path, payload)
        if resp.status_code == 200:
            return resp.json()
        try:
            body = resp.json()
        except ValueError:
            _fail(EXIT_NUMERIC, f"service returned HTTP {resp.status_code}")
        if resp.status_code == 422:
            _fail(EXIT_USAGE, f"request rejected: {json.dumps(body.get('detail', body))}")
        kind = body.get("kind", "internal")
        _fail(_KIND_CODES.get(kind, EXIT_NUMERIC), body.get("message", "service error"))


def _write_output(path: Optional[str], content: str, label: str):
    if path:
        Path(path).write_text(content)
        click.echo(f"{label} written to {path}")


_common = [
    click.option("--config", "config_path", type=str, default=None, help="JSON config document"),
    click.option("--seed", type=int, default=None),
    click.option("--beta", type=float, default=None),
    click.option("--samples", type=int, default=None),
    click.option("--memory", type=int, default=None),
    click.option("--max-inner", "max_inner", type=int, default=None),
    click.option("--stop-tol", "stop_tol", type=float, default=None),
    click.option("--policy", type=click.Choice(["constant", "optimal", "practical", "sharp-constant", "sharp-optimal"]), default=None),
    click.option("--rho", type=float, default=None),
    click.option("--cp", type=float, default=None),
    click.option("--trace-out", "trace_out", type=str, default=None),
    click.option("--summary-out", "summary_out", type=str, default=None),
]


def _with_common(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


@click.group()
@click.option("--server", default=None, envvar="LSHAPED_SERVER", help="remote service URL (default: in-process)")
@click.pass_context
def main(ctx, server):
    """Two-stage stochastic LP solver (regularized L-shaped method)."""
    ctx.obj = ServiceClient(server)


@main.command()
@_with_common
@click.pass_obj
def solve(client: ServiceClient, config_path, **overrides):
    """Run the solver on the configured instance."""
    cfg = _load_config(config_path, overrides)
    payload = {
        "instance": _instance_payload(cfg.instance),
        "settings": cfg.solver.model_dump(),
        "evaluate": cfg.evaluate,
        "eval_size": cfg.eval_size,
    }
    body = client.post("/solve", payload)
    _write_output(cfg.output.trace, body["trace_csv"], "trace")
    summary_doc = dict(body["summary"])
    if body.get("evaluation"):
        summary_doc["evaluation"] = body["evaluation"]
    _write_output(cfg.output.summary, json.dumps(summary_doc, indent=2) + "\n", "summary")
    click.echo(
        f"status={body['status']} best={body['best_value']:.9g} "
        f"inner={body['summary']['inner_count']} outer={body['summary']['outer_count']}"
    )
    sys.exit(EXIT_BUDGET if body["status"] == "budget_exhausted" else EXIT_OK)


@main.command()
@_with_common
@click.option("--batches", type=int, default=None)
@click.option("--batch-size", "batch_size", type=int, default=None)
@click.option("--out", type=str, default=None, help="bound report path (overrides output.report)")
@click.pass_obj
def bounds(client: ServiceClient, config_path, batches, batch_size, out, **overrides):
    """Estimate an SAA lower bound on the optimal value."""
    cfg = _load_config(config_path, overrides)
    payload = {
        "instance": _instance_payload(cfg.instance),
        "batches": batches if batches is not None else cfg.bounds.batches,
        "batch_size": batch_size if batch_size is not None else cfg.bounds.batch_size,
        "seed": overrides.get("seed") if overrides.get("seed") is not None else cfg.bounds.seed,
    }
    body = client.post("/bounds", payload)
    _write_output(out or cfg.output.report, body["document"], "bound report")
    hw = body["half_width"]
    click.echo(f"lower bound: {body['mean']:.9g}" + (f" +- {hw:.3g}" if hw is not None else " (single batch)"))
    sys.exit(EXIT_OK)


@main.command()
@_with_common
@click.option("--seeds", type=int, default=None)
@click.option("--bench-rho", "bench_rhos", type=float, multiple=True, help="constant-policy rho values")
@click.option("--bench-cp", "bench_cps", type=float, multiple=True, help="practical-policy C_P values")
@click.option("--eval-size", "eval_size", type=int, default=None)
@click.option("--out", type=str, default=None)
@click.pass_obj
def bench(client: ServiceClient, config_path, seeds, bench_rhos, bench_cps, eval_size, out, **overrides):
    """Sweep step-size policies x seeds and tabulate evaluated values."""
    cfg = _load_config(config_path, overrides)
    payload = {
        "instance": _instance_payload(cfg.instance),
        "settings": cfg.solver.model_dump(),
        "constant_rhos": list(bench_rhos) or cfg.bench.constant_rhos,
        "practical_cps": list(bench_cps) or cfg.bench.practical_cps,
        "f_star": cfg.bench.f_star,
        "seeds": seeds if seeds is not None else cfg.bench.seeds,
        "eval_size": eval_size if eval_size is not None else cfg.bench.eval_size,
    }
    body = client.post("/bench", payload)
    for row in body["rows"]:
        param = "" if row["param"] is None else f"={row['param']:g}"
        hw = row["half_width"]
        ci = f" +- {hw:.4g}" if hw is not None else ""
        click.echo(f"{row['policy']}{param}: {row['mean']:.6f}{ci}")
    best = body["best"]
    click.echo(f"best: {best['policy']}" + ("" if best["param"] is None else f"={best['param']:g}"))
    _write_output(out or cfg.output.report, json.dumps(body, indent=2) + "\n", "bench report")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("name")
@click.option("--params", type=str, default="{}", help="generator parameters as JSON")
@click.option("-p", "pairs", multiple=True, help="key=JSONvalue parameter overrides")
@click.option("--out", type=str, required=True, help="native instance output path")
@click.pass_obj
def gen(client: ServiceClient, name, params, pairs, out):
    """Materialise a generated instance to the native format."""
    try:
        pdict: dict[str, Any] = json.loads(params)
        for pair in pairs:
            key, _, val = pair.partition("=")
            if not _:
                _fail(EXIT_USAGE, f"-p needs key=value, got {pair!r}")
            pdict[key] = json.loads(val)
    except json.JSONDecodeError as exc:
        _fail(EXIT_USAGE, f"bad generator params: {exc}")
    body = client.post("/gen", {"name": name, "params": pdict})
    Path(out).write_text(body["native"])
    click.echo(
        f"{body['name']}: n={body['n']} m={body['m']} l={body['l']} r={body['r']} "
        f"scenarios={body['scenario_count']} D={body['diameter']:.6g} -> {out}"
    )
    sys.exit(EXIT_OK)


@main.command()
@_with_common
@click.pass_obj
def check(client: ServiceClient, config_path, **overrides):
    """Validate the instance and evaluate theory bounds if parameters given."""
    cfg = _load_config(config_path, overrides)
    payload = {
        "instance": _instance_payload(cfg.instance),
        "beta": cfg.solver.beta,
        "policy": cfg.solver.policy.model_dump(),
        "G": cfg.check.G,
        "eps1": cfg.check.eps1,
        "eps2": cfg.check.eps2,
        "f0": cfg.check.f0,
        "f_star": cfg.check.f_star,
        "mu": cfg.check.mu,
        "v": cfg.check.v,
    }
    body = client.post("/check", payload)
    click.echo(
        f"{body['name']}: n={body['n']} m={body['m']} l={body['l']} r={body['r']} "
        f"scenarios={body['scenario_count']} D={body['diameter']:.6g}"
    )
    if body.get("theory"):
        click.echo(json.dumps(body["theory"], indent=2))
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
