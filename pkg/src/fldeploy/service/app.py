"""HTTP surface of the deployment toolkit.

The decision endpoints (validate/optimize/oracle) are pure request/response.
The experiment endpoints (generate/simulate/compare) run a job and write its
artifacts under the requested output directory on the serving host,
returning the manifest. Error bodies carry a ``kind`` so clients can
distinguish unusable requests ("config") from solvable-nothing problems
("infeasible").
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .. import __version__, ops
from ..domain import ValidationReport
from ..ga import InfeasibleInstanceError
from . import schemas

app = FastAPI(title="fldeploy", version=__version__)


@app.exception_handler(InfeasibleInstanceError)
async def infeasible_handler(request: Request, exc: InfeasibleInstanceError):
    return JSONResponse(
        status_code=409, content={"kind": "infeasible", "detail": str(exc)}
    )


@app.exception_handler(ValueError)
async def value_error_handler(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"kind": "config", "detail": str(exc)})


@app.exception_handler(FileNotFoundError)
async def missing_file_handler(request: Request, exc: FileNotFoundError):
    return JSONResponse(status_code=400, content={"kind": "config", "detail": str(exc)})


@app.exception_handler(ValidationError)
async def validation_error_handler(request: Request, exc: ValidationError):
    return JSONResponse(status_code=400, content={"kind": "config", "detail": str(exc)})


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/validate", response_model=ValidationReport)
def validate(req: schemas.ValidateRequest) -> ValidationReport:
    return ops.op_validate(req.instance)


@app.post("/optimize", response_model=ops.OptimizeResult)
def optimize(req: schemas.OptimizeRequest) -> ops.OptimizeResult:
    return ops.op_optimize(req.instance, req.ga)


@app.post("/oracle", response_model=ops.OracleResult)
def oracle(req: schemas.OracleRequest) -> ops.OracleResult:
    return ops.op_oracle(req.instance)


@app.post("/generate", response_model=schemas.GenerateResponse)
def generate(req: schemas.GenerateRequest) -> schemas.GenerateResponse:
    return schemas.GenerateResponse(manifest=ops.op_generate(req.config, req.out_dir))


@app.post("/simulate", response_model=ops.SimulateResult)
def simulate(req: schemas.SimulateRequest) -> ops.SimulateResult:
    return ops.op_simulate(req.world_dir, req.config, req.out_dir, req.seeds)


@app.post("/compare", response_model=ops.CompareResult)
def compare(req: schemas.CompareRequest) -> ops.CompareResult:
    return ops.op_compare(req.world_dir, req.configs, req.out_dir, req.seeds)
