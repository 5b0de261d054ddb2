"""Request and response bodies for the deployment service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..domain import ProblemInstance, ValidationReport
from ..ga import GaConfig
from ..mobility import WorldConfig
from ..ops import CompareResult, OptimizeResult, OracleResult, SimulateResult
from ..runio import RunManifest
from ..simulation import SimConfig


class ValidateRequest(BaseModel):
    instance: ProblemInstance


class OptimizeRequest(BaseModel):
    instance: ProblemInstance
    ga: GaConfig = Field(default_factory=GaConfig)


class OracleRequest(BaseModel):
    instance: ProblemInstance


class GenerateRequest(BaseModel):
    config: WorldConfig = Field(default_factory=WorldConfig)
    out_dir: str


class SimulateRequest(BaseModel):
    world_dir: str
    config: SimConfig = Field(default_factory=SimConfig)
    out_dir: str
    seeds: list[int] | None = None


class CompareRequest(BaseModel):
    world_dir: str
    configs: list[SimConfig]
    out_dir: str
    seeds: list[int] | None = None


class GenerateResponse(BaseModel):
    manifest: RunManifest


class HealthResponse(BaseModel):
    status: str
    version: str


__all__ = [
    "ValidateRequest",
    "ValidationReport",
    "OptimizeRequest",
    "OptimizeResult",
    "OracleRequest",
    "OracleResult",
    "GenerateRequest",
    "GenerateResponse",
    "SimulateRequest",
    "SimulateResult",
    "CompareRequest",
    "CompareResult",
    "HealthResponse",
]
