from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

ArtifactFormat = Literal["csv", "gnuplot", "swac", "yaml", "json"]


class ArtifactRef(BaseModel):
    """Reference to a file written by an experiment or command."""
    path: str = Field(..., description="Path to the artifact file.")
    format: ArtifactFormat = Field("csv", description="Artifact serialization format.")
    rows: Optional[int] = Field(None, ge=0, description="Number of rows (tables only).")
    columns: List[str] = Field(default_factory=list, description="Column names (tables only).")
    description: Optional[str] = Field(None, description="Human-readable description.")


class SummaryRow(BaseModel):
    method: str
    mean: float
    std: Optional[float] = Field(None, description="Sample std (ddof=1); empty for a single seed.")
    n_seeds: int = Field(..., ge=1)


class SeedResult(BaseModel):
    seed: int
    out_dir: str
    test_accuracy: Dict[str, float] = Field(default_factory=dict, description="method -> test accuracy")
    extras: Dict[str, float] = Field(default_factory=dict, description="widths, segment minimizers, gaps")
    artifacts: List[ArtifactRef] = Field(default_factory=list)


class ExperimentReport(BaseModel):
    name: str
    recipe: str
    config_hash: str
    budget_iters: int
    seeds: List[int]
    results: List[SeedResult] = Field(default_factory=list)
    summary: List[SummaryRow] = Field(default_factory=list)
    artifacts: List[ArtifactRef] = Field(default_factory=list)
