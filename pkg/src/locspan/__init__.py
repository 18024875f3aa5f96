"""Localized geometric spanner construction on quasi unit disk graphs."""

__version__ = "0.1.0"

from .geometry import GeometryError, GridSpec, Point, dist
from .graph import QudgInstance, SpannerGraph, build_qudg, random_instance
from .pipelines import (
    LosParams,
    PipelineError,
    PlosParams,
    los,
    los_params,
    plos,
    plos_params,
)
from .simulator import (
    Message,
    NodeProgram,
    RoundTrace,
    SimulationError,
    distributed_cluster_cover,
    distributed_los,
    distributed_plos,
    run_protocol,
)

__all__ = [
    "GeometryError",
    "GridSpec",
    "Point",
    "dist",
    "QudgInstance",
    "SpannerGraph",
    "build_qudg",
    "random_instance",
    "PipelineError",
    "LosParams",
    "PlosParams",
    "los",
    "los_params",
    "plos",
    "plos_params",
    "Message",
    "NodeProgram",
    "RoundTrace",
    "SimulationError",
    "distributed_cluster_cover",
    "distributed_los",
    "distributed_plos",
    "run_protocol",
    "__version__",
]
