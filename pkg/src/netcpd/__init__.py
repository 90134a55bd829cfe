"""Online change-point detection for streams of network adjacency matrices."""

from .detector import DetectionOutcome, DetectorConfig, SplitStreams, run, run_multi, step, thresholds
from .generators import ScenarioSpec, graphon_of, sample_stream, scenario
from .graph_core import (
    AdjacencySnapshot,
    ChangeScenario,
    CusumMatrix,
    CusumState,
    GraphonMatrix,
    cusum,
    expected_cusum,
    geometric_grid,
    jump_size,
)
from .usvt import UsvtParams, eigh, usvt

__version__ = "0.1.0"

__all__ = [
    "AdjacencySnapshot",
    "ChangeScenario",
    "CusumMatrix",
    "CusumState",
    "DetectionOutcome",
    "DetectorConfig",
    "GraphonMatrix",
    "ScenarioSpec",
    "SplitStreams",
    "UsvtParams",
    "cusum",
    "eigh",
    "expected_cusum",
    "geometric_grid",
    "graphon_of",
    "jump_size",
    "run",
    "run_multi",
    "sample_stream",
    "scenario",
    "step",
    "thresholds",
    "usvt",
]
