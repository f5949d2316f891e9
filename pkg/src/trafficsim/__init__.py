"""Deterministic microscopic traffic simulation toolchain.

Pipeline: build or generate a lane-level road network, distribute trips with
gravity/radiation OD models, convert OD matrices to timed trips, simulate
them with IDM car-following and randomized MOBIL lane changes under fixed or
max-pressure signal control, and evaluate the results (CPC, RMSE, Spearman,
travel times).
"""

__version__ = "0.1.0"

from .errors import (
    BuildError,
    InputError,
    MetricError,
    NoRouteError,
    ParseError,
    RecorderError,
    SchemaError,
    TrafficSimError,
)

__all__ = [
    "BuildError",
    "InputError",
    "MetricError",
    "NoRouteError",
    "ParseError",
    "RecorderError",
    "SchemaError",
    "TrafficSimError",
    "__version__",
]
