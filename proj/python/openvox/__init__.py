"""Open-vocabulary voxel instance mapping."""

from ._core import (
    CorruptionError,
    Error,
    FormatError,
    InstanceMap,
    InvariantError,
    IoError,
    MappingSession,
    ValidationError,
    dbscan_labels,
    effective_config,
    evaluate,
    load_map,
    plan_trajectory,
    read_tensor,
    solve_assignment,
    voxelize,
    write_tensor,
)

__all__ = [
    "CorruptionError",
    "Error",
    "FormatError",
    "InstanceMap",
    "InvariantError",
    "IoError",
    "MappingSession",
    "ValidationError",
    "dbscan_labels",
    "effective_config",
    "evaluate",
    "load_map",
    "plan_trajectory",
    "read_tensor",
    "solve_assignment",
    "voxelize",
    "write_tensor",
]
