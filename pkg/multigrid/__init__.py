from multigrid.amg import (
    AmgConvergenceError,
    AmgHierarchy,
    AmgMode,
    FixedVCycles,
    ToThreshold,
    amg_apply,
    amg_operator,
    amg_setup,
    parse_mode,
)

__all__ = [
    "AmgConvergenceError",
    "AmgHierarchy",
    "AmgMode",
    "FixedVCycles",
    "ToThreshold",
    "amg_apply",
    "amg_operator",
    "amg_setup",
    "parse_mode",
]
