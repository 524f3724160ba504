from ._vemflow import (
    ConfigError,
    ConvergenceFailure,
    Error,
    IllShapedCell,
    InvalidCoefficient,
    InvalidInput,
    InvalidMesh,
    Mesh,
    SolverFailure,
    UnsupportedDegree,
    build_cartesian,
    build_voronoi,
    convergence_study,
    element_operators,
    run_cli,
    simulate,
)

__all__ = [
    "ConfigError",
    "ConvergenceFailure",
    "Error",
    "IllShapedCell",
    "InvalidCoefficient",
    "InvalidInput",
    "InvalidMesh",
    "Mesh",
    "SolverFailure",
    "UnsupportedDegree",
    "build_cartesian",
    "build_voronoi",
    "convergence_study",
    "element_operators",
    "run_cli",
    "simulate",
]
