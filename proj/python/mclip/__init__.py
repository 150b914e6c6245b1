"""Multi-hypothesis data association with particle CLIPPER solvers."""

from ._core import (
    AffinityMatrix,
    Clique,
    CliqueCapExceeded,
    NoiseScale,
    Pose,
    PoseDistribution,
    RunReport,
    SolverConfig,
    SolverResult,
    build_affinity,
    cliques_to_distribution,
    energy_distance,
    generate_scene,
    max_eigenvalue,
    maximal_cliques,
    mmd,
    ransac_reference,
    run_baseline,
    run_langevin,
    run_stein,
    wasserstein1,
)

__all__ = [
    "AffinityMatrix",
    "Clique",
    "CliqueCapExceeded",
    "NoiseScale",
    "Pose",
    "PoseDistribution",
    "RunReport",
    "SolverConfig",
    "SolverResult",
    "build_affinity",
    "cliques_to_distribution",
    "energy_distance",
    "generate_scene",
    "max_eigenvalue",
    "maximal_cliques",
    "mmd",
    "ransac_reference",
    "run_baseline",
    "run_langevin",
    "run_stein",
    "wasserstein1",
]
