"""Joint image reconstruction and motion estimation for dynamic photoacoustic tomography."""

__version__ = "0.1.0"

from .acs import AcsState, acs_solve
from .admm import AdmmConfig, AdmmFlowSolver, AdmmImageSolver, admm_solve_p, admm_solve_v
from .energy import denoising_energy, total_energy
from .estimators import (
    FrameByFrameReconstructor,
    OpticalFlowEstimator,
    TVTVL2Denoiser,
    TVTVL2Reconstructor,
)
from .grid import DataSeq, EnergyTrace, Grid2D, RegParams
from .linsolve import SolverError, SparseSpdSystem, solve_spd
from .outer import fbf_reconstruct, fista_reconstruct
from .pdhg import PdhgConfig, PdhgFlowSolver, PdhgImageSolver, pdhg_solve_p, pdhg_solve_v
from .phantom import EllipseTrack, image_metrics, make_dynamic_phantom, simulate_data
from .recon import ReconResult, reference_flow, run_recipe
from .sampling import SamplingSchedule, apply_C, apply_C_adjoint, make_rsp_schedule
from .wave import ExplicitWaveOperator, WaveOperator, estimate_lipschitz, explicit_operator

__all__ = [
    "AcsState", "AdmmConfig", "AdmmFlowSolver", "AdmmImageSolver", "DataSeq", "EllipseTrack",
    "EnergyTrace", "ExplicitWaveOperator", "FrameByFrameReconstructor", "Grid2D",
    "OpticalFlowEstimator", "PdhgConfig", "PdhgFlowSolver", "PdhgImageSolver", "ReconResult",
    "RegParams", "SamplingSchedule", "SolverError", "SparseSpdSystem", "TVTVL2Denoiser",
    "TVTVL2Reconstructor", "WaveOperator", "acs_solve", "admm_solve_p", "admm_solve_v",
    "apply_C", "apply_C_adjoint", "denoising_energy", "estimate_lipschitz", "explicit_operator",
    "fbf_reconstruct", "fista_reconstruct", "image_metrics", "make_dynamic_phantom",
    "make_rsp_schedule", "pdhg_solve_p", "pdhg_solve_v", "reference_flow", "run_recipe",
    "simulate_data", "solve_spd", "total_energy",
]
