"""Monotonicity-based inclusion detection in linear elasticity with a priori
resolution guarantees."""

__version__ = "0.1.0"

from .certify import GuaranteeReport, certify, nu_linearized, nu_standard, sweep_noise_map
from .fem import LameField, assemble, element_stiffness, patch_load, solve_loadcases
from .geometry import build_mesh, build_partition, build_patches
from .monotests import (
    ALUMINIUM,
    MAKROLON,
    MaterialSpec,
    mark_linearized,
    mark_standard,
    reconstruct,
)
from .ntd import ForwardModel, NtdMatrix, add_noise, assemble_derivative_increment, assemble_ntd
from .verify import check_definition, generate_scenario, lemma_suite, soundness_trial

__all__ = [
    "ALUMINIUM",
    "MAKROLON",
    "ForwardModel",
    "GuaranteeReport",
    "LameField",
    "MaterialSpec",
    "NtdMatrix",
    "add_noise",
    "assemble",
    "assemble_derivative_increment",
    "assemble_ntd",
    "build_mesh",
    "build_partition",
    "build_patches",
    "certify",
    "check_definition",
    "element_stiffness",
    "generate_scenario",
    "lemma_suite",
    "mark_linearized",
    "mark_standard",
    "nu_linearized",
    "nu_standard",
    "patch_load",
    "reconstruct",
    "solve_loadcases",
    "soundness_trial",
    "sweep_noise_map",
]
