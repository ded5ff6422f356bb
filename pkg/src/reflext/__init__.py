"""Discrete verification toolkit for clearance-ball covers, reflection maps,
extension operators and heat-kernel profiles on weighted graphs."""

from .domains import (DomainDecomposition, boundary_decomposition, build_domain,
                      corkscrew_check, find_uniform_curve)
from .extension import (ExtensionOperator, boundary_energy, build_extension,
                        extend, extension_checks, function_family)
from .forms import (PartitionOfUnity, besov_functional, capacity_and_potential,
                    css_check, energy_and_measure, heat_kernel, mean_exit_time,
                    partition_of_unity, phi_from_psi, poincare_constant)
from .hke import beta_fit, deep_interior_ratio, hke_profile, reflected_space
from .reflection import ReflectionMap, build_reflection, validate_reflection
from .report import CheckRecord, CheckReport
from .space import (Ball, ScaleFunction, Space, ball_and_measure, build_space,
                    doubling_constant, rnet)
from .whitney import (WhitneyCover, WhitneyGraph, build_whitney, chain,
                      exactness_report, near_and_central, whitney_graph)

__all__ = [
    "Ball", "CheckRecord", "CheckReport", "DomainDecomposition",
    "ExtensionOperator", "PartitionOfUnity", "ReflectionMap", "ScaleFunction",
    "Space", "WhitneyCover", "WhitneyGraph", "ball_and_measure", "beta_fit",
    "besov_functional", "boundary_decomposition", "boundary_energy",
    "build_domain", "build_extension", "build_reflection", "build_space",
    "build_whitney", "capacity_and_potential", "chain", "corkscrew_check",
    "css_check", "deep_interior_ratio", "doubling_constant",
    "energy_and_measure", "exactness_report", "extend", "extension_checks",
    "find_uniform_curve", "function_family", "heat_kernel", "hke_profile",
    "mean_exit_time", "near_and_central", "partition_of_unity", "phi_from_psi",
    "poincare_constant", "reflected_space", "rnet", "validate_reflection",
    "whitney_graph",
]
