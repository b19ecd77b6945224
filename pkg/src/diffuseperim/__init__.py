from __future__ import annotations

from typing import Any

from ._ansatz import Ansatz as Ansatz
from ._ansatz import InterfaceReport as InterfaceReport
from ._ansatz import ResolutionReport as ResolutionReport
from ._ansatz import interface_report as interface_report
from ._ansatz import resolution_residual as resolution_residual
from ._ansatz import solve_tau_eps as solve_tau_eps
from ._ansatz import tau_constant as tau_constant
from ._ansatz import tau_rate as tau_rate
from ._config import ExperimentConfig as ExperimentConfig
from ._config import WellSpec as WellSpec
from ._config import load_config as load_config
from ._config import parse_config as parse_config
from ._exceptions import BracketFailure as BracketFailure
from ._exceptions import ConfigError as ConfigError
from ._exceptions import DiffusePerimError as DiffusePerimError
from ._exceptions import GridMismatch as GridMismatch
from ._exceptions import HypothesisViolation as HypothesisViolation
from ._exceptions import NoBeta as NoBeta
from ._exceptions import NoConvergence as NoConvergence
from ._exceptions import NoDecayingSolution as NoDecayingSolution
from ._exceptions import NonAdmissible as NonAdmissible
from ._exceptions import ProfileMismatch as ProfileMismatch
from ._exceptions import QuadratureFailure as QuadratureFailure
from ._exceptions import RegimeViolation as RegimeViolation
from ._experiments import ExperimentResult as ExperimentResult
from ._experiments import execute as execute
from ._experiments import run as run
from ._minimizer import MinimizerResult as MinimizerResult
from ._minimizer import PsiTable as PsiTable
from ._minimizer import SolverOptions as SolverOptions
from ._minimizer import invert_lambda as invert_lambda
from ._minimizer import lambda_from_formula as lambda_from_formula
from ._minimizer import minimize as minimize
from ._minimizer import psi_identity as psi_identity
from ._minimizer import psi_surface as psi_surface
from ._minimizer import shoot as shoot
from ._minimizer import solve_critical_point as solve_critical_point
from ._minimizer import solve_penalized as solve_penalized
from ._pool import WorkerPool as WorkerPool
from ._potentials import DoubleWell as DoubleWell
from ._potentials import PotentialChain as PotentialChain
from ._potentials import chain as chain
from ._potentials import make_reference_well as make_reference_well
from ._potentials import normalize_well as normalize_well
from ._profile import Profile as Profile
from ._profile import ProfileConstants as ProfileConstants
from ._profile import compute_constants as compute_constants
from ._profile import compute_profile as compute_profile
from ._profile import mass_defect as mass_defect
from ._radial import EnergyReport as EnergyReport
from ._radial import GridOptions as GridOptions
from ._radial import RadialFunction as RadialFunction
from ._radial import RadialGrid as RadialGrid
from ._radial import d_phi as d_phi
from ._radial import dilate as dilate
from ._radial import dirichlet_integral as dirichlet_integral
from ._radial import energy as energy
from ._radial import make_grid as make_grid
from ._radial import mass as mass
from ._radial import quasi_triangle_constant as quasi_triangle_constant
from ._radial import rearrange as rearrange
from ._radial import resample as resample
from ._radial import restore_mass as restore_mass
from ._stability import PSReport as PSReport
from ._stability import SpectrumReport as SpectrumReport
from ._stability import StabilityReport as StabilityReport
from ._stability import ansatz_competitors as ansatz_competitors
from ._stability import estimate_nu0 as estimate_nu0
from ._stability import find_beta as find_beta
from ._stability import fuglede_check as fuglede_check
from ._stability import fuglede_summary as fuglede_summary
from ._stability import kernel_alignment as kernel_alignment
from ._stability import one_d_spectrum as one_d_spectrum
from ._stability import quantitative_stability as quantitative_stability
from ._stability import random_perturbations as random_perturbations
from ._stability import random_radial_fields as random_radial_fields
from ._stability import second_variation_spectrum as second_variation_spectrum
from ._stability import symmetrization_gap as symmetrization_gap
from ._stability import verify_ps_condition as verify_ps_condition

# Re-export imports so they look like they live directly in this package
key: str
value: Any
for key, value in list(locals().items()):
    if getattr(value, "__module__", "").startswith(f"{__name__}."):
        value.__module__ = __name__
