"""Spatio-temporal linear instability analysis of polynomial dispersion
relations via dual Lefschetz thimbles."""

from .poly import CPoly, PolyMatrix, ParseError, parse_expression
from .problem import Problem, parse_dispersion, kdotv, height_phase
from .critical import (
    CriticalPoint,
    SearchConfig,
    find_critical_points,
    hessian,
    factor_hessian,
    morse_height,
    check_morse,
)
from .flow import FlowLine, ThimbleBundle, build_dual_thimble, flow_field, integrate_flow, seed
from .intersection import IntersectionResult, ThimbleSection, degree, intersection_form, section
from .asymptotics import (
    AsymptoticTerm,
    MaxGrowthResult,
    classify_frame,
    green_asymptotic,
    growth_map,
    max_growth,
)
from .oracle import GreenEstimate, GridSpec, green_quadrature, residue_sum, roots_k0
from .pipeline import AnalysisConfig, analyze_frame

__version__ = "0.1.0"
