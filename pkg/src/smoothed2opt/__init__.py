"""Smoothed analysis toolkit for 2-opt on Euclidean TSP."""
from .errors import (DomainError, InsufficientDataError, InvalidInputError, InvalidMoveError,
                     InvalidParameterError, NumericalError, ParseError, RangeError,
                     UnsupportedFormatError)
from .instances import (AdversarialLayout, PerturbationSpec, PointSet, bounding_box_check,
                        generate_adversarial, load_instance, perturb, save_instance)
from .tour import (RunTrace, Tour, TwoChange, apply_two_change, delta, find_improving,
                   initial_tour, is_local_optimum, min_improvement, run_two_opt, tour_length)
from .linked_pairs import (LinkedPair, classify_pair, enumerate_linked_pairs,
                           extract_disjoint_pairs, min_linked_improvement)
from .special import (BesselArgs, ChiParams, bessel_i, bessel_lower_bound, chi_cdf, chi_density,
                      chi_inverse_moment, chi_sample, simple_inequality_lhs)
from .angles import (AngleContext, RandomExptOutcome, angle_density, angle_sup_bound,
                     eta_density_bound, mc_angle_verify, optimal_angle, random_expt, sample_angle)
from .bounds import paper_bound
from .harness import (ExperimentConfig, TailEstimate, estimate_tail, export, fit_scaling,
                      potential_bound_check, run_iteration_experiment)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "InsufficientDataError", "InvalidInputError", "InvalidMoveError",
    "InvalidParameterError", "NumericalError", "ParseError", "RangeError",
    "UnsupportedFormatError", "AdversarialLayout", "PerturbationSpec", "PointSet",
    "bounding_box_check", "generate_adversarial", "load_instance", "perturb", "save_instance",
    "RunTrace", "Tour", "TwoChange", "apply_two_change", "delta", "find_improving",
    "initial_tour", "is_local_optimum", "min_improvement", "run_two_opt", "tour_length",
    "LinkedPair", "classify_pair", "enumerate_linked_pairs", "extract_disjoint_pairs",
    "min_linked_improvement", "BesselArgs", "ChiParams", "bessel_i", "bessel_lower_bound",
    "chi_cdf", "chi_density", "chi_inverse_moment", "chi_sample", "simple_inequality_lhs",
    "AngleContext", "RandomExptOutcome", "angle_density", "angle_sup_bound",
    "eta_density_bound", "mc_angle_verify", "optimal_angle", "random_expt", "sample_angle",
    "paper_bound", "ExperimentConfig", "TailEstimate", "estimate_tail", "export", "fit_scaling",
    "potential_bound_check", "run_iteration_experiment",
]
