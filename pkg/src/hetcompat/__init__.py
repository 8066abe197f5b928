"""Compatibility of random variables across several probability measures.

Finite-space tools decide whether one map can carry a tuple of source
measures to a tuple of targets, build such maps, screen candidates with
f-divergences, solve extremal expectation problems under a fixed law and
construct Brownian drift changes.
"""
from .compatibility import (
    PointMap,
    almost_compat_sequence,
    check_compat,
    conditional_identity_check,
    construct_map,
    het_equiv_kernel_test,
    kernel_compat,
    point_compat_exhaustive,
    refine,
    verify_map,
)
from .convex_order import convex_order, het_order
from .divergences import divergence_necessary, divergence_screen, f_divergence, mixture_screen
from .girsanov import DriftProcess, construct_process, drift_compat, mc_verify, time_change
from .measure import (
    FiniteMeasure,
    FiniteSpace,
    MeasureTuple,
    WeightedCloud,
    average_reference,
    build_measure,
    density_profile,
    dominates,
    make_tuple,
)
from .optimize import (
    frechet_hoeffding,
    neyman_pearson,
    normal_example,
    robust_utility,
    robust_variance,
    singular_extremes,
    transform_objective,
)
from .quantiles import normal_quantile, quantile_of_density

__version__ = "0.1.0"
