"""Rate functions for weighted empirical means with outlier weights."""

from .convex import (
    ConeCert,
    GridFunction,
    HalfspaceDomain,
    halfspaces,
    inf_convolution,
    legendre_conjugate,
    normal_cone,
    pullback_domain,
    support_function,
    verify_subgradient,
)
from .engine import (
    AffineWeights,
    CertificateError,
    RateReport,
    Scenario,
    bulk_conjugate,
    bulk_cumulant,
    class_domain,
    compute_rate,
    outlier_domain,
    partial_mean_rate,
    tilt_domain,
)
from .laws import (
    ChiSquare1,
    ChiSquarePair,
    GammaMixLaw,
    GaussCross,
    ParticleLaw,
    custom_law,
    law_by_name,
)
from .montecarlo import DecayEstimate, MCPlan, estimate_decay, sample_Ln, subsequence_probe
from .weights import (
    A4FailureError,
    A4Result,
    DiscreteMeasure,
    LimitSets,
    OutlierTrack,
    SupportSet,
    WeightArraySpec,
    check_a4,
    decompose,
    limit_sets,
    points,
    project_to_support,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
