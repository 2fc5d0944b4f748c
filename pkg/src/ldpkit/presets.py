"""Ready-made scenarios used by the CLI examples and the test suite."""

from __future__ import annotations

import numpy as np

from .engine import AffineWeights, Scenario, pair_diag_weights, scalar_weights
from .laws import ChiSquare1, ChiSquarePair
from .weights import DiscreteMeasure, OutlierTrack, SupportSet, WeightArraySpec


def figure1_scenario() -> Scenario:
    """Unit bulk weights plus one constant outlier weight 3, square particles.

    The resulting rate keeps the plain empirical-mean rate up to the kink at
    3/2 and grows linearly with slope 1/6 beyond it.
    """
    array = WeightArraySpec(
        bulk=DiscreteMeasure(np.array([1.0]), np.array([1.0])),
        support=SupportSet(atoms=np.array([1.0])),
        tracks=(OutlierTrack(limits=(3.0,), name="outlier3"),),
    )
    return Scenario(law=ChiSquare1(), array=array, weights=scalar_weights())


def bulk_only_scenario() -> Scenario:
    """Plain empirical mean of squares: no outliers at all."""
    array = WeightArraySpec(
        bulk=DiscreteMeasure(np.array([1.0]), np.array([1.0])),
        support=SupportSet(atoms=np.array([1.0])),
        tracks=(),
    )
    return Scenario(law=ChiSquare1(), array=array, weights=scalar_weights())


def example1_spec() -> Scenario:
    """One track alternating between 3 (even stages) and 1 (odd stages).

    The inner weight limit is empty while the outer one is {1, 3}; the
    domain-stability check fails and only subsequential rates exist.
    """
    array = WeightArraySpec(
        bulk=DiscreteMeasure(np.array([1.0]), np.array([1.0])),
        support=SupportSet(atoms=np.array([1.0])),
        tracks=(OutlierTrack(limits=(3.0, 1.0), name="alternating"),),
    )
    return Scenario(law=ChiSquare1(), array=array, weights=scalar_weights())


def example2_spec() -> Scenario:
    """The alternating track plus a constant track 4, which restores the LDP."""
    array = WeightArraySpec(
        bulk=DiscreteMeasure(np.array([1.0]), np.array([1.0])),
        support=SupportSet(atoms=np.array([1.0])),
        tracks=(
            OutlierTrack(limits=(3.0, 1.0), name="alternating"),
            OutlierTrack(limits=(4.0,), name="constant4"),
        ),
    )
    return Scenario(law=ChiSquare1(), array=array, weights=scalar_weights())


def two_sided_scenario(
    atoms=(-1.0, 1.0),
    weights=(0.5, 0.5),
    x_min: float = -4.0,
    x_max: float = 4.0,
) -> Scenario:
    """Bulk on [min(atoms), max(atoms)] plus constant outlier weights at
    x_min and x_max; particles are duplicated squares tracked through
    f(x) = diag(1, x)."""
    measure = DiscreteMeasure(np.array(atoms, dtype=float), np.array(weights, dtype=float))
    array = WeightArraySpec(
        bulk=measure,
        support=SupportSet(interval=(float(np.min(measure.atoms)), float(np.max(measure.atoms)))),
        tracks=(
            OutlierTrack(limits=(float(x_min),), name="low"),
            OutlierTrack(limits=(float(x_max),), name="high"),
        ),
    )
    return Scenario(law=ChiSquarePair(), array=array, weights=pair_diag_weights())


def second_eigen_array(kappa1: float, kappa2: float) -> WeightArraySpec:
    """Bulk of ones plus the two leading outlier weights kappa1 > kappa2 > 1."""
    if not (1.0 < kappa2 < kappa1):
        raise ValueError("need 1 < kappa2 < kappa1")
    return WeightArraySpec(
        bulk=DiscreteMeasure(np.array([1.0]), np.array([1.0])),
        support=SupportSet(atoms=np.array([1.0])),
        tracks=(
            OutlierTrack(limits=(float(kappa1),), name="kappa1"),
            OutlierTrack(limits=(float(kappa2),), name="kappa2"),
        ),
    )
