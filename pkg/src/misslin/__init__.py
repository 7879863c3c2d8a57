"""misslin: linear classification with missing data.

Library plus CLI covering pattern-by-pattern and impute-then-predict
strategies for perceptron, logistic regression and LDA, exact Bayes-risk
oracles, finite-sample bound evaluation, ball-geometry separability, and a
reproducible simulation harness (`misslin` command).
"""

from .core_math import (
    AllMissingError,
    DimMismatchError,
    DimensionTooLargeError,
    NotPdError,
    Pattern,
    SpdMatrix,
    eigen_extremes,
    make_rng,
    spd_solve,
    std_normal_cdf,
    submatrix,
    substream,
)

__all__ = [
    "AllMissingError",
    "DimMismatchError",
    "DimensionTooLargeError",
    "NotPdError",
    "Pattern",
    "SpdMatrix",
    "eigen_extremes",
    "make_rng",
    "spd_solve",
    "std_normal_cdf",
    "submatrix",
    "substream",
]

__version__ = "0.1.0"
