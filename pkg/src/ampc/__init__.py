"""Analog secret-sharing multiparty computation with local differential privacy."""

from .errors import (
    AmpcError,
    IncompleteAggregation,
    InfeasibleBudget,
    InsufficientShares,
    InvalidArgument,
    NumericalDegradationWarning,
    NumericalDivergence,
    ProtocolViolation,
    SamplingFailure,
    SingularMatrix,
    TruncationInfeasible,
)
from .learn import Dataset, TrainConfig, centralized_baseline, private_mul, train_linear, train_logistic
from .mpc import NoiseConfig, Program, beaver_multiply, gen_beaver_triple, orchestrate
from .network import Network, spawn
from .privacy import PrivacyBudget, audit_mechanism, calibrate
from .sharing import Share, SharePolynomial, evaluate_shares, make_share_polynomial, reconstruct

__version__ = "0.1.0"
