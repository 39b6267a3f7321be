"""Welfare-maximising multi-objective Q-learning with fairness-aware welfare
functions, test environments, baselines and numerical convergence checks."""
from .learner import LearnerConfig, QTable, evaluate_nonstationary, train
from .momdp import TabularMomdp, discounted_return, enumerate_returns, validate
from .welfare import WelfareSpec, egalitarian, nsw, p_welfare, parse_spec, utilitarian, welfare

__version__ = "0.1.0"

__all__ = [
    "LearnerConfig",
    "QTable",
    "TabularMomdp",
    "WelfareSpec",
    "discounted_return",
    "egalitarian",
    "enumerate_returns",
    "evaluate_nonstationary",
    "nsw",
    "p_welfare",
    "parse_spec",
    "train",
    "utilitarian",
    "validate",
    "welfare",
]
