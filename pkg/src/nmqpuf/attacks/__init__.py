"""Model-building attacks on simulated CRP datasets."""

from .cmaes import CMAES, cmaes_reliability_attack
from .features import parity_transform, pm1
from .fourier import FourierModel, fourier_low_degree_attack
from .logistic import LinearModel, LrConfig, train_logistic_regression
from .mlp import MlpConfig, MlpModel, gradient_check, train_mlp
from .report import AttackReport, evaluate_accuracy
