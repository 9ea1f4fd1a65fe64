"""Completely uncoupled user association dynamics."""
from .errors import AnalysisError, CapabilityError, ContractError, DomainError
from .model import (ControlledMarkov, Deterministic, ExogenousErgodic, IidPerAction, NetworkModel,
                    load_scenario, save_scenario)
from .utility import NormalizedLog, PiecewiseLinear, UtilityProfile
from .alg1 import Alg1Params, run_alg1

__version__ = "0.1.0"
