"""Simulation and exact checks for a randomly perturbed cat map."""

from .chain import BirthDeathChain, ChainDistribution, NStepChain
from .config import RunConfig
from .dynamics import AttractorReport, Ensemble, propagate, report, step
from .field import FieldSpec
from .geometry import DEFAULT_PARAMS, FramePoint, Params, TorusPoint, validate_params
from .layers import LayerHistogram, LayerIndex, layer_index

__all__ = [
    "AttractorReport", "BirthDeathChain", "ChainDistribution", "DEFAULT_PARAMS", "Ensemble",
    "FieldSpec", "FramePoint", "LayerHistogram", "LayerIndex", "NStepChain", "Params",
    "RunConfig", "TorusPoint", "layer_index", "propagate", "report", "step", "validate_params",
]
