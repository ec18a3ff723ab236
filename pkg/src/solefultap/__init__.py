"""Floor-tile step engine: detection, impact scheduling, routing, simkit."""

from .actuation import ImpactScheduler, expand, format_actuation_log
from .detection import DEFAULT_PARAMS, DetectorParams, StepDetector, detect_stream
from .model import (
    ImpactCommand,
    ImpactPattern,
    Mode,
    SensorSample,
    Side,
    SolenoidPos,
    StepEvent,
)
from .oracle import oracle_detect
from .scenario import run_scenario
from .session import NodeRole, Recording, RoutingRule, TapNode, route
from .waveform import DEFAULT_SHAPE, PulseShape, ScriptedStep, StepScript, synth

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS",
    "DEFAULT_SHAPE",
    "DetectorParams",
    "ImpactCommand",
    "ImpactPattern",
    "ImpactScheduler",
    "Mode",
    "NodeRole",
    "PulseShape",
    "Recording",
    "RoutingRule",
    "ScriptedStep",
    "SensorSample",
    "Side",
    "SolenoidPos",
    "StepDetector",
    "StepEvent",
    "StepScript",
    "TapNode",
    "detect_stream",
    "expand",
    "format_actuation_log",
    "oracle_detect",
    "route",
    "run_scenario",
    "synth",
    "__version__",
]
