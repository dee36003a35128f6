from .coefficients import CoefficientSet, InertiaSpec, KirchhoffSet
from .config import (
    SCENARIOS,
    CurveSpec,
    MeshSpec,
    NumericsSpec,
    OutputSpec,
    ProbeSpec,
    QuadratureSpec,
    ScenarioConfig,
    VorticitySpec,
)
from .fields import FieldSample, SurfaceDensity, SurfaceField, VortexParticleCloud
from .geometry import Curve, Frame, PanelQuadrature, TubeCoords, TubeMesh
from .report import HaltInfo, ReportTable, RunReport
from .state import FlowEnvironment, Pose, PoseTrajectory, RigidState, SimState

__all__ = [
    "Curve",
    "Frame",
    "PanelQuadrature",
    "TubeMesh",
    "TubeCoords",
    "VortexParticleCloud",
    "FieldSample",
    "SurfaceDensity",
    "SurfaceField",
    "InertiaSpec",
    "KirchhoffSet",
    "CoefficientSet",
    "RigidState",
    "Pose",
    "PoseTrajectory",
    "FlowEnvironment",
    "SimState",
    "SCENARIOS",
    "CurveSpec",
    "VorticitySpec",
    "QuadratureSpec",
    "MeshSpec",
    "NumericsSpec",
    "ProbeSpec",
    "OutputSpec",
    "ScenarioConfig",
    "ReportTable",
    "HaltInfo",
    "RunReport",
]
