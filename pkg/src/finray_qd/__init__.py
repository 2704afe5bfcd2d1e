"""Quality-diversity design optimization for fin-ray soft grippers.

The package couples a 28-parameter gripper design space with a 2D
corotational finite-element grasp simulation and a CMA-ME optimizer over a
MAP-Elites archive keyed by gripper workspace and structural volume.
"""
from .design import (
    DEFAULT_BOUNDS,
    DesignBounds,
    FingerDesign,
    GripperDesign,
    benchmark_design,
    decode,
    encode,
    validate,
)
from .features import FeatureDescriptor, features_of, volume_feature, workspace_feature
from .fem import FEModel, MaterialModel
from .grasp import (
    EvalConfig,
    EvaluationResult,
    ObjectSet,
    RigidObjectSpec,
    closing_stroke,
    default_object_set,
    evaluate_design,
    hold_test,
    silhouette,
)
from .mesh import TriMesh2D, mesh_rectangle, triangulate
from .outline import FingerOutline, PolygonRegion, finger_outline
from .qd import ArchiveGrid, CMAEmitter, Elite, QDMetrics, improvement_rank, run_generation
from .sim import ContactSummary, DynamicState, SimConfig, grip_simulation
from .solver import cg_solve, implicit_euler_step

__version__ = "0.1.0"

__all__ = [
    "ArchiveGrid",
    "CMAEmitter",
    "ContactSummary",
    "DEFAULT_BOUNDS",
    "DesignBounds",
    "DynamicState",
    "Elite",
    "EvalConfig",
    "EvaluationResult",
    "FEModel",
    "FeatureDescriptor",
    "FingerDesign",
    "FingerOutline",
    "GripperDesign",
    "MaterialModel",
    "ObjectSet",
    "PolygonRegion",
    "QDMetrics",
    "RigidObjectSpec",
    "SimConfig",
    "TriMesh2D",
    "benchmark_design",
    "cg_solve",
    "closing_stroke",
    "decode",
    "default_object_set",
    "encode",
    "evaluate_design",
    "features_of",
    "finger_outline",
    "grip_simulation",
    "hold_test",
    "implicit_euler_step",
    "improvement_rank",
    "mesh_rectangle",
    "run_generation",
    "silhouette",
    "triangulate",
    "validate",
    "volume_feature",
    "workspace_feature",
]
