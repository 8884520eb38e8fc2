"""Coverage path planning for wiping curved dishes with a deformable sponge."""

__version__ = "0.1.0"
SCHEMA_VERSION = 1

from .contact import (  # noqa: E402
    ContactMap,
    GeometricPredictor,
    PressResult,
    SpongeModel,
    ToolPose,
    label_contact,
    predict_contact,
    press,
    rigid_variant,
)
from .cloud_io import load_cloud, save_cloud  # noqa: E402
from .dataset import DatasetManifest, InteractionRecord, generate_dataset, load_dataset, pose_sampler  # noqa: E402
from .evaluator import (  # noqa: E402
    CoverageReport,
    NoiseModel,
    benchmark,
    execute_and_evaluate,
    f1_contact,
    pixel_coverage,
)
from .geometry import ObjectSpec, PointCloud, SpatialIndex, estimate_normals, generate_object, standard_objects  # noqa: E402
from .planner import PlanConfig, Trajectory, WaypointSet, plan, sample_cover_set, sample_cover_sets, select_best_set, solve_tsp_2opt  # noqa: E402
