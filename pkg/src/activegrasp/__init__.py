"""Active-vision grasp planning on a simulated tabletop.

A depth camera rides a discretized sphere around one object; policies pick
the next viewpoint, a synthesizer looks for antipodal grasps whose finger
paths avoid both observed surface and still-unexplored space, and a
benchmark harness scores policies on how few views they need.
"""
from .config import RunConfig, load_config, save_config, config_hash
from .meshes import BUNDLED_OBJECTS, bundled_mesh
from .sim import GraspSimulator, ExplorationSession
from .viewsphere import Direction, SphericalPose, ViewsphereConfig

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "load_config",
    "save_config",
    "config_hash",
    "BUNDLED_OBJECTS",
    "bundled_mesh",
    "GraspSimulator",
    "ExplorationSession",
    "Direction",
    "SphericalPose",
    "ViewsphereConfig",
    "__version__",
]
