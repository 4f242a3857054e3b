"""Multi-coverage sensor placement on 2.5D heightfield environments."""

__version__ = "0.1.0"

from .coverage import (
    CumulativeVisibility,
    k_covered_volume,
    psi_k,
    update_cumvis,
)
from .env import (
    Environment,
    HeightField,
    Point3,
    candidate_cells,
    free_volume,
    is_free,
    sensor_position,
)
from .errors import ConfigError, DomainError, KcoverError, ProviderError
from .planner import (
    GainMap,
    PlacementResult,
    PlannerConfig,
    SensorSet,
    gain,
    gain_map,
    gain_naive,
    random_placement,
    run_placement,
    select_next,
)
from .visibility import (
    VisibilityField,
    line_of_sight,
    order_of_visibility,
    sight_clearance,
    visibility_field,
)

__all__ = [
    "__version__",
    "ConfigError",
    "CumulativeVisibility",
    "DomainError",
    "Environment",
    "GainMap",
    "HeightField",
    "KcoverError",
    "PlacementResult",
    "PlannerConfig",
    "Point3",
    "ProviderError",
    "SensorSet",
    "VisibilityField",
    "candidate_cells",
    "free_volume",
    "gain",
    "gain_map",
    "gain_naive",
    "is_free",
    "k_covered_volume",
    "line_of_sight",
    "order_of_visibility",
    "psi_k",
    "random_placement",
    "run_placement",
    "select_next",
    "sensor_position",
    "sight_clearance",
    "update_cumvis",
    "visibility_field",
]
