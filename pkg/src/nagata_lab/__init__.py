"""Scale-windowed Nagata-dimension experiments for planar sets and entire maps."""

from .errors import CapabilityError, ConstructionError, DomainError, NagataLabError, PoleError
from .metric import (
    EUCLIDEAN,
    INFINITY,
    SPHERICAL,
    ChainStructure,
    Cover,
    CoverVerdict,
    PointSet2D,
    UltrametricRatio,
    diameter,
    distance,
    inversion,
    s_chain_components,
    verify_cover,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "ConstructionError", "DomainError", "NagataLabError", "PoleError",
    "EUCLIDEAN", "INFINITY", "SPHERICAL", "ChainStructure", "Cover", "CoverVerdict",
    "PointSet2D", "UltrametricRatio", "diameter", "distance", "inversion",
    "s_chain_components", "verify_cover",
]
