from .blockworld import BlockWorld, feature_key
from .gridworld import GridWorld

__all__ = ["BlockWorld", "GridWorld", "feature_key"]
