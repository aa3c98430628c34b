from .encoding import EncodedObservation, EncodingError, FrameStack, ObservationEncoder
from .gridworld import ConfigError, EnvConfig, GridWorld, MOVES, bundled_configs, load_config
from .state import (AbstractState, GameObject, PartialStateAccess, SymbolicState,
                    is_roomnumber, partial_state, roomnumber_object)

__all__ = [
    "AbstractState", "ConfigError", "EncodedObservation", "EncodingError", "EnvConfig",
    "FrameStack", "GameObject", "GridWorld", "MOVES", "ObservationEncoder",
    "PartialStateAccess", "SymbolicState", "bundled_configs", "is_roomnumber",
    "load_config", "partial_state", "roomnumber_object",
]
