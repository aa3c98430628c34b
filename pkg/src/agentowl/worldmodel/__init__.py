from .model import (SIM_HORIZON, AbstractWorldModel, SimResult, WeightingTable, WorldModelEnv,
                    sim_step)
from .poe import (ETA, Expert, FitReport, OptionModel, Transition, build_option_model,
                  map_fit, map_fit_arrays, map_objective, poe_predict, sample_outcome,
                  success_experts)
from .preconditions import (AnyObjTypeTouching, ObjTouchingAndRoomNumberExist, Precondition,
                            PreconditionParseError, RoomNumberExist, SpecificObjTouching,
                            SubgoalHolds, parse_precondition, parse_precondition_list,
                            precondition_from_dict)
