from .checkpoint import read_container, write_container
from .learner import DQNLearner, TrainConfig, build_network, wm_config
from .network import DuelingQNet, GoalConditionedQNet
from .replay import ReplayBuffer, Step
from .wm_train import greedy_success_rate, linear_schedule, train_in_world_model
