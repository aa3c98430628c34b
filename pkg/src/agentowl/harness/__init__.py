from .experiment import (BUDGET_B, EXIT_CONFIG, EXIT_OK, EXIT_UNMASTERED, ExperimentConfig, RunResult, agent_config,
                         build_agent, read_metrics, run_experiment, write_metrics)
from .plot import Series, aggregate, carry_forward, emit_plot_data, load_curve
from .protocols import (ImplicitReport, ZeroShotReport, random_completion, reinitialize_policies,
                        run_implicit_learning, run_zero_shot)
