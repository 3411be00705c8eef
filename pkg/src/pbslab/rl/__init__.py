from .agent import (Agent, DivergenceDetected, EvalSummary, TrainConfig, default_hidden, double_dqn_targets,
                    encode_state, evaluate, policy_rollout, series_sampler, train, write_metrics)
from .network import Adam, DuelingNet, ShapeMismatch, gradient_check
from .replay import ReplayBuffer, Transition
