from .a2c import (Trainer, TrainConfig, TrainingError, Trajectory, advantage, compute_gradients,
                  policy_gradient_step, train)
from .allocation import allocate_tiles, knapsack, rect_table
from .areas import CORE, OUTSIDE, SURROUND, classify_areas, window_cells
from .network import NetShape, Network, PolicyParams, critic_forward, load_params, policy_forward, save_params
from .reward import chunk_reward, reward
from .state import N_ACTIONS, AbrState, Action
