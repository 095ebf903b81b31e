"""Joint D2D/cellular mode selection and BS association under per-BS load limits."""
from .channel import ChannelRealization, SimConfig, Topology, draw_gains, place_nodes, realize
from .dual import DualRunResult, StepSchedule, best_response, dual_value, price_update, \
    repair_feasibility
from .dual import run as run_dual
from .metrics import UtilityMatrix, build_utility_matrix, sinr, utility
from .mwbm import Assignment, BipartiteGraph, brute_force, build_graph, solve, solve_p1

__version__ = "0.1.0"
