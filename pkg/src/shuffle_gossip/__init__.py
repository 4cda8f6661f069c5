"""Shuffle-based gossip: exact drop probabilities, pair-chain model, simulators and ODEs."""

from shuffle_gossip.analytic import (DropVariant, UndefinedPointError, correction_gamma,
                                     difference_sequence, optimal_s, p_drop, p_drop_corrected,
                                     p_drop_exact, p_drop_simplified, p_select)
from shuffle_gossip.experiment import (ExperimentConfig, Layer, RunSummary, compare_layers,
                                       read_summary_csv, run_experiment, sweep_s)
from shuffle_gossip.model_sim import ModelState, simulate_model
from shuffle_gossip.ode_model import OdeSolution, integrate_model
from shuffle_gossip.pair_chain import PairState, PairTransitionMatrix, build_matrix
from shuffle_gossip.params import ParameterError, ProtocolParams
from shuffle_gossip.protocol_sim import ShuffleNetwork, WarmUpError
from shuffle_gossip.topology import Topology, TopologyError

__version__ = "0.1.0"

__all__ = [
    "DropVariant", "ExperimentConfig", "Layer", "ModelState", "OdeSolution", "PairState",
    "PairTransitionMatrix", "ParameterError", "ProtocolParams", "RunSummary", "ShuffleNetwork",
    "Topology", "TopologyError", "UndefinedPointError", "WarmUpError", "build_matrix",
    "compare_layers", "correction_gamma", "difference_sequence", "integrate_model", "optimal_s",
    "p_drop", "p_drop_corrected", "p_drop_exact", "p_drop_simplified", "p_select",
    "read_summary_csv", "run_experiment", "simulate_model", "sweep_s",
]
