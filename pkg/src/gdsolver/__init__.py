"""Hybrid gradient-descent and MILP training of the final layer of dense networks."""
from .data import Dataset, RegressionTask, Split, gen_blobs, gen_regression, load_idx, split
from .driver import (GdSolverConfig, SweepKind, SweepOutcome, TrainingRun, gdsolver,
                     solver_sweep, train_gd, two_loop)
from .encoder import EncoderConfig, apply_solution, encode_classification, encode_regression
from .errors import (ConfigurationError, ConsistencyError, FormatError, GdSolverError,
                     InvalidInputError, NumericalError)
from .milp import MilpModel, SolverConfig, solve_lp, solve_milp, write_lp
from .nn import Activation, Dnn, Layer, LossKind, backward, forward, init_dnn
from .optim import make_optimizer

__version__ = "0.1.0"

__all__ = [
    "Activation", "ConfigurationError", "ConsistencyError", "Dataset", "Dnn", "EncoderConfig",
    "FormatError", "GdSolverConfig", "GdSolverError", "InvalidInputError", "Layer", "LossKind",
    "MilpModel", "NumericalError", "RegressionTask", "SolverConfig", "Split", "SweepKind",
    "SweepOutcome", "TrainingRun", "apply_solution", "backward", "encode_classification",
    "encode_regression", "forward", "gdsolver", "gen_blobs", "gen_regression", "init_dnn",
    "load_idx", "make_optimizer", "solve_lp", "solve_milp", "solver_sweep", "split", "train_gd",
    "two_loop", "write_lp",
]
