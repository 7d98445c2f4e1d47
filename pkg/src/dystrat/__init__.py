"""Dynamic per-instance selection of multi-step forecasting strategies."""
from .data import (
    SplitSpec,
    TimeSeries,
    WindowedDataset,
    generate_lorenz,
    generate_mackey_glass,
    generate_noisy_sine,
    load_csv,
    make_windows,
    normalize,
    split,
)
from .errors import DyStratError
from .evaluation import EvaluationReport, evaluate, loss_matrix, oracle_error, relative_errors
from .kernels import BACKEND
from .mlp import MlpConfig, TrainedRegressor, gradient_check, train_mlp
from .selector import (
    ClassifierConfig,
    DyStrat,
    TrainedSelector,
    compute_labels,
    dystrat_forecast,
    select,
    train_selector,
)
from .strategies import (
    Kind,
    StrategySet,
    StrategySpec,
    enumerate_strategies,
    forecast,
    train_all,
    train_strategy,
)

__version__ = "0.1.0"
