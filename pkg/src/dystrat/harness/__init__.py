"""Config-driven experiment runner and reporting."""
from .config import DatasetConfig, ExperimentConfig, SubsetCurveConfig, load_config, load_grid
from .report import emit
from .runner import ablate_gstar, run_experiment, subset_curve, sweep
