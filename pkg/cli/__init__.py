from cli.experiment_config import DatasetSpec, ExperimentConfig, SweepSpec, apply_overrides
from cli.commands import build_parser, cmd_evaluate, cmd_report, cmd_sweep, cmd_train, cmd_transform, main
