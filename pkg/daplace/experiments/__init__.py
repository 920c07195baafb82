from daplace.experiments.config import ExperimentConfig, experiment_config, load_config, parse_config
from daplace.experiments.export import export_report
from daplace.experiments.metrics import error_metrics
from daplace.experiments.plots import plot_report
from daplace.experiments.study import PlacementStudy, RunReport, SweepRow, run_experiment
from daplace.experiments.training import TrainingPair, build_training_set
