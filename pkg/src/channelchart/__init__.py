"""Channel charting toolkit: learn 2-D charts of radio environments from
CSI datasets with triplet-loss training, and score them with neighborhood
and stress metrics."""

__version__ = "0.1.0"

from .chartnet import (
    ChartingNetwork,
    NetworkConfig,
    TrainConfig,
    forward,
    gradient_check,
    load_weights,
    map_features,
    save_weights,
    train,
    triplet_loss,
)
from .dataset import (
    CsiDatapoint,
    Dataset,
    ReducedDataset,
    SynthConfig,
    load_container,
    save_container,
    subcarrier_average,
    synthesize_los_dataset,
)
from .errors import ChannelChartError, ConfigError, StageError
from .features import FeatureConfig, featurize_dataset, load_feature_matrix, save_feature_matrix, scaled_r2m
from .metrics import MetricsReport, continuity, evaluate, kruskal_stress, rank_matrix, trustworthiness
from .pipeline import (
    ChartResult,
    RunConfig,
    emit_plot,
    read_chart_csv,
    run_pipeline,
    sweep_dc,
    sweep_r,
    transfer_evaluate,
    write_chart_csv,
)
from .triplets import (
    GenieSelectionConfig,
    SimTrajectory,
    TimeSelectionConfig,
    TripletSet,
    load_triplets,
    save_triplets,
    select_genie,
    select_sim_trajectory_triplets,
    select_time_based,
    simulate_trajectories,
    violation_rate,
)
