"""List-decodable mixture learning: recover every component mean of a
contaminated mixture with a short hypothesis list, plus data generation,
baselines and benchmarking."""

from .bench import (AlgorithmGrid, Aggregate, ExperimentReport,
                    ExperimentSpec, MetricMode, Row, aggregate,
                    best_aggregate, emit_csv, emit_plot, quantile, read_csv,
                    run_experiment)
from .core import (ADVERSARY, AlgoConfig, ConfigError, DataError, DataSet,
                   Hypothesis, HypothesisList, Metrics, psi, relative_weight,
                   rng_stream, worst_error)
from .datagen import (AttackSpec, CorruptionSpec, MixtureSpec, apply_attack,
                      corrupt_for_mean_estimation, random_separated_means,
                      read_dataset, sample_mixture, write_dataset)
from .inner import FilterState, Learners, beta, improve_with_rme, inner_stage, list_filter, tau
from .learners import (KldConfig, LearnerProfile, boost, dense_ball_oracle,
                       kld_estimate, rme_estimate)
from .outer import CandidateSetCollection, OuterConfig, outer_stage, shells
from .pipeline import (PipelineResult, dbscan, full_algorithm, kmeans,
                       make_default_learners, robust_kmeans, vanilla_ldme)

__version__ = "0.1.0"
