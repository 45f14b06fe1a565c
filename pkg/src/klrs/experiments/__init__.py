"""Desk-scale experiments built on the solvers."""
from .data import (
    gen_binary_gaussian,
    gen_two_gaussian_toy,
    label_shift_proportions,
    label_shift_test_set,
    load_csv_dataset,
    long_tail_downsample,
    long_tail_sizes,
    write_csv_dataset,
)
from .fairpca import FairPCAResult, fair_pca_run, gen_two_subspace_groups, standard_pca
from .harness import label_shift_experiment, long_tail_experiment, toy_tau_sweep
from .metrics import ConfusionCounts, MetricsReport, erm_stats, metrics_from_scores, select_tau
from .report import build_report, emit_report
