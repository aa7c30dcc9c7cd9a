"""Similarity clustering of concentration-time curves."""

from pkcluster.curves import (
    AlignedDataset,
    CsvSchema,
    PkCurve,
    align_shared,
    load_csv,
    validate_curve,
    write_csv,
)
from pkcluster.dissimilarity import (
    DissimilarityMatrix,
    MetricSpec,
    cort_coefficient,
    d_correlation,
    d_cort,
    d_dtw,
    d_euclidean,
    d_frechet,
    pairwise_matrix,
)
from pkcluster.evaluation import (
    CviSweep,
    LabelCrossTab,
    binomial_enrichment,
    calinski_harabasz,
    ch_sweep,
    crosstab,
    match_accuracy,
    rand_index,
)
from pkcluster.hierarchy import Dendrogram, Partition, agglomerate, cut, export_dendrogram
from pkcluster.nca import auc_last, cluster_summary, cmax_tmax
from pkcluster.simulation import (
    BenchmarkConfig,
    NoiseSpec,
    PkModelParams,
    analytic_metrics,
    concentration,
    run_benchmark,
    simulate_group,
)

__version__ = "0.1.0"
