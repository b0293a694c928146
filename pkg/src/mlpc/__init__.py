"""Multi-label-aware evaluation of image classifiers, and synthetic
composite datasets for probing multi-label prediction capability.

The toolkit never runs inference itself; it consumes prediction files
produced externally, evaluates them under rank-based multi-label metrics
(top-1, plausible-set accuracy, variable top-k subgroup accuracy, ASMA), and
generates seeded patch-composite datasets with exact, reproducible manifests.
"""

__version__ = "0.1.0"

from .annotations import (AnnotationStore, SubgroupIndex, label_count_histogram,
                          load_annotations, subgroup_index, write_annotations)
from .analysis import (AnalysisError, GapRecord, GapSummary, RankRow, RankTable,
                       SubgroupRow, aggregate_by_model, gap_analysis, load_report,
                       metric_fraction, multiseed_aggregate, rank_table,
                       subgroup_export)
from .composer import (ComposerConfig, CompositeManifest, PatchRecord,
                       PlacementRecord, build_pool, generate, place_patch_in_grid,
                       render_composite, resize_dims, resize_proportional,
                       write_dataset, write_manifest)
from .errors import DataFormatError, InsufficientDepthError, MlpcError
from .metrics import (EvaluationError, LabelwiseMode, MetricReport, MetricValue,
                      SubgroupBreakdown, evaluate, evaluate_many, labelwise_accuracy,
                      real_accuracy, single_label_map, subgroup_breakdown,
                      top1_accuracy, variable_topk_sets)
from .predictions import (PredictionDataset, argmax, load_predictions,
                          load_predictions_binary, topk_set, write_predictions,
                          write_predictions_binary)

__all__ = [name for name in dir() if not name.startswith("_")]
