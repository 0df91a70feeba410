"""Genetic-programming manifold learning with local-topology fitness."""

from ._backend import active_backend
from .dataset import (DataError, Dataset, FoldAssignment, load_csv,
                      scale_min_max, stratified_folds)
from .evaluation import CvAccuracy, cv_accuracy, knn_predict, rf_predict
from .evolve import (EvolutionConfig, RunResult, evolve, evolve_hnsw_params,
                     initialize_population, tournament_select)
from .fitness import (NeighborSets, cost, cost_weighted, deviation, fitness,
                      fitness_exact, neighbor_sets, weighted_cost_total)
from .metrics import (QualityReport, continuity, h_k, local_continuity,
                      quality_report, tc_scalar, trustworthiness)
from .neighbors import (HnswIndex, HnswParams, NeighborList,
                        approx_neighbor_list, build_hnsw, default_hnsw_params,
                        exact_neighbor_list, full_rank_matrix, recall_at_k)
from .pca import PcaModel, pca_fit, pca_transform
from .simplify import (ModelStats, fitness_contribution, model_stats,
                       simplify_individual, simplify_tree)
from .trees import (Individual, TreeNode, const, crossover_all_pairs,
                    eval_individual, eval_tree, feature, func,
                    individual_from_text, individual_to_text,
                    mutate_single_tree, random_tree, tree_from_text,
                    tree_to_text)

__version__ = "0.1.0"
