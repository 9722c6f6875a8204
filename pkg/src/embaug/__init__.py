"""Random-walk node embeddings, virtual-sample label balancing and
multi-label F1 evaluation."""

from .augmentation import (AugmentConfig, GeometryReport, LabeledDataset, balance,
                           duplicate_baseline, geometry_diagnostics, midpoint)
from .classify import ClassifyConfig, OvrModel, predict_scores, predict_topk, train_ovr
from .embedding import (EmbeddingModel, TrainConfig, context_pairs, load_embeddings,
                        loss_and_gradient, save_embeddings, similarity, train_skipgram)
from .evaluate import (EvalReport, SplitSpec, addcoeff_sweep, macro_f1, micro_f1,
                       run_sweep)
from .graph_corpus import (Graph, LabelTable, SamplingConfig, WalkCorpus, generate_corpus,
                           load_corpus, load_edge_list, load_labels, load_mat, random_walk,
                           save_corpus)

__version__ = "0.1.0"
