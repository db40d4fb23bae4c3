"""Visual tracking with learned hierarchical patch-tree features."""

from .geometry import AffineState, box_from_state, state_from_box
from .imagery import GrayImage, decompose_patches, to_gray, warp_region
from .tree import MergeTree, enumerate_trees, generate_tree, grid_adjacency
from .rnn import (LabeledSample, Theta, classify, forward_tree, gradient,
                  init_theta, leaf_features, objective, parent_features,
                  region_descriptor, sample_loss)
from .optim import (OptimOptions, OptimReport, finite_diff_grad, flatten_theta,
                    lbfgs_minimize, unflatten_theta)
from .sparse import (Dictionary, SparseCode, build_dictionaries,
                     candidate_likelihood, holistic_score, lasso_nn,
                     local_score, update_dictionaries)
from .tracker import (MotionModel, TrackerConfig, TrackResult, Tracker,
                      coarse_rank, fine_rank, harvest_training_samples,
                      sample_candidates, track_sequence, train_first_frame)
from .evaluation import (MetricCurves, Sequence, center_error, iou,
                         load_sequence, ope_curves, synth_sequence)

__version__ = "0.1.0"
