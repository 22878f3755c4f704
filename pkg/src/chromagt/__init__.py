"""Graph transformer with per-channel attention filters.

Attention scores here are vectors, not scalars: every output channel gets
its own exponentiated, l1-normalized score built from per-head dot products
plus a learned per-pair bias. Pair biases come from bond categories
completed with self/non-connected slots, random-walk or shortest-path
positional encodings, and optional ring (chordless cycle) features. The
package is self-contained: a small 64-bit reverse-mode tensor core, a
training harness with decoupled weight decay and a cosine-warmup schedule,
synthetic tasks, an ablation runner, a CLI and sklearn-style estimators.
"""

__version__ = "0.1.0"

from .autodiff import ParameterStore, Tensor, grad_check
from .config import ModelConfig, TrainConfig
from .errors import (
    ChromagtError,
    ConfigError,
    DatasetError,
    EncodingError,
    NumericalError,
    ShapeError,
    TrainingDiverged,
    VersionError,
)
from .estimators import (
    GraphTransformerNodeClassifier,
    GraphTransformerRegressor,
    StructureFeaturizer,
)
from .graphs import Dataset, Graph, adjacency_matrix, degree_vector, load_dataset
from .model import ChromaticGraphTransformer, loss_fn
from .rings import enumerate_rings, ring_comembership
from .structure import (
    GraphStructure,
    PreparedGraph,
    all_pairs_shortest_path,
    compute_structure,
    node_return_probabilities,
    random_walk_matrix,
    random_walk_powers,
)
from .synthetic import SyntheticTaskSpec, generate_synthetic
from .training import AdamW, cosine_warmup_lr, train_model

__all__ = [
    "AdamW",
    "ChromagtError",
    "ChromaticGraphTransformer",
    "ConfigError",
    "Dataset",
    "DatasetError",
    "EncodingError",
    "Graph",
    "GraphStructure",
    "GraphTransformerNodeClassifier",
    "GraphTransformerRegressor",
    "ModelConfig",
    "NumericalError",
    "ParameterStore",
    "PreparedGraph",
    "ShapeError",
    "StructureFeaturizer",
    "SyntheticTaskSpec",
    "Tensor",
    "TrainConfig",
    "TrainingDiverged",
    "VersionError",
    "adjacency_matrix",
    "all_pairs_shortest_path",
    "compute_structure",
    "cosine_warmup_lr",
    "degree_vector",
    "enumerate_rings",
    "generate_synthetic",
    "grad_check",
    "load_dataset",
    "loss_fn",
    "node_return_probabilities",
    "random_walk_matrix",
    "random_walk_powers",
    "ring_comembership",
    "train_model",
]
