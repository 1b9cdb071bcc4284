"""Two-space ontology embedding.

Instances live as points and concepts as ellipsoid regions in the
extensional space; concepts carry cosine/norm vector semantics in the
intensional space, optionally initialized from a text encoder.  Joint
margin-ranking training covers relational, InstanceOf, and SubClassOf
triples; evaluation covers triple classification and link prediction.
"""

from .config import TrainingConfig
from .data import Dataset, TruthIndex, Vocabulary, build_truth_index, load_dataset, save_dataset
from .model import ModelState

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ModelState",
    "TrainingConfig",
    "TruthIndex",
    "Vocabulary",
    "build_truth_index",
    "load_dataset",
    "save_dataset",
    "__version__",
]
