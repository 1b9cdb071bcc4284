"""Offline exporter: concept names (and descriptions) to embedding vectors.

Reads the ontology's concept_text.txt, cleans each name, optionally
appends the description, runs a sentence encoder in batches, and writes
the vector exchange file consumed by the embedding engine's PRE
initialization.
"""

from .export import EncodeJob, encode_concepts
from .preprocess import build_text, clean_concept_name

__version__ = "0.1.0"

__all__ = ["EncodeJob", "encode_concepts", "build_text", "clean_concept_name"]
