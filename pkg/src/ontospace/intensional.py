"""Intensional space: concept vectors, the extensional->intensional bridge,
and cosine/norm scoring.

Concept vectors start either from a pretrained text encoder export (PRE)
or from the same random scheme as extensional vectors (UNP); both are
trainable afterwards unless frozen by config.  Instances have no
parameters of their own here: they enter as virtual points, the image of
their extensional embedding under the bridge (identity for EYE, a
learnable d x d matrix for MAT).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError
from .extensional import ExtensionalParams

logger = logging.getLogger(__name__)

BRIDGE_EYE = "EYE"
BRIDGE_MAT = "MAT"
INIT_PRE = "PRE"
INIT_UNP = "UNP"


@dataclass
class IntensionalParams:
    """Learnable tensors of the intensional space.

    ``bridge`` is None for the parameter-free identity mapping (EYE) and a
    (d, d) matrix for the learnable mapping (MAT).  ``zero_cos_events``
    counts cosine evaluations that hit an exactly-zero vector; those score
    the neutral value 1 instead of aborting.
    """

    concept_vecs: np.ndarray
    bridge: Optional[np.ndarray]
    init_mode: str
    zero_cos_events: int = field(default=0)

    @property
    def dim(self) -> int:
        return self.concept_vecs.shape[1]

    @property
    def bridge_mode(self) -> str:
        return BRIDGE_EYE if self.bridge is None else BRIDGE_MAT

    def copy(self) -> "IntensionalParams":
        return IntensionalParams(
            concept_vecs=self.concept_vecs.copy(),
            bridge=None if self.bridge is None else self.bridge.copy(),
            init_mode=self.init_mode,
            zero_cos_events=self.zero_cos_events,
        )

    def check_invariants(self) -> None:
        if not np.isfinite(self.concept_vecs).all():
            raise DataError("non-finite values in intensional concept vectors")
        if self.bridge is not None and not np.isfinite(self.bridge).all():
            raise DataError("non-finite values in bridge matrix")


def unp_concept_vectors(n_concepts: int, d: int, seed: int) -> np.ndarray:
    """Random concept-vector matrix, uniform in [-6/sqrt(d), 6/sqrt(d)].

    Seeded separately from the extensional tensors so PRE and UNP runs
    share extensional starting points.
    """
    rng = np.random.default_rng([seed, 0x1A7E])
    bound = 6.0 / np.sqrt(d)
    return rng.uniform(-bound, bound, size=(n_concepts, d))


def init_intensional(n_concepts: int, d: int, seed: int, bridge_mode: str,
                     init_mode: str = INIT_UNP,
                     concept_vecs: Optional[np.ndarray] = None) -> IntensionalParams:
    """Build intensional parameters.

    PRE mode requires ``concept_vecs`` (already reduced to d); the MAT
    bridge starts at the identity plus small noise so it begins as a
    near-EYE mapping.
    """
    if init_mode == INIT_PRE:
        if concept_vecs is None:
            raise DataError("PRE initialization requires loaded concept vectors")
        vecs = np.asarray(concept_vecs, dtype=np.float64)
        if vecs.shape != (n_concepts, d):
            raise DataError(
                f"concept vector matrix has shape {vecs.shape}, expected {(n_concepts, d)}"
            )
    elif init_mode == INIT_UNP:
        vecs = unp_concept_vectors(n_concepts, d, seed)
    else:
        raise DataError(f"unknown intensional init mode: {init_mode!r}")

    if bridge_mode == BRIDGE_EYE:
        bridge = None
    elif bridge_mode == BRIDGE_MAT:
        rng = np.random.default_rng([seed, 0xB21D])
        bridge = np.eye(d) + rng.normal(0.0, 0.01, size=(d, d))
    else:
        raise DataError(f"unknown bridge mode: {bridge_mode!r}")
    return IntensionalParams(concept_vecs=vecs.copy(), bridge=bridge, init_mode=init_mode)


def virtual_instance(i: int, ext: ExtensionalParams, intp: IntensionalParams) -> np.ndarray:
    """Image of instance i in the intensional space.

    The identity bridge is a strict pass-through (the caller gets the
    extensional row itself, not a copy).
    """
    vec = ext.instances[i]
    if intp.bridge is None:
        return vec
    return intp.bridge @ vec


def cosine(u: np.ndarray, v: np.ndarray, intp: Optional[IntensionalParams] = None) -> float:
    """Cosine similarity; an exactly-zero vector yields 0 (neutral) and
    bumps the warning counter instead of raising."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        if intp is not None:
            intp.zero_cos_events += 1
            logger.warning("cosine hit a zero vector (event %d)", intp.zero_cos_events)
        return 0.0
    return float(u @ v) / (nu * nv)


def score_instanceof_int(i: int, c: int, ext: ExtensionalParams,
                         intp: IntensionalParams) -> float:
    """1 - cos(virtual instance, concept vector), in [0, 2]."""
    return 1.0 - cosine(virtual_instance(i, ext, intp), intp.concept_vecs[c], intp)


def score_subclassof_int(ci: int, cj: int, intp: IntensionalParams) -> float:
    """Cosine dissimilarity plus the norm gap (sub minus super).

    May be negative; downstream combination applies no hinge.
    """
    u = intp.concept_vecs[ci]
    v = intp.concept_vecs[cj]
    return 1.0 - cosine(u, v, intp) + float(np.linalg.norm(u)) - float(np.linalg.norm(v))


def combine_instanceof(ext_score: float, int_score: float, alpha: float) -> float:
    return ext_score + alpha * int_score


def combine_subclassof(ext_score: float, int_score: float, alpha: float) -> float:
    return ext_score + alpha * int_score


def read_concept_vector_file(path: str) -> tuple[int, int, np.ndarray, np.ndarray]:
    """Parse a concept-vector file.

    Format: first line "count dim", then one row "concept_id v1 ... v_dim"
    per line, ordered by ascending concept id.  Returns (count, dim,
    concept_ids, matrix).
    """
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}:1: expected 'count dim' header")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}:1: malformed header: {header!r}") from None
        if count < 0 or dim < 1:
            raise DataError(f"{path}:1: invalid header values count={count} dim={dim}")
        ids = np.empty(count, dtype=np.int64)
        mat = np.empty((count, dim), dtype=np.float64)
        n = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected id plus {dim} floats, got {len(parts)} fields"
                )
            if n >= count:
                raise DataError(f"{path}:{lineno}: more rows than the header count {count}")
            try:
                ids[n] = int(parts[0])
                mat[n] = [float(p) for p in parts[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row") from None
            if not np.isfinite(mat[n]).all():
                raise DataError(f"{path}:{lineno}: non-finite vector component")
            if n > 0 and ids[n] <= ids[n - 1]:
                raise DataError(
                    f"{path}:{lineno}: concept ids must be strictly ascending "
                    f"({ids[n]} after {ids[n - 1]})"
                )
            n += 1
    if n != count:
        raise DataError(f"{path}: header count {count} but found {n} rows")
    return count, dim, ids, mat


def write_concept_vector_file(path: str, ids: np.ndarray, mat: np.ndarray) -> None:
    """Write vectors in the exchange format; floats use shortest round-trip repr."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(ids)} {mat.shape[1]}\n")
        for cid, row in zip(ids, mat):
            fh.write(str(int(cid)) + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_concept_vectors(path: str, n_concepts: int, target_dim: int, seed: int) -> np.ndarray:
    """Load (and if needed reduce) encoder vectors into a (|C|, d) matrix.

    Exact-dimension files pass through; wider files are reduced by a
    principal-component projection fitted once over all present vectors
    (deterministic for a given file); narrower files are an error.
    Concepts absent from the file fall back to UNP rows for the same seed,
    with a warning.
    """
    count, dim, ids, mat = read_concept_vector_file(path)
    if (ids >= n_concepts).any():
        bad = int(ids[ids >= n_concepts][0])
        raise DataError(f"{path}: concept id {bad} out of range [0, {n_concepts})")
    if dim < target_dim:
        raise DataError(
            f"{path}: file dimension {dim} below target {target_dim}; cannot expand"
        )
    if dim == target_dim:
        reduced = mat
    else:
        if count < target_dim:
            raise DataError(
                f"{path}: only {count} vectors; cannot fit a rank-{target_dim} projection"
            )
        reduced = _pca_reduce(mat, target_dim)

    out = unp_concept_vectors(n_concepts, target_dim, seed)
    out[ids] = reduced
    missing = n_concepts - count
    if missing:
        logger.warning(
            "concept vector file covers %d of %d concepts; "
            "%d rows fall back to random initialization", count, n_concepts, missing,
        )
    return out


def _pca_reduce(mat: np.ndarray, target_dim: int) -> np.ndarray:
    """Project rows onto their top principal components.

    Component signs are fixed (largest-magnitude loading positive) so the
    reduction is bit-reproducible across runs.
    """
    mean = mat.mean(axis=0)
    centered = mat - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:target_dim]
    for k in range(components.shape[0]):
        j = int(np.argmax(np.abs(components[k])))
        if components[k, j] < 0:
            components[k] = -components[k]
    return centered @ components.T
