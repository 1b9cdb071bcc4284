"""The export job: concept_text.txt in, vector exchange file out.

Input rows are "concept_id<TAB>raw_name<TAB>description" (description may
be empty).  Output: header "count dim", then one "concept_id v1 ... v_dim"
row per concept in ascending id order, floats in shortest round-trip form
so a re-run is byte-identical.  The file is written to a temporary sibling
and renamed into place.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .backends import load_backend
from .errors import EncoderError
from .preprocess import build_text


@dataclass
class EncodeJob:
    input_path: str
    model_name: str
    output_path: str
    batch_size: int = 64


def read_concept_texts(path: str) -> list[tuple[int, str, str | None]]:
    if not os.path.exists(path):
        raise EncoderError(f"missing input file: {path}")
    rows: list[tuple[int, str, str | None]] = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise EncoderError(
                    f"{path}:{lineno}: expected 'id<TAB>name<TAB>description', got {line!r}"
                )
            try:
                cid = int(parts[0])
            except ValueError:
                raise EncoderError(f"{path}:{lineno}: malformed concept id {parts[0]!r}") from None
            if cid < 0:
                raise EncoderError(f"{path}:{lineno}: negative concept id {cid}")
            if cid in seen:
                raise EncoderError(f"{path}:{lineno}: duplicate concept id {cid}")
            seen.add(cid)
            rows.append((cid, parts[1], parts[2] or None))
    if not rows:
        raise EncoderError(f"{path}: no concept rows")
    rows.sort(key=lambda r: r[0])
    return rows


def encode_concepts(job: EncodeJob) -> tuple[int, int]:
    """Run the export; returns (count, dim) as written to the header."""
    if job.batch_size < 1:
        raise EncoderError("batch_size must be >= 1")
    rows = read_concept_texts(job.input_path)
    backend = load_backend(job.model_name)
    texts = [build_text(name, desc) for _, name, desc in rows]

    vectors = np.empty((len(texts), backend.dim))
    for start in range(0, len(texts), job.batch_size):
        chunk = texts[start:start + job.batch_size]
        encoded = backend.encode(chunk)
        if encoded.shape != (len(chunk), backend.dim):
            raise EncoderError(
                f"backend returned shape {encoded.shape}, "
                f"expected {(len(chunk), backend.dim)}"
            )
        vectors[start:start + len(chunk)] = encoded
    if not np.isfinite(vectors).all():
        raise EncoderError("backend produced non-finite vector components")

    tmp = job.output_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"{len(rows)} {backend.dim}\n")
        for (cid, _, _), vec in zip(rows, vectors):
            fh.write(str(cid) + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    os.replace(tmp, job.output_path)
    return len(rows), backend.dim
