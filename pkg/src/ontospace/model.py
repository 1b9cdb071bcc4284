"""Joint model state and combined triple scoring.

Lower scores mean more plausible triples.  InstanceOf and SubClassOf
combine their extensional and intensional parts as ext + alpha * int with
one shared alpha; relational triples are scored in the extensional space
only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import extensional as ext_mod
from . import intensional as int_mod
from .config import TrainingConfig
from .data import INSTANCE_OF, RELATIONAL, SUB_CLASS_OF
from .extensional import ExtensionalParams
from .intensional import IntensionalParams


@dataclass
class ModelState:
    """Everything a trained model consists of."""

    extensional: ExtensionalParams
    intensional: IntensionalParams
    config: TrainingConfig
    epoch: int = 0

    def copy(self) -> "ModelState":
        return ModelState(
            extensional=self.extensional.copy(),
            intensional=self.intensional.copy(),
            config=self.config,
            epoch=self.epoch,
        )

    def check_invariants(self) -> None:
        self.extensional.check_invariants()
        self.intensional.check_invariants()

    # -- single-triple scores ------------------------------------------------

    def score_instanceof(self, i: int, c: int) -> float:
        score = ext_mod.score_instanceof_ext(i, c, self.extensional)
        if self.config.alpha > 0.0:
            score += self.config.alpha * int_mod.score_instanceof_int(
                i, c, self.extensional, self.intensional)
        return score

    def score_subclassof(self, ci: int, cj: int) -> float:
        score = ext_mod.score_subclassof_ext(ci, cj, self.extensional)
        if self.config.alpha > 0.0:
            score += self.config.alpha * int_mod.score_subclassof_int(
                ci, cj, self.intensional)
        return score

    def score_relational(self, h: int, r: int, t: int) -> float:
        return ext_mod.score_relational(h, r, t, self.extensional, norm=self.config.norm)

    def score(self, kind: str, triple: tuple) -> float:
        if kind == RELATIONAL:
            return self.score_relational(*triple)
        if kind == INSTANCE_OF:
            return self.score_instanceof(*triple)
        if kind == SUB_CLASS_OF:
            return self.score_subclassof(*triple)
        raise ValueError(f"unknown triple kind: {kind!r}")

    # -- vectorized batch scores ----------------------------------------------

    def score_batch(self, kind: str, ids: np.ndarray) -> np.ndarray:
        """Score a (n, k) id array of one triple kind row-wise."""
        if kind == RELATIONAL:
            return self._rel_batch(ids)
        if kind == INSTANCE_OF:
            return self._ins_batch(ids)
        if kind == SUB_CLASS_OF:
            return self._sub_batch(ids)
        raise ValueError(f"unknown triple kind: {kind!r}")

    def _rel_batch(self, ids: np.ndarray) -> np.ndarray:
        ext = self.extensional
        u = ext.instances[ids[:, 0]] + ext.relations[ids[:, 1]] - ext.instances[ids[:, 2]]
        if self.config.norm == "L1":
            return np.abs(u).sum(axis=1)
        return (u * u).sum(axis=1)

    def _ins_batch(self, ids: np.ndarray) -> np.ndarray:
        ext = self.extensional
        x = ext.instances[ids[:, 0]]
        c = ext.centers[ids[:, 1]]
        b = ext.axes[ids[:, 1]]
        r = ext.radii[ids[:, 1]]
        u = (x - c) / b
        scores = np.maximum(0.0, (u * u).sum(axis=1) - r * r)
        if self.config.alpha > 0.0:
            scores = scores + self.config.alpha * (
                1.0 - self._cosine_rows(self._virtual_rows(x), self.intensional.concept_vecs[ids[:, 1]])
            )
        return scores

    def _sub_batch(self, ids: np.ndarray) -> np.ndarray:
        ext = self.extensional
        ci, cj = ids[:, 0], ids[:, 1]
        v = ext.centers[ci] / ext.axes[ci] - ext.centers[cj] / ext.axes[cj]
        scores = np.maximum(0.0, (v * v).sum(axis=1) + ext.radii[ci] ** 2 - ext.radii[cj] ** 2)
        if self.config.alpha > 0.0:
            u = self.intensional.concept_vecs[ci]
            w = self.intensional.concept_vecs[cj]
            cos = self._cosine_rows(u, w)
            scores = scores + self.config.alpha * (
                1.0 - cos + np.linalg.norm(u, axis=1) - np.linalg.norm(w, axis=1)
            )
        return scores

    def _virtual_rows(self, rows: np.ndarray) -> np.ndarray:
        if self.intensional.bridge is None:
            return rows
        return rows @ self.intensional.bridge.T

    @staticmethod
    def _cosine_rows(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        denom = nu * nv
        out = np.zeros(len(u), dtype=np.float64)
        ok = denom > 0.0
        out[ok] = (u[ok] * v[ok]).sum(axis=1) / denom[ok]
        return out

    # -- link-prediction candidate sweeps ---------------------------------------

    def rel_scores_all_heads(self, r: int, t: int) -> np.ndarray:
        """Score (h', r, t) for every instance h'."""
        ext = self.extensional
        v = ext.relations[r] - ext.instances[t]
        u = ext.instances + v
        if self.config.norm == "L1":
            return np.abs(u).sum(axis=1)
        return (u * u).sum(axis=1)

    def rel_scores_all_tails(self, h: int, r: int) -> np.ndarray:
        """Score (h, r, t') for every instance t'."""
        ext = self.extensional
        v = ext.instances[h] + ext.relations[r]
        u = v - ext.instances
        if self.config.norm == "L1":
            return np.abs(u).sum(axis=1)
        return (u * u).sum(axis=1)
