"""Hand-derived gradients of the triple scores and the margin-ranking pairs.

All scores are piecewise smooth; at every hinge kink the zero subgradient
is chosen, so an inactive hinge contributes nothing.  Gradients are
accumulated sparsely per batch: a GradientBuffer keeps full-shape arrays
plus the set of touched rows, and only touched rows are applied, checked
for finiteness, projected, and re-zeroed.
"""

from __future__ import annotations

import numpy as np

from .data import INSTANCE_OF, RELATIONAL, SUB_CLASS_OF
from .errors import NumericError
from .extensional import (
    AXIS_FLOOR,
    RADIUS_FLOOR,
    ellipsoid_gap,
    subsumption_gap,
)
from .model import ModelState


class GradientBuffer:
    """Sparse accumulator over every learnable tensor of a model."""

    def __init__(self, state: ModelState):
        ext, intp = state.extensional, state.intensional
        self.g_instances = np.zeros_like(ext.instances)
        self.g_relations = np.zeros_like(ext.relations)
        self.g_centers = np.zeros_like(ext.centers)
        self.g_axes = np.zeros_like(ext.axes)
        self.g_radii = np.zeros_like(ext.radii)
        self.g_concept_vecs = np.zeros_like(intp.concept_vecs)
        self.g_bridge = None if intp.bridge is None else np.zeros_like(intp.bridge)
        self.touched_instances: set[int] = set()
        self.touched_relations: set[int] = set()
        self.touched_concepts: set[int] = set()
        self.touched_concept_vecs: set[int] = set()
        self.bridge_touched = False

    def add_instance(self, i: int, grad: np.ndarray) -> None:
        self.g_instances[i] += grad
        self.touched_instances.add(i)

    def add_relation(self, r: int, grad: np.ndarray) -> None:
        self.g_relations[r] += grad
        self.touched_relations.add(r)

    def add_center(self, c: int, grad: np.ndarray) -> None:
        self.g_centers[c] += grad
        self.touched_concepts.add(c)

    def add_axes(self, c: int, grad: np.ndarray) -> None:
        self.g_axes[c] += grad
        self.touched_concepts.add(c)

    def add_radius(self, c: int, grad: float) -> None:
        self.g_radii[c] += grad
        self.touched_concepts.add(c)

    def add_concept_vec(self, c: int, grad: np.ndarray) -> None:
        self.g_concept_vecs[c] += grad
        self.touched_concept_vecs.add(c)

    def add_bridge(self, grad: np.ndarray) -> None:
        self.g_bridge += grad
        self.bridge_touched = True

    def _check_finite(self, rows, grad: np.ndarray, name: str) -> None:
        if rows and not np.isfinite(grad[rows]).all():
            raise NumericError(f"non-finite gradient in {name}")

    def apply(self, state: ModelState, lr: float) -> None:
        """SGD step on touched rows, then constraint projection, then reset."""
        ext, intp = state.extensional, state.intensional

        inst = sorted(self.touched_instances)
        rels = sorted(self.touched_relations)
        cons = sorted(self.touched_concepts)
        cvecs = sorted(self.touched_concept_vecs)
        self._check_finite(inst, self.g_instances, "instance embeddings")
        self._check_finite(rels, self.g_relations, "relation embeddings")
        self._check_finite(cons, self.g_centers, "concept centers")
        self._check_finite(cons, self.g_axes, "concept axes")
        self._check_finite(cons, self.g_radii, "concept radii")
        self._check_finite(cvecs, self.g_concept_vecs, "concept vectors")
        if self.bridge_touched and not np.isfinite(self.g_bridge).all():
            raise NumericError("non-finite gradient in bridge matrix")

        if inst:
            updated = ext.instances[inst] - lr * self.g_instances[inst]
            norms = np.linalg.norm(updated, axis=1, keepdims=True)
            ext.instances[inst] = np.divide(updated, norms, out=updated, where=norms > 1.0)
            self.g_instances[inst] = 0.0
        if rels:
            ext.relations[rels] -= lr * self.g_relations[rels]
            self.g_relations[rels] = 0.0
        if cons:
            ext.centers[cons] -= lr * self.g_centers[cons]
            ext.axes[cons] = np.maximum(ext.axes[cons] - lr * self.g_axes[cons], AXIS_FLOOR)
            ext.radii[cons] = np.maximum(ext.radii[cons] - lr * self.g_radii[cons], RADIUS_FLOOR)
            self.g_centers[cons] = 0.0
            self.g_axes[cons] = 0.0
            self.g_radii[cons] = 0.0
        if cvecs:
            intp.concept_vecs[cvecs] -= lr * self.g_concept_vecs[cvecs]
            self.g_concept_vecs[cvecs] = 0.0
        if self.bridge_touched:
            intp.bridge -= lr * self.g_bridge
            self.g_bridge[:] = 0.0

        self.touched_instances.clear()
        self.touched_relations.clear()
        self.touched_concepts.clear()
        self.touched_concept_vecs.clear()
        self.bridge_touched = False


def accumulate_score_grad(state: ModelState, kind: str, triple: tuple,
                          weight: float, buf: GradientBuffer) -> None:
    """Add ``weight * d(score)/d(params)`` for one triple into the buffer."""
    if kind == RELATIONAL:
        _rel_grad(state, triple, weight, buf)
    elif kind == INSTANCE_OF:
        _ins_grad(state, triple, weight, buf)
    elif kind == SUB_CLASS_OF:
        _sub_grad(state, triple, weight, buf)
    else:
        raise ValueError(f"unknown triple kind: {kind!r}")


def _rel_grad(state: ModelState, triple: tuple, weight: float, buf: GradientBuffer) -> None:
    h, r, t = triple
    ext = state.extensional
    u = ext.instances[h] + ext.relations[r] - ext.instances[t]
    if state.config.norm == "L1":
        g = weight * np.sign(u)
    else:
        g = (2.0 * weight) * u
    buf.add_instance(h, g)
    buf.add_relation(r, g)
    buf.add_instance(t, -g)


def _ins_grad(state: ModelState, triple: tuple, weight: float, buf: GradientBuffer) -> None:
    i, c = triple
    ext = state.extensional
    x, center, axes = ext.instances[i], ext.centers[c], ext.axes[c]
    radius = float(ext.radii[c])

    if ellipsoid_gap(x, center, axes, radius) > 0.0:
        u = (x - center) / axes
        gx = (2.0 * weight) * (u / axes)
        buf.add_instance(i, gx)
        buf.add_center(c, -gx)
        buf.add_axes(c, (-2.0 * weight) * (u * u / axes))
        buf.add_radius(c, -2.0 * weight * radius)

    alpha = state.config.alpha
    if alpha <= 0.0:
        return
    intp = state.intensional
    bridge = intp.bridge
    xv = x if bridge is None else bridge @ x
    y = intp.concept_vecs[c]
    dfdx, dfdy = _cos_loss_grads(xv, y)
    if dfdx is None:
        return
    factor = alpha * weight
    if bridge is None:
        buf.add_instance(i, factor * dfdx)
    else:
        buf.add_instance(i, factor * (bridge.T @ dfdx))
        buf.add_bridge(factor * np.outer(dfdx, x))
    if not state.config.freeze_concept_vectors:
        buf.add_concept_vec(c, factor * dfdy)


def _sub_grad(state: ModelState, triple: tuple, weight: float, buf: GradientBuffer) -> None:
    ci, cj = triple
    ext = state.extensional
    c_i, b_i, r_i = ext.centers[ci], ext.axes[ci], float(ext.radii[ci])
    c_j, b_j, r_j = ext.centers[cj], ext.axes[cj], float(ext.radii[cj])

    if subsumption_gap(c_i, b_i, r_i, c_j, b_j, r_j) > 0.0:
        v = c_i / b_i - c_j / b_j
        tw = 2.0 * weight
        buf.add_center(ci, tw * (v / b_i))
        buf.add_axes(ci, -tw * (v * c_i / (b_i * b_i)))
        buf.add_center(cj, -tw * (v / b_j))
        buf.add_axes(cj, tw * (v * c_j / (b_j * b_j)))
        buf.add_radius(ci, tw * r_i)
        buf.add_radius(cj, -tw * r_j)

    alpha = state.config.alpha
    if alpha <= 0.0 or state.config.freeze_concept_vectors:
        return
    intp = state.intensional
    u, w = intp.concept_vecs[ci], intp.concept_vecs[cj]
    factor = alpha * weight
    dfdu, dfdw = _cos_loss_grads(u, w)
    gu = np.zeros_like(u) if dfdu is None else dfdu.copy()
    gw = np.zeros_like(w) if dfdw is None else dfdw.copy()
    # norm-gap term |u| - |w|; zero subgradient at the origin
    nu = float(np.linalg.norm(u))
    nw = float(np.linalg.norm(w))
    if nu > 0.0:
        gu += u / nu
    if nw > 0.0:
        gw -= w / nw
    buf.add_concept_vec(ci, factor * gu)
    buf.add_concept_vec(cj, factor * gw)


def _cos_loss_grads(x: np.ndarray, y: np.ndarray):
    """Gradients of 1 - cos(x, y) w.r.t. x and y; (None, None) when either
    vector is exactly zero (neutral score, zero subgradient)."""
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return None, None
    dot = float(x @ y)
    inv = 1.0 / (nx * ny)
    cos = dot * inv
    dfdx = -(y * inv - cos * x / (nx * nx))
    dfdy = -(x * inv - cos * y / (ny * ny))
    return dfdx, dfdy


def pair_loss_and_grad(state: ModelState, kind: str, pos: tuple, neg: tuple,
                       margin: float, buf: GradientBuffer | None = None) -> float:
    """Margin-ranking hinge for one positive/negative pair.

    Returns the hinge value; when a buffer is supplied and the hinge is
    strictly active, the pair's gradient is accumulated into it.
    """
    value = margin + state.score(kind, pos) - state.score(kind, neg)
    if value <= 0.0:
        return 0.0
    if buf is not None:
        accumulate_score_grad(state, kind, pos, 1.0, buf)
        accumulate_score_grad(state, kind, neg, -1.0, buf)
    return value
