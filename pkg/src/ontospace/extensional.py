"""Extensional space: instance points, relation translations, ellipsoid concept regions.

A concept region is the set of points x with
``sum_j ((x_j - center_j) / axes_j)**2 <= radius**2``; radius = 1 recovers
the plain normalized ellipsoid.  An InstanceOf assertion scores zero when
the instance point lies inside the region, a SubClassOf assertion scores
zero when the sub-region nests inside the super-region (normalized centers
coincide up to the radius budget).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

AXIS_FLOOR = 1e-3
RADIUS_FLOOR = 1e-3


@dataclass(frozen=True)
class EllipsoidConcept:
    """Read-only view of one concept's extensional region."""

    center: np.ndarray
    axes: np.ndarray
    radius: float


@dataclass
class ExtensionalParams:
    """All learnable tensors of the extensional space (float64).

    instances: (|I|, d) point embeddings, kept inside the unit ball
    relations: (|R_l|, d) translation vectors
    centers:   (|C|, d) ellipsoid centers (unconstrained)
    axes:      (|C|, d) semi-axis lengths, floored at AXIS_FLOOR
    radii:     (|C|,) region radii, floored at RADIUS_FLOOR
    """

    instances: np.ndarray
    relations: np.ndarray
    centers: np.ndarray
    axes: np.ndarray
    radii: np.ndarray

    @property
    def dim(self) -> int:
        return self.instances.shape[1]

    def concept(self, c: int) -> EllipsoidConcept:
        return EllipsoidConcept(
            center=self.centers[c], axes=self.axes[c], radius=float(self.radii[c])
        )

    def copy(self) -> "ExtensionalParams":
        return ExtensionalParams(
            instances=self.instances.copy(),
            relations=self.relations.copy(),
            centers=self.centers.copy(),
            axes=self.axes.copy(),
            radii=self.radii.copy(),
        )

    def check_invariants(self) -> None:
        for name, arr in (("instances", self.instances), ("relations", self.relations),
                          ("centers", self.centers), ("axes", self.axes),
                          ("radii", self.radii)):
            if not np.isfinite(arr).all():
                raise DataError(f"non-finite values in extensional {name}")
        if (self.axes < AXIS_FLOOR).any():
            raise DataError("semi-axis below floor")
        if (self.radii < RADIUS_FLOOR).any():
            raise DataError("radius below floor")
        norms = np.linalg.norm(self.instances, axis=1)
        if (norms > 1.0 + 1e-9).any():
            raise DataError("instance embedding outside the unit ball")


def init_extensional(n_instances: int, n_relations: int, n_concepts: int,
                     d: int, seed: int) -> ExtensionalParams:
    """Deterministic random initialization.

    Vectors are uniform in [-6/sqrt(d), 6/sqrt(d)]; instance points and
    concept centers are pulled back into the unit ball so regions start
    near the data; axes are uniform in [0.5, 1.0] and radii start at 1.
    """
    if min(n_instances, n_relations, n_concepts) <= 0:
        raise DataError("extensional sizes must all be positive")
    if d < 1:
        raise DataError("embedding dimension must be >= 1")
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(d)

    def ball(n: int) -> np.ndarray:
        mat = rng.uniform(-bound, bound, size=(n, d))
        return clip_to_unit_ball(mat)

    instances = ball(n_instances)
    centers = ball(n_concepts)
    relations = rng.uniform(-bound, bound, size=(n_relations, d))
    axes = rng.uniform(0.5, 1.0, size=(n_concepts, d))
    radii = np.ones(n_concepts, dtype=np.float64)
    return ExtensionalParams(
        instances=instances, relations=relations,
        centers=centers, axes=axes, radii=radii,
    )


def clip_to_unit_ball(mat: np.ndarray) -> np.ndarray:
    """Scale rows with L2 norm above 1 back onto the unit sphere, in place."""
    norms = np.linalg.norm(mat, axis=-1, keepdims=True)
    np.divide(mat, norms, out=mat, where=norms > 1.0)
    return mat


def ellipsoid_gap(point: np.ndarray, center: np.ndarray, axes: np.ndarray,
                  radius: float) -> float:
    """Normalized squared distance of a point from the center minus radius^2.

    Negative inside the region, positive outside; the hinge of this value
    is the InstanceOf score.
    """
    u = (point - center) / axes
    return float(u @ u - radius * radius)


def score_instanceof_ext(i: int, c: int, params: ExtensionalParams) -> float:
    """Hinge penalty for instance i lying outside concept c's region."""
    gap = ellipsoid_gap(params.instances[i], params.centers[c], params.axes[c],
                        float(params.radii[c]))
    return max(0.0, gap)


def subsumption_gap(center_i: np.ndarray, axes_i: np.ndarray, radius_i: float,
                    center_j: np.ndarray, axes_j: np.ndarray, radius_j: float) -> float:
    """Distance between normalized centers plus the radius budget overrun."""
    v = center_i / axes_i - center_j / axes_j
    return float(v @ v + radius_i * radius_i - radius_j * radius_j)


def score_subclassof_ext(ci: int, cj: int, params: ExtensionalParams) -> float:
    """Hinge penalty for concept ci's region not nesting inside cj's."""
    gap = subsumption_gap(
        params.centers[ci], params.axes[ci], float(params.radii[ci]),
        params.centers[cj], params.axes[cj], float(params.radii[cj]),
    )
    return max(0.0, gap)


def translation_residual(head: np.ndarray, relation: np.ndarray,
                         tail: np.ndarray, norm: str = "L2") -> float:
    """Translation residual of (h, r, t): squared L2 by default, L1 optional."""
    u = head + relation - tail
    if norm == "L1":
        return float(np.abs(u).sum())
    return float(u @ u)


def score_relational(h: int, r: int, t: int, params: ExtensionalParams,
                     norm: str = "L2") -> float:
    return translation_residual(params.instances[h], params.relations[r],
                                params.instances[t], norm=norm)


def contains(c: int, point: np.ndarray, params: ExtensionalParams) -> bool:
    """True iff the point lies inside (or on) concept c's region."""
    return ellipsoid_gap(np.asarray(point, dtype=np.float64),
                         params.centers[c], params.axes[c],
                         float(params.radii[c])) <= 0.0
