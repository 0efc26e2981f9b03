"""Quadrature on triangles, polygonal element parts and straight segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Barycentric points and weights (normalized to sum 1) on the reference triangle.
_TRIANGLE_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.full(3, 1 / 3),
    ),
    5: (
        np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [0.059715871789770, 0.470142064105115, 0.470142064105115],
                [0.470142064105115, 0.059715871789770, 0.470142064105115],
                [0.470142064105115, 0.470142064105115, 0.059715871789770],
                [0.797426985353087, 0.101286507323456, 0.101286507323456],
                [0.101286507323456, 0.797426985353087, 0.101286507323456],
                [0.101286507323456, 0.101286507323456, 0.797426985353087],
            ]
        ),
        np.array(
            [0.225]
            + [0.132394152788506] * 3
            + [0.125939180544827] * 3
        ),
    ),
}

_GAUSS_2 = (
    np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]),
    np.array([0.5, 0.5]),
)

#: Sub-triangles below this area are dropped from part quadrature.
DEGENERATE_AREA = 1e-16


@dataclass(frozen=True)
class QuadratureRule:
    """Physical quadrature points and positive weights."""

    points: np.ndarray  # (m, 2)
    weights: np.ndarray  # (m,)
    target: str = "triangle-part"

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points[:, 0], self.points[:, 1])))

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def signed_areas(tris: np.ndarray) -> np.ndarray:
    """Signed areas of triangles given as an ``(m, 3, 2)`` vertex array."""
    tris = np.asarray(tris, dtype=float)
    e1 = tris[..., 1, :] - tris[..., 0, :]
    e2 = tris[..., 2, :] - tris[..., 0, :]
    return 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])


def triangle_rule_batch(tris: np.ndarray, degree: int = 2):
    """Quadrature points ``(m, q, 2)`` and weights ``(m, q)`` for many triangles."""
    try:
        bary, w = _TRIANGLE_RULES[degree]
    except KeyError:
        raise ValueError(f"no triangle rule of degree {degree}; choose from {sorted(_TRIANGLE_RULES)}")
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 2)
    pts = np.einsum("qk,mkd->mqd", bary, tris)
    area = np.abs(signed_areas(tris))
    return pts, area[:, None] * w[None, :]


def segment_rule_batch(segments: np.ndarray):
    """Two-point Gauss points ``(m, 2, 2)`` and weights ``(m, 2)`` on segments."""
    seg = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    t, w = _GAUSS_2
    d = seg[:, 1, :] - seg[:, 0, :]
    length = np.hypot(d[:, 0], d[:, 1])
    pts = seg[:, None, 0, :] + t[None, :, None] * d[:, None, :]
    return pts, length[:, None] * w[None, :]


def quadrature_for_part(part, degree: int = 2) -> QuadratureRule:
    """Union of per-sub-triangle rules over a polygonal part.

    Degenerate sub-triangles (area below :data:`DEGENERATE_AREA`) contribute
    nothing.
    """
    tris = np.asarray(part, dtype=float).reshape(-1, 3, 2)
    keep = np.abs(signed_areas(tris)) >= DEGENERATE_AREA
    pts, w = triangle_rule_batch(tris[keep], degree)
    return QuadratureRule(pts.reshape(-1, 2), w.ravel(), "triangle-part")


def quadrature_for_segment(segment) -> QuadratureRule:
    """Two-point Gauss rule, exact for cubics along the segment."""
    seg = np.asarray(segment, dtype=float).reshape(2, 2)
    if np.allclose(seg[0], seg[1], rtol=0.0, atol=0.0):
        raise ValueError("segment endpoints coincide")
    pts, w = segment_rule_batch(seg[None])
    return QuadratureRule(pts[0], w[0], "segment")
