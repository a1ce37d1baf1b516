"""Gauss rules on the reference segment [0, 1] and reference triangle.

The triangle rules are collapsed (Stroud conical product) rules: a
Gauss-Jacobi rule in the collapsed direction times a Gauss-Legendre rule.
They are exact for every polynomial of the requested total degree.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_TRIANGLE_DEGREE = 40
MAX_SEGMENT_DEGREE = 79


@dataclass(frozen=True)
class QuadRule:
    """Points and weights on a reference domain.

    For ``domain == "triangle"`` the points have shape (q, 2) and live in
    the triangle with vertices (0, 0), (1, 0), (0, 1); for ``"segment"``
    they have shape (q,) and live in [0, 1].
    """

    domain: str
    degree: int
    points: np.ndarray
    weights: np.ndarray


def _gauss_legendre01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def quad_rule(domain, degree):
    """Return a rule on ``domain`` ("triangle" or "segment") exact to ``degree``."""
    degree = int(degree)
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    n = degree // 2 + 1
    if domain == "segment":
        if degree > MAX_SEGMENT_DEGREE:
            raise ValueError(f"segment rules are supported up to degree {MAX_SEGMENT_DEGREE}")
        x, w = _gauss_legendre01(n)
        x.setflags(write=False)
        w.setflags(write=False)
        return QuadRule("segment", degree, x, w)
    if domain == "triangle":
        if degree > MAX_TRIANGLE_DEGREE:
            raise ValueError(f"triangle rules are supported up to degree {MAX_TRIANGLE_DEGREE}")
        # x = s, y = t (1 - s); Jacobian (1 - s) is absorbed by the Jacobi weight
        xj, wj = roots_jacobi(n, 1.0, 0.0)
        s = 0.5 * (xj + 1.0)
        ws = wj / 4.0
        t, wt = _gauss_legendre01(n)
        S, T = np.meshgrid(s, t, indexing="ij")
        pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
        wts = np.outer(ws, wt).ravel()
        pts.setflags(write=False)
        wts.setflags(write=False)
        return QuadRule("triangle", degree, pts, wts)
    raise ValueError(f"unknown quadrature domain {domain!r}")


def map_to_triangles(rule, corners):
    """Map a reference triangle rule onto many triangles.

    Parameters
    ----------
    rule : QuadRule
        Triangle rule.
    corners : ndarray, shape (nt, 3, 2)
        Vertex coordinates of the target triangles.

    Returns
    -------
    points : ndarray, shape (nt, q, 2)
    weights : ndarray, shape (nt, q)
        Weights include the Jacobian, so they sum to the triangle areas.
    """
    a0 = corners[:, 0, :]
    e1 = corners[:, 1, :] - a0
    e2 = corners[:, 2, :] - a0
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    xh = rule.points
    points = (a0[:, None, :] + xh[None, :, 0, None] * e1[:, None, :]
              + xh[None, :, 1, None] * e2[:, None, :])
    weights = det[:, None] * rule.weights[None, :]
    return points, weights
