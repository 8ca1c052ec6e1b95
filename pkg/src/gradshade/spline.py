"""Clamped quadratic B-splines on [0, pi/2].

The material model stores every coefficient as a curve over the half-angle
theta_d, represented by 6 control points on the clamped knot vector
[0 0 0 1/4 1/2 3/4 1 1 1] (knots in the normalized parameter t = theta /
(pi/2)). Basis functions follow the Cox-de Boor recursion with the 0/0 := 0
convention; at most three of the six are non-zero at any parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEGREE = 2
CONTROL_COUNT = 6
THETA_MAX = math.pi / 2.0
KNOTS = np.array([0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0])
KNOTS.flags.writeable = False

# Gram-matrix condition number above which a fit is rejected as rank deficient.
MAX_FIT_CONDITION = 1e12


class RankDeficientError(ValueError):
    """Fit sample placement leaves some control point unconstrained."""


def basis_matrix(theta) -> np.ndarray:
    """Evaluate all six basis functions.

    Accepts scalars or arrays of angles in radians; angles are clamped to
    [0, pi/2]. Returns an array of shape ``np.shape(theta) + (6,)``.
    """
    t = np.asarray(theta, dtype=np.float64) / THETA_MAX
    shape = t.shape
    t = np.clip(t.ravel(), 0.0, 1.0)

    # Degree-0 indicator functions over the 8 knot spans; the parameter value
    # 1.0 belongs to the last non-empty span [0.75, 1.0).
    n = []
    for i in range(8):
        lo, hi = KNOTS[i], KNOTS[i + 1]
        row = ((t >= lo) & (t < hi)).astype(np.float64) if hi > lo else np.zeros_like(t)
        n.append(row)
    n[5][t == 1.0] = 1.0

    for d in (1, 2):
        for i in range(8 - d):
            acc = np.zeros_like(t)
            left = KNOTS[i + d] - KNOTS[i]
            if left > 0.0:
                acc += (t - KNOTS[i]) / left * n[i]
            right = KNOTS[i + d + 1] - KNOTS[i + 1]
            if right > 0.0:
                acc += (KNOTS[i + d + 1] - t) / right * n[i + 1]
            n[i] = acc

    return np.stack(n[:6], axis=-1).reshape(shape + (6,))


def basis(theta: float) -> np.ndarray:
    """Six basis values at a single angle, shape (6,)."""
    return basis_matrix(float(theta))


@dataclass(frozen=True)
class QuadBSpline:
    """A quadratic spline as its six control values."""

    control_points: np.ndarray

    def __post_init__(self):
        cp = np.ascontiguousarray(self.control_points, dtype=np.float64)
        if cp.shape != (CONTROL_COUNT,):
            raise ValueError(f"expected {CONTROL_COUNT} control points, got shape {cp.shape}")
        if not np.isfinite(cp).all():
            raise ValueError("control points must be finite")
        cp.flags.writeable = False
        object.__setattr__(self, "control_points", cp)

    def evaluate(self, theta):
        """Spline value at ``theta`` (scalar or array, radians)."""
        return basis_matrix(theta) @ self.control_points

    __call__ = evaluate


def fit(thetas, values) -> QuadBSpline:
    """Least-squares fit of a spline to sampled (theta, value) pairs.

    Needs at least 6 samples. Solves the normal equations; raises
    RankDeficientError when sample placement leaves the Gram matrix with a
    condition number above 1e12 (e.g. all samples inside one knot span).
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if thetas.shape != values.shape or thetas.ndim != 1:
        raise ValueError("thetas and values must be 1-d arrays of equal length")
    if thetas.size < CONTROL_COUNT:
        raise ValueError(f"need at least {CONTROL_COUNT} samples, got {thetas.size}")
    phi = basis_matrix(thetas)
    gram = phi.T @ phi
    if np.linalg.cond(gram) > MAX_FIT_CONDITION:
        raise RankDeficientError("sample placement leaves the spline fit rank deficient")
    coef = np.linalg.solve(gram, phi.T @ values)
    return QuadBSpline(coef)


def greville_thetas() -> np.ndarray:
    """Angles at which each basis function peaks (knot averages), shape (6,)."""
    g = np.array([KNOTS[i + 1 : i + 1 + DEGREE].mean() for i in range(CONTROL_COUNT)])
    return g * THETA_MAX
