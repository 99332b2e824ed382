"""Symmetric Gauss quadrature rules on the reference triangle.

Reference element: vertices (0,0), (1,0), (0,1), area 1/2. Weights are
stored already scaled so that they sum to 1/2; multiplying by det(J) of
the affine map gives physical-element integration directly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MAX_EXACTNESS_DEGREE = 6


@dataclass(frozen=True)
class QuadRule:
    """Points (x, y) on the reference triangle and matching weights."""

    degree: int
    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,), sums to 1/2

    @property
    def n_points(self):
        return self.points.shape[0]


def _orbit3(a):
    # barycentric (1-2a, a, a) and permutations, returned as (x, y)
    return [(a, a), (1.0 - 2.0 * a, a), (a, 1.0 - 2.0 * a)]


def _orbit6(c, d):
    e = 1.0 - c - d
    return [(c, d), (d, c), (e, d), (d, e), (e, c), (c, e)]


def _build(degree):
    if degree <= 1:
        return [(1.0 / 3.0, 1.0 / 3.0)], [1.0]
    if degree == 2:
        return _orbit3(1.0 / 6.0), [1.0 / 3.0] * 3
    if degree == 3:
        pts = [(1.0 / 3.0, 1.0 / 3.0)] + _orbit3(0.2)
        return pts, [-27.0 / 48.0] + [25.0 / 48.0] * 3
    if degree == 4:
        pts = _orbit3(0.445948490915965) + _orbit3(0.091576213509771)
        wts = [0.223381589678011] * 3 + [0.109951743655322] * 3
        return pts, wts
    if degree == 5:
        pts = (
            [(1.0 / 3.0, 1.0 / 3.0)]
            + _orbit3(0.470142064105115)
            + _orbit3(0.101286507323456)
        )
        wts = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
        return pts, wts
    if degree == 6:
        pts = (
            _orbit3(0.249286745170910)
            + _orbit3(0.063089014491502)
            + _orbit6(0.310352451033785, 0.053145049844816)
        )
        wts = (
            [0.116786275726379] * 3
            + [0.050844906370207] * 3
            + [0.082851075618374] * 6
        )
        return pts, wts
    raise ConfigurationError(
        f"quadrature exactness degree {degree} not supported (max {MAX_EXACTNESS_DEGREE})"
    )


def quadrature_rule(exactness_degree: int) -> QuadRule:
    """Return a rule exact for polynomials up to `exactness_degree`."""
    if exactness_degree > MAX_EXACTNESS_DEGREE:
        raise ConfigurationError(
            f"quadrature exactness degree {exactness_degree} not supported "
            f"(max {MAX_EXACTNESS_DEGREE})"
        )
    pts, wts = _build(exactness_degree)
    points = np.asarray(pts, dtype=float)
    weights = 0.5 * np.asarray(wts, dtype=float)
    return QuadRule(degree=max(exactness_degree, 1), points=points, weights=weights)


def reference_monomial_integral(a: int, b: int) -> float:
    """Exact value of the integral of x^a y^b over the reference triangle."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)
