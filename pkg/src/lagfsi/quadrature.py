"""Gauss quadrature rules on reference simplices and their facets.

Reference cells: unit triangle (0,0),(1,0),(0,1) and unit tetrahedron
(0,0,0),(1,0,0),(0,1,0),(0,0,1).  Weights include the reference measure
(1/2 for the triangle, 1/6 for the tetrahedron), so a physical integral is
``sum_q w_q * |det J| * f(x_q)``.
"""

import numpy as np

_SQRT15 = np.sqrt(15.0)


def _triangle_rule(degree):
    if degree <= 1:
        pts = np.array([[1 / 3, 1 / 3]])
        wts = np.array([0.5])
    elif degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        wts = np.full(3, 1 / 6)
    elif degree == 3:
        pts = np.array([[1 / 3, 1 / 3], [0.6, 0.2], [0.2, 0.6], [0.2, 0.2]])
        wts = np.array([-27 / 96, 25 / 96, 25 / 96, 25 / 96])
    else:
        # 7-point rule, exact through degree 5
        a = (6 + _SQRT15) / 21
        b = (6 - _SQRT15) / 21
        wa = (155 + _SQRT15) / 2400
        wb = (155 - _SQRT15) / 2400
        pts = np.array(
            [
                [1 / 3, 1 / 3],
                [a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
                [b, b], [1 - 2 * b, b], [b, 1 - 2 * b],
            ]
        )
        wts = np.array([9 / 80, wa, wa, wa, wb, wb, wb])
    return pts, wts


def _tet_rule(degree):
    if degree <= 1:
        pts = np.array([[0.25, 0.25, 0.25]])
        wts = np.array([1 / 6])
    elif degree == 2:
        a = (5 - np.sqrt(5)) / 20
        b = (5 + 3 * np.sqrt(5)) / 20
        pts = np.array([[a, a, a], [b, a, a], [a, b, a], [a, a, b]])
        wts = np.full(4, 1 / 24)
    elif degree == 3:
        pts = np.array(
            [[0.25, 0.25, 0.25],
             [1 / 6, 1 / 6, 1 / 6], [0.5, 1 / 6, 1 / 6],
             [1 / 6, 0.5, 1 / 6], [1 / 6, 1 / 6, 0.5]]
        )
        wts = np.array([-2 / 15, 3 / 40, 3 / 40, 3 / 40, 3 / 40])
    else:
        # Keast 15-point rule, exact through degree 5
        g1 = (7 - _SQRT15) / 34
        g2 = (7 + _SQRT15) / 34
        g3 = (10 - 2 * _SQRT15) / 40
        w1 = 8 / 405
        w2 = (2665 + 14 * _SQRT15) / 226800
        w3 = (2665 - 14 * _SQRT15) / 226800
        w4 = 5 / 567
        pts = [[0.25, 0.25, 0.25]]
        wts = [w1]
        for g, w in ((g1, w2), (g2, w3)):
            c = 1 - 3 * g
            pts += [[g, g, g], [c, g, g], [g, c, g], [g, g, c]]
            wts += [w] * 4
        h = 0.5 - g3
        pts += [[h, h, g3], [h, g3, h], [g3, h, h],
                [g3, g3, h], [g3, h, g3], [h, g3, g3]]
        wts += [w4] * 6
        pts = np.array(pts)
        wts = np.array(wts)
    return pts, wts


def simplex_rule(dim, degree):
    """Return (points, weights) for the reference simplex in `dim` dimensions."""
    if dim == 2:
        return _triangle_rule(degree)
    if dim == 3:
        return _tet_rule(degree)
    raise ValueError(f"unsupported dimension {dim}")


def facet_rule(dim, degree):
    """Quadrature on a reference facet: the unit interval (dim=2, weights sum
    to 1) or the unit triangle (dim=3, weights sum to 1/2)."""
    if dim == 2:
        n = max(1, (degree + 2) // 2)
        x, w = np.polynomial.legendre.leggauss(n)
        return (x[:, None] + 1) / 2, w / 2
    if dim == 3:
        return _triangle_rule(degree)
    raise ValueError(f"unsupported dimension {dim}")
