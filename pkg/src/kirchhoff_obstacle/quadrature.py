"""Quadrature rules on triangles and straight edges.

Two triangle families are available.  ``"symmetric"`` gives the fully
symmetric Dunavant rules with positive weights and interior points (orbit
parameters re-solved to double precision); degrees without such a rule in the
table are served by the next tabulated degree, and degrees above 12 fall back
to the collapsed rule.  ``"collapsed"`` gives the conical product of
Gauss-Jacobi and Gauss-Legendre rules through the Duffy map, which has no
symmetry: no two points of an element are equidistant from a vertex.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "QuadratureRule",
    "triangle_quadrature",
    "edge_quadrature",
    "MAX_TRIANGLE_DEGREE",
    "MAX_EDGE_DEGREE",
]

MAX_TRIANGLE_DEGREE = 30
MAX_EDGE_DEGREE = 61

# Orbit data on the reference triangle.  Weights are fractions of the area.
#   ("S3", (w,))          centroid
#   ("S21", (a, w))       permutations of (a, a, 1 - 2a)
#   ("S111", (a, b, w))   permutations of (a, b, 1 - a - b)
_DUNAVANT = {
    1: [("S3", (1.0,))],
    2: [("S21", (1 / 6, 1 / 3))],
    4: [
        ("S21", (0.4459484909159649, 0.22338158967801144)),
        ("S21", (0.09157621350977076, 0.10995174365532188)),
    ],
    5: [
        ("S3", (0.22499999999999845,)),
        ("S21", (0.4701420641051149, 0.13239415278850672)),
        ("S21", (0.10128650732345634, 0.12593918054482712)),
    ],
    6: [
        ("S21", (0.24928674517091487, 0.11678627572637122)),
        ("S21", (0.0630890144915012, 0.050844906370205396)),
        ("S111", (0.053145049844820554, 0.3103524510337809, 0.08285107561837836)),
    ],
    8: [
        ("S3", (0.14431560767777792,)),
        ("S21", (0.4592925882927178, 0.09509163426729003)),
        ("S21", (0.17056930775175477, 0.1032173705347187)),
        ("S21", (0.05054722831703125, 0.03245849762319882)),
        ("S111", (0.0083947774099506, 0.2631128296346548, 0.027230314174433224)),
    ],
    9: [
        ("S3", (0.09713579628280272,)),
        ("S21", (0.48968251919874173, 0.031334700227132056)),
        ("S21", (0.437089591492942, 0.0778275410047783)),
        ("S21", (0.18820353561903544, 0.07964773892721088)),
        ("S21", (0.04472951339445264, 0.025577675658697834)),
        ("S111", (0.03683841205473687, 0.2219629891607642, 0.04328353937729002)),
    ],
    10: [
        ("S3", (0.09081799038275887,)),
        ("S21", (0.4855776333836671, 0.03672595775645296)),
        ("S21", (0.1094815754850333, 0.04532105943552641)),
        ("S111", (0.14170721941486378, 0.30793983876413156, 0.07275791684543134)),
        ("S111", (0.025003534762683244, 0.2466725606398894, 0.028327242531054224)),
        ("S111", (0.00954081540029984, 0.06680325101219438, 0.009421666963731612)),
    ],
    12: [
        ("S21", (0.48821738977392487, 0.025731066440409216)),
        ("S21", (0.4397243922945631, 0.04369254453726691)),
        ("S21", (0.27121038501217226, 0.06285822421784504)),
        ("S21", (0.12757614554310742, 0.03479611293177375)),
        ("S21", (0.021317350452877356, 0.006166261051404449)),
        ("S111", (0.11534349453492783, 0.27571326968818743, 0.04037155776599052)),
        ("S111", (0.022838332222561094, 0.28132558098887855, 0.022356773202577302)),
        ("S111", (0.0257340505485132, 0.1162519159067579, 0.017316231108749146)),
    ],
}


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a quadrature rule.

    For triangle rules ``points`` holds barycentric coordinates (n, 3) and the
    weights sum to one, i.e. they are fractions of the element area.  For
    edge rules ``points`` holds the parameter t in [0, 1] and the weights sum
    to one (fractions of the edge length).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int
    kind: str

    def __len__(self) -> int:
        return len(self.weights)

    def physical(self, vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map the rule onto a triangle or segment given by its vertices.

        Returns physical points (n, 2) and weights scaled by the measure.
        """
        vertices = np.asarray(vertices, dtype=float)
        if self.kind == "triangle":
            pts = self.points @ vertices
            e1 = vertices[1] - vertices[0]
            e2 = vertices[2] - vertices[0]
            area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
            return pts, self.weights * area
        a, b = vertices
        pts = a[None, :] + self.points[:, None] * (b - a)[None, :]
        return pts, self.weights * np.hypot(*(b - a))


def _expand(orbits) -> tuple[np.ndarray, np.ndarray]:
    pts, wts = [], []
    for kind, params in orbits:
        if kind == "S3":
            pts.append((1 / 3, 1 / 3, 1 / 3))
            wts.append(params[0])
        elif kind == "S21":
            a, w = params
            b = 1.0 - 2.0 * a
            for p in ((a, a, b), (a, b, a), (b, a, a)):
                pts.append(p)
                wts.append(w)
        else:
            a, b, w = params
            c = 1.0 - a - b
            for p in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
                pts.append(p)
                wts.append(w)
    return np.array(pts), np.array(wts)


def _conical_product(degree: int) -> tuple[np.ndarray, np.ndarray]:
    n = degree // 2 + 1
    # Gauss-Jacobi in the collapsed direction absorbs the Duffy Jacobian.
    s, ws = roots_jacobi(n, 1.0, 0.0)
    t, wt = roots_jacobi(n, 0.0, 0.0)
    s = 0.5 * (s + 1.0)
    t = 0.5 * (t + 1.0)
    ws = ws / 4.0
    wt = wt / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    l1 = S
    l2 = (1.0 - S) * T
    l0 = 1.0 - l1 - l2
    pts = np.stack([l0.ravel(), l1.ravel(), l2.ravel()], axis=1)
    return pts, 2.0 * W.ravel()


def triangle_quadrature(degree: int, family: str = "symmetric") -> QuadratureRule:
    """Triangle rule exact for polynomials of total degree ``degree``.

    ``family`` is ``"symmetric"`` or ``"collapsed"`` (see module docstring).
    """
    degree = int(degree)
    if degree < 1 or degree > MAX_TRIANGLE_DEGREE:
        raise ValueError(
            f"unsupported triangle quadrature degree {degree} "
            f"(supported: 1..{MAX_TRIANGLE_DEGREE})"
        )
    if family == "collapsed":
        pts, wts = _conical_product(degree)
        return QuadratureRule(pts, wts, 2 * (degree // 2) + 1, "triangle")
    if family != "symmetric":
        raise ValueError(f"unknown quadrature family {family!r}")
    tabulated = [d for d in sorted(_DUNAVANT) if d >= degree]
    if tabulated:
        exact = tabulated[0]
        pts, wts = _expand(_DUNAVANT[exact])
    else:
        exact = degree
        pts, wts = _conical_product(degree)
    return QuadratureRule(pts, wts, exact, "triangle")


def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact up to ``degree``."""
    degree = int(degree)
    if degree < 1 or degree > MAX_EDGE_DEGREE:
        raise ValueError(
            f"unsupported edge quadrature degree {degree} (supported: 1..{MAX_EDGE_DEGREE})"
        )
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * n - 1, "edge")
