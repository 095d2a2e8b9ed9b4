"""
Convex geometry of the Hoelder exponent domain: the piecewise linear function
``F``, the regions of the domain on which it is linear, the endpoint exponent
tuples and the critical order of a multilinear operator.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "ExponentTuple",
    "PolytopeRegion",
    "function_F",
    "critical_order",
    "decompose_domain",
    "check_linearity",
    "hull_contains",
    "sample_domain",
    "coverage_check",
    "n_prime",
    "enumerate_endpoints",
    "endpoints_json",
    "EndpointError",
]

INF = math.inf


class EndpointError(ValueError):
    pass


def _recip(p) -> Fraction:
    if p == INF or (isinstance(p, str) and p.lower() in ("inf", "infinity")):
        return Fraction(0)
    q = Fraction(p).limit_denominator(10 ** 9) if isinstance(p, float) else Fraction(p)
    if q <= 0:
        raise EndpointError(f"exponent must be positive, got {p}")
    return 1 / q


def _to_p(r: Fraction) -> float:
    return INF if r == 0 else float(1 / r)


@dataclass(frozen=True)
class ExponentTuple:
    """Exponents ``p_0..p_N`` stored as exact reciprocals (``inf`` maps to 0)."""

    recips: tuple  # (1/p_0, 1/p_1, ..., 1/p_N) as Fractions
    label: str = ""

    def __post_init__(self):
        r = tuple(Fraction(x) for x in self.recips)
        if len(r) < 2:
            raise EndpointError("need at least p_0 and p_1")
        for x in r:
            if not (0 <= x <= 1):
                raise EndpointError(f"exponents must lie in [1, inf]; got 1/p = {x}")
        if r[0] != sum(r[1:]):
            raise EndpointError(f"Hoelder relation violated: 1/p_0 = {r[0]} != {sum(r[1:])}")
        object.__setattr__(self, "recips", r)

    @classmethod
    def from_inputs(cls, ps: Sequence, label: str = "") -> "ExponentTuple":
        """Build from ``p_1..p_N``; ``p_0`` follows from the Hoelder relation."""
        r = [_recip(p) for p in ps]
        return cls(tuple([sum(r)] + r), label)

    @classmethod
    def from_all(cls, ps: Sequence, label: str = "") -> "ExponentTuple":
        """Build from ``p_0..p_N`` and validate the Hoelder relation."""
        return cls(tuple(_recip(p) for p in ps), label)

    @property
    def N(self) -> int:
        return len(self.recips) - 1

    @property
    def ps(self) -> tuple:
        return tuple(_to_p(r) for r in self.recips)

    def x(self) -> np.ndarray:
        """The point ``(1/p_1, ..., 1/p_N)`` of the domain D."""
        return np.array([float(r) for r in self.recips[1:]])

    def to_dict(self) -> dict:
        return {"p": [("inf" if p == INF else p) for p in self.ps],
                "recips": [str(r) for r in self.recips], "label": self.label}


def function_F(x) -> np.ndarray:
    """``F(x) = ||x - 1/2||_1 + |x.1 - 1/2|`` along the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sum(np.abs(x - 0.5), axis=-1) + np.abs(np.sum(x, axis=-1) - 0.5)


def critical_order(n: int, t: ExponentTuple) -> float:
    """``-(n-1) (sum_j |1/p_j - 1/2| + |1/p_0 - 1/2|)``."""
    half = Fraction(1, 2)
    s = sum(abs(r - half) for r in t.recips)
    return -(n - 1) * float(s)


@dataclass(frozen=True)
class PolytopeRegion:
    label: str
    vertices: np.ndarray  # (V, N)

    def affine_F(self, x) -> np.ndarray:
        """The linear formula for F valid on this region."""
        x = np.asarray(x, dtype=float)
        N = self.vertices.shape[1]
        base = (N - 1) / 2.0
        if self.label == "D00":
            return base + 1.0 - 2.0 * np.sum(x, axis=-1)
        if self.label == "D01":
            return np.full(x.shape[:-1], base)
        j = int(self.label.split("_")[1]) - 1
        return base + 2.0 * x[..., j] - 1.0

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        w = rng.dirichlet(np.ones(len(self.vertices)), size=count)
        return w @ self.vertices


def decompose_domain(N: int) -> List[PolytopeRegion]:
    """``D00``, ``D01`` and ``D1_j`` with their vertex sets."""
    if N < 2:
        raise EndpointError("need N >= 2")
    E = np.eye(N)
    zero = np.zeros((1, N))
    half = E / 2.0
    pairs = np.array([(E[k] + E[l]) / 2.0 for k, l in itertools.combinations(range(N), 2)])
    regions = [PolytopeRegion("D00", np.vstack([zero, half])),
               PolytopeRegion("D01", np.vstack([half, pairs]))]
    for j in range(N):
        others = [(E[j] + E[k]) / 2.0 for k in range(N) if k != j]
        regions.append(PolytopeRegion(f"D1_{j + 1}", np.vstack([E[j], half[j], *others])))
    return regions


def check_linearity(region: PolytopeRegion, rng: Optional[np.random.Generator] = None,
                    pairs: int = 10_000) -> Dict[str, float]:
    """Max deviation of F from linearity and from the region's affine formula."""
    rng = rng or np.random.default_rng(0)
    x = region.sample(rng, pairs)
    y = region.sample(rng, pairs)
    lam = rng.random(pairs)[:, None]
    z = lam * x + (1 - lam) * y
    lin = np.abs(function_F(z) - lam[:, 0] * function_F(x) - (1 - lam[:, 0]) * function_F(y))
    aff = np.abs(function_F(x) - region.affine_F(x))
    return {"linearity_dev": float(lin.max()), "affine_dev": float(aff.max()),
            "pairs": pairs}


def _simplex_contains(V: np.ndarray, x: np.ndarray, tol: float) -> Optional[bool]:
    # Barycentric test when the vertices form a nondegenerate simplex.
    if V.shape[0] != V.shape[1] + 1:
        return None
    T = (V[1:] - V[0]).T
    if abs(np.linalg.det(T)) < 1e-12:
        return None
    lam = np.linalg.solve(T, np.asarray(x, dtype=float) - V[0])
    return bool(lam.min() >= -tol and lam.sum() <= 1 + tol)


def hull_contains(vertices: np.ndarray, x: np.ndarray, tol: float = 1e-10,
                  use_lp: bool = False) -> bool:
    """Hull membership; simplices use barycentric coordinates unless ``use_lp``.

    The general case is LP feasibility of ``x = V^T lam`` with ``lam >= 0``, ``sum lam = 1``."""
    V = np.asarray(vertices, dtype=float)
    if not use_lp:
        quick = _simplex_contains(V, x, tol)
        if quick is not None:
            return quick
    nv = V.shape[0]
    A_eq = np.vstack([V.T, np.ones((1, nv))])
    b_eq = np.concatenate([np.asarray(x, dtype=float), [1.0]])
    # Minimize the l1 residual with slack variables so near-boundary points
    # are classified by an explicit tolerance.
    m = A_eq.shape[0]
    c = np.concatenate([np.zeros(nv), np.ones(2 * m)])
    A = np.hstack([A_eq, np.eye(m), -np.eye(m)])
    res = linprog(c, A_eq=A, b_eq=b_eq, bounds=[(0, None)] * (nv + 2 * m), method="highs")
    return bool(res.status == 0 and res.fun <= tol)


def sample_domain(rng: np.random.Generator, N: int, count: int) -> np.ndarray:
    """Uniform samples of ``D = {x in [0,1]^N : x.1 <= 1}``."""
    return rng.dirichlet(np.ones(N + 1), size=count)[:, :N]


def n_prime(x) -> np.ndarray:
    """Number of coordinates with ``x_j >= 1/2``."""
    return np.sum(np.asarray(x) >= 0.5, axis=-1)


def coverage_check(N: int, rng: Optional[np.random.Generator] = None,
                   count: int = 10_000, tol: float = 1e-10) -> Dict[str, object]:
    """Every sampled point of D lies in at least one region (LP oracle)."""
    rng = rng or np.random.default_rng(0)
    regions = decompose_domain(N)
    pts = sample_domain(rng, N, count)
    missing = 0
    labels: Dict[str, int] = {r.label: 0 for r in regions}
    for x in pts:
        hit = False
        for r in regions:
            if hull_contains(r.vertices, x, tol):
                labels[r.label] += 1
                hit = True
                break
        missing += not hit
    return {"samples": count, "uncovered": missing, "first_hit_counts": labels}


def enumerate_endpoints(N: int) -> List[ExponentTuple]:
    """The endpoint tuples: all ``inf``; one ``2``; two ``2``s; one ``1``."""
    if N < 2:
        raise EndpointError("need N >= 2")
    out = [ExponentTuple.from_inputs([INF] * N, "i")]
    for j in range(N):
        ps = [INF] * N
        ps[j] = 2
        out.append(ExponentTuple.from_inputs(ps, f"ii:{j + 1}"))
    for a, b in itertools.combinations(range(N), 2):
        ps = [INF] * N
        ps[a] = ps[b] = 2
        out.append(ExponentTuple.from_inputs(ps, f"iii:{a + 1},{b + 1}"))
    for j in range(N):
        ps = [INF] * N
        ps[j] = 1
        out.append(ExponentTuple.from_inputs(ps, f"iv:{j + 1}"))
    return out


def vertex_set(N: int) -> np.ndarray:
    """``{0} u {e_k/2} u {(e_k+e_l)/2, k<l} u {e_k}``."""
    E = np.eye(N)
    pts = [np.zeros(N)] + [E[k] / 2 for k in range(N)]
    pts += [(E[k] + E[l]) / 2 for k, l in itertools.combinations(range(N), 2)]
    pts += [E[k] for k in range(N)]
    return np.array(pts)


def endpoints_json(N: int, n: int = 2) -> str:
    rows = []
    for t in enumerate_endpoints(N):
        d = t.to_dict()
        d["critical_order"] = critical_order(n, t)
        d["symmetry_class"] = t.label.split(":")[0]
        rows.append(d)
    return json.dumps({"N": N, "n": n, "endpoints": rows}, indent=2)
