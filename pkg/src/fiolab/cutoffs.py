"""
Smooth cutoffs: the Littlewood-Paley family, the squared dyadic family used by
the multilinear pipelines, angular (second dyadic) partitions and the cone
cutoffs that split a multilinear amplitude.

All bumps are built from the transition ``h(t) = s(t) / (s(t) + s(1-t))`` with
``s(t) = exp(-1/t)`` for ``t > 0`` and ``0`` otherwise, so plateau values are
exactly 0 or 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

__all__ = [
    "smooth_step",
    "BumpProfile",
    "PSI0",
    "VARTHETA",
    "CHI_SPLIT",
    "CHI_COMPACT",
    "lp_psi",
    "lp_psi_radial",
    "squared_family",
    "squared_family_radial",
    "ConeConstants",
    "cone_family",
    "nu",
    "nu_tilde",
    "theta_jk",
    "AngularAtlas",
    "sss_directions",
    "sss_partition",
    "CutoffError",
]

K_RANGE = 60  # |k| bound for the dyadic families; 2**60 is far past any lattice


class CutoffError(ValueError):
    pass


def _s(t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.exp(-1.0 / np.where(t > 0, t, 0.0))


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    a = _s(t)
    b = _s(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump equal to 1 for ``r <= r_in`` and 0 for ``r >= r_out``."""

    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0 < self.r_in < self.r_out):
            raise CutoffError(f"need 0 < r_in < r_out, got {self.r_in}, {self.r_out}")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return smooth_step((self.r_out - r) / (self.r_out - self.r_in))

    def at(self, xi) -> np.ndarray:
        """Evaluate at points ``xi`` of shape ``(..., n)``."""
        return self(np.linalg.norm(np.asarray(xi, dtype=float), axis=-1))


PSI0 = BumpProfile(1.0, 2.0)
VARTHETA = BumpProfile(1.0, 2.0)
CHI_SPLIT = BumpProfile(0.5, 1.0)      # low/high split of a linear amplitude
CHI_COMPACT = BumpProfile(0.125, 0.25)  # compact piece of a multilinear amplitude


def _radius(xi) -> np.ndarray:
    return np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)


def lp_psi_radial(j: int, r) -> np.ndarray:
    """Littlewood-Paley piece ``psi_j`` as a function of ``|xi|``."""
    if int(j) != j or j < 0:
        raise CutoffError(f"j must be a non-negative integer, got {j}")
    r = np.asarray(r, dtype=float)
    if j == 0:
        return PSI0(r)
    return PSI0(r * 2.0 ** (-j)) - PSI0(r * 2.0 ** (-(j - 1)))


def lp_psi(j: int, xi) -> np.ndarray:
    """``psi_0`` for ``j = 0``; ``psi_0(2^-j xi) - psi_0(2^-(j-1) xi)`` otherwise."""
    return lp_psi_radial(j, _radius(xi))


_KINDS = ("theta", "psi", "phi", "omega", "zeta")


def _sq_diff(r, a_exp: int, b_exp: int) -> np.ndarray:
    sq = VARTHETA(r * 2.0 ** a_exp) ** 2 - VARTHETA(r * 2.0 ** b_exp) ** 2
    return sq


def squared_family_radial(kind: str, k: int, r, k1: Optional[int] = None,
                          squared: bool = False) -> np.ndarray:
    """Dyadic cutoffs built from ``vartheta``.

    ``theta_k = vartheta(2^{3-k} .)``, ``omega_k = theta_k(./2)`` and
    ``psi_k, phi_k, zeta_k`` are square roots of differences of squares. With
    ``squared=True`` the difference itself is returned (before clipping).
    """
    if kind not in _KINDS:
        raise CutoffError(f"unknown kind {kind!r}; expected one of {_KINDS}")
    if int(k) != k or abs(k) > K_RANGE:
        raise CutoffError(f"k must be an integer with |k| <= {K_RANGE}, got {k}")
    k = int(k)
    r = np.asarray(r, dtype=float)
    if kind == "theta":
        v = VARTHETA(r * 2.0 ** (3 - k))
        return v * v if squared else v
    if kind == "omega":
        v = VARTHETA(r * 2.0 ** (2 - k))
        return v * v if squared else v
    if kind == "psi":
        sq = _sq_diff(r, -1 - k, 2 - k)
    elif kind == "phi":
        sq = _sq_diff(r, -3 - k, 4 - k)
    else:
        if k1 is None:
            raise CutoffError("zeta requires the integer k1 from ConeConstants")
        sq = _sq_diff(r, -k - k1 - 2, 3 + k1 - k)
    if squared:
        return sq
    return np.sqrt(np.clip(sq, 0.0, None))


def squared_family(kind: str, k: int, xi, k1: Optional[int] = None,
                   squared: bool = False) -> np.ndarray:
    """Evaluate :func:`squared_family_radial` at points of shape ``(..., n)``."""
    return squared_family_radial(kind, k, _radius(xi), k1=k1, squared=squared)


def support_radii(kind: str, k: int, k1: Optional[int] = None) -> Dict[str, float]:
    """Plateau and support radii declared for each family member."""
    if kind == "theta":
        return {"one_below": 2.0 ** (k - 3), "zero_above": 2.0 ** (k - 2)}
    if kind == "omega":
        return {"one_below": 2.0 ** (k - 2), "zero_above": 2.0 ** (k - 1)}
    if kind == "psi":
        return {"zero_below": 2.0 ** (k - 2), "one_from": 2.0 ** (k - 1),
                "one_to": 2.0 ** (k + 1), "zero_above": 2.0 ** (k + 2)}
    if kind == "phi":
        return {"zero_below": 2.0 ** (k - 4), "one_from": 2.0 ** (k - 3),
                "one_to": 2.0 ** (k + 3), "zero_above": 2.0 ** (k + 4)}
    if kind == "zeta":
        return {"zero_below": 2.0 ** (k - k1 - 3), "one_from": 2.0 ** (k - k1 - 2),
                "one_to": 2.0 ** (k + k1 + 2), "zero_above": 2.0 ** (k + k1 + 3)}
    raise CutoffError(f"unknown kind {kind!r}")


# --- cone cutoffs -------------------------------------------------------------

@dataclass(frozen=True)
class ConeConstants:
    """Constants of the cone decomposition for ``N`` frequency variables."""

    N: int
    c1: float = field(init=False)
    c2: float = field(init=False)
    c3: float = field(init=False)
    k1: int = field(init=False)

    def __post_init__(self):
        N = self.N
        if int(N) != N or N < 2:
            raise CutoffError(f"cone decomposition needs N >= 2, got {N}")
        c1 = 2.0 ** 10 * (N - 1) / (1.0 + 2.0 ** 10 * (N - 1))
        c2 = 2.0 ** 12 * (N - 1) / (1.0 + 2.0 ** 12 * (N - 1))
        c3 = (1.0 - c2) / (2.0 * c1 * (N - 1))
        k1 = int(math.ceil(-math.log2(c1 * c3)))
        while 2.0 ** (-k1) > c1 * c3:
            k1 += 1
        while 2.0 ** (-(k1 - 1)) <= c1 * c3:
            k1 -= 1
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)
        object.__setattr__(self, "c3", c3)
        object.__setattr__(self, "k1", k1)

    @property
    def bracket(self) -> tuple:
        """Range of ``|xi_j| / |xi_k|`` on the support of ``Theta_{j,k}``."""
        s = math.sqrt(self.c1 * self.c3)
        return (s, 1.0 / s)

    def check(self) -> Dict[str, bool]:
        return {
            "0<c1<c2<1": 0 < self.c1 < self.c2 < 1,
            "1-c3*c1*(N-1)>c2": 1 - self.c3 * self.c1 * (self.N - 1) > self.c2,
            "2^-k1<=c1*c3": 2.0 ** (-self.k1) <= self.c1 * self.c3,
        }

    def to_dict(self) -> dict:
        return {"N": self.N, "c1": self.c1, "c2": self.c2, "c3": self.c3, "k1": self.k1}


def _lam(t, c: ConeConstants) -> np.ndarray:
    """1 for ``t <= c1``, 0 for ``t >= c2``."""
    return smooth_step((c.c2 - np.asarray(t, dtype=float)) / (c.c2 - c.c1))


def _split(Xi, N: int) -> np.ndarray:
    Xi = np.asarray(Xi, dtype=float)
    if Xi.ndim < 2 or Xi.shape[-2] != N:
        raise CutoffError(f"Xi must have shape (..., {N}, n), got {Xi.shape}")
    return Xi


def _sq_parts(Xi):
    sq = np.einsum("...i,...i->...", Xi, Xi)  # (..., N)
    tot = np.einsum("...i->...", sq)
    return sq, tot


def nu(Xi, c: ConeConstants) -> np.ndarray:
    """All ``nu_j(Xi)``, shape ``(..., N)``; ``Xi`` has shape ``(..., N, n)``."""
    Xi = _split(Xi, c.N)
    sq, tot = _sq_parts(Xi)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(tot[..., None] > 0, sq / np.where(tot > 0, tot, 1.0)[..., None], 0.0)
    return 1.0 - _lam(t, c)


def nu_tilde(Xi, c: ConeConstants) -> np.ndarray:
    Xi = _split(Xi, c.N)
    sq, tot = _sq_parts(Xi)
    denom = c.c3 * np.where(tot > 0, tot, 1.0)
    t = np.where(tot[..., None] > 0, sq / denom[..., None], 0.0)
    return 1.0 - _lam(t, c)


def theta_jk(Xi, c: ConeConstants) -> np.ndarray:
    """Pair weights ``Theta_{j,k}``, shape ``(..., N, N)`` with zero diagonal.

    Normalized over ordered off-diagonal pairs so that the weights sum to one
    wherever the remainder of the cone split is nonzero.
    """
    nt = nu_tilde(Xi, c)
    prod = nt[..., :, None] * nt[..., None, :]
    idx = np.arange(c.N)
    prod[..., idx, idx] = 0.0
    den = np.einsum("...ij->...", prod)
    safe = np.where(den > 0, den, 1.0)
    return np.where(den[..., None, None] > 0, prod / safe[..., None, None], 0.0)


def cone_family(consts: ConeConstants, which: str, indices, Xi) -> np.ndarray:
    """Evaluate ``nu_j``, ``nutilde_j`` or ``Theta_jk`` (indices are 1-based)."""
    idx = tuple(int(i) for i in np.atleast_1d(indices))
    for i in idx:
        if not 1 <= i <= consts.N:
            raise CutoffError(f"index {i} outside 1..{consts.N}")
    if which == "nu_j":
        if len(idx) != 1:
            raise CutoffError("nu_j takes one index")
        return nu(Xi, consts)[..., idx[0] - 1]
    if which == "nutilde_j":
        if len(idx) != 1:
            raise CutoffError("nutilde_j takes one index")
        return nu_tilde(Xi, consts)[..., idx[0] - 1]
    if which == "Theta_jk":
        if len(idx) != 2 or idx[0] == idx[1]:
            raise CutoffError("Theta_jk takes two distinct indices")
        return theta_jk(Xi, consts)[..., idx[0] - 1, idx[1] - 1]
    raise CutoffError(f"unknown cone family {which!r}")


# --- angular decomposition ------------------------------------------------------

@dataclass(frozen=True)
class AngularAtlas:
    """Directions ``xi_j^nu`` at scale ``j`` and the cones around them."""

    j: int
    n: int
    directions: np.ndarray
    A: float = 5.0

    @property
    def separation(self) -> float:
        return 2.0 ** (-self.j / 2.0)

    @property
    def aperture(self) -> float:
        return 2.0 * self.separation

    def __len__(self) -> int:
        return int(self.directions.shape[0])

    def to_json(self) -> str:
        return json.dumps({
            "j": self.j, "n": self.n, "A": self.A, "count": len(self),
            "separation": self.separation, "aperture": self.aperture,
            "normalized_count": len(self) / 2.0 ** (self.j * (self.n - 1) / 2.0),
            "directions": self.directions.tolist(),
        })


def _candidates(n: int, count: int) -> np.ndarray:
    if n == 2:
        ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    elif n == 3:
        i = np.arange(count) + 0.5
        golden = (1.0 + 5 ** 0.5) / 2.0
        z = 1.0 - 2.0 * i / count
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = 2.0 * np.pi * i / golden
        pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    else:
        from scipy.stats import norm, qmc
        u = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
        g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        pts = g / np.linalg.norm(g, axis=-1, keepdims=True)
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def _greedy(pts: np.ndarray, delta: float, chosen: Optional[np.ndarray] = None) -> np.ndarray:
    acc = [] if chosen is None else list(chosen)
    for p in pts:
        if acc:
            d = np.linalg.norm(np.asarray(acc) - p, axis=-1)
            if d.min() < delta:
                continue
        acc.append(p)
    return np.asarray(acc)


def _complete_circle(dirs: np.ndarray, delta: float) -> np.ndarray:
    # Insert midpoints of angular gaps wide enough to host a new direction,
    # which makes the packing maximal on the whole circle.
    ang = np.sort(np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * np.pi))
    changed = True
    while changed:
        changed = False
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        half_chord = 2.0 * np.sin(gaps / 4.0)
        i = int(np.argmax(half_chord))
        if half_chord[i] >= delta:
            ang = np.sort(np.mod(np.append(ang, ang[i] + gaps[i] / 2.0), 2 * np.pi))
            changed = True
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def sss_directions(j: int, n: int, A: float = 5.0) -> AngularAtlas:
    """Maximal ``2^{-j/2}``-separated set of unit vectors (deterministic)."""
    if n < 2:
        raise CutoffError("angular decomposition needs n >= 2")
    if int(j) != j or j < 0:
        raise CutoffError(f"j must be a non-negative integer, got {j}")
    delta = 2.0 ** (-j / 2.0)
    count = int(math.ceil(64 * 2.0 ** (j * (n - 1) / 2.0)))
    dirs = _greedy(_candidates(n, count), delta)
    if n == 2:
        dirs = _complete_circle(dirs, delta)
    else:
        dirs = _greedy(_candidates(n, 8 * count), delta, chosen=dirs)
    return AngularAtlas(int(j), int(n), dirs, float(A))


def sss_partition(atlas: AngularAtlas, xi) -> np.ndarray:
    """Weights ``chi_j^nu(xi)``, shape ``(..., len(atlas))``; homogeneous of degree 0."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise CutoffError("angular partition is undefined at xi = 0")
    omega = xi / r
    dist = np.linalg.norm(omega[..., None, :] - atlas.directions, axis=-1)
    t = dist / atlas.aperture
    u = smooth_step(2.0 * (1.0 - t))  # 1 for t <= 1/2, 0 for t >= 1
    return u / u.sum(axis=-1, keepdims=True)
