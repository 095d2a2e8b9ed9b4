"""
Discrete estimators for the function spaces used with Fourier integral
operators: Lebesgue norms, local Hardy norms in several equivalent forms,
bmo, Carleson measures supported on dyadic time slices, atoms, and the
pairing inequalities that tie them together.

Continuous suprema over ``0 < t < 1`` are taken over dyadic ``t = 2^{-k}``
down to the grid spacing, and cube suprema over grid-aligned dyadic cubes of
side ``L 2^{-q}``. Every estimator therefore agrees with its continuous
counterpart only up to constants; tests compare ratios against calibrated
constants (:func:`calibrate_constant`).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .cutoffs import PSI0, BumpProfile, lp_psi_radial
from .field import (Grid, Rep, SampledField, forward_ft_array, inverse_ft_array,
                    read_fiof_records, write_fiof_records)

__all__ = [
    "SpaceError",
    "NormReport",
    "CarlesonMeasure",
    "Atom",
    "lp_norm",
    "hp_norm",
    "xp_norm",
    "H1_global_norm",
    "bmo_norm",
    "bmo_global",
    "carleson_norm",
    "nontangential_max",
    "window_max",
    "hl_maximal",
    "apply_multiplier",
    "make_atom",
    "verify_atom",
    "peetre_check",
    "carleson_pairing",
    "carleson_pairing_h1",
    "quadratic_estimate",
    "convolved_measure",
    "square_measure",
    "h1_bmo_pairing",
    "truncated_log",
    "calibrate_constant",
    "HP_VARIANTS",
]

HP_VARIANTS = ("maximal", "square", "pelosoSecco", "nontangential", "riesz")


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class NormReport:
    name: str
    value: float
    variant: str
    grid: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _space(f: SampledField) -> np.ndarray:
    if f.rep != Rep.SPACE:
        raise SpaceError("expected a SPACE field")
    return f.values


def _cell(grid: Grid) -> float:
    return grid.spacing ** grid.n


# --- multipliers -----------------------------------------------------------------

def apply_multiplier(f: SampledField, mult) -> np.ndarray:
    """``m(D) f`` on the grid; ``mult`` is an array on the dual lattice or a callable of ``xi``."""
    grid = f.grid
    if callable(mult):
        xi = grid.dual_points().reshape(grid.shape + (grid.n,))
        mult = mult(xi)
    spec = forward_ft_array(grid, _space(f)) * np.asarray(mult)
    return inverse_ft_array(grid, spec)


def _dyadic_ts(grid: Grid) -> List[float]:
    """``t = 2^{-k}``, ``k >= 0``, with ``t`` above the grid spacing."""
    out, k = [], 0
    while 2.0 ** (-k) > grid.spacing:
        out.append(2.0 ** (-k))
        k += 1
    return out


def _lp_levels(grid: Grid) -> int:
    """Largest ``j`` with ``psi_j`` nonzero somewhere on the lattice."""
    rmax = float(grid.dual_norm().max())
    j = 0
    while 2.0 ** (j - 1) < rmax:
        j += 1
    return j


# --- norms -----------------------------------------------------------------------

def lp_norm(f: Union[SampledField, np.ndarray], p: float, grid: Optional[Grid] = None) -> float:
    """Riemann-sum ``L^p`` norm; ``p = inf`` is the max modulus."""
    if not p > 0:
        raise SpaceError(f"p must be positive, got {p}")
    if isinstance(f, SampledField):
        grid, vals = f.grid, _space(f)
    else:
        vals = np.asarray(f)
        if grid is None:
            raise SpaceError("grid required for raw arrays")
    a = np.abs(vals)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float((np.sum(a ** p) * _cell(grid)) ** (1.0 / p))


def _check_p(p: float, n: int):
    lo = n / (n + 1.0)
    if not (p > lo and p < math.inf):
        raise SpaceError(
            f"p = {p} outside (n/(n+1), inf) = ({lo:.4g}, inf): global h^p bounds for "
            "FIOs fail at and below n/(n+1) (see the sharpness experiment)")


def _maximal_slices(f: SampledField) -> List[Tuple[float, np.ndarray]]:
    grid = f.grid
    r = grid.dual_norm()
    spec = forward_ft_array(grid, _space(f))
    return [(t, np.abs(inverse_ft_array(grid, spec * PSI0(t * r)))) for t in _dyadic_ts(grid)]


def _footprint(grid: Grid, t: float) -> np.ndarray:
    """Lattice offsets ``y`` with ``|y| < t`` as a boolean footprint."""
    h = grid.spacing
    w = int(math.ceil(t / h))
    w = min(w, grid.M // 2)
    ax = h * np.arange(-w, w + 1)
    mesh = np.meshgrid(*([ax] * grid.n), indexing="ij")
    d2 = sum(m * m for m in mesh)
    fp = d2 < t * t - 1e-12
    fp[(w,) * grid.n] = True
    return fp


def window_max(grid: Grid, vals: np.ndarray, t: float) -> np.ndarray:
    """``sup_{|y - x| < t} |vals(y)|`` over lattice points (periodic)."""
    return ndimage.maximum_filter(np.abs(vals), footprint=_footprint(grid, t), mode="wrap")


def hp_norm(f: SampledField, p: float, variant: str = "maximal") -> NormReport:
    """Local Hardy norm estimate.

    ``maximal``: ``|| sup_t |psi_0(tD) f| ||_p``. ``square``: ``|| (sum_j |psi_j(D) f|^2)^{1/2} ||_p``.
    ``nontangential``: the maximal form with an extra sup over ``|x - y| < t``.
    ``pelosoSecco``: ``||psi_0(D) f||_p + sum_{M <= |alpha| <= M+1} sup_eps ||r_eps^alpha(D) f||_p``.
    ``riesz`` (``p = 1``): ``||f||_1 + sum_j ||R_j (1 - psi_0)(D) f||_1``.
    """
    grid = f.grid
    _check_p(p, grid.n)
    if variant not in HP_VARIANTS:
        raise SpaceError(f"unknown variant {variant!r}; expected one of {HP_VARIANTS}")
    meta = grid.to_dict()
    if not np.any(f.values):
        return NormReport("h^p", 0.0, variant, meta)
    if variant == "maximal":
        sup = np.max([s for _, s in _maximal_slices(f)], axis=0)
        val = lp_norm(sup, p, grid)
    elif variant == "nontangential":
        sup = np.max([window_max(grid, s, t) for t, s in _maximal_slices(f)], axis=0)
        val = lp_norm(sup, p, grid)
    elif variant == "square":
        r = grid.dual_norm()
        spec = forward_ft_array(grid, _space(f))
        sq = np.zeros(grid.shape)
        for j in range(_lp_levels(grid) + 1):
            sq += np.abs(inverse_ft_array(grid, spec * lp_psi_radial(j, r))) ** 2
        val = lp_norm(np.sqrt(sq), p, grid)
    elif variant == "pelosoSecco":
        val = _peloso_secco(f, p)
    else:
        if p != 1:
            raise SpaceError("the Riesz form is only defined for p = 1")
        val = _riesz_h1(f, local=True)
    return NormReport("h^p", float(val), variant, meta)


def _peloso_secco(f: SampledField, p: float) -> float:
    grid = f.grid
    n = grid.n
    M = int(math.floor(n * max(1.0 / p - 1.0, 0.0)))
    xi = grid.dual_points().reshape(grid.shape + (n,))
    r = grid.dual_norm()
    spec = forward_ft_array(grid, _space(f))
    val = lp_norm(inverse_ft_array(grid, spec * PSI0(r)), p, grid)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, xi / np.where(r > 0, r, 1.0)[..., None], 0.0)
    high = 1.0 - PSI0(r)
    for order in (M, M + 1):
        for alpha in _multi_indices(n, order):
            base = np.ones(grid.shape)
            for i, a in enumerate(alpha):
                base = base * (unit[..., i] * high) ** a
            best = 0.0
            for eps in _dyadic_ts(grid):
                g = inverse_ft_array(grid, spec * PSI0(eps * r) * base)
                best = max(best, lp_norm(g, p, grid))
            val += best
    return val


def _multi_indices(n: int, order: int):
    return [a for a in itertools.product(range(order + 1), repeat=n) if sum(a) == order]


def _riesz_h1(f: SampledField, local: bool) -> float:
    grid = f.grid
    xi = grid.dual_points().reshape(grid.shape + (grid.n,))
    r = grid.dual_norm()
    spec = forward_ft_array(grid, _space(f))
    if local:
        spec = spec * (1.0 - PSI0(r))
    val = lp_norm(f, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        for j in range(grid.n):
            m = np.where(r > 0, -1j * xi[..., j] / np.where(r > 0, r, 1.0), 0.0)
            val += lp_norm(inverse_ft_array(grid, spec * m), 1.0, grid)
    return val


def H1_global_norm(f: SampledField) -> float:
    """``||F||_1 + sum_j ||R_j F||_1`` (the Riesz characterization of ``H^1``)."""
    return _riesz_h1(f, local=False)


# --- bmo ---------------------------------------------------------------------------

def _block_view(vals: np.ndarray, n: int, b: int) -> np.ndarray:
    M = vals.shape[0]
    shp = []
    for _ in range(n):
        shp += [M // b, b]
    return vals.reshape(shp)


def _block_reduce(vals: np.ndarray, n: int, b: int, op=np.sum) -> np.ndarray:
    v = _block_view(vals, n, b)
    return op(v, axis=tuple(range(1, 2 * n, 2)))


def bmo_global(f: SampledField) -> float:
    """Sup of the mean oscillation over grid-aligned dyadic cubes with side in ``[h, L/4]``."""
    grid = f.grid
    vals = _space(f)
    best = 0.0
    b = 1
    while b <= grid.M // 4:
        v = _block_view(vals, grid.n, b)
        axes = tuple(range(1, 2 * grid.n, 2))
        mean = v.mean(axis=axes, keepdims=True)
        osc = np.abs(v - mean).mean(axis=axes)
        best = max(best, float(osc.max()))
        b *= 2
    return best


def bmo_norm(f: SampledField) -> float:
    """``BMO(f) + || psi_0(D) f ||_inf``."""
    low = apply_multiplier(f, PSI0(f.grid.dual_norm()))
    return bmo_global(f) + float(np.abs(low).max())


def xp_norm(f: SampledField, p: float) -> float:
    """``h^p`` for ``p <= 1``, ``L^p`` for ``1 < p < inf`` and bmo for ``p = inf``."""
    if math.isinf(p):
        return bmo_norm(f)
    if p <= 1:
        return hp_norm(f, p, "maximal").value
    return lp_norm(f, p)


def _offset_dist2(grid: Grid) -> np.ndarray:
    """Squared minimal-image distance from lattice index 0, for FFT convolutions."""
    h = grid.spacing * np.arange(grid.M)
    h = np.where(h >= grid.L / 2, h - grid.L, h)
    return sum(c * c for c in np.meshgrid(*([h] * grid.n), indexing="ij", sparse=True))


def _pconv(a: np.ndarray, kern: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.fft.fftn(a) * np.fft.fftn(kern)).real


# --- Carleson measures ---------------------------------------------------------------

@dataclass
class CarlesonMeasure:
    """``d mu = sum_k density_k(x) dx delta_{2^{-k}}(t)``."""

    grid: Grid
    slices: List[Tuple[int, np.ndarray]]

    def __post_init__(self):
        seen = set()
        clean = []
        for k, d in self.slices:
            k = int(k)
            if k in seen:
                raise SpaceError(f"duplicate slice k={k}")
            seen.add(k)
            d = np.asarray(d, dtype=float).reshape(self.grid.shape)
            if not np.all(np.isfinite(d)):
                raise SpaceError(f"slice k={k} has non-finite density")
            clean.append((k, d))
        clean.sort(key=lambda s: s[0])
        self.slices = clean

    @property
    def ks(self) -> List[int]:
        return [k for k, _ in self.slices]

    def total_mass(self) -> float:
        return float(sum(np.abs(d).sum() for _, d in self.slices) * _cell(self.grid))

    def scaled(self, c: float) -> "CarlesonMeasure":
        return CarlesonMeasure(self.grid, [(k, c * d) for k, d in self.slices])

    def write(self, path: Union[str, Path]) -> None:
        """One FIOF record per slice, in slice order; ``ks`` go to a JSON sidecar."""
        path = Path(path)
        write_fiof_records(path, [SampledField(self.grid, Rep.SPACE, d) for _, d in self.slices])
        path.with_suffix(path.suffix + ".json").write_text(json.dumps({"k": self.ks}))

    @classmethod
    def read(cls, path: Union[str, Path]) -> "CarlesonMeasure":
        path = Path(path)
        recs = read_fiof_records(path)
        ks = json.loads(path.with_suffix(path.suffix + ".json").read_text())["k"]
        if len(ks) != len(recs):
            raise SpaceError("slice index sidecar does not match the record count")
        return cls(recs[0].grid, [(k, r.values.real) for k, r in zip(ks, recs)])


def carleson_norm(mu: CarlesonMeasure) -> float:
    """``sup_Q |Q|^{-1} sum_{2^{-k} <= diam Q} int_Q |density_k|`` over grid-aligned dyadic cubes."""
    if not mu.slices:
        return 0.0
    grid = mu.grid
    n = grid.n
    best = 0.0
    b = grid.M
    while b >= 1:
        side = b * grid.spacing
        diam = side * math.sqrt(n)
        acc = None
        for k, d in mu.slices:
            if 2.0 ** (-k) <= diam * (1 + 1e-12):
                s = _block_reduce(np.abs(d), n, b)
                acc = s if acc is None else acc + s
        if acc is not None:
            best = max(best, float(acc.max()) * _cell(grid) / side ** n)
        b //= 2
    return best


def nontangential_max(grid: Grid, family: Sequence[Tuple[int, np.ndarray]]) -> SampledField:
    """``sup_k sup_{|y - x| < 2^{-k}} |F(y, 2^{-k})|`` on the lattice."""
    out = np.zeros(grid.shape)
    for k, F in family:
        out = np.maximum(out, window_max(grid, np.asarray(F).reshape(grid.shape), 2.0 ** (-k)))
    return SampledField(grid, Rep.SPACE, out)


def carleson_pairing(mu: CarlesonMeasure, family: Sequence[Tuple[int, np.ndarray]],
                     p: float = 1.0) -> Dict[str, float]:
    """Both sides of ``sum_k int |F_k|^p d mu_k <= C ||mu|| int (N F)^p``."""
    grid = mu.grid
    Fk = {int(k): np.asarray(F).reshape(grid.shape) for k, F in family}
    lhs = sum(float(np.sum(np.abs(Fk[k]) ** p * np.abs(d))) for k, d in mu.slices if k in Fk)
    lhs *= _cell(grid)
    nt = nontangential_max(grid, family).values.real
    rhs = carleson_norm(mu) * float(np.sum(nt ** p) * _cell(grid))
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}


_BUMP = BumpProfile(0.5, 1.0)


def carleson_pairing_h1(mu: CarlesonMeasure, f: SampledField,
                        bump: Callable = _BUMP) -> Dict[str, float]:
    """Both sides of ``sum_k int |phi(2^{-k} D) f| d mu_k <= C ||mu|| ||f||_{h^1}`` (``phi(0) = 1``)."""
    grid = f.grid
    r = grid.dual_norm()
    spec = forward_ft_array(grid, _space(f))
    lhs = 0.0
    for k, d in mu.slices:
        g = inverse_ft_array(grid, spec * bump(2.0 ** (-k) * r))
        lhs += float(np.sum(np.abs(g) * np.abs(d)))
    lhs *= _cell(grid)
    rhs = carleson_norm(mu) * hp_norm(f, 1.0, "maximal").value
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}


def _k_window(grid: Grid) -> range:
    kmin = int(math.floor(math.log2(grid.dual_spacing))) - 1
    kmax = int(math.ceil(math.log2(float(grid.dual_norm().max())))) + 1
    return range(kmin, kmax + 1)


def square_measure(f: SampledField, prof: Callable, ks: Optional[Sequence[int]] = None
                   ) -> CarlesonMeasure:
    """``d mu_k = |prof(2^{-k} D) f|^2 dx``."""
    grid = f.grid
    r = grid.dual_norm()
    spec = forward_ft_array(grid, _space(f))
    ks = _k_window(grid) if ks is None else ks
    return CarlesonMeasure(grid, [(k, np.abs(inverse_ft_array(grid, spec * prof(2.0 ** (-k) * r))) ** 2)
                                  for k in ks])


def quadratic_estimate(f: SampledField, prof: Optional[Callable] = None) -> Dict[str, float]:
    """``sum_k int |phi(2^{-k} D) f|^2`` against ``||f||_2^2`` for ``phi(0) = 0``."""
    if prof is None:
        prof = lambda r: lp_psi_radial(1, r)
    mu = square_measure(f, prof)
    total = mu.total_mass()
    l2 = lp_norm(f, 2.0) ** 2
    return {"mass": total, "l2_sq": l2, "ratio": total / l2 if l2 > 0 else 0.0}


def convolved_measure(mu: CarlesonMeasure, delta: float = 0.5) -> CarlesonMeasure:
    """Slices ``int |K_k(x - y)| d mu_k(y)`` with ``K_k(z) = 2^{kn} (1 + 2^k |z|)^{-n-delta}``.

    Convolutions are periodic on the grid.
    """
    grid = mu.grid
    n = grid.n
    dist = np.sqrt(_offset_dist2(grid))
    out = []
    for k, d in mu.slices:
        K = 2.0 ** (k * n) * (1.0 + 2.0 ** k * dist) ** (-n - delta)
        out.append((k, np.maximum(_pconv(np.abs(d), K) * _cell(grid), 0.0)))
    return CarlesonMeasure(grid, out)


def h1_bmo_pairing(F: SampledField, G: SampledField, v: Optional[Dict[int, np.ndarray]] = None,
                   psi: Optional[Callable] = None, phi: Optional[Callable] = None
                   ) -> Dict[str, float]:
    """Both sides of ``|sum_k int psi(2^{-k} D) F phi(2^{-k} D) G v_k| <= C ||F||_{H^1} ||G||_BMO ||v||_inf``."""
    grid = F.grid
    psi = psi or (lambda r: lp_psi_radial(1, r))
    phi = phi or (lambda r: r * r * np.exp(-r * r))
    r = grid.dual_norm()
    sF = forward_ft_array(grid, _space(F))
    sG = forward_ft_array(grid, _space(G))
    total = 0.0 + 0.0j
    vmax = 0.0
    for k in _k_window(grid):
        a = inverse_ft_array(grid, sF * psi(2.0 ** (-k) * r))
        b = inverse_ft_array(grid, sG * phi(2.0 ** (-k) * r))
        vk = np.ones(grid.shape) if v is None else np.asarray(v.get(k, 0.0))
        vmax = max(vmax, float(np.abs(vk).max()))
        total += np.sum(a * b * vk) * _cell(grid)
    rhs = H1_global_norm(F) * bmo_global(G) * vmax
    lhs = float(abs(total))
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}


# --- atoms ---------------------------------------------------------------------------

@dataclass
class Atom:
    grid: Grid
    x0: np.ndarray
    r: float
    p: float
    M: int
    values: np.ndarray

    def field(self) -> SampledField:
        return SampledField(self.grid, Rep.SPACE, self.values)


def _monomials(rel: np.ndarray, M: int, scale: float) -> np.ndarray:
    n = rel.shape[1]
    cols = []
    for order in range(M + 1):
        for alpha in _multi_indices(n, order):
            cols.append(np.prod((rel / scale) ** np.array(alpha), axis=1))
    return np.stack(cols, axis=1)


def _offsets(grid: Grid, x0: np.ndarray) -> np.ndarray:
    pts = grid.points()
    rel = pts - x0
    return np.mod(rel + grid.L / 2, grid.L) - grid.L / 2  # periodic offsets


def make_atom(grid: Grid, x0, r: float, p: float, M: Optional[int] = None,
              seed: int = 0) -> Atom:
    """Random ``(h^p, M)``-atom supported in ``B(x0, r)``.

    A random smooth profile under a bump is corrected by a bump-weighted
    polynomial so that all moments of order ``<= M`` vanish (only when
    ``r <= 1``), then scaled so that ``max |a| = |B(x0, r)|^{-1/p}``.
    """
    n = grid.n
    if M is None:
        M = int(math.floor(n * max(1.0 / p - 1.0, 0.0)))
    if r <= grid.spacing:
        raise SpaceError(f"radius {r} must exceed the grid spacing {grid.spacing}")
    if r > grid.L / 4:
        raise SpaceError("radius too large for the periodic box")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    rng = np.random.default_rng(seed)
    rel = _offsets(grid, x0)
    dist = np.linalg.norm(rel, axis=1)
    w = np.clip(1.0 - (dist / r) ** 2, 0.0, None) ** 2
    inside = w > 0
    # random low-order trigonometric profile
    waves = rng.standard_normal((6, n)) * (2.0 / r)
    amps = rng.standard_normal(6)
    phases = rng.uniform(0, 2 * np.pi, 6)
    g = np.sum(amps * np.cos(rel @ waves.T + phases), axis=1)
    vals = g * w
    if r <= 1:
        V = _monomials(rel[inside], M, r)
        if inside.sum() <= V.shape[1]:
            raise SpaceError("too few lattice points in the ball for the moment projection")
        # subtract w * (V c) with V^T (vals - w V c) = 0; a second pass cleans round-off
        A = V.T @ (V * w[inside, None])
        for _ in range(2):
            c = np.linalg.lstsq(A, V.T @ vals[inside], rcond=None)[0]
            vals[inside] -= w[inside] * (V @ c)
    peak = np.abs(vals).max()
    if peak == 0:
        raise SpaceError("degenerate atom profile")
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n
    vals = vals * (vol ** (-1.0 / p) / peak)
    return Atom(grid, x0, float(r), float(p), int(M), vals.reshape(grid.shape))


def verify_atom(a: Atom, tol: float = 1e-10) -> Dict[str, object]:
    """Support, size and moment conditions on the lattice."""
    grid, n = a.grid, a.grid.n
    rel = _offsets(grid, a.x0)
    dist = np.linalg.norm(rel, axis=1)
    v = a.values.ravel()
    support = bool(np.all(v[dist >= a.r] == 0))
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * a.r ** n
    bound = vol ** (-1.0 / a.p)
    size = bool(np.abs(v).max() <= bound * (1 + tol))
    attained = bool(abs(np.abs(v).max() - bound) <= tol * bound)
    worst = 0.0
    if a.r <= 1:
        V = _monomials(rel, a.M, a.r)
        scale = np.sum(np.abs(v)) + 1e-300
        worst = float(np.max(np.abs(V.T @ v)) / scale)
    moments = worst <= tol
    return {"ok": support and size and moments, "support": support, "size": size,
            "size_attained": attained, "moments": moments, "max_moment": worst}


# --- maximal functions -------------------------------------------------------------

def hl_maximal(grid: Grid, vals: np.ndarray, radii: Optional[Sequence[float]] = None) -> np.ndarray:
    """Centered Hardy-Littlewood maximal function over a geometric set of radii."""
    a = np.abs(np.asarray(vals)).reshape(grid.shape)
    if radii is None:
        radii = grid.spacing * 2.0 ** (np.arange(0, 2 * int(math.log2(grid.M)) - 1) / 2.0)
        radii = [t for t in radii if t <= grid.L / 4]
    out = a.copy()
    d2 = _offset_dist2(grid)
    for t in radii:
        ball = (d2 <= t * t).astype(float)
        out = np.maximum(out, _pconv(a, ball / ball.sum()))
    return out


def peetre_check(f: SampledField, rho: float, r: float, points: int = 1000,
                 seed: int = 0) -> Dict[str, float]:
    """Ratios ``(<.>^{-rho} * |f|)(x) / (M(|f|^r)(x))^{1/r}`` and the Peetre maximal ratio.

    Both are reported as maxima over the lattice (the latter over ``points``
    random lattice points).
    """
    grid = f.grid
    n = grid.n
    if not rho > n:
        raise SpaceError(f"need rho > n = {n}, got {rho}")
    if not (n / rho < r <= 1):
        raise SpaceError(f"need r in (n/rho, 1] = ({n / rho:.4g}, 1], got {r}")
    a = np.abs(_space(f))
    kern = (1.0 + _offset_dist2(grid)) ** (-rho / 2.0)
    conv = _pconv(a, kern) * _cell(grid)
    maxf = hl_maximal(grid, a ** r) ** (1.0 / r)
    ratio = float(np.max(conv / np.maximum(maxf, 1e-300)))
    # sup_y |f(x - y)| / <y>^rho at sampled x
    rng = np.random.default_rng(seed)
    flat = a.ravel()
    P = flat.size
    idx = rng.choice(P, size=min(points, P), replace=False)
    pts = grid.points()
    best = 0.0
    for i in idx:
        rel = pts - pts[i]
        rel = np.mod(rel + grid.L / 2, grid.L) - grid.L / 2
        w = (1.0 + np.sum(rel * rel, axis=1)) ** (rho / 2.0)
        s = float(np.max(flat / w))
        best = max(best, s / max(float(maxf.ravel()[i]), 1e-300))
    return {"convolution_ratio": ratio, "peetre_ratio": best}


# --- test functions and constants -----------------------------------------------------

def truncated_log(grid: Grid, R: Optional[float] = None, eps: Optional[float] = None) -> SampledField:
    """``log |x|`` regularized at ``eps`` and smoothly cut off beyond ``R``."""
    R = grid.L / 8 if R is None else R
    eps = grid.spacing / 2 if eps is None else eps
    r = np.sqrt(sum(c * c for c in grid.coords()))
    vals = 0.5 * np.log(r * r + eps * eps) * BumpProfile(R, 2 * R)(r)
    return SampledField(grid, Rep.SPACE, np.broadcast_to(vals, grid.shape))


def calibrate_constant(ratios: Sequence[float], factor: float = 2.0) -> float:
    """Frozen constant: ``factor`` times the largest ratio of a calibration family."""
    ratios = np.asarray(list(ratios), dtype=float)
    if ratios.size == 0 or not np.all(np.isfinite(ratios)):
        raise SpaceError("calibration family must be nonempty and finite")
    return float(factor * ratios.max())
