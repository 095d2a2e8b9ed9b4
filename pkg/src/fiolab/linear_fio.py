"""
Linear Fourier integral operators ``T_a^phi f(x) = int a(x, xi) exp(i x.xi + i phi(xi)) f_hat(xi) dxi``
on sampled fields, together with the kernel-level diagnostics used to check
the linear theory: low-frequency kernel decay, second dyadic (angular) kernel
pieces, the distance function ``H`` of a phase and the smoothing operators
``R_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .cutoffs import CHI_SPLIT, AngularAtlas, lp_psi_radial, smooth_step, squared_family_radial
from .field import Grid, Rep, SampledField, forward_ft, forward_ft_array, inverse_ft, inverse_ft_array
from .sharpness import _GL_ORDER, _panels, hankel

__all__ = [
    "Phase",
    "LinearAmplitude",
    "SeminormReport",
    "FIOError",
    "half_wave",
    "linear_phase",
    "zero_phase",
    "check_homogeneity",
    "symbol_check",
    "seminorms",
    "apply_fio",
    "split_low_high",
    "low_freq_kernel",
    "sss_kernel",
    "sss_kernel_profile",
    "sss_full_kernel",
    "rs_H",
    "delta_region",
    "rk_multiplier",
    "rk_apply",
]

_TWO_PI = 2.0 * np.pi


class FIOError(ValueError):
    pass


# --- phases and amplitudes ------------------------------------------------------

@dataclass(frozen=True)
class Phase:
    """Real phase ``phi(xi)`` with gradient; ``phi(0) = 0`` by convention.

    ``func`` and ``grad`` take ``xi`` of shape ``(..., n)`` and return shapes
    ``(...)`` and ``(..., n)``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    homogeneous: bool = True
    name: str = "custom"
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None  # phi as a function of |xi|

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.asarray(self.func(xi), dtype=float)
        zero = np.all(xi == 0, axis=-1)
        return np.where(zero, 0.0, out) if np.any(zero) else out

    def gradient(self, xi) -> np.ndarray:
        return np.asarray(self.grad(np.asarray(xi, dtype=float)), dtype=float)

    def negated(self) -> "Phase":
        f, g = self.func, self.grad
        rad = None if self.radial is None else (lambda r, h=self.radial: -h(r))
        return Phase(lambda xi: -f(xi), lambda xi: -g(xi), self.homogeneous,
                     f"-{self.name}", rad)


def _safe_unit(xi: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(xi, axis=-1, keepdims=True)
    return xi / np.where(r > 0, r, 1.0)


def half_wave() -> Phase:
    """``phi(xi) = |xi|``."""
    return Phase(lambda xi: np.linalg.norm(xi, axis=-1), _safe_unit, True, "half_wave",
                 radial=lambda r: np.asarray(r, dtype=float))


def linear_phase(e) -> Phase:
    """``phi(xi) = e.xi``."""
    e = np.asarray(e, dtype=float)
    return Phase(lambda xi: xi @ e, lambda xi: np.broadcast_to(e, np.shape(xi)).copy(),
                 True, f"linear{tuple(e.tolist())}")


def zero_phase() -> Phase:
    return Phase(lambda xi: np.zeros(np.shape(xi)[:-1]), lambda xi: np.zeros(np.shape(xi)),
                 True, "zero", radial=lambda r: np.zeros_like(np.asarray(r, dtype=float)))


def check_homogeneity(phase: Phase, n: int, rng: Optional[np.random.Generator] = None,
                      count: int = 1000) -> float:
    """Max of ``|phi(t xi) - t phi(xi)|`` over random ``t > 0`` and ``xi``."""
    rng = rng or np.random.default_rng(0)
    xi = rng.standard_normal((count, n)) * 10.0 ** rng.uniform(-2, 2, (count, 1))
    t = 10.0 ** rng.uniform(-2, 2, count)
    lhs = phase(t[:, None] * xi)
    rhs = t * phase(xi)
    scale = np.maximum(1.0, np.abs(rhs))
    return float(np.max(np.abs(lhs - rhs) / scale))


@dataclass(frozen=True)
class LinearAmplitude:
    """Amplitude ``a(x, xi)`` (or ``a(xi)`` when ``x_independent``) of order ``m``."""

    func: Callable
    m: float
    x_independent: bool = True
    name: str = "custom"
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None  # a as a function of |xi|
    support: Optional[float] = None  # a vanishes for |xi| >= support

    def __call__(self, x, xi) -> np.ndarray:
        if self.x_independent:
            return np.asarray(self.func(np.asarray(xi, dtype=float)))
        return np.asarray(self.func(np.asarray(x, dtype=float), np.asarray(xi, dtype=float)))

    @classmethod
    def japanese(cls, m: float) -> "LinearAmplitude":
        """``<xi>^m``."""
        def rad(r):
            return (1.0 + np.asarray(r, dtype=float) ** 2) ** (m / 2.0)
        return cls(lambda xi: rad(np.linalg.norm(xi, axis=-1)), m, True, f"<xi>^{m}", rad)

    @classmethod
    def constant(cls, c: complex = 1.0) -> "LinearAmplitude":
        return cls(lambda xi: np.full(np.shape(xi)[:-1], c, dtype=complex), 0.0, True, "const",
                   lambda r: np.full(np.shape(r), c, dtype=complex))


@dataclass
class SeminormReport:
    """Seminorm sums of an amplitude (``M_sum``) and a phase (``N_sum``)."""

    M_sum: float
    N_sum: float
    orders: Tuple[int, ...]
    label: str = "finite differences, orders <= 2"

    def to_dict(self) -> dict:
        return {"M": self.M_sum, "N": self.N_sum, "orders": list(self.orders), "label": self.label}


def _multi_indices(n: int, order: int) -> List[Tuple[int, ...]]:
    out = []
    def rec(prefix, left, dims):
        if dims == 1:
            out.append(tuple(prefix + [left]))
            return
        for a in range(left + 1):
            rec(prefix + [a], left - a, dims - 1)
    rec([], order, n)
    return out


def _fd_derivative(func: Callable, xi: np.ndarray, alpha: Sequence[int], h: float) -> np.ndarray:
    # Central differences, applied axis by axis.
    def apply(fn, axis, k):
        if k == 0:
            return fn
        e = np.zeros(xi.shape[-1])
        e[axis] = h
        if k == 1:
            return lambda z: (fn(z + e) - fn(z - e)) / (2 * h)
        return lambda z: (fn(z + e) - 2 * fn(z) + fn(z - e)) / (h * h)
    fn = func
    for axis, k in enumerate(alpha):
        fn = apply(fn, axis, k)
    return np.asarray(fn(xi))


def _mesh(n: int, r_min: float, r_max: float, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    r = np.exp(rng.uniform(math.log(r_min), math.log(r_max), count))
    return g * r[:, None]


def symbol_check(func: Callable, m: float, n: int, r_min: float = 0.5, r_max: float = 1e3,
                 count: int = 2000, order: int = 2, homogeneous_shift: float = 0.0) -> Dict[int, float]:
    """``sup |D^alpha a| <xi>^{|alpha| - m}`` per order on a random mesh.

    ``homogeneous_shift`` replaces ``|alpha| - m`` by ``|alpha| - m - shift``
    (used for phases, which are of order one).
    """
    xi = _mesh(n, r_min, r_max, count)
    jap = np.sqrt(1.0 + np.sum(xi * xi, axis=-1))
    out = {}
    for k in range(order + 1):
        best = 0.0
        for alpha in _multi_indices(n, k):
            # step relative to |xi|, bucketed so each call uses one scalar step
            logh = np.round(np.log10(1e-3 * np.maximum(1.0, np.linalg.norm(xi, axis=-1))), 1)
            vals = np.empty(xi.shape[0], dtype=complex)
            for s in np.unique(logh):
                sel = logh == s
                vals[sel] = _fd_derivative(func, xi[sel], alpha, float(10 ** s))
            best = max(best, float(np.max(np.abs(vals) * jap ** (k - m - homogeneous_shift))))
        out[k] = best
    return out


def seminorms(a: LinearAmplitude, phase: Phase, n: int, r_min: float = 0.5,
              r_max: float = 1e3) -> SeminormReport:
    """Finite-difference seminorm sums up to order 2 (amplitude) and 1..2 (phase).

    The phase sum is ``sum_{1 <= |gamma| <= 2} sup |D^gamma phi| <xi>^{|gamma| - 1}``
    over ``r_min <= |xi| <= r_max``.
    """
    fa = (lambda z: a(np.zeros_like(z), z))
    amp = symbol_check(fa, a.m, n, r_min, r_max)
    ph = symbol_check(lambda z: phase(z), 1.0, n, r_min, r_max)
    return SeminormReport(float(sum(amp.values())), float(ph[1] + ph[2]), (0, 1, 2))


# --- evaluation -----------------------------------------------------------------

def _amplitude_on_lattice(a: LinearAmplitude, grid: Grid) -> np.ndarray:
    xi = grid.dual_points().reshape(grid.shape + (grid.n,))
    vals = np.asarray(a(None, xi), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise FIOError("amplitude is not finite on the dual lattice")
    return np.broadcast_to(vals, grid.shape)


def _phase_on_lattice(phase: Phase, grid: Grid) -> np.ndarray:
    xi = grid.dual_points().reshape(grid.shape + (grid.n,))
    return phase(xi)


def oscillation_guard(x_points: np.ndarray, grid: Grid, override: bool = False) -> float:
    """``max|x| * dual spacing``; raises when above ``pi/4`` unless overridden."""
    val = float(np.max(np.abs(x_points))) * grid.dual_spacing if x_points.size else 0.0
    if val > np.pi / 4 and not override:
        raise FIOError(
            f"oscillation guard: max|x| * dxi = {val:.3g} > pi/4; "
            "raise M or L, or shrink the |x| range")
    return val


def _direct(a: LinearAmplitude, phase: Phase, f_hat: np.ndarray, grid: Grid,
            x_points: np.ndarray, chunk: int = 256) -> np.ndarray:
    xi = grid.dual_points()
    g = f_hat.ravel() * np.exp(1j * phase(xi)) * (grid.dual_spacing / _TWO_PI) ** grid.n
    out = np.empty(x_points.shape[0], dtype=complex)
    for i in range(0, x_points.shape[0], chunk):
        x = x_points[i:i + chunk]
        E = np.exp(1j * (x @ xi.T))
        if a.x_independent:
            A = np.asarray(a(None, xi), dtype=complex)[None, :]
        else:
            A = np.asarray(a(x[:, None, :], xi[None, :, :]), dtype=complex)
        if not np.all(np.isfinite(A)):
            raise FIOError("amplitude is not finite on the dual lattice")
        out[i:i + chunk] = (A * E) @ g
    return out


def apply_fio(a: LinearAmplitude, phase: Phase, f: SampledField, method: str = "auto",
              x_points: Optional[np.ndarray] = None, guard_override: bool = False):
    """Evaluate ``T_a^phi f``.

    ``method='multiplier'`` (x-independent ``a`` only) works on the FFT lattice;
    ``method='direct'`` sums the quadrature per output point. With ``x_points``
    the result is an array at those points (direct quadrature, guarded);
    otherwise a SPACE field on ``f.grid``.
    """
    if f.rep != Rep.SPACE:
        raise FIOError("apply_fio expects a SPACE field")
    grid = f.grid
    if method == "auto":
        method = "multiplier" if (a.x_independent and x_points is None) else "direct"
    if method == "multiplier":
        if not a.x_independent:
            raise FIOError("multiplier path needs an x-independent amplitude")
        if x_points is not None:
            raise FIOError("multiplier path evaluates on the grid only")
        mult = _amplitude_on_lattice(a, grid) * np.exp(1j * _phase_on_lattice(phase, grid))
        return inverse_ft(forward_ft(f).with_values(mult * forward_ft(f).values))
    if method != "direct":
        raise FIOError(f"unknown method {method!r}")
    f_hat = forward_ft_array(grid, f.values)
    if x_points is None:
        # On the grid the periodic quadrature is exact, so no guard applies.
        vals = _direct(a, phase, f_hat, grid, grid.points())
        return SampledField(grid, Rep.SPACE, vals.reshape(grid.shape))
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    oscillation_guard(x_points, grid, guard_override)
    return _direct(a, phase, f_hat, grid, x_points)


def split_low_high(a: LinearAmplitude) -> Tuple[LinearAmplitude, LinearAmplitude]:
    """``sigma_1 = chi a`` and ``sigma_2 = a - sigma_1`` with ``chi`` = 1 on ``B(0,1/2)``, 0 off ``B(0,1)``."""
    def chi(xi):
        return CHI_SPLIT(np.linalg.norm(xi, axis=-1))

    if a.x_independent:
        f1 = lambda xi: chi(xi) * a.func(xi)
        f2 = lambda xi: a.func(xi) - chi(xi) * a.func(xi)
    else:
        f1 = lambda x, xi: chi(xi) * a.func(x, xi)
        f2 = lambda x, xi: a.func(x, xi) - chi(xi) * a.func(x, xi)
    r1 = r2 = None
    if a.radial is not None:
        r1 = lambda r: CHI_SPLIT(r) * a.radial(r)
        r2 = lambda r: a.radial(r) - CHI_SPLIT(r) * a.radial(r)
    low = LinearAmplitude(f1, a.m, a.x_independent, f"low({a.name})", r1, CHI_SPLIT.r_out)
    high = LinearAmplitude(f2, a.m, a.x_independent, f"high({a.name})", r2, None)
    return low, high


# --- low-frequency kernel -------------------------------------------------------

def _kernel_radial(a: LinearAmplitude, phase: Phase, n: int, r: np.ndarray,
                   refine: int) -> np.ndarray:
    def f0(s):
        return a.radial(s) * np.exp(1j * phase.radial(s))
    return hankel(f0, n, r, a.support, breaks=(CHI_SPLIT.r_in,), refine=refine)


def _kernel_direct(a: LinearAmplitude, phase: Phase, n: int, x: np.ndarray, refine: int,
                   max_nodes: int) -> np.ndarray:
    R = a.support
    xmax = float(np.max(np.linalg.norm(x, axis=-1))) if x.size else 0.0
    width = min(0.05, np.pi / (4.0 * max(xmax, 1e-9)) * _GL_ORDER / 2.0) / refine
    s, w = _panels(-R, R, width)
    if s.size ** n > max_nodes:
        raise FIOError(
            f"quadrature resolution insufficient: {s.size}^{n} nodes needed for |x| <= {xmax:g}")
    mesh = np.meshgrid(*([s] * n), indexing="ij")
    xi = np.stack([m.ravel() for m in mesh], axis=-1)
    wt = np.ones(1)
    for _ in range(n):
        wt = np.multiply.outer(wt, w).ravel() if wt.size > 1 else w.copy()
    g = np.asarray(a(None, xi), dtype=complex) * np.exp(1j * phase(xi)) * wt
    out = np.empty(x.shape[0], dtype=complex)
    chunk = max(1, int(2e7 // xi.shape[0]))
    for i in range(0, x.shape[0], chunk):
        out[i:i + chunk] = np.exp(-1j * (x[i:i + chunk] @ xi.T)) @ g
    return out


def low_freq_kernel(a: LinearAmplitude, phase: Phase, n: int, x_range: Tuple[float, float] = (0.0, 1e3),
                    eps: float = 0.9, count: int = 400, refine: int = 1,
                    direction=None, max_nodes: int = 4_000_000) -> Dict[str, object]:
    """Decay report for ``K(x) = int exp(i phi(xi) - i x.xi) a(xi) dxi``.

    Radial amplitude and phase use the Bessel reduction; otherwise a tensor
    Gauss rule over the support box. Values are normalized by ``sup|a|``.
    Returns the sampled ``|x|``, ``|K|``, the weighted sup of
    ``|K(x)| <x>^{n+eps}`` and the log-log slope over the upper half of the range.
    """
    if a.support is None:
        raise FIOError("low-frequency kernel needs a compactly supported amplitude")
    lo, hi = x_range
    r = np.concatenate([np.linspace(lo, min(hi, 10.0), count // 2, endpoint=False),
                        np.geomspace(max(lo, 10.0), hi, count - count // 2)])
    if a.radial is not None and phase.radial is not None:
        K = _kernel_radial(a, phase, n, r, refine)
        probe = np.linspace(0.0, a.support, 2001)
        amp_sup = float(np.max(np.abs(a.radial(probe))))
    else:
        e = np.zeros(n)
        e[0] = 1.0
        if direction is not None:
            e = np.asarray(direction, dtype=float)
            e = e / np.linalg.norm(e)
        K = _kernel_direct(a, phase, n, r[:, None] * e, refine, max_nodes)
        probe = _mesh(n, 1e-3, a.support, 4000)
        amp_sup = float(np.max(np.abs(a(None, probe))))
    K = K / (amp_sup if amp_sup > 0 else 1.0)
    absK = np.abs(K)
    weight = (1.0 + r * r) ** ((n + eps) / 2.0)
    weighted = absK * weight
    tail = r >= np.sqrt(max(lo, 10.0) * hi)
    slope = float(np.polyfit(np.log(r[tail]), np.log(np.maximum(absK[tail], 1e-300)), 1)[0])
    bound = float(weighted.max()) / weight
    return {"x": r, "absK": absK, "bound": bound, "weighted_sup": float(weighted.max()),
            "argmax": float(r[int(np.argmax(weighted))]), "slope": slope, "n": n, "eps": eps}


# --- second dyadic kernel pieces -----------------------------------------------------

def _radial_nodes(j: int, refine: int) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
    return _panels(lo, hi, (hi - lo) / (24.0 * refine), breaks=(2.0 ** j,))


def _sector_nodes(atlas: AngularAtlas, nu: int, refine: int) -> Tuple[np.ndarray, np.ndarray]:
    d = atlas.directions[nu]
    th0 = math.atan2(d[1], d[0])
    half = 2.0 * math.asin(min(1.0, atlas.aperture / 2.0))
    t, w = _panels(-half, half, half / (8.0 * refine))
    return th0 + t, w


def _sector_weights(atlas: AngularAtlas, nu: int, theta: np.ndarray) -> np.ndarray:
    from .cutoffs import sss_partition
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return sss_partition(atlas, pts)[:, nu]


def _sss_setup(j: int, nu: int, atlas: AngularAtlas, a: LinearAmplitude, phase: Phase,
               refine: int):
    if atlas.n != 2:
        raise FIOError("angular kernel pieces are implemented for n = 2")
    if j < 2:
        raise FIOError("angular kernel pieces need j >= 2")
    rho, wr = _radial_nodes(j, refine)
    th, wt = _sector_nodes(atlas, nu, refine)
    chi = _sector_weights(atlas, nu, th)
    xi = rho[:, None, None] * np.stack([np.cos(th), np.sin(th)], axis=-1)[None, :, :]
    amp = np.asarray(a(None, xi), dtype=complex) * lp_psi_radial(j, rho)[:, None]
    W = amp * chi[None, :] * np.exp(1j * phase(xi)) * (rho * wr)[:, None] * wt[None, :]
    return rho, th, xi, W / _TWO_PI ** 2


def sss_kernel(j: int, nu: int, atlas: AngularAtlas, a: LinearAmplitude, phase: Phase,
               z, refine: int = 1) -> np.ndarray:
    """``K_j^nu(z) = int a chi_j^nu psi_j exp(i z.xi + i phi) dxi`` at points ``z`` (n = 2)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    _, _, xi, W = _sss_setup(j, nu, atlas, a, phase, refine)
    pts = xi.reshape(-1, 2)
    return np.exp(1j * (z @ pts.T)) @ W.ravel()


def sss_full_kernel(j: int, a: LinearAmplitude, phase: Phase, z, n_theta: int = 512,
                    refine: int = 1) -> np.ndarray:
    """The ``psi_j``-localized kernel over the full circle (periodic trapezoid rule in angle)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    rho, wr = _radial_nodes(j, refine)
    th = _TWO_PI * np.arange(n_theta) / n_theta
    xi = rho[:, None, None] * np.stack([np.cos(th), np.sin(th)], axis=-1)[None, :, :]
    amp = np.asarray(a(None, xi), dtype=complex) * lp_psi_radial(j, rho)[:, None]
    W = amp * np.exp(1j * phase(xi)) * (rho * wr)[:, None] * (_TWO_PI / n_theta)
    return np.exp(1j * (z @ xi.reshape(-1, 2).T)) @ (W.ravel() / _TWO_PI ** 2)


def sss_kernel_profile(j: int, nu: int, atlas: AngularAtlas, a: LinearAmplitude, phase: Phase,
                       count: int = 161, span: float = 8.0, refine: int = 1) -> Dict[str, object]:
    """Sample ``|K_j^nu|`` on a box around ``-grad phi(xi_nu)`` aligned with ``xi_nu``.

    The box has half-widths ``span * 2^-j`` along ``xi_nu`` and ``span * 2^{-j/2}``
    across it. The phase factor separates into the two box coordinates, so the
    whole box is one matrix product. Reports the peak and the half-maximum
    widths along each axis through the peak.
    """
    rho, th, xi, W = _sss_setup(j, nu, atlas, a, phase, refine)
    d = atlas.directions[nu]
    perp = np.array([-d[1], d[0]])
    center = -phase.gradient(d[None, :])[0]
    s = span * 2.0 ** (-j) * np.linspace(-1.0, 1.0, count)
    t = span * 2.0 ** (-j / 2.0) * np.linspace(-1.0, 1.0, count)
    pts = xi.reshape(-1, 2)
    c0 = pts @ center
    A = np.exp(1j * (np.outer(s, pts @ d) + c0[None, :]))  # along
    B = np.exp(1j * np.outer(t, pts @ perp))                # across
    K = (A * W.ravel()[None, :]) @ B.T
    mag = np.abs(K)
    i, k = np.unravel_index(int(np.argmax(mag)), mag.shape)
    peak = float(mag[i, k])

    def width(line, step):
        half = peak / 2.0
        above = np.nonzero(line >= half)[0]
        if above.size == 0:
            return 0.0
        lo, hi = above.min(), above.max()
        # linear interpolation of the crossings
        def cross(a_idx, b_idx):
            ya, yb = line[a_idx], line[b_idx]
            return a_idx + (half - ya) / (yb - ya) * (b_idx - a_idx) if yb != ya else a_idx
        left = cross(lo - 1, lo) if lo > 0 else 0.0
        right = cross(hi, hi + 1) if hi < line.size - 1 else float(line.size - 1)
        return float((right - left) * step)

    w_along = width(mag[:, k], s[1] - s[0])
    w_across = width(mag[i, :], t[1] - t[0])
    return {"j": j, "nu": nu, "peak": peak, "peak_at": (center + s[i] * d + t[k] * perp).tolist(),
            "center": center.tolist(), "width_along": w_along, "width_across": w_across,
            "anisotropy": w_across / w_along if w_along > 0 else math.inf,
            "predicted_peak": 2.0 ** (j * (a.m + 1.5)), "predicted_anisotropy": 2.0 ** (j / 2.0)}


# --- the distance function H ----------------------------------------------------

def _sphere_mesh(n: int, count: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = _TWO_PI * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    from .cutoffs import _candidates
    return _candidates(n, count)


def _angles_to_unit(ang: np.ndarray) -> np.ndarray:
    # hyperspherical coordinates
    n = ang.size + 1
    out = np.ones(n)
    for i, a in enumerate(ang):
        out[i] *= math.cos(a)
        out[i + 1:] *= math.sin(a)
    return out


def _unit_to_angles(u: np.ndarray) -> np.ndarray:
    n = u.size
    ang = np.empty(n - 1)
    for i in range(n - 1):
        ang[i] = math.atan2(np.linalg.norm(u[i + 1:]), u[i])
    if n >= 2 and u[-1] < 0:
        ang[-1] = _TWO_PI - ang[-1]
    return ang


def rs_H(phase: Phase, z, mesh: int = 4096, candidates: int = 3) -> np.ndarray:
    """``H(z) = inf_xi |z + grad phi(xi)|`` over the unit sphere, mesh plus local refinement."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = z.shape[-1]
    omega = _sphere_mesh(n, mesh)
    G = phase.gradient(omega)
    dist = np.linalg.norm(z[:, None, :] + G[None, :, :], axis=-1)
    out = dist.min(axis=1)
    if n == 1:
        return out
    step = _TWO_PI / mesh if n == 2 else 4.0 / math.sqrt(mesh)
    for p in range(z.shape[0]):
        best = out[p]
        for c in np.argsort(dist[p])[:candidates]:
            if n == 2:
                th0 = math.atan2(omega[c, 1], omega[c, 0])
                fun = lambda th: float(np.linalg.norm(
                    z[p] + phase.gradient(np.array([math.cos(th), math.sin(th)]))))
                res = minimize_scalar(fun, bounds=(th0 - step, th0 + step), method="bounded",
                                      options={"xatol": 1e-12})
                best = min(best, float(res.fun))
            else:
                fun = lambda ang: float(np.linalg.norm(z[p] + phase.gradient(_angles_to_unit(ang))))
                res = minimize(fun, _unit_to_angles(omega[c]), method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-12})
                best = min(best, float(res.fun))
        out[p] = best
    return out


def delta_region(phase: Phase, r: float, z, **kw) -> np.ndarray:
    """``z`` in ``Delta_r = {H >= r}``."""
    return rs_H(phase, z, **kw) >= r


# --- smoothing operators R_k -----------------------------------------------------

def _q(j: int, r: np.ndarray) -> np.ndarray:
    return squared_family_radial("theta", j, r) - squared_family_radial("theta", j - 1, r)


def rk_multiplier(k: int, m: float, r, k0: int = 1) -> np.ndarray:
    """Symbol of ``R_k = sum_{j=k0}^k Q_j 2^{(k-j) m}`` with ``Q_j = theta_j - theta_{j-1}``."""
    if m >= 0:
        raise FIOError(f"R_k needs m < 0, got {m}")
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for j in range(k0, k + 1):
        out = out + _q(j, r) * 2.0 ** ((k - j) * m)
    return out


def rk_apply(k: int, m: float, f: SampledField, k0: int = 1) -> SampledField:
    """Apply ``R_k`` as a Fourier multiplier."""
    if f.rep != Rep.SPACE:
        raise FIOError("rk_apply expects a SPACE field")
    grid = f.grid
    mult = rk_multiplier(k, m, grid.dual_norm(), k0)
    return SampledField(grid, Rep.SPACE, inverse_ft_array(grid, mult * forward_ft_array(grid, f.values)))
