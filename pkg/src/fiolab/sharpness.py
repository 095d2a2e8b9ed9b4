"""
The sharpness counterexample for linear FIOs below ``p = n/(n+1)``.

A radial Schwartz function ``f`` with ``f_hat = 1`` near the origin is pushed
through the half-wave operator ``T f(x) = int f_hat(xi) exp(i x.xi + i|xi|) dxi``;
the result decays exactly like ``|x|^{-(n+1)}`` with coefficient
``Gamma((n+1)/2) f_hat(0) / (pi^{(n+1)/2} i)``.

Everything here uses direct quadrature over the compact spectrum (never an
FFT), so large-``|x|`` values carry no periodization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma, jv

from .cutoffs import BumpProfile, smooth_step

__all__ = [
    "RadialProfile",
    "build_counterexample",
    "evaluate_T",
    "tail_fit",
    "radial_ft",
    "hankel",
    "g_profiles",
    "h_profiles",
    "h3_closed_form",
    "h3_numeric",
    "lp_truncated_growth",
    "leading_coefficient",
    "SharpnessError",
]

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


class SharpnessError(ValueError):
    pass


@dataclass
class RadialProfile:
    """Radial function ``f_0(r)``; exact callable plus optional samples."""

    func: Callable[[np.ndarray], np.ndarray]
    support: Optional[float] = None  # f_0 vanishes for r >= support
    breakpoints: Tuple[float, ...] = ()
    r: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    interp: str = "exact"

    def __call__(self, r) -> np.ndarray:
        return self.func(np.asarray(r, dtype=float))

    def sampled(self, r) -> "RadialProfile":
        r = np.asarray(r, dtype=float)
        return RadialProfile(self.func, self.support, self.breakpoints, r, self(r), self.interp)


def build_counterexample(n: int) -> Tuple[RadialProfile, complex]:
    """Spectrum ``g_0``: 1 for ``|xi| <= 1/2``, 0 for ``|xi| >= 2``; returns ``f_hat(0)``."""
    if n < 1:
        raise SharpnessError("n must be >= 1")
    bump = BumpProfile(0.5, 2.0)
    prof = RadialProfile(lambda r: bump(r), support=2.0, breakpoints=(0.5, 2.0))
    return prof, complex(prof(0.0))


def leading_coefficient(n: int, fhat0: complex = 1.0) -> complex:
    """``Gamma((n+1)/2) f_hat(0) / (pi^{(n+1)/2} i)``."""
    return gamma((n + 1) / 2.0) * fhat0 / (np.pi ** ((n + 1) / 2.0) * 1j)


def _panels(a: float, b: float, width: float, breaks: Sequence[float] = (),
            grade_left: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [a, b]."""
    edges = sorted({a, b, *[x for x in breaks if a < x < b]})
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((hi - lo) / width)))
        cuts = np.linspace(lo, hi, m + 1)
        if grade_left and lo == a:
            # geometric refinement toward the left end for weak singularities
            first = cuts[1]
            geo = a + (first - a) * 2.0 ** (-np.arange(grade_left, 0, -1, dtype=float))
            cuts = np.concatenate([[a], geo, cuts[1:]])
        for p, q in zip(cuts[:-1], cuts[1:]):
            xs.append(0.5 * (q - p) * _GL_X + 0.5 * (q + p))
            ws.append(0.5 * (q - p) * _GL_W)
    return np.concatenate(xs), np.concatenate(ws)


def _width_for(rmax: float, base: float = 0.05) -> float:
    # Panel width keeps at least 8 nodes per oscillation of exp(i r s):
    # 16 Gauss nodes per panel and at most half a period per panel.
    if rmax <= 0:
        return base
    return min(base, np.pi / (4.0 * rmax) * _GL_ORDER / 2.0)


def hankel(f0: Callable, d: int, r, s_max: float, breaks: Sequence[float] = (),
           refine: int = 1, grade_left: int = 30,
           damping: Optional[Callable] = None) -> np.ndarray:
    """Radial Fourier transform in dimension ``d`` of ``f_0`` supported in ``[0, s_max]``.

    ``F_d(f_0)(r) = (2 pi)^{d/2} r^{1-d/2} int_0^inf f_0(s) J_{d/2-1}(r s) s^{d/2} ds``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    nu = d / 2.0 - 1.0
    width = _width_for(float(r.max()) if r.size else 0.0) / refine
    s, w = _panels(0.0, s_max, width, breaks, grade_left=grade_left)
    fs = f0(s)
    if damping is not None:
        fs = fs * damping(s)
    out = np.empty(r.shape, dtype=complex)
    chunk = max(1, int(4e6 // max(s.size, 1)))
    for i in range(0, r.size, chunk):
        rr = r[i:i + chunk, None]
        # r = 0 rows are filled in from the limit below
        rr = np.where(rr > 0, rr, 1.0)
        kern = jv(nu, rr * s) * s ** (d / 2.0)
        out[i:i + chunk] = (kern * (w * fs)).sum(axis=1) * rr[:, 0] ** (1.0 - d / 2.0)
    out = out * (2.0 * np.pi) ** (d / 2.0)
    zero = r == 0
    if np.any(zero):
        # limit r -> 0: J_nu(rs) (rs)^{-nu} -> 2^{-nu} / Gamma(nu + 1)
        val = np.sum(w * fs * s ** (d - 1.0)) * 2.0 ** (-nu) / gamma(nu + 1.0)
        out[zero] = val * (2.0 * np.pi) ** (d / 2.0)
    return out


def radial_ft(profile: RadialProfile, n: int, r, refine: int = 1,
              damping: Optional[Callable] = None, s_max: Optional[float] = None) -> RadialProfile:
    """``F_n(f_0)`` sampled at ``r`` (direct Bessel-kernel quadrature)."""
    support = s_max if s_max is not None else profile.support
    if support is None:
        raise SharpnessError("profile needs a finite support (or pass s_max with damping)")
    r = np.asarray(r, dtype=float)
    vals = hankel(profile.func, n, r, support, profile.breakpoints, refine, damping=damping)
    return RadialProfile(lambda x: np.interp(x, r, vals.real) + 1j * np.interp(x, r, vals.imag),
                         None, (), r, vals, "linear")


def g_profiles(g0: RadialProfile) -> Dict[str, RadialProfile]:
    """``g_1 .. g_4`` built from the spectrum profile ``g_0``."""
    S, B = g0.support, g0.breakpoints
    return {
        "g1": RadialProfile(lambda r: g0(r) * np.exp(1j * r), S, B),
        "g2": RadialProfile(lambda r: g0(r) * (np.exp(1j * r) - 1 - 1j * r + r * r / 2), S, B),
        "g3": RadialProfile(lambda r: g0(r) * (1 - r * r / 2), S, B),
        "g4": RadialProfile(lambda r: g0(r) * 1j * r, S, B),
    }


def _deriv_bump(bump: BumpProfile, r: np.ndarray) -> np.ndarray:
    # derivative of h((r_out - r) / w) with h = s(t)/(s(t)+s(1-t)), s = exp(-1/t)
    w = bump.r_out - bump.r_in
    t = (bump.r_out - r) / w
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    da = a / ti ** 2
    db = -b / (1.0 - ti) ** 2
    hp = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    out[inside] = -hp / w
    return out


def h_profiles(n: int) -> Dict[str, RadialProfile]:
    """``h_0 .. h_3`` for the counterexample spectrum (``h_3 = i/r`` has no compact support)."""
    bump = BumpProfile(0.5, 2.0)
    g0 = lambda r: bump(r)
    dg0 = lambda r: _deriv_bump(bump, np.asarray(r, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        h0 = lambda r: 1j * g0(r) / r + 1j * dg0(r)
        h2 = lambda r: 1j * (g0(r) - 1.0) / r
        h3 = lambda r: 1j / r
    return {
        "h0": RadialProfile(h0, 2.0, (0.5, 2.0)),
        "h1": RadialProfile(lambda r: 1j * dg0(r), 2.0, (0.5, 2.0)),
        "h2": RadialProfile(h2, None, (0.5, 2.0)),
        "h3": RadialProfile(h3, None, ()),
    }


def h3_closed_form(n: int, r) -> np.ndarray:
    """``F_{n+2}(i/r) = i 2^{n+1} pi^{(n+1)/2} Gamma((n+1)/2) r^{-(n+1)}``."""
    r = np.asarray(r, dtype=float)
    return 1j * 2.0 ** (n + 1) * np.pi ** ((n + 1) / 2.0) * gamma((n + 1) / 2.0) * r ** (-(n + 1.0))


def h3_numeric(n: int, r, R: float = 400.0, refine: int = 1) -> np.ndarray:
    """``F_{n+2}(i/s)`` with a smooth cutoff at ``s ~ R`` removing the divergent tail.

    The cutoff ``1 - h((s - R)/R)`` smooths the transform at scale ``1/R``,
    negligible for ``r >> 1/R``.
    """
    cut = lambda s: smooth_step((2.0 * R - s) / R)
    prof = RadialProfile(lambda s: 1j / s, 2.0 * R, (R,))
    return hankel(prof.func, n + 2, r, 2.0 * R, (R,), refine, damping=cut)


def evaluate_T(n: int, spectrum: RadialProfile, x, method: str = "auto",
               refine: int = 1, phase: bool = True, guard: bool = True) -> np.ndarray:
    """``T f(x) = int f_hat(xi) exp(i x.xi + i|xi|) dxi`` at arbitrary points.

    ``x`` is an array of shape ``(P,)`` of radii (``n`` any) or ``(P, n)``.
    ``method='direct'`` (n=1) integrates over ``[-S, S]`` split at 0;
    ``'polar'`` (n=2) uses Gauss nodes in radius and the trapezoid rule in
    angle; ``'radial'`` integrates the angular part exactly through Bessel
    functions. ``phase=False`` drops ``exp(i|xi|)``.
    """
    S = spectrum.support
    if S is None:
        raise SharpnessError("spectrum must have compact support")
    x = np.asarray(x, dtype=float)
    pts = x if x.ndim == 2 else None
    radii = np.linalg.norm(x, axis=-1) if x.ndim == 2 else np.abs(x)
    rmax = float(radii.max()) if radii.size else 0.0
    width = _width_for(rmax) / refine
    if guard and width * 2.0 / _GL_ORDER > np.pi / (4.0 * max(rmax, 1e-300)) * 1.0000001:
        raise SharpnessError("resolution guard: reduce max|x| or refine the quadrature")
    ph = (lambda s: np.exp(1j * s)) if phase else (lambda s: np.ones_like(s))
    if method == "auto":
        method = "direct" if n == 1 else "radial"
    if method == "direct":
        if n != 1:
            raise SharpnessError("direct method is for n = 1")
        s, w = _panels(0.0, S, width, spectrum.breakpoints)
        amp = spectrum(s) * ph(s) * w
        xs = x[:, 0] if pts is not None else x
        out = np.array([np.sum(amp * (np.exp(1j * xv * s) + np.exp(-1j * xv * s))) for xv in xs])
        return out / (2.0 * np.pi)
    if method == "polar":
        if n != 2:
            raise SharpnessError("polar method is for n = 2")
        s, w = _panels(0.0, S, width, spectrum.breakpoints)
        amp = spectrum(s) * ph(s) * w * s
        P = int(math.ceil(math.e * rmax * S / 2.0)) + 64
        ang = 2.0 * np.pi * np.arange(P) / P
        out = np.empty(len(radii), dtype=complex)
        dirs = pts if pts is not None else np.stack([radii, np.zeros_like(radii)], -1)
        for i, xv in enumerate(dirs):
            proj = xv[0] * np.cos(ang) + xv[1] * np.sin(ang)
            ker = np.exp(1j * np.outer(s, proj)).mean(axis=1) * 2.0 * np.pi
            out[i] = np.sum(amp * ker)
        return out / (2.0 * np.pi) ** 2
    if method == "radial":
        g1 = lambda s: spectrum(s) * ph(s)
        vals = hankel(g1, n, radii, S, spectrum.breakpoints, refine)
        return vals / (2.0 * np.pi) ** n
    raise SharpnessError(f"unknown method {method!r}")


def tail_fit(n: int, x, values, fhat0: complex = 1.0) -> Dict[str, object]:
    """Log-log slope and complex coefficient of the ``|x|^{-(n+1)}`` tail."""
    r = np.abs(np.asarray(x, dtype=float)) if np.ndim(x) == 1 else np.linalg.norm(x, axis=-1)
    v = np.asarray(values)
    if r.min() < 50:
        raise SharpnessError("tail fits need |x| >= 50")
    mag = np.abs(v)
    if np.any(mag == 0) or not np.all(np.isfinite(mag)):
        raise SharpnessError("nonconvergent fit: zero or non-finite values")
    slope, icpt = np.polyfit(np.log(r), np.log(mag), 1)
    scaled = v * r ** (n + 1)
    coef = complex(np.mean(scaled))
    target = leading_coefficient(n, fhat0)
    rel = np.abs(scaled - target) / abs(target)
    return {"exponent": float(slope), "coefficient": coef, "target": target,
            "coef_rel_err": abs(coef - target) / abs(target),
            "mean_rel_dev": float(rel.mean()), "max_rel_dev": float(rel.max())}


def lp_truncated_growth(n: int, p: float, R_list: Sequence[float], R_direct: float = 400.0,
                        samples: int = 400) -> Dict[str, object]:
    """``I(R) = int_{50 < |x| < R} |T f|^p dx`` and a growth classification.

    Values are computed by direct quadrature up to ``R_direct`` and continued
    with the fitted ``|x|^{-(n+1)}`` tail beyond it.
    """
    spec, fhat0 = build_counterexample(n)
    r = np.geomspace(50.0, R_direct, samples)
    T = evaluate_T(n, spec, r)
    fit = tail_fit(n, r, T, fhat0)
    c = abs(fit["coefficient"])
    sphere = 2.0 if n == 1 else 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)
    integrand = sphere * np.abs(T) ** p * r ** (n - 1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(r))])
    beta = (n + 1) * p - (n - 1)  # tail integrand ~ c^p r^{-beta}
    out = []
    for R in R_list:
        if R <= R_direct:
            out.append(float(np.interp(R, r, cum)))
            continue
        if abs(beta - 1.0) < 1e-12:
            tail = sphere * c ** p * math.log(R / R_direct)
        else:
            tail = sphere * c ** p * (R_direct ** (1 - beta) - R ** (1 - beta)) / (beta - 1)
        out.append(float(cum[-1] + tail))
    I = np.array(out)
    logR = np.log(np.asarray(R_list, dtype=float))
    corr = float(np.corrcoef(logR, I)[0, 1]) if len(I) > 2 else float("nan")
    incr = np.diff(I)
    critical = n / (n + 1.0)
    if abs(p - critical) < 1e-12:
        kind = "log-linear"
    elif p < critical:
        kind = "power-growth"
    else:
        kind = "convergent"
    return {"R": list(map(float, R_list)), "I": I.tolist(), "corr_logR": corr,
            "increments": incr.tolist(), "classification": kind, "fit": fit}
