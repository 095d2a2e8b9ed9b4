"""
Multilinear Fourier integral operators

    T(f_1, ..., f_N)(x) = int sigma(x, Xi) prod_j f_j_hat(xi_j) exp(i x.xi_j) exp(i Phi(Xi)) dXi

with ``Phi(Xi) = phi_0(xi_1 + ... + xi_N) + sum_j phi_j(xi_j)``.

``apply_direct`` is the brute-force tensor quadrature on the dual lattice and
serves as the oracle. ``decompose`` splits an amplitude into a compact piece,
pieces where one frequency dominates and pieces where two are comparable.
The fast paths evaluate each piece with multiplier passes and pointwise
products only: a dyadic split in one frequency variable, a Fourier expansion
of the remaining amplitude factor, and a separated (low-rank) resummation of
that expansion across the frequency slots.

Products of band-limited fields contain frequencies up to ``N`` times the grid
band, so every product is formed on a zero-padded grid with the same period
and then sampled back onto the original grid. This keeps the fast paths in
exact agreement with the lattice quadrature.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .cutoffs import (CHI_COMPACT, BumpProfile, ConeConstants, nu, squared_family_radial,
                      support_radii, theta_jk)
from .field import Grid, Rep, SampledField, forward_ft_array, inverse_ft_array
from .linear_fio import Phase, half_wave, oscillation_guard, zero_phase

__all__ = [
    "PhaseSystem",
    "MultiAmplitude",
    "DecomposedAmplitude",
    "Piece",
    "UQuadrature",
    "FastPlan",
    "MultilinearError",
    "apply_direct",
    "decompose",
    "build_u_quadrature",
    "plan_piece",
    "plan_sigma0",
    "plan_fast",
    "apply_plan",
    "apply_sigma_j_fast",
    "apply_sigma_jk_fast",
    "apply_sigma0_fast",
    "apply_fast",
    "sigma0_coefficients",
    "sigma0_decay",
    "tau_table",
    "telescoped_ball",
    "duhamel_evolve",
    "uniform_bound_operator",
    "level_shifted_measure",
    "padded_grid",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 2 ** 32
_TWO_PI = 2.0 * np.pi


class MultilinearError(ValueError):
    pass


# --- phases and amplitudes ------------------------------------------------------

@dataclass(frozen=True)
class PhaseSystem:
    """Phases ``phi_0, ..., phi_N``."""

    phases: Tuple[Phase, ...]

    def __post_init__(self):
        if len(self.phases) < 2:
            raise MultilinearError("need phi_0 and at least one phi_j")
        object.__setattr__(self, "phases", tuple(self.phases))

    @property
    def N(self) -> int:
        return len(self.phases) - 1

    @classmethod
    def uniform(cls, N: int, phase: Optional[Phase] = None, outer: Optional[Phase] = None):
        phase = phase or half_wave()
        return cls(tuple([outer or phase] + [phase] * N))

    @classmethod
    def zero(cls, N: int) -> "PhaseSystem":
        return cls(tuple([zero_phase()] * (N + 1)))

    def __call__(self, Xi) -> np.ndarray:
        """``Phi(Xi)`` for ``Xi`` of shape ``(..., N, n)``."""
        Xi = np.asarray(Xi, dtype=float)
        out = self.phases[0](np.einsum("...ij->...j", Xi))
        for j in range(self.N):
            out = out + self.phases[j + 1](Xi[..., j, :])
        return out

    def complete(self, x, Xi) -> np.ndarray:
        """``x.(xi_1 + ... + xi_N) + Phi(Xi)``."""
        Xi = np.asarray(Xi, dtype=float)
        return np.sum(np.asarray(x, dtype=float) * np.einsum("...ij->...j", Xi), axis=-1) + self(Xi)

    def homogeneity_error(self, n: int, rng=None) -> float:
        from .linear_fio import check_homogeneity
        return max(check_homogeneity(p, n, rng) for p in self.phases)


def _japanese(Xi: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + np.einsum("...ij,...ij->...", Xi, Xi))


@dataclass(frozen=True)
class MultiAmplitude:
    """Amplitude ``sigma(x, Xi)`` of order ``m``; ``Xi`` has shape ``(..., N, n)``.

    For x-independent amplitudes ``func(Xi)``; otherwise ``func(x, Xi)``.
    ``x_terms`` optionally lists separable parts ``(alpha_q(x), sigma_q(Xi))``
    with ``sigma = sum_q alpha_q sigma_q``; the fast paths need this form.
    """

    n: int
    N: int
    m: float
    func: Callable
    x_independent: bool = True
    name: str = "custom"
    x_terms: Optional[Tuple[Tuple[Callable, Callable], ...]] = None

    def __call__(self, x, Xi) -> np.ndarray:
        Xi = np.asarray(Xi, dtype=float)
        if self.x_independent:
            return np.asarray(self.func(Xi))
        return np.asarray(self.func(np.asarray(x, dtype=float), Xi))

    def of_xi(self, Xi) -> np.ndarray:
        if not self.x_independent:
            raise MultilinearError("amplitude depends on x")
        return self(None, Xi)

    @classmethod
    def japanese(cls, n: int, N: int, m: float) -> "MultiAmplitude":
        """``<Xi>^m``."""
        return cls(n, N, m, lambda Xi: _japanese(Xi) ** m, True, f"<Xi>^{m}")

    @classmethod
    def constant(cls, n: int, N: int, c: complex = 1.0) -> "MultiAmplitude":
        return cls(n, N, 0.0, lambda Xi: np.full(np.shape(Xi)[:-2], c, dtype=complex), True,
                   "const")

    @classmethod
    def separable_x(cls, n: int, N: int, m: float, terms) -> "MultiAmplitude":
        terms = tuple(terms)

        def f(x, Xi):
            x = np.asarray(x, dtype=float)
            return sum(np.asarray(a(x)) * np.asarray(s(Xi)) for a, s in terms)
        return cls(n, N, m, f, False, "separable", terms)

    def permuted(self, perm: Sequence[int]) -> "MultiAmplitude":
        """Amplitude with frequency slots reordered: ``sigma'(Xi) = sigma(Xi[perm^-1])``."""
        perm = list(perm)
        inv = np.argsort(perm)
        if self.x_independent:
            return MultiAmplitude(self.n, self.N, self.m,
                                  lambda Xi, f=self.func: f(np.asarray(Xi)[..., inv, :]),
                                  True, f"perm({self.name})")
        return MultiAmplitude(self.n, self.N, self.m,
                              lambda x, Xi, f=self.func: f(x, np.asarray(Xi)[..., inv, :]),
                              False, f"perm({self.name})")

    def symbol_check(self, count: int = 500, r_min: float = 0.5, r_max: float = 200.0,
                     order: int = 2, seed: int = 0) -> Dict[int, float]:
        """``sup |D_Xi^alpha sigma| <Xi>^{|alpha| - m}`` for ``|alpha| <= order`` (x = 0)."""
        from .linear_fio import symbol_check
        n, N = self.n, self.N
        fx = (lambda z: self(np.zeros(n), z.reshape(z.shape[:-1] + (N, n))))
        return symbol_check(fx, self.m, n * N, r_min, r_max, count, order)


# --- lattice helpers -----------------------------------------------------------

def padded_grid(grid: Grid, N: int) -> Grid:
    """Grid with the same period whose band holds all sums of ``N`` lattice frequencies."""
    factor = 1 << int(math.ceil(math.log2(max(N, 1))))
    return Grid(grid.n, grid.M * factor, grid.L)


def _lattice_xi(grid: Grid) -> np.ndarray:
    return grid.dual_points()  # (P, n)


def _tensor_xi(grid: Grid, N: int, rows: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """All ``Xi`` on the product lattice, shape ``(P_1, ..., P_N, N, n)``."""
    pts = _lattice_xi(grid)
    rows = rows or [np.arange(pts.shape[0])] * N
    shape = tuple(len(r) for r in rows)
    out = np.empty(shape + (N, grid.n))
    for j, r in enumerate(rows):
        sl = [None] * N
        sl[j] = slice(None)
        out[..., j, :] = pts[r][tuple(sl)]
    return out


def _check_inputs(fs: Sequence[SampledField], N: int) -> Grid:
    if len(fs) != N:
        raise MultilinearError(f"expected {N} inputs, got {len(fs)}")
    grid = fs[0].grid
    for f in fs:
        if f.grid != grid:
            raise MultilinearError("inputs must share one grid")
        if f.rep != Rep.SPACE:
            raise MultilinearError("inputs must be SPACE fields")
    return grid


# --- brute-force oracle ---------------------------------------------------------

def apply_direct(sigma: MultiAmplitude, Phi: PhaseSystem, fs: Sequence[SampledField],
                 budget: int = DEFAULT_BUDGET, x_points: Optional[np.ndarray] = None,
                 guard_override: bool = False):
    """Full tensor quadrature over the product lattice.

    Returns a SPACE field on the common grid, or values at ``x_points``.
    The cost ``#outputs * P^N`` must stay within ``budget``.
    """
    N, n = sigma.N, sigma.n
    if Phi.N != N:
        raise MultilinearError("phase system and amplitude disagree on N")
    grid = _check_inputs(fs, N)
    P = grid.size
    X = grid.points() if x_points is None else np.atleast_2d(np.asarray(x_points, dtype=float))
    if x_points is not None:
        oscillation_guard(X, grid, guard_override)
    cost = X.shape[0] * P ** N
    if cost > budget:
        raise MultilinearError(
            f"direct quadrature needs {cost:.3g} inner iterations, budget is {budget:.3g}")
    xi = _lattice_xi(grid)
    w = grid.L ** (-n)
    E = np.exp(1j * (X @ xi.T))  # (X, P)
    A = [E * (forward_ft_array(grid, f.values).ravel() * w)[None, :] for f in fs]
    Xi = _tensor_xi(grid, N)
    phase = np.exp(1j * Phi(Xi))
    if sigma.x_independent:
        S = np.asarray(sigma.of_xi(Xi), dtype=complex) * phase
        if not np.all(np.isfinite(S)):
            raise MultilinearError("amplitude is not finite on the lattice")
        out = _contract(S, A)
    else:
        out = np.empty(X.shape[0], dtype=complex)
        for i, x in enumerate(X):
            S = np.asarray(sigma(x, Xi), dtype=complex) * phase
            out[i] = _contract(S, [a[i:i + 1] for a in A])[0]
    if x_points is not None:
        return out
    return SampledField(grid, Rep.SPACE, out.reshape(grid.shape))


def _contract(S: np.ndarray, A: Sequence[np.ndarray]) -> np.ndarray:
    # out[x] = sum_{i_1..i_N} S[i_1..i_N] prod_j A_j[x, i_j]
    nx = A[0].shape[0]
    P1 = S.shape[0]
    R = A[0] @ S.reshape(P1, -1)  # (X, P_2 ... P_N)
    for a in A[1:]:
        R = R.reshape(nx, a.shape[1], -1)
        R = np.einsum("xpr,xp->xr", R, a)
    return R.reshape(nx)


# --- decomposition --------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    """One term of the decomposition: ``kind`` in ``{'sigma0', 'sigma_j', 'sigma_jk'}``."""

    kind: str
    index: Tuple[int, ...]  # 1-based slot indices
    func: Callable  # (x, Xi) -> values
    n: int
    N: int
    m: float
    x_independent: bool = True

    @property
    def label(self) -> str:
        if self.kind == "sigma0":
            return "sigma0"
        return f"{self.kind}:{','.join(str(i) for i in self.index)}"

    def __call__(self, x, Xi) -> np.ndarray:
        return np.asarray(self.func(x, np.asarray(Xi, dtype=float)))

    def of_xi(self, Xi) -> np.ndarray:
        return self(None, Xi)

    def as_amplitude(self) -> MultiAmplitude:
        if self.x_independent:
            return MultiAmplitude(self.n, self.N, self.m, lambda Xi: self.func(None, Xi), True,
                                  self.label)
        return MultiAmplitude(self.n, self.N, self.m, self.func, False, self.label)


@dataclass
class DecomposedAmplitude:
    sigma: MultiAmplitude
    consts: ConeConstants
    sigma0: Piece
    sigma_j: List[Piece]
    sigma_jk: List[Piece]

    def pieces(self) -> List[Piece]:
        return [self.sigma0] + list(self.sigma_j) + list(self.sigma_jk)

    def total(self, x, Xi) -> np.ndarray:
        return sum(p(x, Xi) for p in self.pieces())

    def manifest(self) -> dict:
        c = self.consts
        return {"N": c.N, "n": self.sigma.n, "m": self.sigma.m, "constants": c.to_dict(),
                "bracket": list(c.bracket),
                "pieces": [p.label for p in self.pieces()],
                "supports": {
                    "sigma0": "|Xi| < 1/4",
                    "sigma_j": "|xi_j|^2 > c1 |Xi|^2 and |Xi| > 1/8",
                    "sigma_jk": "c1 c3 |Xi|^2 < |xi_j|^2, |xi_k|^2 and |Xi| > 1/8",
                }}


def _cone_parts(Xi: np.ndarray, c: ConeConstants):
    radius = np.sqrt(np.einsum("...ij,...ij->...", Xi, Xi))
    chi = CHI_COMPACT(radius)
    nus = nu(Xi, c)  # (..., N)
    return chi, nus


def decompose(sigma: MultiAmplitude, consts: Optional[ConeConstants] = None) -> DecomposedAmplitude:
    """Split ``sigma = sigma_0 + sum_j sigma_j + sum_{j != k} sigma_{j,k}``.

    ``sigma_0 = chi sigma``, ``sigma_j = (1 - chi) nu_j sigma`` and
    ``sigma_{j,k} = Theta_{j,k} (sigma - sigma_0 - sum_l sigma_l)``; the
    remainder already carries the factor ``1 - chi``.
    """
    N = sigma.N
    if N < 2:
        raise MultilinearError("decomposition needs N >= 2")
    c = consts or ConeConstants(N)
    if c.N != N:
        raise MultilinearError("cone constants built for a different N")

    def s0(x, Xi):
        chi, _ = _cone_parts(Xi, c)
        return chi * sigma(x, Xi)

    def sj(j):
        def f(x, Xi):
            chi, nus = _cone_parts(Xi, c)
            return (1.0 - chi) * nus[..., j] * sigma(x, Xi)
        return f

    def sjk(j, k):
        def f(x, Xi):
            chi, nus = _cone_parts(Xi, c)
            base = sigma(x, Xi)
            rem = base - chi * base - sum((1.0 - chi) * nus[..., l] * base for l in range(N))
            return theta_jk(Xi, c)[..., j, k] * rem
        return f

    xi_ind = sigma.x_independent
    mk = lambda kind, idx, f: Piece(kind, idx, f, sigma.n, N, sigma.m, xi_ind)
    return DecomposedAmplitude(
        sigma, c, mk("sigma0", (), s0),
        [mk("sigma_j", (j + 1,), sj(j)) for j in range(N)],
        [mk("sigma_jk", (j + 1, k + 1), sjk(j, k)) for j in range(N) for k in range(N) if j != k])


# --- the U expansion --------------------------------------------------------------

@dataclass
class _SlotSpec:
    kind: str       # squared-family kind or "ball"
    k: int
    power: float = 0.0    # |xi|^power factor carried by the slot
    scale: float = 1.0    # constant factor carried by the slot
    k1: Optional[int] = None

    def cutoff(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "ball":
            return squared_family_radial("theta", self.k, r)
        return squared_family_radial(self.kind, self.k, r, k1=self.k1)

    def zero_radius(self) -> float:
        kind = "theta" if self.kind == "ball" else self.kind
        return support_radii(kind, self.k, self.k1)["zero_above"]

    def factor(self, r: np.ndarray) -> np.ndarray:
        cut = self.cutoff(r)
        if self.power == 0.0:
            return self.scale * cut
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = np.where(r > 0, r ** self.power, 0.0)
        return self.scale * cut * pw


def _slot_specs(piece: Piece, k: int, m_split: Sequence[float], consts: ConeConstants):
    """Slot cutoffs, outer cutoff and the normalization of the expanded factor.

    Every cutoff equals one on the support of ``psi_k(xi_d)^2 * piece``; this is
    what keeps the fast path exact.
    """
    N = piece.N
    m = piece.m
    m0 = m_split[0]
    ms = list(m_split[1:])
    slots: List[_SlotSpec] = [None] * N  # type: ignore
    if piece.kind == "sigma_j":
        d = piece.index[0] - 1
        slots[d] = _SlotSpec("psi", k, power=m - m0)
        for j in range(N):
            if j != d:
                slots[j] = _SlotSpec("ball", k, scale=1.0)
        outer = _SlotSpec("phi", k, power=m0)
        norm = {"dyadic": d, "powers": {d: m - m0}, "outer_power": m0}
    elif piece.kind == "sigma_jk":
        if m0 != 0:
            raise MultilinearError("comparable pieces use m_0 = 0")
        a, b = piece.index[0] - 1, piece.index[1] - 1
        k1 = consts.k1
        mb = ms[b]
        slots[a] = _SlotSpec("psi", k, power=m - mb)
        slots[b] = _SlotSpec("zeta", k, power=mb, k1=k1)
        for j in range(N):
            if j not in (a, b):
                # |xi_j| <= |Xi| <= 2^{k+2} / sqrt(c1 c3) <= 2^{k+k1+2}
                slots[j] = _SlotSpec("ball", k + k1 + 5)
        extra = int(math.ceil(math.log2(math.sqrt(N))))
        outer = _SlotSpec("ball", k + k1 + 5 + extra)
        norm = {"dyadic": a, "powers": {a: m - mb, b: mb}, "outer_power": 0.0}
    else:
        raise MultilinearError(f"piece {piece.label} has no dyadic expansion")
    return slots, outer, norm


def _piece_band(grid: Grid) -> Tuple[float, float]:
    r = grid.dual_norm().ravel()
    r = r[r > 0]
    return float(r.min()), float(r.max())


def _k_values(grid: Grid, residue: int) -> List[int]:
    lo, hi = _piece_band(grid)
    ks = [k for k in range(int(math.floor(math.log2(lo))) - 3, int(math.ceil(math.log2(hi))) + 3)
          if 2.0 ** (k + 2) > lo and 2.0 ** (k - 2) < hi]
    return [k for k in ks if k % 3 == residue % 3]


@dataclass
class UQuadrature:
    """Fourier expansion of the amplitude factor of one piece, per dyadic ``k``.

    For each ``k`` the factor is sampled on a box of the product lattice and
    expanded in the box's Fourier modes ``exp(i Xi.U)``. Coefficients are kept
    in decreasing magnitude until the discarded l2 mass is at most
    ``tau_U`` of the total.
    """

    piece: str
    kind: str
    ks: List[int]
    rows: Dict[int, List[np.ndarray]]      # lattice rows per slot (box)
    coeffs: Dict[int, np.ndarray]          # full coefficient tensor (truncated) per k
    kept: Dict[int, int]
    total: Dict[int, int]
    discarded_mass: Dict[int, float]
    tau_U: float
    M_weight: int
    slots: Dict[int, list]
    outer: Dict[int, object]
    m_split: Tuple[float, ...]
    grid: Grid
    tables: Dict[int, np.ndarray] = field(default_factory=dict)
    build_seconds: float = 0.0

    @property
    def empty(self) -> bool:
        return all(v == 0 for v in self.kept.values())

    def reconstruct(self, k: int) -> np.ndarray:
        """Truncated series evaluated on the box nodes."""
        c = self.coeffs[k]
        if c.size == 0:
            return c
        return _box_ifft(c, len(self.rows[k]), self.grid.n)

    def m_values(self, k: int) -> np.ndarray:
        """``m(k, U) = c_U (1 + |U|^2)^M`` on the kept modes (x-independent pieces)."""
        c = self.coeffs[k]
        U2 = self.u_norm2(k)
        return c * (1.0 + U2) ** self.M_weight

    def u_norm2(self, k: int) -> np.ndarray:
        shape = self.coeffs[k].shape
        grid = self.grid
        axes = []
        for j, r in enumerate(self.rows[k]):
            P = int(round(len(r) ** (1.0 / grid.n)))
            # U is dual to the box spacing 2^{-k} dxi
            u = sfft.fftfreq(P, d=grid.dual_spacing * 2.0 ** (-k)) * _TWO_PI
            axes += [u] * grid.n
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        return sum(a * a for a in mesh).reshape(shape)

    def decay_fit(self, k: int, level: Optional[float] = None, floor: float = 1e-13,
                  shells: int = 24) -> Dict[str, float]:
        """Slope of ``log max|c_U|`` over shells of ``|U|`` against ``log |U|``.

        Only shells whose envelope lies in ``(floor, level]`` relative to the
        largest coefficient enter the fit; ``level`` defaults to ``tau_U``, so
        the fit describes the discarded tail of the expansion.
        """
        level = self.tau_U if level is None else level
        c = np.abs(self.coeffs[k]).ravel()
        U = np.sqrt(self.u_norm2(k)).ravel()
        top = c.max() if c.size else 0.0
        if top == 0:
            return {"slope": -math.inf, "points": 0}
        pos = U > 0
        edges = np.geomspace(U[pos].min(), U.max() * 1.0001, shells + 1)
        xs, ys = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            sel = (U >= lo) & (U < hi)
            if sel.any():
                v = c[sel].max() / top
                if floor < v <= level:
                    xs.append(math.log(math.sqrt(lo * hi)))
                    ys.append(math.log(v))
        if len(xs) < 3:
            return {"slope": math.nan, "points": len(xs)}
        slope = float(np.polyfit(xs, ys, 1)[0])
        return {"slope": slope, "points": len(xs)}

    def stats(self) -> dict:
        return {"piece": self.piece, "ks": self.ks, "tau_U": self.tau_U, "M": self.M_weight,
                "kept": {str(k): self.kept[k] for k in self.ks},
                "total": {str(k): self.total[k] for k in self.ks},
                "discarded_mass": {str(k): self.discarded_mass[k] for k in self.ks},
                "m_split": list(self.m_split), "build_seconds": self.build_seconds}


def _box_rows(grid: Grid, radius: float) -> np.ndarray:
    """Flat lattice indices of the sub-box ``|xi|_inf <= radius`` (whole lattice if larger)."""
    ax = grid.dual_axis()
    sel = np.nonzero(np.abs(ax) <= radius + 1e-12)[0]
    if sel.size == 0:
        sel = np.array([grid.M // 2])
    if sel.size < grid.M:
        # keep a power-friendly even count including a zero margin when possible
        lo, hi = sel[0], sel[-1]
        if lo > 0:
            lo -= 1
        if hi < grid.M - 1:
            hi += 1
        sel = np.arange(lo, hi + 1)
    idx = np.ravel_multi_index(np.meshgrid(*([sel] * grid.n), indexing="ij"), grid.shape)
    return idx.ravel()


def _box_fft(table: np.ndarray, N: int, n: int) -> np.ndarray:
    # table shape (P_1, ..., P_N); each P_j = B_j^n; transform over all n*N axes
    shp = []
    for P in table.shape:
        B = int(round(P ** (1.0 / n)))
        shp += [B] * n
    return sfft.fftn(table.reshape(shp)).reshape(table.shape) / table.size


def _box_ifft(coeffs: np.ndarray, N: int, n: int) -> np.ndarray:
    shp = []
    for P in coeffs.shape:
        B = int(round(P ** (1.0 / n)))
        shp += [B] * n
    return sfft.ifftn(coeffs.reshape(shp) * coeffs.size).reshape(coeffs.shape)


def _expanded_factor(piece: Piece, grid: Grid, k: int, slots, outer, norm, rows,
                     values: Optional[np.ndarray] = None) -> np.ndarray:
    """``psi_k(xi_d) * prod(cutoffs) * piece / normalization`` on the box."""
    N = piece.N
    Xi = _tensor_xi(grid, N, rows)
    r = np.sqrt(np.einsum("...i,...i->...", Xi, Xi))  # (..., N)
    sXi = np.einsum("...ij->...j", Xi)
    eta = np.sqrt(np.einsum("...i,...i->...", sXi, sXi))
    d = norm["dyadic"]
    cut = squared_family_radial("psi", k, r[..., d])
    for j, s in enumerate(slots):
        if j != d:
            cut = cut * s.cutoff(r[..., j])
    cut = cut * outer.cutoff(eta)
    if values is None:
        # the amplitude is only needed where the cutoffs are nonzero
        live = cut != 0
        A = np.zeros(cut.shape, dtype=complex)
        A[live] = np.asarray(piece.of_xi(Xi[live]), dtype=complex) * cut[live]
    else:
        A = np.asarray(values, dtype=complex) * cut
    with np.errstate(divide="ignore", invalid="ignore"):
        for j, p in norm["powers"].items():
            if p != 0:
                A = np.where(r[..., j] > 0, A / np.where(r[..., j] > 0, r[..., j], 1.0) ** p, 0.0)
        p0 = norm["outer_power"]
        if p0 != 0:
            A = np.where(eta > 0, A / np.where(eta > 0, eta, 1.0) ** p0, 0.0)
    return A


def _truncate(c: np.ndarray, tau: float) -> Tuple[np.ndarray, int, float]:
    flat = c.ravel()
    mag2 = np.abs(flat) ** 2
    total = mag2.sum()
    if total == 0:
        return np.zeros_like(c), 0, 0.0
    order = np.argsort(mag2)  # ascending
    csum = np.cumsum(mag2[order])
    # drop the smallest coefficients while the dropped l2 norm stays <= tau * total norm
    drop = int(np.searchsorted(csum, (tau ** 2) * total, side="right"))
    out = flat.copy()
    out[order[:drop]] = 0.0
    dropped = math.sqrt(csum[drop - 1] / total) if drop > 0 else 0.0
    return out.reshape(c.shape), flat.size - drop, dropped


def build_u_quadrature(piece: Piece, grid: Grid, m_split: Optional[Sequence[float]] = None,
                       tau_U: float = 1e-6, M_weight: int = 4, residue: int = 0,
                       ks: Optional[Sequence[int]] = None,
                       consts: Optional[ConeConstants] = None,
                       keep_tables: bool = False) -> UQuadrature:
    """Expand the amplitude factor of a ``sigma_j`` or ``sigma_{j,k}`` piece in ``U``.

    ``m_split = (m_0, ..., m_N)`` must sum to the order. Defaults: ``m_0 = 0``
    and the whole order on the dyadic slot.
    """
    t0 = time.perf_counter()
    if not piece.x_independent:
        raise MultilinearError("U expansion needs an x-independent piece (use x_terms)")
    N, m = piece.N, piece.m
    consts = consts or ConeConstants(N)
    if m_split is None:
        m_split = [0.0] * (N + 1)
        m_split[piece.index[0]] = m
    m_split = tuple(float(v) for v in m_split)
    if len(m_split) != N + 1 or abs(sum(m_split) - m) > 1e-12:
        raise MultilinearError(f"m_split must have {N + 1} entries summing to {m}")
    ks = list(ks) if ks is not None else _k_values(grid, residue)
    rows, coeffs, kept, total, disc, slots_d, outer_d, tables = {}, {}, {}, {}, {}, {}, {}, {}
    used = []
    for k in ks:
        slots, outer, norm = _slot_specs(piece, k, m_split, consts)
        rws = [_box_rows(grid, s.zero_radius()) for s in slots]
        A = _expanded_factor(piece, grid, k, slots, outer, norm, rws)
        if not np.all(np.isfinite(A)):
            raise MultilinearError("amplitude factor is not finite")
        if not np.any(A):
            continue
        c = _box_fft(A, N, grid.n)
        ct, nk, dm = _truncate(c, tau_U)
        used.append(k)
        rows[k], coeffs[k], kept[k], total[k], disc[k] = rws, ct, nk, c.size, dm
        slots_d[k], outer_d[k] = (slots, norm), outer
        if keep_tables:
            tables[k] = A
    uq = UQuadrature(piece.label, piece.kind, used, rows, coeffs, kept, total, disc, tau_U,
                     M_weight, slots_d, outer_d, m_split, grid, tables)
    uq.build_seconds = time.perf_counter() - t0
    return uq


def tau_table(uq: UQuadrature, k: int, U_index: Tuple[int, ...], eta) -> np.ndarray:
    """Amplitude of ``sum_{l=-1}^{1} sum_{k' = k + l (mod 3)} T_{k'+l, k'}`` at ``eta``.

    ``m(k'+l, U) b_0(eta) phi_{k'}(eta)`` summed over the planned ``k'``; depends
    on ``k`` only through ``k mod 3``.
    """
    r = np.linalg.norm(np.atleast_2d(np.asarray(eta, dtype=float)), axis=-1)
    m0 = uq.m_split[0]
    with np.errstate(divide="ignore"):
        b0 = np.where(r > 0, r ** m0, 0.0) if m0 != 0 else np.ones_like(r)
    out = np.zeros(r.shape, dtype=complex)
    allk = set(uq.ks)
    for l in (-1, 0, 1):
        for kp in sorted(allk):
            if (kp - k - l) % 3 != 0:
                continue
            src = kp + l
            if src not in allk:
                continue
            mv = uq.m_values(src)
            idx = tuple(i % s for i, s in zip(U_index, mv.shape))
            out = out + mv[idx] * b0 * squared_family_radial("phi", kp, r)
    return out


def telescoped_ball(k: int, k0: int, r) -> np.ndarray:
    """``sum_{l=k0+1}^{k} (theta_l - theta_{l-1}) + theta_{k0}``."""
    r = np.asarray(r, dtype=float)
    out = squared_family_radial("theta", k0, r)
    for l in range(k0 + 1, k + 1):
        out = out + (squared_family_radial("theta", l, r) - squared_family_radial("theta", l - 1, r))
    return out


# --- separated factors and application --------------------------------------------

_DENSE_SVD = 768


def _dense_svd(mat):
    try:
        return sla.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return sla.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _svd(mat: np.ndarray, tol: float):
    """Thin SVD; large matrices use a seeded blocked randomized range finder.

    Blocks of Gaussian probes are projected off the current basis; the
    projected probes also estimate the Frobenius norm of the remainder, and
    the basis stops growing once that estimate is below ``tol / 8`` of the
    matrix norm, so the rank-truncation rule applied to the returned factors
    stays valid.
    """
    m, n = mat.shape
    if min(m, n) <= _DENSE_SVD:
        return _dense_svd(mat)
    rng = np.random.default_rng(0)
    norm = np.linalg.norm(mat)
    Q = np.zeros((m, 0), dtype=complex)
    block = 32
    while True:
        om = rng.standard_normal((n, block)) + 1j * rng.standard_normal((n, block))
        Y = mat @ om
        for _ in range(2):
            Y -= Q @ (Q.conj().T @ Y)
        # E |(I - QQ*) A w|^2 = 2 ||(I - QQ*) A||_F^2 for complex Gaussian w
        est = math.sqrt(float(np.mean(np.sum(np.abs(Y) ** 2, axis=0))) / 2.0)
        Qy = np.linalg.qr(Y)[0]
        Qy -= Q @ (Q.conj().T @ Qy)
        Q = np.hstack([Q, np.linalg.qr(Qy)[0]])
        if est <= 0.125 * tol * norm:
            break
        if Q.shape[1] >= min(m, n) // 2:
            return _dense_svd(mat)
        block = max(32, Q.shape[1] // 2)
    Ub, s, Vh = _dense_svd(Q.conj().T @ mat)
    return Q @ Ub, s, Vh


def _separate(table: np.ndarray, tol: float) -> List[List[np.ndarray]]:
    """Rank-truncated separated form ``sum_r prod_j v_{r,j}`` of an ``N``-way table."""
    N = table.ndim
    if N == 1:
        return [[table]]
    P1 = table.shape[0]
    mat = table.reshape(P1, -1)
    norm = np.linalg.norm(mat)
    if norm == 0:
        return []
    U, s, Vh = _svd(mat, tol)
    tail = np.sqrt(np.cumsum((s ** 2)[::-1]))[::-1]  # tail[r] = norm of s[r:]
    # smallest rank whose discarded singular values stay below tol * norm
    rank = int(np.sum(tail > tol * norm))
    terms = []
    for r in range(max(rank, 1)):
        rest = (s[r] * Vh[r]).reshape(table.shape[1:])
        for sub in _separate(rest, tol):
            terms.append([U[:, r]] + sub)
    return terms


@dataclass
class _KTerm:
    k: int
    slot_arrays: List[np.ndarray]  # per slot, (R, P) on the original lattice (flat)
    outer: np.ndarray              # on the padded lattice
    rank: int


@dataclass
class FastPlan:
    """Precomputed factors for the fast evaluation of one amplitude."""

    grid: Grid
    fine: Grid
    N: int
    terms: List[_KTerm]
    outer_phase: np.ndarray  # exp(i phi_0) on the padded lattice, times |eta|^{m_0} if shared
    labels: List[str]
    build_seconds: float = 0.0
    stats: Dict[str, object] = field(default_factory=dict)
    x_factor: Optional[np.ndarray] = None  # multiplies the output (separable x-terms)

    @property
    def rank_total(self) -> int:
        return sum(t.rank for t in self.terms)


def _embed(grid: Grid, fine: Grid, values: np.ndarray) -> np.ndarray:
    """Place lattice values (trailing shape ``grid.shape``) into the padded lattice."""
    lead = values.shape[:-grid.n]
    out = np.zeros(lead + fine.shape, dtype=complex)
    off = (fine.M - grid.M) // 2
    sl = (Ellipsis,) + tuple(slice(off, off + grid.M) for _ in range(grid.n))
    out[sl] = values
    return out


def _sample_back(grid: Grid, fine: Grid, values: np.ndarray) -> np.ndarray:
    step = fine.M // grid.M
    sl = tuple(slice(None, None, step) for _ in range(grid.n))
    return values[sl]


def _slot_phase(grid: Grid, phase: Phase) -> np.ndarray:
    return np.exp(1j * phase(_lattice_xi(grid)))


def plan_piece(piece: Piece, Phi: PhaseSystem, grid: Grid, uq: Optional[UQuadrature] = None,
               svd_tol: float = 1e-7, **uq_kw) -> Tuple[List[_KTerm], UQuadrature]:
    """Separated factors of the truncated ``U`` series for one dyadic piece."""
    uq = uq or build_u_quadrature(piece, grid, **uq_kw)
    fine = padded_grid(grid, piece.N)
    xi = _lattice_xi(grid)
    r = np.linalg.norm(xi, axis=-1)
    eta_r = fine.dual_norm()
    P = grid.size
    out = []
    for k in uq.ks:
        table = uq.reconstruct(k)
        factors = _separate(table, svd_tol)
        if not factors:
            continue
        slots, norm = uq.slots[k]
        outer = uq.outer[k]
        arrays = []
        for j, s in enumerate(slots):
            rows = uq.rows[k][j]
            vec = np.zeros((len(factors), P), dtype=complex)
            vec[:, rows] = np.stack([f[j] for f in factors])
            fac = s.factor(r)
            if j == norm["dyadic"] and piece.kind == "sigma_j":
                fac = squared_family_radial("psi", k, r) * _power(r, norm["powers"][j])
            elif piece.kind == "sigma_jk":
                fac = s.cutoff(r) * _power(r, norm["powers"].get(j, 0.0))
            vec = vec * (fac * _slot_phase(grid, Phi.phases[j + 1]))[None, :]
            arrays.append(vec)
        outer_vals = outer.cutoff(eta_r) * _power(eta_r, norm["outer_power"])
        out.append(_KTerm(k, arrays, outer_vals, len(factors)))
    return out, uq


def _power(r: np.ndarray, p: float) -> np.ndarray:
    if p == 0:
        return np.ones_like(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, np.abs(r) ** p, 0.0)


def _run_terms(terms: List[_KTerm], grid: Grid, fine: Grid, fhats: List[np.ndarray],
               outer_phase: np.ndarray) -> np.ndarray:
    acc = np.zeros(fine.shape, dtype=complex)
    shape = grid.shape
    for t in terms:
        prod = None
        for j, arr in enumerate(t.slot_arrays):
            spec = (arr * fhats[j][None, :]).reshape((t.rank,) + shape)
            g = inverse_ft_array(fine, _embed(grid, fine, spec))
            prod = g if prod is None else prod * g
        tot = prod.sum(axis=0)
        acc += forward_ft_array(fine, tot) * t.outer
    return _sample_back(grid, fine, inverse_ft_array(fine, acc * outer_phase))


# --- the compact piece ------------------------------------------------------------

def sigma0_coefficients(sigma0: Callable, n: int, N: int, side: float, K_max: int,
                        samples: int = 32) -> Dict[str, object]:
    """Fourier coefficients ``a_K`` of the ``side``-periodic extension of ``sigma_0``.

    Trapezoid rule on ``samples`` points per axis over the cube; ``|K|_inf <= K_max``.
    """
    d = n * N
    G = max(samples, 2 * K_max + 2)
    ax = side * (np.arange(G) / G - 0.5)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    Xi = np.stack([m.ravel() for m in mesh], axis=-1).reshape((G,) * d + (N, n))
    vals = np.asarray(sigma0(Xi), dtype=complex)
    # a_K = G^{-d} sum_g sigma(Xi_g) exp(-2 pi i K.Xi_g / side)
    shift = np.exp(1j * np.pi * np.arange(G))  # accounts for the -side/2 origin
    c = sfft.fftn(vals) / vals.size
    for ax_i in range(d):
        shp = [1] * d
        shp[ax_i] = G
        c = c * shift.reshape(shp)
    idx = np.concatenate([np.arange(0, K_max + 1), np.arange(G - K_max, G)])
    Ks = np.concatenate([np.arange(0, K_max + 1), np.arange(-K_max, 0)])
    sub = c[np.ix_(*([idx] * d))]
    full_mass = float(np.sqrt(np.sum(np.abs(c) ** 2)))
    kept_mass = float(np.sqrt(np.sum(np.abs(sub) ** 2)))
    # decay envelope against |K|_inf
    Kinf = np.max(np.abs(np.stack(np.meshgrid(*([np.fft.fftfreq(G, 1.0 / G)] * d),
                                               indexing="ij"))), axis=0)
    env = []
    for q in range(1, G // 2):
        sel = Kinf == q
        if sel.any():
            env.append((q, float(np.abs(c[sel]).max())))
    return {"coeffs": sub, "K": Ks, "side": side, "samples": G,
            "tail_mass": math.sqrt(max(full_mass ** 2 - kept_mass ** 2, 0.0)) / full_mass
            if full_mass > 0 else 0.0,
            "envelope": env}


def plan_sigma0(piece: Piece, Phi: PhaseSystem, grid: Grid, K_max: int = 8,
                svd_tol: float = 1e-12, tol: Optional[float] = None
                ) -> Tuple[List[_KTerm], Dict[str, object]]:
    """Separated factors for the compact piece via its periodic Fourier series.

    The periodization cube is the smallest lattice-aligned cube holding the
    support ``|Xi| < 1/4`` (plus one node of margin per side) and the
    coefficients ``a_K`` come from the trapezoid rule on the lattice nodes.
    Modes with ``|K|_inf > K_max`` are dropped; when the cube holds at most
    ``2 K_max + 1`` nodes per axis nothing is dropped.
    """
    if not piece.x_independent:
        raise MultilinearError("compact piece needs an x-independent amplitude (use x_terms)")
    n, N = piece.n, piece.N
    rows = _box_rows(grid, 0.25)
    B = int(round(rows.size ** (1.0 / n)))
    side = B * grid.dual_spacing
    Xi = _tensor_xi(grid, N, [rows] * N)
    table = np.asarray(piece.of_xi(Xi), dtype=complex)
    c = _box_fft(table, N, n)
    full = np.linalg.norm(c)
    Kax = np.rint(sfft.fftfreq(B, 1.0 / B)).astype(int)
    keep_ax = np.abs(Kax) <= K_max
    keep = np.ones(c.shape, dtype=bool)
    if not keep_ax.all():
        blk = np.ones((B,) * n, dtype=bool)
        for ax in range(n):
            shp = [1] * n
            shp[ax] = B
            blk = blk & keep_ax.reshape(shp)
        keep = blk.ravel()
        for j in range(1, N):
            keep = np.multiply.outer(keep, blk.ravel())
    c = np.where(keep, c, 0.0)
    tail = float(np.sqrt(max(full ** 2 - np.linalg.norm(c) ** 2, 0.0)) / full) if full > 0 else 0.0
    if tol is not None and tail > tol:
        raise MultilinearError(
            f"K_max={K_max} drops relative coefficient mass {tail:.2e} > {tol:.2e}; raise K_max")
    recon = _box_ifft(c, N, n)
    factors = _separate(recon, svd_tol) if full > 0 else []
    P = grid.size
    fine = padded_grid(grid, N)
    terms = []
    if factors:
        arrays = []
        for j in range(N):
            vec = np.zeros((len(factors), P), dtype=complex)
            vec[:, rows] = np.stack([f[j] for f in factors])
            arrays.append(vec * _slot_phase(grid, Phi.phases[j + 1])[None, :])
        terms.append(_KTerm(0, arrays, np.ones(fine.shape), len(factors)))
    info = {"side": side, "nodes_per_axis": B, "K_max": K_max, "tail_mass": tail,
            "rank": len(factors)}
    return terms, info


def sigma0_decay(piece: Piece, side: float = 0.5625, samples: int = 256,
                 floor: float = 1e-13) -> Dict[str, float]:
    """Fitted decay exponent of ``|a_K|`` against ``|K|_inf`` on the tail of the envelope."""
    info = sigma0_coefficients(piece.of_xi, piece.n, piece.N, side, 1, samples)
    env = [(q, v) for q, v in info["envelope"] if q >= 2]
    top = max((v for _, v in env), default=0.0)
    env = [(q, v) for q, v in env if v > floor * top]
    if len(env) < 4:
        return {"slope": -math.inf, "points": len(env)}
    tail = env[len(env) // 2:]
    xs, ys = zip(*[(math.log(q), math.log(v)) for q, v in tail])
    return {"slope": float(np.polyfit(xs, ys, 1)[0]), "points": len(tail),
            "K_range": [tail[0][0], tail[-1][0]]}


# --- assembled fast evaluation -------------------------------------------------------

def plan_fast(sigma: MultiAmplitude, Phi: PhaseSystem, grid: Grid,
              consts: Optional[ConeConstants] = None, tau_U: float = 1e-6,
              K_max: int = 8, svd_tol: float = 1e-7, m_split: Optional[Dict[str, Sequence[float]]] = None,
              residue: int = 0, pieces: Optional[Sequence[str]] = None) -> FastPlan:
    """Plan the fast evaluation of all (or the named) pieces of ``sigma``."""
    t0 = time.perf_counter()
    if not sigma.x_independent:
        raise MultilinearError("plan_fast takes an x-independent amplitude; "
                               "apply_fast handles separable x-terms")
    dec = decompose(sigma, consts)
    fine = padded_grid(grid, sigma.N)
    terms: List[_KTerm] = []
    labels, stats = [], {}
    for p in dec.pieces():
        if pieces is not None and p.label not in pieces:
            continue
        if p.kind == "sigma0":
            t, info = plan_sigma0(p, Phi, grid, K_max=K_max)
            stats[p.label] = info
        else:
            split = (m_split or {}).get(p.label)
            t, uq = plan_piece(p, Phi, grid, svd_tol=svd_tol, tau_U=tau_U, m_split=split,
                               residue=residue, consts=dec.consts)
            st = uq.stats()
            st["rank"] = sum(x.rank for x in t)
            stats[p.label] = st
        terms += t
        labels.append(p.label)
    outer_phase = np.exp(1j * Phi.phases[0](fine.dual_points())).reshape(fine.shape)
    plan = FastPlan(grid, fine, sigma.N, terms, outer_phase, labels)
    plan.build_seconds = time.perf_counter() - t0
    plan.stats = stats
    return plan


def apply_plan(plan: FastPlan, fs: Sequence[SampledField]) -> SampledField:
    grid = _check_inputs(fs, plan.N)
    if grid != plan.grid:
        raise MultilinearError("plan was built for a different grid")
    fhats = [forward_ft_array(grid, f.values).ravel() for f in fs]
    vals = _run_terms(plan.terms, grid, plan.fine, fhats, plan.outer_phase)
    if plan.x_factor is not None:
        vals = vals * plan.x_factor
    return SampledField(grid, Rep.SPACE, vals)


def _single_piece(piece: Piece, Phi, fs, plan_fn, **kw) -> SampledField:
    grid = _check_inputs(fs, piece.N)
    fine = padded_grid(grid, piece.N)
    terms = plan_fn(piece, Phi, grid, **kw)[0]
    outer_phase = np.exp(1j * Phi.phases[0](fine.dual_points())).reshape(fine.shape)
    plan = FastPlan(grid, fine, piece.N, terms, outer_phase, [piece.label])
    return apply_plan(plan, fs)


def apply_sigma_j_fast(piece: Piece, Phi: PhaseSystem, fs: Sequence[SampledField],
                       uq: Optional[UQuadrature] = None, **kw) -> SampledField:
    """Fast evaluation of a dominant-frequency piece."""
    if piece.kind != "sigma_j":
        raise MultilinearError("expected a sigma_j piece")
    return _single_piece(piece, Phi, fs, plan_piece, uq=uq, **kw)


def apply_sigma_jk_fast(piece: Piece, Phi: PhaseSystem, fs: Sequence[SampledField],
                        uq: Optional[UQuadrature] = None, **kw) -> SampledField:
    """Fast evaluation of a comparable-frequency piece."""
    if piece.kind != "sigma_jk":
        raise MultilinearError("expected a sigma_jk piece")
    return _single_piece(piece, Phi, fs, plan_piece, uq=uq, **kw)


def apply_sigma0_fast(piece: Piece, Phi: PhaseSystem, fs: Sequence[SampledField],
                      K_max: int = 8, **kw) -> SampledField:
    """Fast evaluation of the compact piece by separation of variables."""
    if piece.kind != "sigma0":
        raise MultilinearError("expected the sigma0 piece")
    return _single_piece(piece, Phi, fs, plan_sigma0, K_max=K_max, **kw)


def apply_fast(sigma: MultiAmplitude, Phi: PhaseSystem, fs: Sequence[SampledField],
               plan: Optional[FastPlan] = None, **kw) -> SampledField:
    """Sum of the three fast paths over every piece of the decomposition.

    Amplitudes with ``x_terms`` are evaluated term by term and multiplied by
    ``alpha_q(x)`` on the grid.
    """
    grid = _check_inputs(fs, sigma.N)
    if sigma.x_independent:
        plan = plan or plan_fast(sigma, Phi, grid, **kw)
        return apply_plan(plan, fs)
    if not sigma.x_terms:
        raise MultilinearError("x-dependent amplitudes need separable x_terms for the fast path")
    total = np.zeros(grid.shape, dtype=complex)
    for alpha, s in sigma.x_terms:
        part = MultiAmplitude(sigma.n, sigma.N, sigma.m, s, True, "x-term")
        out = apply_plan(plan_fast(part, Phi, grid, **kw), fs)
        total += np.broadcast_to(np.asarray(alpha(*grid.coords()), dtype=complex), grid.shape) * out.values
    return SampledField(grid, Rep.SPACE, total)


# --- Duhamel integral ------------------------------------------------------------------

def duhamel_evolve(m_symbol: Callable, fs: Sequence[SampledField], t: float, steps: int,
                   n: Optional[int] = None) -> SampledField:
    """``u(t) = int_0^t T_s ds`` with the inner operator

    ``T_s = int m(Xi) prod_j f_j_hat(xi_j) exp(i x.xi_j + i s|xi_j|) exp(i (t - s)|xi_1 + ... + xi_N|) dXi``

    by the composite trapezoid rule with ``steps`` intervals in ``s``.
    """
    if steps < 2:
        raise MultilinearError("need at least 2 steps")
    N = len(fs)
    grid = _check_inputs(fs, N)
    n = n or grid.n
    Xi = _tensor_xi(grid, N)
    M = np.asarray(m_symbol(Xi), dtype=complex)
    if t == 0 or not np.any(M):
        return SampledField.zeros(grid)
    w = grid.L ** (-n)
    # The integrand only involves exp(i s (sum|xi_j| - |eta|)) exp(i t |eta|),
    # so each node is one application of an x-independent amplitude.
    sum_r = sum(np.linalg.norm(Xi[..., j, :], axis=-1) for j in range(N))
    eta = np.linalg.norm(Xi.sum(axis=-2), axis=-1)
    fh = [forward_ft_array(grid, f.values).ravel() * w for f in fs]
    X = grid.points()
    E = np.exp(1j * (X @ _lattice_xi(grid).T))
    A = [E * f[None, :] for f in fh]
    s_nodes = np.linspace(0.0, t, steps + 1)
    wts = np.full(steps + 1, t / steps)
    wts[0] = wts[-1] = 0.5 * t / steps
    S = np.zeros(M.shape, dtype=complex)
    for s, ws in zip(s_nodes, wts):
        S += ws * np.exp(1j * (s * sum_r + (t - s) * eta))
    out = _contract(M * S, A)
    return SampledField(grid, Rep.SPACE, out.reshape(grid.shape))


# --- uniform bounds and level-shifted measures ---------------------------------------

def uniform_bound_operator(k: int, u, m: float, phase: Phase, f: SampledField) -> SampledField:
    """``(P_k^u o T_b^phi)(f)`` with ``P_k^u = theta_k(xi) exp(i 2^{-k} xi.u)`` and ``b = 2^{km} omega_k``."""
    grid = f.grid
    xi = _lattice_xi(grid)
    r = np.linalg.norm(xi, axis=-1)
    u = np.broadcast_to(np.asarray(u, dtype=float), (grid.n,))
    mult = (squared_family_radial("theta", k, r) * np.exp(1j * 2.0 ** (-k) * (xi @ u))
            * 2.0 ** (k * m) * squared_family_radial("omega", k, r) * np.exp(1j * phase(xi)))
    spec = forward_ft_array(grid, f.values).ravel() * mult
    return SampledField(grid, Rep.SPACE, inverse_ft_array(grid, spec.reshape(grid.shape)))


def level_shifted_measure(k: int, f: SampledField, phase: Phase, m1: float,
                          u=None, k_prime_max: Optional[int] = None):
    """Slices ``|(Q_{k+k'}^u o T_{d}^phi)(f)|^2`` at ``t = 2^{-k'}``, ``k' >= 0``.

    ``Q_j^u = psi_j(xi) exp(i 2^{-j} xi.u)`` (exponent ``m - m_1 - m_2 = 0``) and
    ``d(xi) = |xi|^{m_1}``; slices whose cutoff misses the lattice are skipped.
    """
    from .spaces import CarlesonMeasure
    grid = f.grid
    xi = _lattice_xi(grid)
    r = np.linalg.norm(xi, axis=-1)
    u = np.zeros(grid.n) if u is None else np.broadcast_to(np.asarray(u, dtype=float), (grid.n,))
    fh = forward_ft_array(grid, f.values).ravel()
    base = _power(r, m1) * np.exp(1j * phase(xi)) * fh
    slices = []
    kp = 0
    rmax = float(r.max())
    while True:
        j = k + kp
        if 2.0 ** (j - 2) >= rmax or (k_prime_max is not None and kp > k_prime_max):
            break
        mult = squared_family_radial("psi", j, r) * np.exp(1j * 2.0 ** (-j) * (xi @ u))
        g = inverse_ft_array(grid, (mult * base).reshape(grid.shape))
        slices.append((kp, np.abs(g) ** 2))
        kp += 1
    return CarlesonMeasure(grid, slices)
