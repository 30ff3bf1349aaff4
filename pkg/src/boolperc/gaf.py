"""Truncated planar Gaussian analytic functions and their zeros.

The function is ``f_n(z) = sum_k xi_k z**k / sqrt(k!)`` with i.i.d. standard
complex Gaussian ``xi_k``.  Raw coefficients span hundreds of orders of
magnitude, so everything here works with the normalized field
``f*(z) = exp(-|z|**2 / 2) f_n(z)``, whose modulus is O(1) in the bulk.

Root finding is certified rather than trusted: every root returned for a
region has ``|f*(root)|`` below a residual tolerance, and the number of roots
equals the winding number of ``f_n`` along the region's boundary.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial import cKDTree
from scipy.special import gammaln

from .pointconfig import Window

log = logging.getLogger(__name__)

ROOT_TOLERANCE = 1e-8
CONTOUR_START_DENSITY = 64
COMPANION_MAX_DEGREE = 64
GRID_STEP = 0.125


class RootReconciliationError(RuntimeError):
    """Roots could not be certified (residual or argument-principle mismatch)."""

    def __init__(self, message: str, diagnostic: dict | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class ContourError(RootReconciliationError):
    """The winding number along a contour did not stabilise."""


@dataclass(frozen=True, eq=False)
class GafPolynomial:
    """Coefficients ``xi_0..xi_n`` of the truncated GAF of degree ``n``."""

    coefficients: np.ndarray

    def __post_init__(self):
        xi = np.array(self.coefficients, dtype=np.complex128).ravel()
        if xi.size < 1:
            raise ValueError("need at least one coefficient")
        if xi[-1] == 0:
            raise ValueError("leading coefficient xi_n must be non-zero")
        xi.setflags(write=False)
        object.__setattr__(self, "coefficients", xi)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    @classmethod
    def draw(cls, degree: int, rng: np.random.Generator) -> "GafPolynomial":
        if degree < 0:
            raise ValueError("degree must be >= 0")
        g = rng.standard_normal((degree + 1, 2))
        return cls((g[:, 0] + 1j * g[:, 1]) / math.sqrt(2.0))

    def __call__(self, z):
        return evaluate_normalized_gaf(self, z)


# ---------------------------------------------------------------------------
# pointwise evaluation

_TABLE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _sqrt_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    tabs = _TABLE_CACHE.get(n)
    if tabs is None:
        k = np.arange(n + 2, dtype=float)
        sq = np.sqrt(k)
        inv = np.zeros_like(sq)
        inv[1:] = 1.0 / sq[1:]
        tabs = (sq, inv)
        if len(_TABLE_CACHE) > 64:
            _TABLE_CACHE.clear()
        _TABLE_CACHE[n] = tabs
    return tabs


@njit(cache=True, nogil=True)
def _fstar_scaled_kernel(xr, xim, xdr, xdi, zr, zi, sqrt_k, inv_sqrt, out_val, out_der, out_log):
    # f*(z) = out_val * exp(out_log); exp(-|z|^2/2) f'(z) = out_der * exp(out_log).
    # Terms u_k = z^k / sqrt(k!) exp(-|z|^2/2) are generated by recursion outward
    # from the peak index k0 ~ |z|^2, so no intermediate overflows.
    # xd = xi_k sqrt(k) carries the derivative: f'-sum is sum_j xd_{j+1} u_j.
    n = xr.shape[0] - 1
    cutoff = 1e-18
    for p in range(zr.shape[0]):
        x = zr[p]
        y = zi[p]
        s = x * x + y * y
        if s == 0.0:
            out_val[p] = complex(xr[0], xim[0])
            out_der[p] = complex(xdr[1], xdi[1]) if n >= 1 else 0.0j
            out_log[p] = 0.0
            continue
        k0 = int(s)
        if k0 > n:
            k0 = n
        out_log[p] = 0.5 * k0 * math.log(s) - 0.5 * math.lgamma(k0 + 1.0) - 0.5 * s
        ang = k0 * math.atan2(y, x)
        ur0 = math.cos(ang)
        ui0 = math.sin(ang)
        vr = 0.0
        vi = 0.0
        dr = 0.0
        di = 0.0
        ur = ur0
        ui = ui0
        k = k0
        while True:
            vr += xr[k] * ur - xim[k] * ui
            vi += xr[k] * ui + xim[k] * ur
            if k == n:
                break
            dr += xdr[k + 1] * ur - xdi[k + 1] * ui
            di += xdr[k + 1] * ui + xdi[k + 1] * ur
            k += 1
            c = inv_sqrt[k]
            t = (ur * x - ui * y) * c
            ui = (ur * y + ui * x) * c
            ur = t
            if abs(ur) + abs(ui) < cutoff:
                break
        ur = ur0
        ui = ui0
        k = k0
        ix = x / s
        iy = -y / s
        while k > 0:
            c = sqrt_k[k]
            t = (ur * ix - ui * iy) * c
            ui = (ur * iy + ui * ix) * c
            ur = t
            k -= 1
            vr += xr[k] * ur - xim[k] * ui
            vi += xr[k] * ui + xim[k] * ur
            dr += xdr[k + 1] * ur - xdi[k + 1] * ui
            di += xdr[k + 1] * ui + xdi[k + 1] * ur
            if abs(ur) + abs(ui) < cutoff:
                break
        out_val[p] = complex(vr, vi)
        out_der[p] = complex(dr, di)


def _split(poly: GafPolynomial):
    cached = poly.__dict__.get("_split_cache")
    if cached is None:
        sq, inv = _sqrt_tables(poly.degree)
        xi = poly.coefficients
        xd = xi * sq[: xi.size]
        cached = (np.ascontiguousarray(xi.real), np.ascontiguousarray(xi.imag),
                  np.ascontiguousarray(xd.real), np.ascontiguousarray(xd.imag), sq, inv)
        object.__setattr__(poly, "_split_cache", cached)
    return cached


def _evaluate_scaled(poly: GafPolynomial, z):
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    flat = z.ravel()
    xr, xim, xdr, xdi, sq, inv = _split(poly)
    val = np.empty(flat.size, dtype=np.complex128)
    der = np.empty(flat.size, dtype=np.complex128)
    lg = np.empty(flat.size, dtype=np.float64)
    _fstar_scaled_kernel(xr, xim, xdr, xdi, np.ascontiguousarray(flat.real),
                         np.ascontiguousarray(flat.imag), sq, inv, val, der, lg)
    return val.reshape(z.shape), der.reshape(z.shape), lg.reshape(z.shape)


def evaluate_normalized_gaf(poly: GafPolynomial, z):
    """``exp(-|z|^2/2) * f_n(z)``; scalar in, scalar out, arrays elementwise."""
    scalar = np.ndim(z) == 0
    val, _, lg = _evaluate_scaled(poly, z)
    out = val * np.exp(lg)
    return complex(out[0]) if scalar else out


def evaluate_normalized_gaf_with_derivative(poly: GafPolynomial, z):
    """Return ``(f*(z), exp(-|z|^2/2) f_n'(z))``."""
    val, der, lg = _evaluate_scaled(poly, z)
    scale = np.exp(lg)
    if np.ndim(z) == 0:
        return complex(val[0] * scale[0]), complex(der[0] * scale[0])
    return val * scale, der * scale


# ---------------------------------------------------------------------------
# evaluation on origin-centred circles (FFT)

class _RingEvaluator:
    """Values of ``f*`` on ``|z| = rho`` at ``M`` equispaced angles via one FFT.

    Values are returned divided by a positive per-ring constant (the largest
    term), which leaves arguments and ratios within a ring intact.
    """

    def __init__(self, poly: GafPolynomial):
        self.xi = poly.coefficients
        self.n = poly.degree
        self.half_lgamma = 0.5 * gammaln(np.arange(self.n + 1) + 1.0)

    def __call__(self, rho: float, M: int, *, scaled: bool = True):
        if rho == 0.0:
            return np.full(M, self.xi[0], dtype=np.complex128), 0.0
        s = rho * rho
        width = 14.0 * math.sqrt(s) + 8.0
        lo = max(0, int(s - width))
        hi = min(self.n, int(s + width) + 1)
        k = np.arange(lo, hi + 1)
        ell = k * math.log(rho) - self.half_lgamma[lo:hi + 1] - 0.5 * s
        top = float(ell.max())
        keep = ell > top - 48.0
        k = k[keep]
        c = self.xi[k] * np.exp(ell[keep] - top)
        idx = k % M
        folded = np.bincount(idx, weights=c.real, minlength=M) + 1j * np.bincount(
            idx, weights=c.imag, minlength=M)
        vals = M * np.fft.ifft(folded)
        if not scaled:
            return vals * math.exp(top), 0.0
        return vals, top


def circle_values(poly: GafPolynomial, rho: float, M: int) -> np.ndarray:
    """``f*`` at ``rho * exp(2 pi i m / M)``, m = 0..M-1."""
    vals, _ = _RingEvaluator(poly)(float(rho), int(M), scaled=False)
    return vals


# ---------------------------------------------------------------------------
# argument principle

def _square_contour(window: Window, per_edge: int) -> np.ndarray:
    x0, x1, y0, y1 = window.bounds
    t = np.arange(per_edge) / per_edge
    bottom = (x0 + (x1 - x0) * t) + 1j * y0
    right = x1 + 1j * (y0 + (y1 - y0) * t)
    top = (x1 - (x1 - x0) * t) + 1j * y1
    left = x0 + 1j * (y1 - (y1 - y0) * t)
    return np.concatenate([bottom, right, top, left])


def _drift(z_from, z_to):
    # Expected argument change of f* along a short step: locally
    # f*(w + u) = g(u) exp(-|u|^2/2 + i Im(u conj(w))) with g stationary.
    return (z_to * np.conj(z_from)).imag


def _winding_from_values(z: np.ndarray, vals: np.ndarray) -> tuple[int, float]:
    """Winding of a closed polyline; returns (count, largest de-drifted step)."""
    if np.any(vals == 0):
        raise ContourError("f vanishes on the contour")
    z_next = np.roll(z, -1)
    drift = _drift(z, z_next)
    steps = np.angle(np.roll(vals, -1) / vals * np.exp(-1j * drift))
    total = (steps.sum() + drift.sum()) / (2 * np.pi)
    return int(round(total)), float(np.max(np.abs(steps)))


def _refine_segments(poly, z, val, bad):
    """Insert a midpoint into each segment ``z[i] -> z[i+1]`` flagged in ``bad``."""
    idx = np.flatnonzero(bad)
    mid = 0.5 * (z[idx] + z[(idx + 1) % z.size])
    # per-point positive scale factors leave the arguments intact
    mval, _, _ = _evaluate_scaled(poly, mid)
    return np.insert(z, idx + 1, mid), np.insert(val, idx + 1, mval)


def window_winding_number(poly: GafPolynomial, window: Window,
                          start_density: float = CONTOUR_START_DENSITY,
                          max_doublings: int = 10, max_local: int = 40) -> int:
    """Number of zeros of ``f_n`` inside ``window`` by the argument principle.

    Node density starts at ``start_density`` per unit length and doubles until
    the count is unchanged over two consecutive doublings and no single step
    turns the argument by more than pi/2.  If the count is stable but a zero
    sits closer to the contour than the node spacing, only the offending
    segments are bisected further.
    """
    per_edge = max(4, int(math.ceil(window.side * start_density)))
    z = _square_contour(window, per_edge)
    val, _, _ = _evaluate_scaled(poly, z)
    history = []
    for _ in range(max_doublings + 1):
        w, max_step = _winding_from_values(z, val)
        history.append(w)
        stable = len(history) >= 3 and history[-1] == history[-2] == history[-3]
        if stable and max_step < np.pi / 2:
            return w
        if stable:
            break
        z, val = _refine_segments(poly, z, val, np.ones(z.size, dtype=bool))
    else:
        raise ContourError("argument-principle count did not stabilise",
                           {"window": window.to_dict(), "history": history})
    for _ in range(max_local):
        z_next = np.roll(z, -1)
        steps = np.angle(np.roll(val, -1) / val * np.exp(-1j * _drift(z, z_next)))
        bad = np.abs(steps) >= np.pi / 4
        if not bad.any():
            break
        z, val = _refine_segments(poly, z, val, bad)
    w, max_step = _winding_from_values(z, val)
    if max_step >= np.pi / 2:
        raise ContourError("a zero lies on the contour to working precision",
                           {"window": window.to_dict(), "history": history, "max_step": max_step})
    return w


def circle_winding_number(poly: GafPolynomial, rho: float, start_nodes: int = 256,
                          max_doublings: int = 10) -> int:
    ev = _RingEvaluator(poly)
    M = start_nodes
    history = []
    for _ in range(max_doublings + 1):
        vals, _ = ev(rho, M)
        z = rho * np.exp(2j * np.pi * np.arange(M) / M)
        w, max_step = _winding_from_values(z, vals)
        history.append(w)
        if len(history) >= 3 and history[-1] == history[-2] == history[-3] and max_step < np.pi / 2:
            return w
        M *= 2
    raise ContourError("circle winding did not stabilise", {"rho": rho, "history": history})


# ---------------------------------------------------------------------------
# root finding

def _newton_polish(poly: GafPolynomial, z0: np.ndarray, maxiter: int = 60):
    """Newton on ``g(z) = exp(-z conj(w)) f(z)`` anchored at each start ``w``.

    Same zeros as ``f``, but the anchor removes the ``exp(z conj(w))`` growth
    that shrinks the basin of plain Newton to ~1/|w|.
    """
    z = np.array(z0, dtype=np.complex128)
    anchor = np.conj(z)
    active = np.ones(z.size, dtype=bool)
    for _ in range(maxiter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        val, der, _ = _evaluate_scaled(poly, z[idx])
        denom = der - anchor[idx] * val
        ok = denom != 0
        step = np.zeros(idx.size, dtype=np.complex128)
        step[ok] = val[ok] / denom[ok]
        big = np.abs(step) > 0.5
        step[big] *= 0.5 / np.abs(step[big])
        z[idx] -= step
        done = np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(z[idx]))
        active[idx[done | ~ok]] = False
    return z, ~active


def _dedupe(z: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if z.size < 2:
        return z
    pts = np.column_stack([z.real, z.imag])
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    if pairs.size == 0:
        return z
    drop = np.zeros(z.size, dtype=bool)
    for a, b in pairs:
        if not drop[a]:
            drop[b] = True
    return z[~drop]


def _companion_roots(poly: GafPolynomial) -> np.ndarray:
    """All ``n`` roots from the companion matrix of the rescaled polynomial."""
    n = poly.degree
    if n == 0:
        return np.empty(0, dtype=np.complex128)
    sigma = math.sqrt(n)
    k = np.arange(n + 1)
    ell = k * math.log(sigma) - 0.5 * gammaln(k + 1.0)
    c = poly.coefficients * np.exp(ell - ell.max())
    v = np.roots(c[::-1])
    z = sigma * v.astype(np.complex128)
    zp, conv = _newton_polish(poly, z)
    # keep the polished value unless polishing collapsed two roots together
    if _dedupe(zp).size == zp.size:
        return zp
    log.warning("companion polishing merged roots; keeping unpolished values where needed")
    out = zp.copy()
    tree = cKDTree(np.column_stack([zp.real, zp.imag]))
    for a, b in tree.query_pairs(1e-9):
        out[b] = z[b]
    return out


def _grid_candidates(poly: GafPolynomial, rho_min: float, rho_max: float, h: float):
    """Starting points for Newton from a polar grid of cells with non-zero winding.

    Returns ``(starts, suspicious)``; ``suspicious`` is set when some cell has a
    winding outside {0, 1}, i.e. the grid is too coarse around that cell.
    """
    ev = _RingEvaluator(poly)
    n_rings = int(math.ceil((rho_max - rho_min) / h)) + 1
    rhos = rho_min + h * np.arange(n_rings + 1)

    def n_angles(rho):
        need = max(8.0, 2 * np.pi * rho / h)
        return int(2 ** math.ceil(math.log2(need)))

    m_cell = [n_angles(rhos[j + 1]) for j in range(n_rings)]
    m_eval = m_cell + [n_angles(rhos[-1])]
    vals = [ev(float(rhos[j]), m_eval[j])[0] for j in range(n_rings + 1)]

    starts = []
    suspicious = False
    for j in range(n_rings):
        M = m_cell[j]
        inner = vals[j]
        outer = vals[j + 1][:: m_eval[j + 1] // M]
        inner_next = np.roll(inner, -1)
        outer_next = np.roll(outer, -1)
        # counter-clockwise loop inner(m) -> outer(m) -> outer(m+1) -> inner(m+1);
        # arcs are de-drifted, radial edges carry no drift
        dphi = 2 * np.pi / M
        arc_in = rhos[j] ** 2 * math.sin(dphi)
        arc_out = rhos[j + 1] ** 2 * math.sin(dphi)
        turn = (np.angle(outer / inner)
                + np.angle(outer_next / outer * np.exp(-1j * arc_out))
                + np.angle(inner_next / outer_next)
                + np.angle(inner / inner_next * np.exp(1j * arc_in))
                + arc_out - arc_in)
        wind = np.rint(turn / (2 * np.pi)).astype(int)
        hit = np.flatnonzero(wind != 0)
        if hit.size == 0:
            continue
        if np.any(wind[hit] < 0) or np.any(wind[hit] > 1):
            suspicious = True
        rho_c = rhos[j] + 0.5 * h
        ang = (hit + 0.5) * (2 * np.pi / M)
        centre = rho_c * np.exp(1j * ang)
        starts.append(centre)
        # a cell with winding 2 seeds extra starts at its corners
        multi = hit[wind[hit] > 1]
        for m in multi:
            a0, a1 = m * 2 * np.pi / M, (m + 1) * 2 * np.pi / M
            starts.append(np.array([rhos[j] * np.exp(1j * a0), rhos[j + 1] * np.exp(1j * a1)]))
    if not starts:
        return np.empty(0, dtype=np.complex128), suspicious
    return np.concatenate(starts), suspicious


def _distance_to_window(window: Window) -> float:
    x0, x1, y0, y1 = window.bounds
    dx = max(x0, 0.0, -x1)
    dy = max(y0, 0.0, -y1)
    return math.hypot(dx, dy)


def _certify(poly, roots, window, expected, root_tolerance):
    inside = roots[window.contains_complex(roots)] if roots.size else roots
    inside = _dedupe(inside)
    resid = np.abs(evaluate_normalized_gaf(poly, inside)) if inside.size else np.empty(0)
    ok = inside.size == expected and bool(np.all(resid < root_tolerance))
    return inside, resid, ok


def find_polynomial_roots(poly: GafPolynomial, region: Window | None = None, *,
                          root_tolerance: float = ROOT_TOLERANCE,
                          method: str = "auto", grid_step: float = GRID_STEP,
                          max_refinements: int = 3) -> np.ndarray:
    """Zeros of ``f_n`` in the closed square ``region`` (all zeros if ``None``).

    With a region, the result is certified: the count equals the
    argument-principle winding number along the region boundary and every
    root has ``|f*(root)| < root_tolerance``.  ``method`` is ``"companion"``,
    ``"grid"`` or ``"auto"`` (companion up to degree 64).

    Raises
    ------
    RootReconciliationError
        If the two checks cannot be satisfied after refinement.
    """
    if method not in ("auto", "companion", "grid"):
        raise ValueError(f"unknown method {method!r}")
    n = poly.degree
    if region is None:
        roots = _companion_roots(poly)
        resid = np.abs(evaluate_normalized_gaf(poly, roots)) if roots.size else np.empty(0)
        if roots.size != n or np.any(resid >= root_tolerance):
            raise RootReconciliationError(
                "companion roots failed the residual check",
                {"degree": n, "max_residual": float(resid.max(initial=0.0))},
            )
        return roots

    expected = window_winding_number(poly, region)
    if n == 0:
        if expected != 0:
            raise RootReconciliationError("degree-0 function with non-zero winding")
        return np.empty(0, dtype=np.complex128)

    diag = {"degree": n, "window": region.to_dict(), "winding": expected, "attempts": []}
    use_companion = method == "companion" or (method == "auto" and n <= COMPANION_MAX_DEGREE)
    if use_companion:
        inside, resid, ok = _certify(poly, _companion_roots(poly), region, expected, root_tolerance)
        diag["attempts"].append({"method": "companion", "found": int(inside.size),
                                 "max_residual": float(resid.max(initial=0.0))})
        if ok:
            return inside
        if method == "companion":
            raise RootReconciliationError("companion roots failed reconciliation", diag)

    rho_min = max(0.0, _distance_to_window(region) - grid_step)
    rho_max = region.circumradius + grid_step
    h = grid_step
    for _ in range(max_refinements + 1):
        starts, suspicious = _grid_candidates(poly, rho_min, rho_max, h)
        roots, conv = _newton_polish(poly, starts)
        roots = roots[conv]
        inside, resid, ok = _certify(poly, roots, region, expected, root_tolerance)
        diag["attempts"].append({"method": "grid", "step": h, "found": int(inside.size),
                                 "suspicious": suspicious,
                                 "max_residual": float(resid.max(initial=0.0))})
        if ok:
            return inside
        log.info("root reconciliation retry: found %d, expected %d (step %.4g)",
                 inside.size, expected, h)
        h /= 2
    raise RootReconciliationError(
        f"found {diag['attempts'][-1]['found']} roots but winding number is {expected}", diag)
