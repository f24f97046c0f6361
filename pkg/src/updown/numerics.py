"""Self-contained numerical kernels.

Adaptive Gauss-Kronrod 15(7) quadrature over extended-real intervals with
geometric peeling toward singular endpoints, a bracketed monotone root solver,
and a Lanczos Gamma. Everything is deterministic: fixed node tables, fixed
budgets, no RNG, so repeated runs produce identical bytes.
"""

import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, IntegrandError

INF = math.inf
_EPS = float(np.finfo(float).eps)

# 15-point Kronrod abscissae on (-1, 1); odd indices are the embedded Gauss-7.
_XK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])


@dataclass(frozen=True)
class Interval:
    """Extended-real open interval with singular-endpoint flags.

    Singular flags are only meaningful on finite endpoints (an infinite end is
    always handled by substitution); lo must be strictly below hi.
    """

    lo: float
    hi: float
    singular_lo: bool = False
    singular_hi: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("interval endpoint is NaN")
        if not self.lo < self.hi:
            raise DomainError(f"empty interval [{self.lo}, {self.hi}]")
        if self.singular_lo and not math.isfinite(self.lo):
            raise DomainError("singular flag on infinite lower endpoint")
        if self.singular_hi and not math.isfinite(self.hi):
            raise DomainError("singular flag on infinite upper endpoint")

    @property
    def bounded(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x):
        return (self.lo < x) & (x < self.hi)


class QuadResult(NamedTuple):
    value: float
    abs_error_estimate: float
    converged: bool


def _as_interval(iv):
    if isinstance(iv, Interval):
        return iv
    lo, hi = iv
    return Interval(lo, hi)


def _gk(f, a, b):
    """Kronrod values and QUADPACK-style errors for a batch of panels."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _XK[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if np.isnan(y).any():
        i, j = np.argwhere(np.isnan(y))[0]
        raise IntegrandError(f"integrand returned NaN at x={x[i, j]!r}")
    ik = half * (y * _WK).sum(axis=1)
    ig = half * (y[:, 1::2] * _WG).sum(axis=1)
    with np.errstate(invalid="ignore", over="ignore"):
        mean = ik / (b - a)
        resasc = half * (np.abs(y - mean[:, None]) * _WK).sum(axis=1)
        diff = np.abs(ik - ig)
        err = np.where(
            resasc > 0.0,
            resasc * np.minimum(1.0, (200.0 * diff / np.where(resasc > 0, resasc, 1.0)) ** 1.5),
            diff,
        )
    return ik, err


class _Piece:
    """One finite integration piece in (possibly transformed) coordinates."""

    __slots__ = ("g", "a", "b", "sing_lo", "sing_hi")

    def __init__(self, g, a, b, sing_lo, sing_hi):
        self.g = g
        self.a = a
        self.b = b
        self.sing_lo = sing_lo
        self.sing_hi = sing_hi


def _nan_guard(f, xmap):
    """Wrap f(xmap(t)); non-finite abscissae give 0, NaN values raise."""

    def g(t):
        x, jac = xmap(t)
        ok = np.isfinite(x)
        y = np.zeros_like(x)
        if ok.any():
            yi = np.asarray(f(x[ok]), dtype=float)
            if np.isnan(yi).any():
                bad = x[ok][np.isnan(yi)][0]
                raise IntegrandError(f"integrand returned NaN at x={bad!r}")
            y[ok] = yi
        return y * jac

    return g


def _wrap_right_inf(f, a):
    # x = a - 1 + 1/s maps s in (0,1) -> (a, inf); infinity sits at s = 0,
    # where float spacing is dense enough for the geometric peel.
    def xmap(s):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            x = (a - 1.0) + 1.0 / s
            jac = 1.0 / s**2
        return x, jac

    return _nan_guard(f, xmap)


def _wrap_left_inf(f, b):
    # x = b + 1 - 1/s maps s in (0,1) -> (-inf, b)
    def xmap(s):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            x = (b + 1.0) - 1.0 / s
            jac = 1.0 / s**2
        return x, jac

    return _nan_guard(f, xmap)


def _pieces(f, iv, interior):
    """Cut the interval at interior points; map infinite ends onto (0, 1)."""
    pts = sorted({float(p) for p in interior if iv.lo < p < iv.hi})
    edges = [iv.lo] + pts + [iv.hi]
    pieces = []
    for i in range(len(edges) - 1):
        a, b = edges[i], edges[i + 1]
        # interior cut points are treated as potentially singular on both sides
        s_lo = iv.singular_lo if i == 0 else True
        s_hi = iv.singular_hi if i == len(edges) - 2 else True
        if a == -INF and b == INF:
            pieces.append(_Piece(_wrap_left_inf(f, 0.0), 0.0, 1.0, True, False))
            pieces.append(_Piece(_wrap_right_inf(f, 0.0), 0.0, 1.0, True, False))
        elif b == INF:
            pieces.append(_Piece(_wrap_right_inf(f, a), 0.0, 1.0, True, s_lo))
        elif a == -INF:
            pieces.append(_Piece(_wrap_left_inf(f, b), 0.0, 1.0, True, s_hi))
        else:
            def direct(x, _f=f):
                y = np.asarray(_f(np.asarray(x, dtype=float)), dtype=float)
                if np.isnan(y).any():
                    bad = np.asarray(x, dtype=float)[np.isnan(y)][0]
                    raise IntegrandError(f"integrand returned NaN at x={bad!r}")
                return y
            pieces.append(_Piece(direct, a, b, s_lo, s_hi))
    return pieces


def _peel(g, edge, other, tol):
    """Geometric panels (ratio 1/2) from `other` toward a singular `edge`.

    Returns seed panels for adaptive refinement plus an extrapolated value
    and error charge for the unreachable stub next to the edge. Panel
    contributions of an integrable power singularity decay geometrically, so
    the stub is summed by its measured ratio; a ratio near 1 signals a
    non-integrable edge and is reported as a large error charge instead.
    """
    span = other - edge
    # Width floor balances abscissa quantization against extrapolation model
    # error: nodes near a nonzero edge are snapped to the ulp(edge) grid, so
    # stopping around width ~ 3e-8 * |edge| keeps both effects near 1e-10.
    # An edge at exactly 0 peels to full depth (floats are dense there).
    floor = max(3e-8 * abs(edge), 1e-300)
    kmax = 0
    while kmax < 64 and abs(span) * 0.5 ** (kmax + 1) >= floor:
        kmax += 1
    if kmax < 2:
        val, err = _gk(g, [min(edge, other)], [max(edge, other)])
        return [(min(edge, other), max(edge, other), val[0], err[0])], 0.0, float(err[0])
    xs = edge + span * 0.5 ** np.arange(kmax + 1)
    a = np.minimum(xs[1:], xs[:-1])
    b = np.maximum(xs[1:], xs[:-1])
    vals, errs = _gk(g, a, b)
    cut = kmax - 1
    for k in range(4, kmax):
        if abs(vals[k]) < tol / 8.0:
            cut = k
            break
    panels = [(a[k], b[k], vals[k], errs[k]) for k in range(cut + 1)]
    c0, c1, c2 = vals[cut], vals[cut - 1], vals[cut - 2]
    stub_val = 0.0
    stub_err = 8.0 * abs(c0)
    if abs(c1) > 1e-300 and abs(c2) > 1e-300:
        r1 = c0 / c1
        r2 = c1 / c2
        drift = abs(r1 - r2)
        if abs(r1) <= 0.97 and drift <= 0.1:
            stub_val = c0 * r1 / (1.0 - r1)
            stub_err = abs(stub_val) * max(4.0 * drift, 1e-12)
        elif abs(r1) > 0.97:
            stub_err = 1000.0 * abs(c0)  # non-integrable edge: flag divergence
    return panels, stub_val, stub_err


def _adaptive(g, seeds, tol, budget):
    """Worst-first refinement of seed panels; returns (value, error, used)."""
    heap = []
    total_val = 0.0
    total_err = 0.0
    count = 0
    for (a, b, val, err) in seeds:
        heapq.heappush(heap, (-err, count, a, b, val, err))
        count += 1
        total_val += val
        total_err += err
    if not np.isfinite(total_val):
        return total_val, INF, len(seeds)
    frozen_val = 0.0
    frozen_err = 0.0
    used = len(seeds)
    while heap and used < budget and total_err > tol:
        _, _, a, b, val, err = heapq.heappop(heap)
        total_val -= val
        total_err -= err
        scale = max(abs(a), abs(b), 1.0)
        if (b - a) < 256.0 * _EPS * scale:
            frozen_val += val
            frozen_err += err
            continue
        m = 0.5 * (a + b)
        v2, e2 = _gk(g, [a, m], [m, b])
        if not np.isfinite(v2).all():
            return total_val + frozen_val + float(v2.sum()), INF, used
        for (aa, bb, vv, ee) in ((a, m, v2[0], e2[0]), (m, b, v2[1], e2[1])):
            heapq.heappush(heap, (-ee, count, aa, bb, vv, ee))
            count += 1
        total_val += float(v2.sum())
        total_err += float(e2.sum())
        used += 1
    return total_val + frozen_val, total_err + frozen_err, used


def _integrate_piece(piece, tol, budget):
    g, a, b = piece.g, piece.a, piece.b
    if piece.sing_lo and piece.sing_hi:
        m = 0.5 * (a + b)
        left = _integrate_piece(_Piece(g, a, m, True, False), tol / 2, budget // 2)
        right = _integrate_piece(_Piece(g, m, b, False, True), tol / 2, budget // 2)
        return left[0] + right[0], left[1] + right[1]
    if piece.sing_lo:
        seeds, stub_val, stub_err = _peel(g, a, b, tol)
    elif piece.sing_hi:
        seeds, stub_val, stub_err = _peel(g, b, a, tol)
    else:
        vals, errs = _gk(g, [a], [b])
        seeds, stub_val, stub_err = [(a, b, vals[0], errs[0])], 0.0, 0.0
    val, err, _ = _adaptive(g, seeds, max(tol - stub_err, tol / 4), budget)
    return val + stub_val, err + stub_err


def integrate(f, iv, tol=1e-10, *, rtol=None, interior=(), max_panels=4096):
    """Integrate a vectorized callable over an extended-real interval.

    interior lists abscissae where the integrand may be singular or kinked;
    the interval is cut there. Divergent integrals come back with converged
    False (value may be +-inf); NaN from the integrand raises IntegrandError
    naming the abscissa; infinite endpoints are mapped to (0, 1).
    """
    iv = _as_interval(iv)
    pieces = _pieces(f, iv, interior)
    per_tol = tol / len(pieces)
    per_budget = max(64, max_panels // len(pieces))
    value = 0.0
    err = 0.0
    diverged = False
    for piece in pieces:
        v, e = _integrate_piece(piece, per_tol, per_budget)
        value += v
        err += e
        if not (np.isfinite(v) and np.isfinite(e)):
            diverged = True
    bound = max(tol, (rtol or 0.0) * abs(value))
    converged = bool((not diverged) and err <= bound)
    return QuadResult(float(value), float(err), converged)


def solve_monotone(g, target, lo, hi, *, xtol=1e-13, max_iter=200):
    """Root of g(x) = target on a straddling bracket of a monotone g.

    Brent-style: inverse-quadratic / secant steps guarded by bisection. A
    non-straddling bracket raises DomainError; failure to shrink onto a root
    (non-monotone or discontinuous g) raises PreconditionError.
    """
    from .errors import PreconditionError

    a, b = float(lo), float(hi)
    fa = float(g(a)) - target
    fb = float(g(b)) - target
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if math.isnan(fa) or math.isnan(fb):
        raise DomainError(f"bracket value is NaN at {a if math.isnan(fa) else b}")
    if fa * fb > 0.0:
        raise DomainError(f"bracket [{a}, {b}] does not straddle target {target}")
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0.0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _EPS * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = float(g(b)) - target
        if math.isnan(fb):
            raise PreconditionError(f"function value became NaN at {b}")
    raise PreconditionError("root bracketing failed to converge; "
                            "function is not monotone on the bracket")


def solve_monotone_vec(g, targets, lo, hi, iters=90):
    """Vectorized bisection for arrays of straddling brackets.

    g maps an array of abscissae to an array of values and must be monotone
    on each bracket. Fixed iteration count keeps the result deterministic.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    targets = np.asarray(targets, dtype=float)
    increasing = np.asarray(g(hi)) >= np.asarray(g(lo))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = np.asarray(g(mid))
        go_right = np.where(increasing, val < targets, val > targets)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


# Lanczos coefficients, g = 7, 9 terms.
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(x):
    """Gamma function for x > 0 via a fixed-coefficient Lanczos sum."""
    x = float(x)
    if math.isnan(x) or x <= 0.0:
        raise DomainError(f"gamma requires x > 0, got {x}")
    if x < 0.5:
        return gamma(x + 1.0) / x
    z = x - 1.0
    acc = _LANCZOS[0]
    for i, c in enumerate(_LANCZOS[1:], start=1):
        acc += c / (z + i)
    t = z + 7.5
    if x > 20.0:  # log form avoids overflow of t ** (z + 0.5)
        out = math.exp((z + 0.5) * math.log(t) - t + math.log(2.50662827463100050 * acc))
        return out
    return 2.50662827463100050 * t ** (z + 0.5) * math.exp(-t) * acc
