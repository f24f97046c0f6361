"""Density images under the down and up changes of variable.

The down map sends a strictly monotone density f through the canonical
coordinate s = f**(2-alpha)/(alpha-2) (s = -log f at alpha = 2) and carries
the pdf to f**alpha/|f'|; it consumes one derivative order. The up map
integrates the weight |(alpha-2)v|**(1/(alpha-2)) (e**v at alpha = 2)
against f from an anchor and reads the image pdf off the inverse
coordinate; it restores one order. Both maps preserve mass exactly, so a
transformed density evaluates every expectation by pulling the integrand
back to the root density's coordinates, where the quadrature cuts are
already understood. Image-space pdf queries go through an eagerly built
monotone bracket table and vectorized bisection.
"""

import copy
import math

import numpy as np

from .densities import Density, rescale
from .errors import (CapabilityError, DomainError, PreconditionError,
                     TransformChainError)
from .numerics import INF, Interval, _gk, integrate


def _forward(root, layers, x, needs):
    """Image coordinate and pdf-state tuple after the full layer stack.

    needs = -1 asks for the coordinate alone. A down layer consumes one
    derivative order of its base, an up layer supplies one.
    """
    orders = [0] * len(layers)
    req = needs
    for j in reversed(range(len(layers))):
        orders[j] = req
        if layers[j].kind == "down":
            req = req + 1 if req >= 0 else 0
        else:
            req = max(req - 1, -1)
    rx = np.asarray(x, dtype=float)
    state = tuple(root._state(rx, max(req, 0)))
    coord = rx
    with np.errstate(all="ignore"):
        for j, layer in enumerate(layers):
            coord, state = layer.push(rx, coord, state, orders[j])
    return coord, state


class _DownLayer:
    kind = "down"

    def __init__(self, alpha):
        self.alpha = float(alpha)

    def push(self, rx, coord, state, order):
        al = self.alpha
        f0 = state[0]
        with np.errstate(all="ignore"):
            logf = np.log(f0)
            s = -logf if al == 2.0 else np.exp((2.0 - al) * logf) / (al - 2.0)
            if order < 0:
                return s, ()
            f1 = state[1]
            lf1 = np.log(np.abs(f1))
            out = [np.exp(al * logf - lf1)]
            if order >= 1:
                f2 = state[2]
                # quotient form: f0*f2 and f1**2 underflow separately deep in
                # a tail while the ratios stay well-scaled
                q01 = f0 / f1
                q21 = f2 / f1
                brak = al - q01 * q21
                out.append(-np.exp((2.0 * al - 2.0) * logf - lf1) * brak)
            if order >= 2:
                f3 = state[3]
                brakp = -q21 - q01 * (f3 / f1) + 2.0 * q01 * q21 ** 2
                pref = np.exp((3.0 * al - 4.0) * logf)
                out.append(np.sign(f1) * pref
                           * ((2.0 * al - 2.0) * f1 * brak + f0 * brakp
                              - f0 * brak * q21) / f1 ** 2)
        return s, tuple(out)


class _UpLayer:
    """Holds the cumulative weight table that realizes one up step.

    Everything is tabulated in root abscissae: the new coordinate is
    u(t) = sigma * (C(anchor) - C(t)) with C the running integral of
    W(t) = weight(chi(t)) * f_root(t), where chi is the coordinate map of
    the preceding layers and sigma its orientation.
    """

    kind = "up"

    def __init__(self, root, prefix, alpha):
        self.alpha = float(alpha)
        self.c = self.alpha - 2.0
        self._root = root
        self._prefix = tuple(prefix)
        self._locate_zero()
        self._build_table()
        self._set_anchor()

    # -- weight in root coordinates -----------------------------------------

    def _chi(self, t):
        coord, _ = _forward(self._root, self._prefix, np.asarray(t, dtype=float), -1)
        return np.asarray(coord, dtype=float)

    def _w_root(self, t):
        t = np.asarray(t, dtype=float)
        fr = self._root.pdf(t)
        ch = self._chi(t)
        with np.errstate(all="ignore"):
            # the weight and the pdf can over/underflow separately; sum logs
            lw = ch if self.c == 0.0 else \
                (math.log(abs(self.c)) + np.log(np.abs(ch))) / self.c
            y = np.exp(lw + np.log(fr))
        return np.where((fr > 0.0) & np.isfinite(y), y, 0.0)

    def _w_rho(self, rho, side):
        # t = zc + side * rho**(1/q) straightens the |chi|**(1/c) spike: the
        # substituted integrand tends to a finite limit at rho = 0
        rho = np.asarray(rho, dtype=float)
        with np.errstate(all="ignore"):
            step = rho ** (1.0 / self.q)
            fac = rho ** (1.0 / self.q - 1.0) / self.q
        out = self._w_root(self.zc + side * step) * fac
        return np.where(np.isfinite(out), out, 0.0)

    # -- construction ---------------------------------------------------------

    def _locate_zero(self):
        self.zc = None
        self.q = None
        if self.c == 0.0:
            return
        root = self._root
        grid = root._node_table()[0]
        cg = self._chi(grid)
        good = np.isfinite(cg)
        grid, cg = grid[good], cg[good]
        # a coordinate heading to zero at a support edge saturates in float
        # and oscillates at table-roundoff size; only flips between points
        # clear of that floor witness a genuine interior crossing
        floor = 1e-12 * float(np.max(np.abs(cg), initial=0.0))
        big = np.abs(cg) > floor
        grid, cg = grid[big], cg[big]
        sg = np.sign(cg)
        flip = np.nonzero(sg[:-1] * sg[1:] < 0.0)[0]
        if flip.size:
            i = int(flip[0])
            a, b, ref = float(grid[i]), float(grid[i + 1]), sg[i]
            for _ in range(90):
                m = 0.5 * (a + b)
                if np.sign(self._chi(np.array([m]))[0]) == ref:
                    a = m
                else:
                    b = m
            self.zc = 0.5 * (a + b)
        if self.zc is not None:
            if -1.0 <= self.c < 0.0:
                raise PreconditionError(
                    f"up(alpha={self.alpha:g}): the coordinate weight is not "
                    f"integrable across the interior zero at {self.zc:.6g}")
            self.q = 1.0 + 1.0 / self.c

    def _tail_diverges(self, side):
        """Condensation test for the weight mass toward a support side.

        The weight mass past the 2**-j tail quantile is comparable to
        2**-j times the weight there, so the series behavior of those
        terms decides convergence. Computed in logs: pdf underflow can
        make a divergent tail look finite to direct quadrature (weight
        growth cancels pdf decay beyond the float horizon).
        """
        js = np.arange(6.0, 42.0)
        lv = 2.0 ** -js
        levels = lv if side == "lo" else 1.0 - lv
        t = self._root.quantile_many(levels)
        # quantiles saturate once the levels outrun the node table; those
        # repeats say nothing about the tail
        keep = np.concatenate([[True], np.diff(t) != 0.0])
        js, t = js[keep], t[keep]
        ch = self._chi(t)
        with np.errstate(all="ignore"):
            lw = ch if self.c == 0.0 else \
                (math.log(abs(self.c)) + np.log(np.abs(ch))) / self.c
            la = -js * math.log(2.0) + lw
        if np.any(np.isposinf(la)) or np.any(np.isnan(la)):
            return True
        la = np.where(np.isneginf(la), -1e6, la)
        if la.size < 4:
            return True
        tail = la[-12:]
        slope = float(np.median(np.diff(tail)))
        return bool(slope > -0.05 * math.log(2.0))

    def _stretch(self, anchor_pt, start, direction, deep):
        # geometric ladder away from the bulk; when the far tail carries
        # divergent weight mass, walk until the root pdf underflows so the
        # u coordinate stays computable wherever any mass remains
        w = max(abs(start - anchor_pt), 1.0)
        top = 400 if deep else 10
        out = []
        zeros = 0
        for k in range(1, top + 1):
            v = anchor_pt + direction * w * 4.0 ** k
            if abs(v) > 1e290:
                break
            out.append(v)
            if self._root.pdf(np.array([v]))[0] == 0.0:
                zeros += 1
                if zeros >= 2:
                    break
            else:
                zeros = 0
        return np.asarray(out, dtype=float)

    def _build_table(self):
        root = self._root
        lo, hi = root.support.lo, root.support.hi
        xs = root._node_table()[0]
        ch = self._chi(root.quantile_many(np.array([0.3, 0.7])))
        self.sigma = 1.0 if ch[1] > ch[0] else -1.0
        # reseating flips sigma away from the chi orientation; push needs the
        # original to sign the odd derivative correctly
        self._sign_chi = self.sigma

        parts = [xs, root.quantile_many((np.arange(129) + 0.5) / 129.0)]
        self.mass_lo = 0.0
        self.mass_hi = 0.0
        div_lo = self._tail_diverges("lo")
        div_hi = self._tail_diverges("hi")
        if not math.isfinite(hi):
            parts.append(self._stretch(lo if math.isfinite(lo) else 0.0,
                                       float(xs[-1]), 1.0, div_hi))
        if not math.isfinite(lo):
            parts.append(self._stretch(hi if math.isfinite(hi) else 0.0,
                                       float(xs[0]), -1.0, div_lo))
        ts = np.unique(np.concatenate([p for p in parts if len(p)]))
        if math.isfinite(lo):
            ts = ts[ts >= lo]
        if math.isfinite(hi):
            ts = ts[ts <= hi]
        if self.zc is not None:
            j = np.searchsorted(ts, self.zc)
            nb = [ts[k] for k in (j - 1, j) if 0 <= k < len(ts)]
            g = 0.5 * min(abs(v - self.zc) for v in nb if v != self.zc)
            cl = self.zc + g * np.concatenate([-(0.5 ** np.arange(47.0)),
                                               [0.0], 0.5 ** np.arange(47.0)])
            ts = np.unique(np.concatenate([ts, cl]))

        a, b = ts[:-1], ts[1:]
        with np.errstate(all="ignore"):
            masses, errs = _gk(self._w_root, a, b)
        refine = errs > 1e-15 + 1e-11 * np.abs(masses)
        refine |= ~np.isfinite(masses)
        cutset = set(root.interior_points)
        if cutset:
            refine |= np.array([av in cutset or bv in cutset
                                for av, bv in zip(a, b)])
        refine[0] = refine[-1] = True
        zi = None
        if self.zc is not None:
            zi = int(np.searchsorted(ts, self.zc))
            ra = (self.zc - ts[zi - 1]) ** self.q
            rb = (ts[zi + 1] - self.zc) ** self.q
            v, _ = _gk(lambda r_: self._w_rho(r_, -1.0),
                       np.array([0.0]), np.array([ra]))
            masses[zi - 1] = v[0]
            v, _ = _gk(lambda r_: self._w_rho(r_, 1.0),
                       np.array([0.0]), np.array([rb]))
            masses[zi] = v[0]
            refine[zi - 1] = refine[zi] = False
        for i in np.nonzero(refine)[0]:
            sub = Interval(a[i], b[i],
                           singular_lo=bool((i == 0 and math.isfinite(lo))
                                            or a[i] in cutset),
                           singular_hi=bool((i == len(a) - 1 and math.isfinite(hi))
                                            or b[i] in cutset))
            r = integrate(self._w_root, sub, tol=1e-13)
            ok = r.converged and math.isfinite(r.value)
            masses[i] = r.value if ok or i not in (0, len(a) - 1) else INF

        if not math.isfinite(hi):
            if div_hi:
                self.mass_hi = INF
            else:
                r = integrate(self._w_root, Interval(float(ts[-1]), INF), tol=1e-13)
                self.mass_hi = r.value \
                    if r.converged and math.isfinite(r.value) else INF
        if not math.isfinite(lo):
            if div_lo:
                self.mass_lo = INF
            else:
                r = integrate(self._w_root, Interval(-INF, float(ts[0])), tol=1e-13)
                self.mass_lo = r.value \
                    if r.converged and math.isfinite(r.value) else INF

        # a finite edge whose weight mass diverges is kept out of the running
        # table; the strip between it and the first retained node is handled
        # by the local power-law ladder instead
        self._elo = lo if math.isfinite(lo) else None
        self._ehi = hi if math.isfinite(hi) else None
        self._elo_div = self._ehi_div = False
        if not math.isfinite(masses[0]) or (self._elo is not None and div_lo):
            self._elo_div = True
            self.mass_lo = INF
            ts, masses = ts[1:], masses[1:]
            if zi is not None:
                zi -= 1
        if not math.isfinite(masses[-1]) or (self._ehi is not None and div_hi):
            self._ehi_div = True
            self.mass_hi = INF
            ts, masses = ts[:-1], masses[:-1]
        self.ts = ts
        # partial sums pivoted at the node nearest the bulk: with a divergent
        # edge in play the one-sided running total grows enormous, and image
        # coordinates near the anchor would then be differences of giants,
        # rounded to the giants' ulp
        ip = int(np.clip(np.searchsorted(ts, float(root.median())),
                         0, len(masses)))
        left = (-np.cumsum(masses[:ip][::-1])[::-1]) if ip else np.empty(0)
        self.cums = np.concatenate([left, [0.0], np.cumsum(masses[ip:])])
        self._zi = zi

    def _set_anchor(self):
        c_lo = float(self.cums[0]) - self.mass_lo
        c_hi = float(self.cums[-1]) + self.mass_hi
        want = c_hi if self.sigma > 0 else c_lo
        if math.isfinite(want):
            self.anchor_mode = "canonical"
            self.c_anchor = want
        else:
            self.anchor_mode = "median"
            self.c_anchor = float(self._cum_at(self._root.median())[0])
        u_lo = self.sigma * (self.c_anchor - (c_hi if self.sigma > 0 else c_lo))
        u_hi = self.sigma * (self.c_anchor - (c_lo if self.sigma > 0 else c_hi))
        self.u_support = (float(u_lo), float(u_hi))

    # -- evaluation -----------------------------------------------------------

    def _edge_cum(self, tv, side):
        """Mass between a finite support edge and points in its end segment.

        Ratio-2 rungs toward the edge keep the panels accurate against any
        integrable power blowup; the strip under the innermost rung is closed
        with the local power law fitted from two weight samples.
        """
        edge = self._elo if side == "lo" else self._ehi
        sgn = 1.0 if side == "lo" else -1.0
        tv = np.asarray(tv, dtype=float)
        out = np.empty(tv.shape)
        for i, ti in enumerate(tv):
            d = abs(ti - edge)
            if d == 0.0:
                out[i] = 0.0
                continue
            ds = d * 0.5 ** np.arange(26.0, -1.0, -1.0)
            pts = edge + sgn * ds
            vals, _ = _gk(self._w_root, np.minimum(pts[:-1], pts[1:]),
                          np.maximum(pts[:-1], pts[1:]))
            s = float(np.sum(vals))
            dm = ds[0]
            w1 = float(self._w_root(np.array([edge + sgn * dm]))[0])
            w2 = float(self._w_root(np.array([edge + sgn * 2.0 * dm]))[0])
            if w1 > 0.0 and w2 > 0.0:
                gam = 1.0 + math.log2(w2 / w1)  # W ~ A d**(gam-1) at the edge
                s = s + w1 * dm / gam if gam > 1e-9 else INF
            out[i] = s
        return out

    def _sliver(self, tv, side):
        """Mass between the retained table end and points in a chopped strip."""
        edge = self._elo if side == "lo" else self._ehi
        inner = float(self.ts[0]) if side == "lo" else float(self.ts[-1])
        sgn = 1.0 if side == "lo" else -1.0
        span = abs(inner - edge)
        tv = np.asarray(tv, dtype=float)
        out = np.empty(tv.shape)
        for i, ti in enumerate(tv):
            d0 = abs(ti - edge)
            if d0 >= span:
                out[i] = 0.0
                continue
            dcap = max(d0, span * 2.0 ** -80)
            n = max(int(math.ceil(math.log2(span / dcap))), 1)
            ds = np.minimum(dcap * 2.0 ** np.arange(0.0, n + 1.0), span)
            pts = edge + sgn * ds
            vals, _ = _gk(self._w_root, np.minimum(pts[:-1], pts[1:]),
                          np.maximum(pts[:-1], pts[1:]))
            s = float(np.sum(vals))
            if d0 < dcap:
                w1 = float(self._w_root(np.array([edge + sgn * dcap]))[0])
                w2 = float(self._w_root(np.array([edge + sgn * 2.0 * dcap]))[0])
                if w1 > 0.0 and w2 > 0.0:
                    gam = 1.0 + math.log2(w2 / w1)
                    if abs(gam) > 1e-9:
                        # gam < 0 grows without bound as d0 -> 0, matching
                        # the genuine divergence of the edge mass
                        s += w1 * dcap * (1.0 - (d0 / dcap) ** gam) / gam
                    else:
                        s += w1 * dcap * math.log(dcap / max(d0, 5e-324))
            out[i] = s
        return out

    def _cum_at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts, cums = self.ts, self.cums
        tc = np.clip(t, ts[0], ts[-1])
        idx = np.clip(np.searchsorted(ts, tc, side="right") - 1, 0, len(ts) - 2)
        out = cums[idx].copy()
        pending = tc > ts[idx]
        if self._zi is not None:
            zi = self._zi
            m = pending & (idx == zi - 1)
            if m.any():
                ra = np.full(int(m.sum()), (self.zc - ts[zi - 1]) ** self.q)
                rt = np.maximum(self.zc - tc[m], 0.0) ** self.q
                vals, _ = _gk(lambda r_: self._w_rho(r_, -1.0), rt, ra)
                out[m] += vals
                pending &= idx != zi - 1
            m = pending & (idx == zi)
            if m.any():
                rt = np.maximum(tc[m] - self.zc, 0.0) ** self.q
                vals, _ = _gk(lambda r_: self._w_rho(r_, 1.0),
                              np.zeros(rt.shape), rt)
                out[m] += vals
                pending &= idx != zi
        if self._elo is not None and not self._elo_div:
            m = pending & (idx == 0)
            if m.any():
                out[m] = cums[0] + self._edge_cum(tc[m], "lo")
                pending &= idx != 0
        if self._ehi is not None and not self._ehi_div:
            m = pending & (idx == len(ts) - 2)
            if m.any():
                out[m] = cums[-1] - self._edge_cum(tc[m], "hi")
                pending &= idx != len(ts) - 2
        if pending.any():
            vals, _ = _gk(self._w_root, ts[idx[pending]], tc[pending])
            out[pending] += vals
        below = t < ts[0]
        if below.any():
            out[below] = cums[0] - self._sliver(t[below], "lo") \
                if self._elo_div else cums[0] - self.mass_lo
        above = t > ts[-1]
        if above.any():
            out[above] = cums[-1] + self._sliver(t[above], "hi") \
                if self._ehi_div else cums[-1] + self.mass_hi
        return out

    def u_eval(self, t):
        return self.sigma * (self.c_anchor - self._cum_at(t))

    def push(self, rx, coord, state, order):
        u = self.u_eval(rx)
        if order < 0:
            return u, ()
        wb = coord
        c = self.c
        # odd derivatives are odd under a coordinate reflection; flip is -1
        # exactly when a reseat reversed the image orientation
        flip = self.sigma * self._sign_chi
        with np.errstate(all="ignore"):
            if c == 0.0:
                h0 = np.exp(-wb)
                out = [h0]
                if order >= 1:
                    f0 = state[0]
                    out.append(flip * np.exp(-2.0 * wb) / f0)
                if order >= 2:
                    f0, f1 = state[0], state[1]
                    out.append(np.exp(-3.0 * wb) * (2.0 / f0 ** 2 + f1 / f0 ** 3))
            else:
                h0 = np.exp(-(math.log(abs(c)) + np.log(np.abs(wb))) / c)
                out = [h0]
                if order >= 1:
                    f0 = state[0]
                    t1 = c * wb * f0
                    out.append(flip * h0 * h0 / t1)
                if order >= 2:
                    f1 = state[1]
                    out.append(h0 ** 3 * ((2.0 + c) / t1 ** 2
                                          + f1 / (t1 * f0 ** 2)))
        return u, tuple(out)


def _down_coord_limit(v, alpha):
    """Limit of the down coordinate as the pdf tends to the edge value v."""
    if alpha == 2.0:
        if v == 0.0:
            return INF
        return -INF if v == INF else -math.log(v)
    c = alpha - 2.0
    if v == 0.0:
        return INF if c > 0 else 0.0
    if v == INF:
        return 0.0 if c > 0 else -INF
    return v ** -c / c


class TransformedDensity(Density):
    """A density produced by a stack of down/up layers over a root density.

    The forward map and the image pdf state are closed-form pushes through
    the layers, so all quadrature happens in the root's coordinates. The
    exposed fields are base (the immediate input density), root, kind and
    alpha of the last layer, and chain, the full (kind, alpha) provenance.
    """

    def __init__(self, base, kind, alpha):
        alpha = float(alpha)
        if isinstance(base, TransformedDensity):
            root, prefix, prov = base.root, base._layers, base.chain
        else:
            root, prefix, prov = base, (), ()
        self.base = base
        self.root = root
        self.kind = kind
        self.alpha = alpha
        layer = _DownLayer(alpha) if kind == "down" else _UpLayer(root, prefix, alpha)
        self._layers = prefix + (layer,)
        self.chain = prov + ((kind, alpha),)
        o = root.order
        for ly in self._layers:
            o = min(o - 1, 2) if ly.kind == "down" else min(o + 1, 2)
        self._img_order = max(o, 0)

        self._build_brackets()
        sup = self._image_support(layer)
        super().__init__(self._pdf_img, sup,
                         d1=self._d1_img if self._img_order >= 1 else None,
                         d2=self._d2_img if self._img_order >= 2 else None,
                         label=f"{kind}({base.label},{alpha:g})",
                         interior_points=self._image_cuts(),
                         cdf=self._cdf_img,
                         normalization_tol=None)
        self._probe()

    # -- coordinate map -------------------------------------------------------

    def _chi(self, t):
        coord, _ = _forward(self.root, self._layers, np.asarray(t, dtype=float), -1)
        return np.asarray(coord, dtype=float)

    def _build_brackets(self):
        root = self.root
        lo, hi = root.support.lo, root.support.hi
        parts = [root._node_table()[0],
                 root.quantile_many((np.arange(257) + 0.5) / 257.0)]
        for ly in self._layers:
            if ly.kind == "up":
                parts.append(ly.ts)
        bt = np.unique(np.concatenate(parts))
        bt = bt[(bt >= lo) & (bt <= hi)]
        ys = self._chi(bt)
        okm = np.isfinite(ys)
        bt, ys = bt[okm], ys[okm]
        sgn = 1.0 if ys[-1] >= ys[0] else -1.0
        z = sgn * ys
        # float saturation can flatten the extreme flanks; keep the strictly
        # monotone run so every stored bracket really brackets
        keep = np.concatenate([[True], np.diff(np.maximum.accumulate(z)) > 0.0])
        self._br_t = bt[keep]
        self._br_z = z[keep]
        self._sigma_total = sgn

    def _invert(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = self._sigma_total * y
        bz, bt = self._br_z, self._br_t
        idx = np.searchsorted(bz, z)
        oob = (idx <= 0) | (idx >= len(bz)) | ~np.isfinite(z)
        idc = np.clip(idx, 1, len(bz) - 1)
        lo_t = bt[idc - 1].astype(float)
        hi_t = bt[idc].astype(float)
        for _ in range(80):
            mid = 0.5 * (lo_t + hi_t)
            zm = self._sigma_total * self._chi(mid)
            right = zm < z
            lo_t = np.where(right, mid, lo_t)
            hi_t = np.where(right, hi_t, mid)
        return 0.5 * (lo_t + hi_t), oob

    def inverse_map(self, y):
        """Base-coordinate abscissae whose image coordinate equals y."""
        t, oob = self._invert(y)
        if len(self._layers) > 1:
            t, _ = _forward(self.root, self._layers[:-1], t, -1)
        return np.where(oob, np.nan, np.asarray(t, dtype=float))

    # -- pdf callables --------------------------------------------------------

    def _pdf_img(self, y):
        t, oob = self._invert(y)
        _, st = _forward(self.root, self._layers, t, 0)
        h = np.asarray(st[0], dtype=float)
        return np.where(oob | ~np.isfinite(h), 0.0, h)

    def _d1_img(self, y):
        t, oob = self._invert(y)
        _, st = _forward(self.root, self._layers, t, 1)
        v = np.asarray(st[1], dtype=float)
        return np.where(oob | ~np.isfinite(v), 0.0, v)

    def _d2_img(self, y):
        t, oob = self._invert(y)
        _, st = _forward(self.root, self._layers, t, 2)
        v = np.asarray(st[2], dtype=float)
        return np.where(oob | ~np.isfinite(v), 0.0, v)

    def _cdf_img(self, y):
        t, _ = self._invert(y)  # out-of-range points land on the nearest edge
        r = self.root.cdf_at(t)
        return r if self._sigma_total > 0 else 1.0 - r

    # -- construction helpers ---------------------------------------------------

    def _image_support(self, layer):
        if layer.kind == "up":
            u_lo, u_hi = layer.u_support
        else:
            sa = _down_coord_limit(self.base.edge_value("lo"), layer.alpha)
            sb = _down_coord_limit(self.base.edge_value("hi"), layer.alpha)
            u_lo, u_hi = min(sa, sb), max(sa, sb)
        slo = math.isfinite(u_lo) and self._edge_singular("lo")
        shi = math.isfinite(u_hi) and self._edge_singular("hi")
        return Interval(u_lo, u_hi, singular_lo=slo, singular_hi=shi)

    def _edge_singular(self, side):
        toward_lo = (side == "lo") == (self._sigma_total > 0)
        lv = 2.0 ** -np.arange(6.0, 35.0)
        levels = lv if toward_lo else 1.0 - lv
        t = self.root.quantile_many(levels)
        _, st = _forward(self.root, self._layers, t, 0)
        h = np.asarray(st[0], dtype=float)
        if np.any(np.isposinf(h)):
            return True
        h = h[np.isfinite(h)]
        if h.size < 10:
            return False
        tail = h[-10:]
        return bool(np.all(np.diff(tail) > 0.0) and tail[-1] > 10.0 * tail[0])

    def _image_cuts(self):
        pts = set(self.root.interior_points)
        for ly in self._layers:
            if ly.kind == "up" and ly.zc is not None:
                pts.add(float(ly.zc))
        if not pts:
            return ()
        img = np.atleast_1d(self._chi(np.array(sorted(pts), dtype=float)))
        return tuple(float(v) for v in img if math.isfinite(v))

    def _probe(self):
        # the forward push and the bracket inversion must tell one story;
        # points next to an interior spike are excused, since the coordinate
        # map is locally flat there and pointwise inversion cannot resolve it
        tq = self.root.quantile_many(np.linspace(0.08, 0.92, 9))
        yq = self._chi(tq)
        _, st = _forward(self.root, self._layers, tq, 0)
        want = np.asarray(st[0], dtype=float)
        keep = np.isfinite(want) & (want > 0.0)
        cuts = np.asarray(self.interior_points, dtype=float)
        if cuts.size:
            gap = np.min(np.abs(yq[:, None] - cuts[None, :]), axis=1)
            keep &= gap > 1e-5 * (1.0 + np.abs(yq))
        if not keep.any():
            return
        got = self.pdf(yq[keep])
        rel = np.abs(got - want[keep]) / np.abs(want[keep])
        if not np.all(rel < 1e-6):
            raise RuntimeError(
                f"{self.label}: forward and inverted evaluations disagree")

    # -- overrides: work in root coordinates -----------------------------------

    def integral(self, fn, *, needs=0, tol=1e-10, rtol=3e-8, extra_interior=(),
                 force_singular_edges=False):
        if needs > self._img_order:
            raise CapabilityError(
                f"{self.label}: derivative order {needs} requested,"
                f" have {self._img_order}")
        root, layers = self.root, self._layers
        cuts = [ly.zc for ly in layers if ly.kind == "up" and ly.zc is not None]
        extra = np.asarray(tuple(extra_interior), dtype=float)
        if extra.size:
            tt, oob = self._invert(extra)
            cuts.extend(float(v) for v, bad in zip(tt, oob) if not bad)

        def g(t, fr):
            coord, st = _forward(root, layers, t, needs)
            h0 = np.asarray(st[0], dtype=float)
            with np.errstate(all="ignore"):
                vals = np.asarray(fn(coord, *st), dtype=float) * (fr / h0)
            drop = (fr == 0.0) | (h0 == 0.0) | ~np.isfinite(h0) \
                | (~np.isfinite(vals) & (fr < 1e-160))
            return np.where(drop, 0.0, vals)

        return root.integral(g, needs=0, tol=tol, rtol=rtol,
                             extra_interior=tuple(cuts),
                             force_singular_edges=True)

    def quantile_many(self, levels):
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        if np.any((levels <= 0.0) | (levels >= 1.0)):
            raise DomainError("quantile levels must be inside (0, 1)")
        rl = levels if self._sigma_total > 0 else 1.0 - levels
        return self._chi(self.root.quantile_many(rl))

    def reseat(self, scale, shift):
        """Same transform stack with the image coordinate sent to
        scale * u + shift.

        An up anchor is a free constant, so the remap is absorbed into the
        top layer's orientation sign and anchor value and evaluation stays
        on the forward-push path; wrapping in a generic affine view instead
        would force every pdf query through bracket inversion, which is
        ruinous for stacked transforms. A down coordinate has no free
        constant, and |scale| != 1 would rescale the tabulated weight
        masses, so both are rejected.
        """
        scale, shift = float(scale), float(shift)
        if scale not in (1.0, -1.0):
            raise DomainError(f"reseat scale must be +1 or -1, got {scale:g}")
        old = self._layers[-1]
        if old.kind != "up":
            raise CapabilityError(
                f"{self.label}: only an up image can be reseated")
        top = copy.copy(old)
        top.sigma = scale * old.sigma
        top.c_anchor = old.c_anchor + top.sigma * shift
        a, b = old.u_support
        top.u_support = (a + shift, b + shift) if scale > 0 else \
            (shift - b, shift - a)
        out = object.__new__(TransformedDensity)
        out.base = self.base
        out.root = self.root
        out.kind = self.kind
        out.alpha = self.alpha
        out._layers = self._layers[:-1] + (top,)
        out.chain = self.chain
        out._img_order = self._img_order
        out._build_brackets()
        sup = out._image_support(top)
        Density.__init__(
            out, out._pdf_img, sup,
            d1=out._d1_img if out._img_order >= 1 else None,
            d2=out._d2_img if out._img_order >= 2 else None,
            label=f"reseat({self.label})",
            interior_points=out._image_cuts(),
            cdf=out._cdf_img,
            normalization_tol=None)
        out._probe()
        return out


# -- public operations --------------------------------------------------------


def down(f, alpha):
    """Down image of a strictly monotone density."""
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise DomainError(f"down needs finite alpha, got {alpha}")
    if f.order < 1:
        raise CapabilityError(f"down({f.label}): needs d1")
    sgn = f.strict_monotone_sign()
    if sgn is None:
        raise PreconditionError(f"down({f.label}): pdf must be strictly monotone")
    edge = f.support.lo if sgn < 0 else f.support.hi
    if not math.isfinite(edge):
        raise PreconditionError(
            f"down({f.label}): the support edge under the pdf supremum"
            f" must be finite")
    return TransformedDensity(f, "down", alpha)


def up(f, alpha):
    """Up image of a density; always defined except across an interior
    zero of the coordinate with a non-integrable weight."""
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise DomainError(f"up needs finite alpha, got {alpha}")
    return TransformedDensity(f, "up", alpha)


def down_applicable(f, alpha, n_grid=128):
    """Whether alpha clears the curvature-ratio supremum of f.

    Returns (flag, sup) where sup estimates sup f f''/f'^2 on a quantile
    grid. The flag also requires strict monotonicity, since that is what a
    further down step needs.
    """
    alpha = float(alpha)
    if f.order < 2:
        raise CapabilityError(f"down_applicable({f.label}): needs d1 and d2")
    x = f.quantiles(n_grid)
    f0, f1, f2 = (np.asarray(v, dtype=float) for v in f._state(x, 2))
    with np.errstate(all="ignore"):
        r = (f0 / f1) * (f2 / f1)
    r = r[np.isfinite(r)]
    sup = float(np.max(r)) if r.size else math.nan
    ok = bool(math.isfinite(sup) and alpha > sup
              and f.strict_monotone_sign() is not None)
    return ok, sup


def chain(f, ops):
    """Apply ("down"|"up", alpha) steps left to right.

    Between consecutive down steps the curvature gate is consulted, so a
    step that would break monotonicity fails with the index attached.
    """
    g = f
    prev = None
    for i, (kind, alpha) in enumerate(ops):
        try:
            if kind == "down":
                if prev == "down":
                    ok, sup = down_applicable(g, alpha)
                    if not ok:
                        raise PreconditionError(
                            f"alpha={alpha:g} does not clear the curvature"
                            f" supremum {sup:g}")
                g = down(g, alpha)
            elif kind == "up":
                g = up(g, alpha)
            else:
                raise DomainError(f"unknown transform kind {kind!r}")
        except TransformChainError:
            raise
        except (DomainError, PreconditionError, CapabilityError) as e:
            raise TransformChainError(i, str(e)) from e
        prev = kind
    return g


def _aligned_deviation(f, g, n):
    # candidate translations and reflections matching finite support edges
    # (medians when there are none); the best one measures the round trip
    xq = f.quantiles(n)
    fv = f.pdf(xq)
    fs, gs = f.support, g.support
    devs = []
    shifts = [gs.lo - fs.lo] if math.isfinite(fs.lo) and math.isfinite(gs.lo) else []
    if math.isfinite(fs.hi) and math.isfinite(gs.hi):
        shifts.append(gs.hi - fs.hi)
    if not shifts:
        shifts.append(g.median() - f.median())
    for sh in shifts:
        devs.append(float(np.max(np.abs(g.pdf_at(xq + sh) - fv))))
    flips = [gs.hi + fs.lo] if math.isfinite(fs.lo) and math.isfinite(gs.hi) else []
    if math.isfinite(fs.hi) and math.isfinite(gs.lo):
        flips.append(gs.lo + fs.hi)
    if not flips:
        flips.append(g.median() + f.median())
    for cc in flips:
        devs.append(float(np.max(np.abs(g.pdf_at(cc - xq) - fv))))
    return min(devs)


def verify_inversion(f, alpha, n_points=16):
    """Max pdf deviation of up(down(f, alpha), alpha) from f at quantiles,
    after aligning supports by translation or reflection."""
    g = up(down(f, alpha), alpha)
    return _aligned_deviation(f, g, n_points)


def _rel_dev(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def verify_scaling(f, alpha, kappa, n_points=16):
    """Max relative deviation from the rescaling transport laws.

    Checks the down law at each alpha (the additive shift law at alpha = 2)
    and the up law when alpha != 2; f must satisfy the down preconditions.
    """
    alpha = float(alpha)
    kappa = float(kappa)
    fk = rescale(f, kappa)
    lv = (np.arange(n_points) + 0.5) / n_points
    devs = []
    a_img = down(fk, alpha)
    b_img = down(f, alpha)
    ya = a_img.quantile_many(lv)
    if alpha == 2.0:
        ref = b_img.pdf_at(ya + math.log(kappa))
    else:
        k2 = kappa ** (alpha - 2.0)
        ref = k2 * b_img.pdf_at(k2 * ya)
    devs.append(_rel_dev(a_img.pdf(ya), ref))
    if alpha != 2.0:
        c_img = up(fk, alpha)
        d_img = up(f, alpha)
        k3 = kappa ** (1.0 / (alpha - 2.0))
        yc = c_img.quantile_many(lv)
        devs.append(_rel_dev(c_img.pdf(yc), k3 * d_img.pdf_at(k3 * yc)))
    return float(max(devs))
