"""Free-knot ReLU spline units on the unit interval, with exact quadrature.

A unit is ``phi(w, x) = c * max(x - h, 0)`` with weight ``w = (c, h)``; a
network prediction is the mass-weighted sum of many units.  Everything that
looks like an integral over the input space [0, 1] runs through one composite
Gauss-Legendre rule of fixed order 8 on a partition that contains every kink
of the integrand.  That makes the quadrature exact (to roundoff) whenever the
integrand is piecewise polynomial of degree <= 15, which covers predictions,
their squares, and all monomial ground truths used here; bandlimited (sine)
ground truths get panel subdivision instead and come out near machine
precision.

Conventions fixed once here and relied on everywhere else:

* derivative of the ramp in ``h`` uses the indicator ``x > h`` (the tie
  ``x == h`` contributes zero), so ``unit_grad`` is defined pointwise;
* a unit with knot ``h >= 1`` is invisible on [0, 1]: value, gradient and
  every induced integral vanish identically, no quadrature involved;
* reductions over quadrature nodes use numpy's fixed pairwise summation, so
  results do not depend on execution order or parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Weight",
    "Monomial",
    "SineScaled",
    "PiecewisePoly",
    "unit_output",
    "unit_grad",
    "make_partition",
    "panelize",
    "piecewise_integral",
    "SplinePrediction",
    "ResidualIntegrals",
    "ramp_correlation",
    "potential_and_grad",
]

# 8-node Gauss-Legendre rule on [-1, 1]; exact for polynomial degree <= 15.
_GL_NODES = np.array(
    [
        -0.9602898564975363,
        -0.7966664774136267,
        -0.5255324099163290,
        -0.1834346424956498,
        0.1834346424956498,
        0.5255324099163290,
        0.7966664774136267,
        0.9602898564975363,
    ]
)
_GL_WEIGHTS = np.array(
    [
        0.1012285362903763,
        0.2223810344533745,
        0.3137066458778873,
        0.3626837833783620,
        0.3626837833783620,
        0.3137066458778873,
        0.2223810344533745,
        0.1012285362903763,
    ]
)


@dataclass(frozen=True)
class Weight:
    """A single unit weight: output coefficient ``c`` and knot ``h``."""

    c: float
    h: float


def unit_output(w: Weight, x):
    """Value of the unit ``c * (x - h)_+`` at input ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    return w.c * np.maximum(x - w.h, 0.0)


def unit_grad(w: Weight, x):
    """Gradient of the unit output in (c, h) at input ``x``.

    Returns ``(d/dc, d/dh) = ((x - h)_+, -c * [x > h])``.  The indicator is
    strict at the tie, so the h-component is 0 exactly at ``x == h``.
    """
    x = np.asarray(x, dtype=float)
    ramp = np.maximum(x - w.h, 0.0)
    return ramp, -w.c * (x > w.h).astype(float)


# ---------------------------------------------------------------------------
# ground truths


@dataclass(frozen=True)
class Monomial:
    """Target function ``f(x) = a * x**p`` for integer ``p >= 0``."""

    a: float
    p: int

    def __post_init__(self):
        if self.p < 0 or self.p != int(self.p):
            raise ValueError("monomial power must be a non-negative integer")
        # squared residuals must stay within the degree-15 exactness window
        if self.p > 7:
            raise ValueError("monomial powers above 7 are not supported")

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=float) ** self.p

    def integral(self, lo, hi):
        """Exact ``int_lo^hi f``; accepts array bounds."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        q = self.p + 1
        return self.a * (hi**q - lo**q) / q

    def x_integral(self, lo, hi):
        """Exact ``int_lo^hi x f(x) dx``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        q = self.p + 2
        return self.a * (hi**q - lo**q) / q

    def square_integral(self, lo, hi):
        q = 2 * self.p + 1
        return self.a**2 * (hi**q - lo**q) / q

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.p < 1:
            return np.zeros_like(x)
        return self.a * self.p * x ** (self.p - 1)

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.p < 2:
            return np.zeros_like(x)
        return self.a * self.p * (self.p - 1) * x ** (self.p - 2)

    def breakpoints(self):
        return ()

    def panel_hint(self):
        return None

    def to_dict(self):
        return {"kind": "monomial", "a": self.a, "p": self.p}


@dataclass(frozen=True)
class SineScaled:
    """Target function ``f(x) = amplitude * sin(k * pi * x)`` for integer k."""

    amplitude: float
    k: int

    @property
    def omega(self) -> float:
        return self.k * np.pi

    def __call__(self, x):
        return self.amplitude * np.sin(self.omega * np.asarray(x, dtype=float))

    def integral(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        w = self.omega
        return self.amplitude * (np.cos(w * lo) - np.cos(w * hi)) / w

    def x_integral(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        w = self.omega

        def anti(x):
            return np.sin(w * x) / w**2 - x * np.cos(w * x) / w

        return self.amplitude * (anti(hi) - anti(lo))

    def square_integral(self, lo, hi):
        w = self.omega

        def anti(x):
            return x / 2 - np.sin(2 * w * x) / (4 * w)

        return self.amplitude**2 * (anti(hi) - anti(lo))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * self.omega * np.cos(self.omega * x)

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -self.amplitude * self.omega**2 * np.sin(self.omega * x)

    def breakpoints(self):
        return ()

    def panel_hint(self):
        # keeps omega * panel <= pi/2 even for squared integrands
        return 1.0 / (4.0 * max(self.k, 1))

    def to_dict(self):
        return {"kind": "sine", "A": self.amplitude, "k": self.k}


def _poly_eval(coeffs, x):
    out = np.zeros_like(x)
    for a in reversed(coeffs):
        out = out * x + a
    return out


def _poly_anti(coeffs, shift=0):
    # antiderivative coefficients of x**shift * poly(x), ascending order
    return [0.0] * (shift + 1) + [a / (m + shift + 1) for m, a in enumerate(coeffs)]


@dataclass(frozen=True)
class PiecewisePoly:
    """Target assembled from polynomial pieces ``(lo, hi, coeffs)``.

    ``coeffs`` are ascending-power coefficients on the piece; the function is
    zero outside the pieces.  Pieces must not overlap, and degree is capped so
    squared residuals stay inside the quadrature exactness window.
    """

    pieces: tuple

    def __post_init__(self):
        ps = sorted(self.pieces)
        for (lo, hi, co) in ps:
            if not lo < hi:
                raise ValueError("piece interval must have positive length")
            if len(co) > 8:
                raise ValueError("piece degree above 7 is not supported")
        for (_, hi, _), (lo, _, _) in zip(ps, ps[1:]):
            if lo < hi - 1e-15:
                raise ValueError("piece intervals must not overlap")
        object.__setattr__(self, "pieces", tuple((lo, hi, tuple(co)) for lo, hi, co in ps))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, co in self.pieces:
            m = (x >= lo) & (x < hi)
            out[m] = _poly_eval(co, x[m])
        # right-closed at the final piece edge
        if self.pieces:
            lo, hi, co = self.pieces[-1]
            m = x == hi
            out[m] = _poly_eval(co, x[m])
        return out

    def _accumulate(self, lo, hi, shift):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        out = np.zeros(np.broadcast(lo, hi).shape)
        for plo, phi, co in self.pieces:
            a = np.clip(lo, plo, phi)
            b = np.clip(hi, plo, phi)
            anti = _poly_anti(co, shift)
            out += np.where(b > a, _poly_eval(anti, b) - _poly_eval(anti, a), 0.0)
        return out

    def integral(self, lo, hi):
        return self._accumulate(lo, hi, 0)

    def x_integral(self, lo, hi):
        return self._accumulate(lo, hi, 1)

    def square_integral(self, lo, hi):
        out = 0.0
        for plo, phi, co in self.pieces:
            a = max(float(lo), plo)
            b = min(float(hi), phi)
            if b <= a:
                continue
            sq = np.polynomial.polynomial.polymul(co, co)
            anti = _poly_anti(list(sq), 0)
            out += _poly_eval(anti, np.array(b)) - _poly_eval(anti, np.array(a))
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, co in self.pieces:
            d1 = [m * a for m, a in enumerate(co)][1:] or [0.0]
            m = (x >= lo) & (x <= hi)
            out[m] = _poly_eval(d1, x[m])
        return out

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, co in self.pieces:
            d2 = [m * (m - 1) * a for m, a in enumerate(co)][2:] or [0.0]
            m = (x >= lo) & (x <= hi)
            out[m] = _poly_eval(d2, x[m])
        return out

    def breakpoints(self):
        pts = []
        for lo, hi, _ in self.pieces:
            pts.extend((lo, hi))
        return tuple(pts)

    def panel_hint(self):
        return None

    def to_dict(self):
        return {"kind": "piecewise", "pieces": [list(p[:2]) + [list(p[2])] for p in self.pieces]}


def ramp_correlation(truth, h):
    """Correlation ``int_0^1 (x - h)_+ f(x) dx`` of the truth with a ramp.

    Exact for every ground-truth kind (closed-form antiderivatives); accepts
    scalar or array ``h`` of any sign.  Zero for ``h >= 1``.
    """
    h = np.asarray(h, dtype=float)
    m = np.clip(h, 0.0, 1.0)
    return truth.x_integral(m, 1.0) - h * truth.integral(m, 1.0)


# ---------------------------------------------------------------------------
# partitions and quadrature


def make_partition(breaks, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Sorted unique cuts ``{lo, hi}`` plus every break strictly inside."""
    if not lo < hi:
        raise ValueError("degenerate domain")
    b = np.asarray(list(breaks), dtype=float)
    b = b[(b > lo) & (b < hi)]
    return np.unique(np.concatenate([[lo, hi], b]))


def panelize(cuts: np.ndarray, panel: float | None = None) -> np.ndarray:
    """Subdivide each piece of ``cuts`` into equal panels of length <= panel.

    The original cut values are preserved exactly; with ``panel=None`` the
    cuts come back unchanged.
    """
    cuts = np.asarray(cuts, dtype=float)
    if cuts.size < 2:
        raise ValueError("degenerate domain")
    if panel is None:
        return cuts
    out = [cuts[:1]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = int(np.ceil((b - a) / panel))
        if m > 1:
            out.append(a + (b - a) * np.arange(1, m) / m)
        out.append(np.array([b]))
    return np.concatenate(out)


def _panel_nodes(edges: np.ndarray):
    """Gauss-Legendre nodes/weights per panel, shaped (panels, 8)."""
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = mid[:, None] + half[:, None] * _GL_NODES
    w = half[:, None] * _GL_WEIGHTS
    return x, w


def piecewise_integral(g, cuts, panel: float | None = None) -> float:
    """Composite order-8 Gauss-Legendre integral of ``g`` over a partition.

    Exact for piecewise polynomials of degree <= 15 when every kink of ``g``
    is a cut.  ``panel`` subdivides long pieces, which leaves polynomial
    exactness intact and drives bandlimited integrands to ~1e-15.
    """
    edges = panelize(np.asarray(cuts, dtype=float), panel)
    x, w = _panel_nodes(edges)
    return float(np.sum(w * g(x)))


# ---------------------------------------------------------------------------
# predictions


class SplinePrediction:
    """Exact piecewise-linear prediction of a mass-weighted unit collection.

    Built as prefix tables of slope and intercept over the sorted knots, so a
    single evaluation is a binary search plus one multiply-add.  Units with
    ``h >= 1`` are dropped (invisible on [0, 1]); units with ``h <= 0``
    contribute everywhere and fold into the base slope.  Evaluation agrees
    with direct per-unit summation to accumulation roundoff, which tests pin
    down to a few ulp on small collections.
    """

    __slots__ = ("knots", "slope", "intercept")

    def __init__(self, c, h, mass):
        c = np.asarray(c, dtype=float)
        h = np.asarray(h, dtype=float)
        wc = c * mass  # mass scalar or per-unit array
        if wc.shape != h.shape:
            wc = np.broadcast_to(wc, h.shape).copy()

        base = h <= 0.0
        slope0 = wc[base].sum()
        icept0 = -(wc[base] * h[base]).sum()

        mid = (h > 0.0) & (h < 1.0)
        hm = h[mid]
        order = np.argsort(hm, kind="stable")
        hm = hm[order]
        wcm = wc[mid][order]
        self.knots = hm
        self.slope = np.concatenate([[slope0], slope0 + np.cumsum(wcm)])
        self.intercept = np.concatenate([[icept0], icept0 - np.cumsum(wcm * hm)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.knots, x, side="right")
        return self.slope[idx] * x + self.intercept[idx]

    def interior_knots(self) -> np.ndarray:
        """Unique knots in (0, 1); the kink set of the prediction."""
        return np.unique(self.knots)


class ResidualIntegrals:
    """Suffix integrals of the residual ``r = prediction - truth`` on [0, 1].

    One quadrature pass over a partition containing every kink yields, at
    every partition edge ``e``, the exact values ``R(e) = int_e^1 r`` and
    ``S(e) = int_e^1 x r dx``.  All per-unit quantities reduce to gathers on
    those tables, because every unit knot is inserted as an edge:

        potential     u(c, h)  =  c * (S(m) - h R(m)),   m = clip(h, 0, 1)
        gradient      du/dc    =  S(m) - h R(m)
                      du/dh    =  -c R(m)

    and the loss is ``0.5 * int r^2`` over the same nodes.
    """

    def __init__(self, pred, truth, extra=(), panel: float | None = None):
        breaks = list(pred.interior_knots()) + list(truth.breakpoints()) + list(extra)
        hint = truth.panel_hint()
        if hint is not None:
            panel = hint if panel is None else min(panel, hint)
        cuts = make_partition(breaks)
        self.edges = panelize(cuts, panel)
        x, w = _panel_nodes(self.edges)
        r = pred(x) - truth(x)
        i0 = np.sum(w * r, axis=1)
        i1 = np.sum(w * x * r, axis=1)
        # suffix sums; last edge (x = 1) maps to exactly zero
        self._R = np.concatenate([np.cumsum(i0[::-1])[::-1], [0.0]])
        self._S = np.concatenate([np.cumsum(i1[::-1])[::-1], [0.0]])
        self._half_sq = 0.5 * float(np.sum(w * r * r))

    def at(self, h):
        """(R(h), S(h)) for ``h`` values that are partition edges.

        Callers clip to [0, 1] first; values must match an edge exactly,
        which holds by construction for unit knots and probe points.
        """
        idx = np.searchsorted(self.edges, h, side="left")
        return self._R[idx], self._S[idx]

    def half_square(self) -> float:
        """Loss ``0.5 * int_0^1 r^2 dx`` over the same nodes."""
        return self._half_sq


def potential_and_grad(state, w: Weight, truth):
    """Residual potential ``u(w)`` and its (c, h)-gradient for one query unit.

    ``u(w) = int r phi(w, .) dx`` with ``r`` the residual of ``state``; the
    negative gradient of ``u`` is the velocity field that moves particles.
    ``state`` is anything exposing ``prediction_parts()`` (an evaluable
    prediction plus its kink list).  For ``h >= 1`` the result is identically
    zero, no quadrature involved.
    """
    if w.h >= 1.0:
        return 0.0, (0.0, 0.0)
    pred, hint = state.prediction_parts()
    extra = (w.h,) if 0.0 < w.h < 1.0 else ()
    ri = ResidualIntegrals(pred, truth, extra=extra, panel=hint)
    m = min(max(w.h, 0.0), 1.0)
    R, S = ri.at(np.array([m]))
    gc = float(S[0] - w.h * R[0])
    gh = float(-w.c * R[0])
    return w.c * gc, (gc, gh)
