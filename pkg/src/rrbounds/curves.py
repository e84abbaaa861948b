"""Exact ultimately pseudo-periodic piecewise-affine curves and min-plus algebra.

A :class:`Curve` ``f`` is a nondecreasing function on ``[0, +inf)``:

* ``f(0) = v0``;
* on ``(xs[k], xs[k+1]]`` it is affine, ``f(t) = ys[k] + slopes[k] * (t - xs[k])``,
  so ``ys[k]`` is the right limit at ``xs[k]`` and ``f`` is left-continuous;
* the tail is either *affine* (the last piece extends to infinity) or
  *periodic*: for ``t > end``, ``f(t) = f(t - period) + increment``.

All arithmetic is generic over Python numbers.  With :class:`fractions.Fraction`
(or ``int``) inputs every operation is exact; ``float`` inputs work too, with
comparisons done at a relative tolerance of 1e-9.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

from .errors import (CurveDomainError, CurveError, InvalidParameter, UnstableCombination,
                     UnstableSlopeWarning)

INF = math.inf
REL_TOL = 1e-9

# upper bound on the number of tail periods an operation may unroll
MAX_UNROLL = 200_000


def as_number(x):
    """Promote ints (and numeric strings) to Fraction; floats and Fractions pass through."""
    if isinstance(x, bool):
        raise InvalidParameter("booleans are not numbers here")
    if isinstance(x, (Fraction, float)):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    return Fraction(x) if isinstance(x, Real) else x


def _is_float(*values) -> bool:
    return any(isinstance(v, float) for v in values)


def _eq(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=1e-12)
    return a == b


def _le(a, b) -> bool:
    return a <= b or _eq(a, b)


def _lcm(a, b):
    """Least common multiple of two positive rational periods; ``None`` is a wildcard."""
    if a is None:
        return b
    if b is None or _eq(a, b):
        return a
    fa, fb = Fraction(a), Fraction(b)
    lcm = Fraction(math.lcm(fa.numerator, fb.numerator), math.gcd(fa.denominator, fb.denominator))
    if lcm / max(fa, fb) > MAX_UNROLL:
        raise CurveError(f"periods {a} and {b} have no usable common multiple")
    return float(lcm) if _is_float(a, b) else lcm


@dataclass(frozen=True)
class TokenBucketSpec:
    rate: Real
    burst: Real

    def __post_init__(self):
        object.__setattr__(self, 'rate', as_number(self.rate))
        object.__setattr__(self, 'burst', as_number(self.burst))
        if not (self.rate >= 0 and self.burst >= 0) or math.isinf(self.rate) or math.isinf(self.burst):
            raise InvalidParameter(f"token bucket needs finite rate, burst >= 0, got {self}")


@dataclass(frozen=True)
class RateLatencySpec:
    rate: Real
    latency: Real

    def __post_init__(self):
        object.__setattr__(self, 'rate', as_number(self.rate))
        object.__setattr__(self, 'latency', as_number(self.latency))
        if not self.rate > 0 or not self.latency >= 0:
            raise InvalidParameter(f"rate-latency needs rate > 0, latency >= 0, got {self}")


@dataclass(frozen=True)
class StairSpec:
    height: Real
    period: Real

    def __post_init__(self):
        object.__setattr__(self, 'height', as_number(self.height))
        object.__setattr__(self, 'period', as_number(self.period))
        if not (self.height > 0 and self.period > 0):
            raise InvalidParameter(f"stair needs height, period > 0, got {self}")


class Curve:
    """Immutable nondecreasing piecewise-affine function; see the module docstring."""

    __slots__ = ("v0", "xs", "ys", "slopes", "end", "period", "increment", "_ends")

    def __init__(self, v0, xs, ys, slopes, end=None, period=None, increment=None, *, check=True):
        self.v0 = as_number(v0)
        self.xs = tuple(map(as_number, xs))
        self.ys = tuple(map(as_number, ys))
        self.slopes = tuple(map(as_number, slopes))
        self.end = None if end is None else as_number(end)
        self.period = None if period is None else as_number(period)
        self.increment = None if increment is None else as_number(increment)
        self._ends = None
        if check:
            self._validate()

    # -- structure -------------------------------------------------------
    @property
    def periodic(self) -> bool:
        return self.end is not None

    @property
    def rate(self):
        """Long-term rate ``lim f(t)/t``."""
        if self.periodic:
            return self.increment / self.period
        return self.slopes[-1]

    @property
    def tail_start(self):
        """Abscissa after which the tail relation holds."""
        if self.periodic:
            return self.end - self.period
        return self.xs[-1]

    def _validate(self):
        xs, ys, ss = self.xs, self.ys, self.slopes
        if not xs or not (len(xs) == len(ys) == len(ss)):
            raise CurveError("pieces must be non-empty and aligned")
        if xs[0] != 0:
            raise CurveError("first piece must start at 0")
        if self.v0 < 0 and not _eq(self.v0, 0):
            raise CurveError("curve must be nonnegative")
        if not _le(self.v0, ys[0]):
            raise CurveError(f"curve decreases at 0 ({self.v0} > {ys[0]})")
        for k in range(len(xs)):
            if ss[k] < 0 and not _eq(ss[k], 0):
                raise CurveError(f"negative slope {ss[k]} at {xs[k]}")
            if k + 1 < len(xs):
                if not xs[k] < xs[k + 1]:
                    raise CurveError("breakpoints must increase strictly")
                left = ys[k] + ss[k] * (xs[k + 1] - xs[k])
                if not _le(left, ys[k + 1]):
                    raise CurveError(f"curve decreases at {xs[k + 1]}")
        if self.periodic:
            p, inc = self.period, self.increment
            if not (p > 0 and inc >= 0):
                raise CurveError("periodic tail needs period > 0 and increment >= 0")
            if not (xs[-1] < self.end and p <= self.end):
                raise CurveError("periodic window must lie inside the explicit domain")
            if not _le(self(self.end), self.right_limit(self.end - p) + inc):
                raise CurveError("curve decreases at the periodic seam")
        elif self.period is not None or self.increment is not None:
            raise CurveError("affine tail takes no period")

    def _piece_ends(self):
        if self._ends is None:
            xs, ys, ss = self.xs, self.ys, self.slopes
            ends = [ys[k] + ss[k] * (xs[k + 1] - xs[k]) for k in range(len(xs) - 1)]
            if self.periodic:
                ends.append(ys[-1] + ss[-1] * (self.end - xs[-1]))
            else:
                ends.append(INF if ss[-1] > 0 else ys[-1])
            self._ends = ends
        return self._ends

    # -- evaluation ------------------------------------------------------
    def __call__(self, t):
        if t < 0:
            raise CurveDomainError(f"curve evaluated at negative time {t}")
        if t == 0:
            return self.v0
        k = 0
        if self.periodic and t > self.end:
            k = math.ceil((t - self.end) / self.period)
            t = t - k * self.period
        i = max(bisect_left(self.xs, t) - 1, 0)
        value = self.ys[i] + self.slopes[i] * (t - self.xs[i])
        return value + k * self.increment if k else value

    def right_limit(self, t):
        """``f(t+)``."""
        if t < 0:
            raise CurveDomainError(f"curve evaluated at negative time {t}")
        k = 0
        if self.periodic and t >= self.end:
            k = math.floor((t - self.end) / self.period) + 1
            t = t - k * self.period
        i = bisect_right(self.xs, t) - 1
        value = self.ys[i] + self.slopes[i] * (t - self.xs[i])
        return value + k * self.increment if k else value

    def _inverse(self, y, strict):
        # inf{s >= 0 : f(s) >= y}  (strict=False)  or  inf{s : f(s) > y}  (strict=True)
        if (y < self.v0) if strict else (y <= self.v0):
            return 0
        ends = self._piece_ends()
        offset, lo, start = 0, 0, 0
        if self.periodic:
            top = ends[-1]
            if (y >= top) if strict else (y > top):
                if self.increment <= 0:
                    return INF
                if strict:
                    m = math.floor((y - top) / self.increment) + 1
                else:
                    m = math.ceil((y - top) / self.increment)
                y = y - m * self.increment
                offset = m * self.period
                start = self.end - self.period
                lo = bisect_right(self.xs, start) - 1
        k = bisect_right(ends, y, lo) if strict else bisect_left(ends, y, lo)
        if k >= len(ends):
            return INF
        x0 = max(self.xs[k], start)
        y0 = self.ys[k] + self.slopes[k] * (x0 - self.xs[k])
        if (y0 > y) if strict else (y0 >= y):
            return x0 + offset
        return x0 + (y - y0) / self.slopes[k] + offset

    def lower_inverse(self, y):
        """``inf{s >= 0 : f(s) >= y}``; ``inf`` when the level is never reached."""
        return self._inverse(y, strict=False)

    def upper_inverse(self, y):
        """``inf{s >= 0 : f(s) > y}``; ``inf`` when the level is never exceeded."""
        return self._inverse(y, strict=True)

    def window(self):
        """Pieces ``(x, right_limit, slope)`` covering ``(end - period, end]``."""
        start = self.end - self.period
        k0 = bisect_right(self.xs, start) - 1
        out = [(start, self.ys[k0] + self.slopes[k0] * (start - self.xs[k0]), self.slopes[k0])]
        for k in range(k0 + 1, len(self.xs)):
            out.append((self.xs[k], self.ys[k], self.slopes[k]))
        return out

    def pieces_until(self, horizon):
        """Unrolled pieces ``(xs, ys, slopes)`` covering ``(0, horizon]``."""
        xs, ys, ss = list(self.xs), list(self.ys), list(self.slopes)
        if not self.periodic or horizon <= self.end:
            n = max(bisect_left(self.xs, horizon), 1)
            return xs[:n], ys[:n], ss[:n]
        count = math.ceil((horizon - self.end) / self.period)
        if count > MAX_UNROLL:
            raise CurveError(f"unrolling {count} periods exceeds MAX_UNROLL")
        win = self.window()
        for m in range(1, count + 1):
            dx, dy = m * self.period, m * self.increment
            for x, y, s in win:
                x2 = x + dx
                if x2 >= horizon:
                    break
                xs.append(x2)
                ys.append(y + dy)
                ss.append(s)
        return xs, ys, ss

    def tail_bounds(self):
        """``(inf, sup)`` of ``f(t) - rate * t`` over ``t > tail_start``."""
        r = self.rate
        if not self.periodic:
            c = self.ys[-1] - r * self.xs[-1]
            return c, c
        vals = []
        win = self.window()
        for idx, (x, y, s) in enumerate(win):
            x_end = win[idx + 1][0] if idx + 1 < len(win) else self.end
            vals.append(y - r * x)
            vals.append(y + s * (x_end - x) - r * x_end)
        return min(vals), max(vals)

    def sample(self, ts):
        return [self(t) for t in ts]

    def __repr__(self):
        if self.periodic:
            tail = f"periodic(end={self.end}, period={self.period}, increment={self.increment})"
        else:
            tail = f"affine(rate={self.slopes[-1]})"
        pieces = ", ".join(f"({x}, {y}, {s})" for x, y, s in zip(self.xs, self.ys, self.slopes))
        return f"Curve(v0={self.v0}, pieces=[{pieces}], tail={tail})"


# -- construction -------------------------------------------------------------

def _zero_like(*values):
    return 0.0 if _is_float(*values) else Fraction(0)


def _push(xs, ys, ss, x, y, s):
    """Append a piece, merging it into the previous one when collinear."""
    if xs:
        px, py, ps = xs[-1], ys[-1], ss[-1]
        if _eq(ps, s) and _eq(py + ps * (x - px), y):
            return
    xs.append(x)
    ys.append(y)
    ss.append(s)


def _window_matches(xs, ys, ss, end, period, inc):
    # does f(u) = f(u - period) + inc hold for u in (end - period, end]?
    start_hi = end - period
    start_lo = start_hi - period
    offsets = set()
    for x in xs:
        if start_lo < x < end:
            offsets.add(x - start_lo if x < start_hi else x - start_hi)
    offsets.add(0)
    for o in offsets:
        a, b = start_lo + o, start_hi + o
        ia = bisect_right(xs, a) - 1
        ib = bisect_right(xs, b) - 1
        ya = ys[ia] + ss[ia] * (a - xs[ia])
        yb = ys[ib] + ss[ib] * (b - xs[ib])
        if not (_eq(ya + inc, yb) and _eq(ss[ia], ss[ib])):
            return False
    return True


def _build(v0, xs, ys, ss, end=None, period=None, inc=None, check=True):
    """Normalise raw pieces into a Curve: merge collinear pieces, compact the tail."""
    mx, my, ms = [], [], []
    for x, y, s in zip(xs, ys, ss):
        if end is not None and x >= end:
            break
        _push(mx, my, ms, x, y, s)
    if end is not None:
        while end - 2 * period >= 0 and _window_matches(mx, my, ms, end, period, inc):
            end = end - period
            n = bisect_left(mx, end)
            del mx[n:], my[n:], ms[n:]
        start = end - period
        if bisect_right(mx, start) == len(mx) and _eq(ms[-1] * period, inc):
            end = period = inc = None
    return Curve(v0, mx, my, ms, end, period, inc, check=check)


def affine(rate, burst=0):
    """``t -> burst + rate * t`` for ``t > 0``, 0 at the origin."""
    z = _zero_like(rate, burst)
    return Curve(z, [z], [burst], [rate])


def constant(value):
    """The constant function equal to ``value`` everywhere, including at 0."""
    z = _zero_like(value)
    return Curve(value, [z], [value], [z])


def zero():
    return constant(Fraction(0))


def token_bucket(rate, burst):
    return make_token_bucket(TokenBucketSpec(rate, burst))


def rate_latency(rate, latency):
    return make_rate_latency(RateLatencySpec(rate, latency))


def stair(height, period):
    return make_stair(StairSpec(height, period))


def make_token_bucket(spec: TokenBucketSpec) -> Curve:
    """Token bucket ``gamma_{r,b}``: 0 at t = 0, ``b + r t`` afterwards."""
    return affine(spec.rate, spec.burst)


def make_rate_latency(spec: RateLatencySpec) -> Curve:
    """Rate-latency ``beta_{R,T}(t) = R [t - T]^+``."""
    z = _zero_like(spec.rate, spec.latency)
    if spec.latency == 0:
        return Curve(z, [z], [z], [spec.rate])
    return Curve(z, [z, spec.latency], [z, z], [z, spec.rate])


def make_stair(spec: StairSpec) -> Curve:
    """Stair ``nu_{h,P}(t) = h * ceil(t / P)``."""
    z = _zero_like(spec.height, spec.period)
    return Curve(z, [z], [spec.height], [z], end=spec.period, period=spec.period,
                 increment=spec.height)


def long_term_rate(c: Curve):
    return c.rate


def scale(c: Curve, factor) -> Curve:
    """``factor * f`` for a nonnegative factor."""
    if factor < 0:
        raise InvalidParameter("scale factor must be nonnegative")
    if factor == 0:
        return constant(_zero_like(factor, c.v0) * 1)
    inc = None if c.increment is None else c.increment * factor
    return Curve(c.v0 * factor, c.xs, [y * factor for y in c.ys],
                 [s * factor for s in c.slopes], c.end, c.period, inc)


# -- pointwise operations -----------------------------------------------------

def _emit_choice(out, a, b, fa, sf, ga, sg, take_min):
    da = fa - ga
    db = da + (sf - sg) * (b - a)
    if not take_min:
        da, db = -da, -db
    if _le(da, 0) and _le(db, 0):
        _push(*out, a, fa, sf)
    elif _le(0, da) and _le(0, db):
        _push(*out, a, ga, sg)
    else:
        c = a + (fa - ga) / (sg - sf)
        vc = fa + sf * (c - a)
        if da < 0:
            _push(*out, a, fa, sf)
            _push(*out, c, vc, sg)
        else:
            _push(*out, a, ga, sg)
            _push(*out, c, vc, sf)


def _combine(f, g, horizon, kind):
    fx, fy, fs = f.pieces_until(horizon)
    gx, gy, gs = g.pieces_until(horizon)
    pts = sorted(set(fx) | set(gx))
    out = ([], [], [])
    i = j = 0
    for idx, a in enumerate(pts):
        b = pts[idx + 1] if idx + 1 < len(pts) else horizon
        while i + 1 < len(fx) and fx[i + 1] <= a:
            i += 1
        while j + 1 < len(gx) and gx[j + 1] <= a:
            j += 1
        fa = fy[i] + fs[i] * (a - fx[i])
        ga = gy[j] + gs[j] * (a - gx[j])
        if kind == "add":
            _push(*out, a, fa + ga, fs[i] + gs[j])
        elif kind == "sub":
            _push(*out, a, fa - ga, fs[i] - gs[j])
        else:
            _emit_choice(out, a, max(b, a), fa, fs[i], ga, gs[j], kind == "min")
    return out


def _crossover(low, high):
    """Time after which ``low(t) < high(t)`` when ``low.rate < high.rate``."""
    _, m_low_sup = low.tail_bounds()
    m_high_inf, _ = high.tail_bounds()
    return max((m_low_sup - m_high_inf) / (high.rate - low.rate), 0)


def _pointwise(f, g, kind, check=True):
    rf, rg = f.rate, g.rate
    T = max(f.tail_start, g.tail_start)
    if kind in ("add", "sub") or _eq(rf, rg):
        period = _lcm(f.period, g.period)
        rate = rf + rg if kind == "add" else (rf - rg if kind == "sub" else rf)
    else:
        low, high = (f, g) if rf < rg else (g, f)
        winner = low if kind == "min" else high
        T = max(T, _crossover(low, high))
        period, rate = winner.period, winner.rate
    v0 = {"add": f.v0 + g.v0, "sub": f.v0 - g.v0, "min": min(f.v0, g.v0),
          "max": max(f.v0, g.v0)}[kind]
    if period is None:
        horizon = T + max(T, 1)
        xs, ys, ss = _combine(f, g, horizon, kind)
        return _build(v0, xs, ys, ss, check=check)
    horizon = T + period
    xs, ys, ss = _combine(f, g, horizon, kind)
    return _build(v0, xs, ys, ss, horizon, period, rate * period, check=check)


def add(f: Curve, g: Curve) -> Curve:
    return _pointwise(f, g, "add")


def pointwise_min(f: Curve, g: Curve) -> Curve:
    return _pointwise(f, g, "min")


def pointwise_max(f: Curve, g: Curve) -> Curve:
    return _pointwise(f, g, "max")


def sub_positive(f: Curve, g: Curve) -> Curve:
    """``[f - g]^+``.

    Raises :class:`UnstableCombination` when the result is not nondecreasing.
    A long-run slope of ``f`` below that of ``g`` only yields a valid curve
    when the positive part is identically zero; that case warns with
    :class:`UnstableSlopeWarning`.
    """
    diff = _pointwise(f, g, "sub", check=False)
    z = _zero_like(f.v0, g.v0)
    result = _pointwise(diff, Curve(z, [z], [z], [z], check=False), "max", check=False)
    try:
        result._validate()
    except CurveError as exc:
        raise UnstableCombination(f"[f - g]^+ is not nondecreasing: {exc}") from None
    if f.rate < g.rate and not _eq(f.rate, g.rate):
        warnings.warn(f"long-run slope {f.rate} below subtrahend slope {g.rate}",
                      UnstableSlopeWarning, stacklevel=2)
    return result


def curves_equal(f: Curve, g: Curve) -> bool:
    """Exact functional equality of two curves."""
    d = _pointwise(f, g, "sub", check=False)
    return (_eq(d.v0, 0) and all(_eq(y, 0) for y in d.ys) and all(_eq(s, 0) for s in d.slopes)
            and (d.increment is None or _eq(d.increment, 0)))


# -- min-plus convolution -----------------------------------------------------

def _segments(c, horizon):
    xs, ys, ss = c.pieces_until(horizon)
    segs = []
    for k in range(len(xs)):
        b = xs[k + 1] if k + 1 < len(xs) else horizon
        segs.append((xs[k], b, ys[k], ss[k]))
    return segs


def _merge_envelopes(p, q):
    if not p:
        return q
    if not q:
        return p
    pts = sorted({s[0] for s in p} | {s[1] for s in p} | {s[0] for s in q} | {s[1] for s in q})
    xs, ys, ss = [], [], []
    out = []
    i = j = 0
    for idx in range(len(pts) - 1):
        a, b = pts[idx], pts[idx + 1]
        while i < len(p) and p[i][1] <= a:
            i += 1
        while j < len(q) and q[j][1] <= a:
            j += 1
        fp = i < len(p) and p[i][0] <= a
        fq = j < len(q) and q[j][0] <= a
        if not fp and not fq:
            continue
        if fp and fq:
            pa, pb, py, psl = p[i]
            qa, qb, qy, qsl = q[j]
            tmp = ([], [], [])
            _emit_choice(tmp, a, b, py + psl * (a - pa), psl, qy + qsl * (a - qa), qsl, True)
            pieces = list(zip(*tmp))
        else:
            sa, sb, sy, ssl = p[i] if fp else q[j]
            pieces = [(a, sy + ssl * (a - sa), ssl)]
        for n, (x, y, s) in enumerate(pieces):
            x_end = pieces[n + 1][0] if n + 1 < len(pieces) else b
            if out and out[-1][1] == x and _eq(out[-1][3], s) and \
                    _eq(out[-1][2] + out[-1][3] * (x - out[-1][0]), y):
                prev = out[-1]
                out[-1] = (prev[0], x_end, prev[2], prev[3])
            else:
                out.append((x, x_end, y, s))
    return out


def _lower_envelope(segs):
    if len(segs) <= 1:
        return list(segs)
    mid = len(segs) // 2
    return _merge_envelopes(_lower_envelope(segs[:mid]), _lower_envelope(segs[mid:]))


def _conv_finite(f, g, horizon):
    """Pieces of ``f (x) g`` on ``(0, horizon]``."""
    sf, sg = _segments(f, horizon), _segments(g, horizon)
    pool = []
    for a, b, y, s in sg:
        pool.append((a, b, y + f.v0, s))
    for a, b, y, s in sf:
        pool.append((a, b, y + g.v0, s))
    for a1, b1, y1, s1 in sf:
        for a2, b2, y2, s2 in sg:
            start = a1 + a2
            if start >= horizon:
                break
            (la, sa), (lb, sb) = sorted([(b1 - a1, s1), (b2 - a2, s2)], key=lambda e: e[1])
            mid = start + la
            if mid > start:
                pool.append((start, min(mid, horizon), y1 + y2, sa))
            if mid < horizon:
                pool.append((mid, min(mid + lb, horizon), y1 + y2 + sa * la, sb))
    pool.sort(key=lambda s: (s[0], s[1]))
    env = _lower_envelope(pool)
    xs, ys, ss = [], [], []
    for a, b, y, s in env:
        _push(xs, ys, ss, a, y, s)
    return xs, ys, ss


def min_plus_conv(f: Curve, g: Curve) -> Curve:
    """Min-plus convolution ``(f (x) g)(t) = inf_{0<=s<=t} f(t-s) + g(s)``."""
    if g.rate < f.rate:
        f, g = g, f
    rf, rg = f.rate, g.rate
    tf, tg = f.tail_start, g.tail_start
    joint = _lcm(f.period, g.period)
    onset = tf + tg + (joint if joint is not None else 0)
    if _eq(rf, rg):
        period = joint
    else:
        _, sup_f = f.tail_bounds()
        inf_g, _ = g.tail_bounds()
        cross = (sup_f + g(tg) - rf * tg - inf_g + rg * tf) / (rg - rf)
        onset = max(onset, cross)
        period = f.period if f.periodic else joint
    v0 = f.v0 + g.v0
    if period is None:
        horizon = onset + max(onset, 1)
        xs, ys, ss = _conv_finite(f, g, horizon)
        return _build(v0, xs, ys, ss)
    horizon = onset + period
    xs, ys, ss = _conv_finite(f, g, horizon)
    return _build(v0, xs, ys, ss, horizon, period, rf * period)


# -- composition ----------------------------------------------------------------

def compose(outer: Curve, inner: Curve) -> Curve:
    """``outer(inner(t))``."""
    ri, ro = inner.rate, outer.rate
    ti = inner.tail_start
    if _eq(ri, 0):
        onset, period, inc = ti, None, None
    else:
        t1 = inner.upper_inverse(outer.tail_start)
        if t1 == INF:
            raise CurveError("inner curve never reaches the outer tail")
        onset = max(ti, t1)
        if not outer.periodic and not inner.periodic:
            period = inc = None
        elif not outer.periodic:
            period, inc = inner.period, ro * inner.increment
        elif not inner.periodic:
            period, inc = outer.period / ri, outer.increment
        else:
            ratio = Fraction(inner.increment) / Fraction(outer.period)
            if ratio.denominator > MAX_UNROLL:
                raise CurveError("no usable common period for composition")
            period = inner.period * ratio.denominator
            inc = outer.increment * ratio.numerator
    horizon = onset + (period if period is not None else max(onset, 1))
    ix, iy, isl = inner.pieces_until(horizon)
    top = inner(horizon)
    if outer.periodic and top > outer.end:
        ox, oy, osl = outer.pieces_until(top + outer.period)
    else:
        ox, oy, osl = list(outer.xs), list(outer.ys), list(outer.slopes)
    xs, ys, ss = [], [], []
    for k in range(len(ix)):
        a = ix[k]
        b = ix[k + 1] if k + 1 < len(ix) else horizon
        ya, s = iy[k], isl[k]
        if _eq(s, 0):
            _push(xs, ys, ss, a, outer(ya), s * 0)
            continue
        yb = ya + s * (b - a)
        j = bisect_right(ox, ya) - 1
        x, y_in = a, ya
        while True:
            oval = oy[j] + osl[j] * (y_in - ox[j])
            _push(xs, ys, ss, x, oval, osl[j] * s)
            if j + 1 >= len(ox) or ox[j + 1] >= yb:
                break
            j += 1
            y_in = ox[j]
            x = a + (y_in - ya) / s
    v0 = outer(inner.v0)
    if period is None:
        return _build(v0, xs, ys, ss)
    return _build(v0, xs, ys, ss, horizon, period, inc)


# -- horizontal deviation -------------------------------------------------------

def _phi(alpha, beta, t):
    """``(beta^{-1}(alpha(t)) - t, lim_{u->t+} beta^{-1}(alpha(u)) - u)``."""
    at = alpha(t)
    here = beta.lower_inverse(at) - t
    a_plus = alpha.right_limit(t)
    xs = alpha.xs
    if alpha.periodic and t >= alpha.end:
        k = math.floor((t - alpha.end) / alpha.period) + 1
        tt = t - k * alpha.period
    else:
        tt = t
    slope = alpha.slopes[bisect_right(xs, tt) - 1]
    if slope > 0:
        after = beta.upper_inverse(a_plus) - t
    else:
        after = beta.lower_inverse(a_plus) - t
    return here, after


def horizontal_deviation(alpha: Curve, beta: Curve):
    """``h(alpha, beta) = sup_t inf{d >= 0 : alpha(t) <= beta(t + d)}``; may be ``inf``."""
    ra, rb = alpha.rate, beta.rate
    if ra > rb and not _eq(ra, rb):
        return INF
    joint = _lcm(alpha.period, beta.period)
    if joint is None:
        joint = 1
    ta, tb = alpha.tail_start, beta.tail_start
    reach = alpha.upper_inverse(beta(tb))
    horizon = max(ta, tb if reach == INF else reach) + joint
    candidates = set(alpha.pieces_until(horizon)[0])
    candidates.add(horizon)
    top = alpha(horizon)
    b_reach = beta.lower_inverse(top)
    b_horizon = (b_reach if b_reach != INF else beta.tail_start) + (beta.period or 1)
    bx, by, bs = beta.pieces_until(b_horizon)
    levels = {beta.v0}
    for k in range(len(bx)):
        levels.add(by[k])
        if k:
            levels.add(by[k - 1] + bs[k - 1] * (bx[k] - bx[k - 1]))
    for y in levels:
        if y > top:
            continue
        for t in (alpha.lower_inverse(y), alpha.upper_inverse(y)):
            if t <= horizon:
                candidates.add(t)
    best = 0
    for t in candidates:
        for v in _phi(alpha, beta, t):
            if v > best:
                best = v
            if best == INF:
                return INF
    return best
