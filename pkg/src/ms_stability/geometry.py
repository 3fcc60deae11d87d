"""Geometry of the periodic strip, discontinuity curves, and normal flows.

The ambient domain is the periodic strip [0, b) x (-a, a).  A
discontinuity curve is stored as a periodic graph y = psi(x) sampled at m
uniformly spaced abscissae; the curve must stay strictly inside the
strip.  Perturbations of the curve are vertical flows psi + t * phi with
a cutoff margin keeping the flowed curve away from the horizontal walls.

Sign convention: curvature is reported with respect to the upward unit
normal of the graph, so a downward-bulging (concave) bump has H < 0 at
its apex.
"""

from dataclasses import dataclass, field
import numbers

import numpy as np

from .errors import CurveEscapesStrip


def _as_readonly_array(values):
    arr = np.asarray(values, dtype=float)
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet datum on one horizontal wall: drift slope plus periodic part.

    The trace prescribed on the wall is  slope * x + periodic(x)  where
    ``periodic`` is a b-periodic callable (None means zero).  Only the
    x-derivative of the trace needs to be periodic, which is what lets a
    linear drift through.
    """

    slope: float
    periodic: object = None  # callable x-array -> array, or None

    def sample(self, x):
        """Periodic part of the datum at abscissae ``x`` (drift excluded)."""
        x = np.asarray(x, dtype=float)
        if self.periodic is None:
            return np.zeros_like(x)
        vals = np.asarray(self.periodic(x), dtype=float)
        if vals.shape != x.shape:
            vals = np.broadcast_to(vals, x.shape).astype(float)
        return vals


@dataclass(frozen=True)
class StripDomain:
    """Periodic strip [0, b) x (-a, a) with Dirichlet data on y = +-a."""

    half_height: float
    period: float
    top: BoundaryData
    bottom: BoundaryData

    def __post_init__(self):
        if not (np.isfinite(self.half_height) and self.half_height > 0):
            raise ValueError("half_height must be positive and finite")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError("period must be positive and finite")
        for side in (self.top, self.bottom):
            if not np.isfinite(side.slope):
                raise ValueError("boundary drift slope must be finite")


@dataclass(frozen=True)
class SegmentConfig:
    """Straight segment of length L meeting the box boundary at both ends.

    h1 and h2 are the signed curvatures of the box boundary at the two
    endpoints (negative where the box is concave as seen from inside).
    """

    length: float
    h1: float
    h2: float

    def __post_init__(self):
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError("segment length must be positive and finite")
        if not (np.isfinite(self.h1) and np.isfinite(self.h2)):
            raise ValueError("endpoint curvatures must be finite")


@dataclass(frozen=True)
class GraphCurve:
    """Periodic graph curve y = psi(x) sampled at m uniform abscissae.

    heights[i] = psi(i * period / m), i = 0..m-1.  The sample count m
    must be at least 8 so the five-point periodic stencils make sense.
    """

    period: float
    heights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "heights", _as_readonly_array(self.heights))
        if self.heights.ndim != 1 or self.heights.size < 8:
            raise ValueError("need at least 8 height samples on the curve")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("curve heights must be finite")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError("period must be positive and finite")

    @property
    def m(self):
        return self.heights.size

    @property
    def spacing(self):
        return self.period / self.m

    @property
    def abscissae(self):
        return np.arange(self.m) * self.spacing

    def max_height(self):
        return float(np.max(np.abs(self.heights)))

    def require_inside(self, half_height, margin=0.0):
        """Raise CurveEscapesStrip unless max |psi| < half_height - margin."""
        limit = half_height - margin
        worst = self.max_height()
        if not worst < limit:
            raise CurveEscapesStrip(
                "curve reaches |y| = %.6g, limit is %.6g" % (worst, limit)
            )


def flat_curve(period, m):
    """The straight interface y = 0 with m samples."""
    return GraphCurve(period, np.zeros(m))


def sinusoidal_curve(period, m, mode=1, amplitude=0.0, phase=0.0):
    """Curve psi(x) = amplitude * sin(2*pi*mode*x/period + phase)."""
    x = np.arange(m) * (period / m)
    return GraphCurve(period, amplitude * np.sin(2.0 * np.pi * mode * x / period + phase))


@dataclass(frozen=True)
class FlowSpec:
    """Vertical normal flow of a curve: direction samples and time steps.

    direction[i] multiplies the flow time on node i.  half_height is the
    strip parameter a; the flowed curve must keep the distance
    cutoff_margin (default a/8) from the walls, otherwise flow_curve
    raises CurveEscapesStrip.
    """

    direction: np.ndarray
    half_height: float
    cutoff_margin: float = None
    steps: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "direction", _as_readonly_array(self.direction))
        if self.cutoff_margin is None:
            object.__setattr__(self, "cutoff_margin", self.half_height / 8.0)
        if not np.all(np.isfinite(self.direction)):
            raise ValueError("flow direction must be finite")
        if not (0 <= self.cutoff_margin < self.half_height):
            raise ValueError("cutoff margin must lie in [0, half_height)")
        steps = tuple(float(t) for t in self.steps)
        if any(not np.isfinite(t) for t in steps):
            raise ValueError("flow steps must be finite")
        object.__setattr__(self, "steps", steps)


def flow_curve(curve, flow, t):
    """Flow the curve by time t: heights become psi + t * direction.

    Raises CurveEscapesStrip when the flowed curve enters the cutoff band
    near the walls y = +-half_height.
    """
    if not isinstance(t, numbers.Real) or not np.isfinite(t):
        raise ValueError("flow time must be a finite real number")
    if flow.direction.size != curve.m:
        raise ValueError("flow direction and curve sample counts differ")
    moved = GraphCurve(curve.period, curve.heights + float(t) * flow.direction)
    moved.require_inside(flow.half_height, flow.cutoff_margin)
    return moved


def periodic_derivatives(values, spacing):
    """First and second derivative samples by fourth-order periodic stencils.

    Five-point central formulas on the periodic index lattice:
      f'  = (-f[i+2] + 8 f[i+1] - 8 f[i-1] + f[i-2]) / (12 h)
      f'' = (-f[i+2] + 16 f[i+1] - 30 f[i] + 16 f[i-1] - f[i-2]) / (12 h^2)
    """
    f = np.asarray(values, dtype=float)
    fp1 = np.roll(f, -1)
    fp2 = np.roll(f, -2)
    fm1 = np.roll(f, 1)
    fm2 = np.roll(f, 2)
    d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * spacing)
    d2 = (-fp2 + 16.0 * fp1 - 30.0 * f + 16.0 * fm1 - fm2) / (12.0 * spacing ** 2)
    return d1, d2


def curvature(curve):
    """Signed curvature samples H_i = psi'' / (1 + psi'^2)^(3/2).

    Uses the upward-normal sign convention of the module docstring: a
    concave bump dipping into the lower half gives H < 0 at the apex.
    """
    d1, d2 = periodic_derivatives(curve.heights, curve.spacing)
    return d2 / np.power(1.0 + d1 * d1, 1.5)


def slope_samples(curve):
    """Nodal slope samples psi'_i by the fourth-order periodic stencil."""
    d1, _ = periodic_derivatives(curve.heights, curve.spacing)
    return d1


def element_lengths(curve):
    """Arclengths of the m piecewise-linear elements (node i to i+1)."""
    h = curve.spacing
    dpsi = np.roll(curve.heights, -1) - curve.heights
    return np.hypot(h, dpsi)


def nodal_arclengths(curve):
    """Trapezoid arclength weight of each node (half of both elements)."""
    ell = element_lengths(curve)
    return 0.5 * (ell + np.roll(ell, 1))


def curve_length(curve):
    """Length of one period of the curve by the composite trapezoid rule.

    Equals the sum of the piecewise-linear element lengths, which on the
    periodic lattice is the trapezoid rule for integral of
    sqrt(1 + psi'^2) with psi' taken element-wise.
    """
    return float(np.sum(element_lengths(curve)))
