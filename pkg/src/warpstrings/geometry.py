"""Warped-product metrics dx^2 + f(x)^2 g_Y over the real line."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .profile import ProfileDomainError, ProfileExpr, parse

TOL_CURV = 1e-9
TWO_PI = 2.0 * math.pi


class MetricError(ValueError):
    """Invalid metric data (non-positive warp, bad fiber, mismatched inputs)."""


@dataclass(frozen=True)
class FiberModel:
    """The compact factor Y, seen through one closed geodesic of it.

    ``kind="circle"`` is Y = S^1 of circumference ``length``.  For
    ``kind="geodesic"``, ``length`` is the length of a simple closed geodesic
    of Y, ``transverse_dimension`` is dim Y - 1 and ``transverse_curvature`` the
    sectional curvature of Y on planes containing the geodesic direction.
    """

    kind: str = "circle"
    length: float = TWO_PI
    transverse_dimension: int = 0
    transverse_curvature: float = 0.0

    def __post_init__(self):
        if self.kind not in ("circle", "geodesic"):
            raise MetricError(f"unknown fiber kind {self.kind!r}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise MetricError("fiber length must be positive")
        if self.transverse_dimension < 0:
            raise MetricError("transverse dimension must be >= 0")
        if self.kind == "circle" and self.transverse_dimension != 0:
            raise MetricError("a circle fiber has no transverse directions")

    @classmethod
    def circle(cls, length: float = TWO_PI) -> "FiberModel":
        return cls("circle", float(length))

    @classmethod
    def geodesic(cls, length: float, transverse_dimension: int,
                 transverse_curvature: float) -> "FiberModel":
        return cls("geodesic", float(length), int(transverse_dimension),
                   float(transverse_curvature))

    @property
    def m(self) -> int:
        return self.transverse_dimension


@dataclass(frozen=True)
class MembershipVerdict:
    nonpositive_everywhere: bool
    ends_negative: bool
    witness: Optional[float] = None
    witness_curvature: Optional[float] = None
    end_bound_T: Optional[float] = None

    @property
    def member(self) -> bool:
        return self.nonpositive_everywhere and self.ends_negative


@dataclass(frozen=True)
class WarpedMetric:
    profile: ProfileExpr
    fiber: FiberModel = field(default_factory=FiberModel.circle)
    half_width: float = 10.0
    probe_radii: Tuple[float, ...] = (20.0, 40.0, 80.0)
    check_grid: int = 1001

    def __post_init__(self):
        if not self.half_width > 0:
            raise MetricError("window half width must be positive")
        probes = tuple(float(r) for r in self.probe_radii)
        object.__setattr__(self, "probe_radii", probes)
        if any(b <= a for a, b in zip(probes, probes[1:])):
            raise MetricError("probe radii must be increasing")
        if probes and probes[0] <= self.half_width:
            raise MetricError("probe radii must lie outside the window")
        if self.profile.has_parameter:
            raise MetricError("profile still depends on the family parameter s")
        pts = np.concatenate([self.window_grid(self.check_grid), self.probe_points()])
        try:
            vals = np.asarray(self.profile(pts))
        except ProfileDomainError as exc:
            raise MetricError(f"warp profile not evaluable: {exc}") from exc
        bad = ~(np.isfinite(vals) & (vals > 0))
        if np.any(bad):
            x = float(pts[np.argmax(bad)])
            raise MetricError(f"warp profile must be positive; f({x:g}) = {vals[bad][0]!r}")

    @classmethod
    def from_text(cls, text: str, fiber: Optional[FiberModel] = None,
                  half_width: float = 10.0,
                  probe_radii: Sequence[float] = (20.0, 40.0, 80.0)) -> "WarpedMetric":
        profile = parse(text, window=(-half_width, half_width))
        return cls(profile, fiber or FiberModel.circle(), half_width, tuple(probe_radii))

    @property
    def window(self) -> Tuple[float, float]:
        return (-self.half_width, self.half_width)

    @property
    def certified_radius(self) -> float:
        return max((self.half_width,) + self.probe_radii)

    def window_grid(self, n: int) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, n)

    def probe_points(self) -> np.ndarray:
        r = np.asarray(self.probe_radii, dtype=float)
        return np.concatenate([-r, r])

    # f and its derivatives, vectorised
    def f(self, x):
        return self.profile(x)

    def df(self, x):
        return self.profile.derivative(1)(x)

    def d2f(self, x):
        return self.profile.derivative(2)(x)

    def _check_region(self, x):
        if np.any(np.abs(np.asarray(x)) > self.certified_radius * (1 + 1e-12)):
            raise ProfileDomainError(
                f"x outside the certified region |x| <= {self.certified_radius:g}")


def base_curvature(g: WarpedMetric, x):
    """Sectional curvature of planes containing d/dx: -f''/f."""
    g._check_region(x)
    return -g.d2f(x) / g.f(x)


def fiber_plane_curvature(g: WarpedMetric, x):
    """Sectional curvature of fiber planes through the geodesic direction."""
    if g.fiber.m < 1:
        raise MetricError("fiber-plane curvature needs a transverse dimension >= 1")
    g._check_region(x)
    fx = g.f(x)
    return (g.fiber.transverse_curvature - g.df(x) ** 2) / fx ** 2


def curvature_samples(g: WarpedMetric, x) -> np.ndarray:
    """All defined plane curvatures at the points ``x``, one row per family."""
    rows = [np.atleast_1d(base_curvature(g, x))]
    if g.fiber.m >= 1:
        rows.append(np.atleast_1d(fiber_plane_curvature(g, x)))
    return np.vstack(rows)


def membership(g: WarpedMetric, grid_n: int = 1001,
               tol_curv: float = TOL_CURV) -> MembershipVerdict:
    """Sampled check of non-positive curvature with negatively curved ends."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    xs = g.window_grid(grid_n)
    probes = g.probe_points()
    pts = np.concatenate([xs, probes])
    K = curvature_samples(g, pts)
    kmax = K.max(axis=0)

    witness = witness_k = None
    bad = kmax > tol_curv
    nonpositive = not bool(np.any(bad))
    if not nonpositive:
        i = int(np.argmax(kmax))
        witness, witness_k = float(pts[i]), float(kmax[i])

    probe_k = kmax[len(xs):]
    ends = bool(probe_k.size) and bool(np.all(probe_k <= -tol_curv))
    T = float(probe_k.max()) if probe_k.size and probe_k.max() < 0 else None
    if not ends and nonpositive and probe_k.size:
        i = int(np.argmax(probe_k))
        witness, witness_k = float(probes[i]), float(probe_k[i])
    return MembershipVerdict(nonpositive, ends, witness, witness_k, T)


def _jets(g: WarpedMetric, x, k: int):
    funcs = (g.f, g.df, g.d2f)[: k + 1]
    return np.vstack([np.atleast_1d(fn(x)) for fn in funcs])


def uniform_distance(g: WarpedMetric, h: WarpedMetric, k: int = 0,
                     grid_n: int = 1001) -> Tuple[float, bool]:
    """Sampled uniform C^k distance between two warp profiles.

    Returns the largest jet difference over the window grid and the probe
    radii, and a flag telling whether the probe values keep growing
    (the sup over the whole line is then taken to be infinite).
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if g.fiber != h.fiber:
        raise MetricError("uniform distance needs identical fiber models")
    if g.window != h.window or g.probe_radii != h.probe_radii:
        raise MetricError("uniform distance needs identical windows and probes")
    xs = g.window_grid(grid_n)
    with np.errstate(over="ignore", invalid="ignore"):
        win = np.abs(_jets(g, xs, k) - _jets(h, xs, k)).max()
        per_probe = []
        for r in g.probe_radii:
            pts = np.array([-r, r])
            per_probe.append(np.abs(_jets(g, pts, k) - _jets(h, pts, k)).max())
    win = float(win)
    partial = np.maximum.accumulate(per_probe) if per_probe else np.array([])
    value = float(max([win] + list(per_probe)))
    diverging = bool(
        partial.size >= 2
        and np.all(np.diff(partial) > 0)
        and partial[-1] > 10.0 * win
    )
    return value, diverging
