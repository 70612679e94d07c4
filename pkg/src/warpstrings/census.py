"""Census of closed geodesic strings and the signed count F(g, beta)."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .geometry import WarpedMetric, fiber_plane_curvature
from .loops import (DiscreteLoop, HomotopyClass, SolveOutcome, SolverOptions,
                    hessian, inertia, minimize, refine_newton)
from .loops import length as loop_length


class UndefinedInvariantError(ValueError):
    """F is not defined by the signed sum for a non-regular metric."""


@dataclass
class GeodesicString:
    representative: DiscreteLoop
    length: float
    x0: float
    morse_index: int
    nullity: int
    multiplicity: int
    transverse_index: Optional[int]
    origin: str = ""

    @property
    def nondegenerate(self) -> bool:
        return self.nullity == 1 and self.transverse_index is not None

    @property
    def sign(self) -> int:
        return -1 if (self.morse_index + (self.transverse_index or 0)) % 2 else 1

    def contribution(self) -> Fraction:
        return Fraction(self.sign, self.multiplicity)


@dataclass
class CensusReport:
    strings: List[GeodesicString]
    F: Optional[Fraction]
    regular: bool
    n_points: int
    winding: int
    outcomes: List[Tuple[str, SolveOutcome]] = field(default_factory=list)
    dedup: List[str] = field(default_factory=list)

    @property
    def escapes(self) -> List[Tuple[str, SolveOutcome]]:
        return [(k, o) for k, o in self.outcomes if o.status == "escaped"]


# ---------------------------------------------------------------------------


def critical_points(g: WarpedMetric, grid_n: int = 2001) -> Tuple[List[float], bool]:
    """Roots of f' on the window and whether f' vanishes on a whole interval.

    Sign changes on a grid are bracketed and solved with Brent's method,
    then polished with a Newton step on f'.
    """
    xs = g.window_grid(grid_n)
    d = np.asarray(g.df(xs))
    roots: List[float] = []
    flat = bool(np.any((d[:-1] == 0.0) & (d[1:] == 0.0)))
    for i in range(grid_n - 1):
        a, b = d[i], d[i + 1]
        if a == 0.0:
            if not roots or abs(roots[-1] - xs[i]) > 1e-12:
                roots.append(float(xs[i]))
            continue
        if a * b < 0:
            r = brentq(g.df, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
            d2 = float(g.d2f(r))
            if d2 != 0.0:
                r2 = r - float(g.df(r)) / d2
                if abs(r2 - r) < 1e-10 and abs(float(g.df(r2))) <= abs(float(g.df(r))):
                    r = r2
            roots.append(float(r))
    if d[-1] == 0.0 and (not roots or abs(roots[-1] - xs[-1]) > 1e-12):
        roots.append(float(xs[-1]))
    if flat:
        # f' vanishes on an interval: one representative seed is enough
        roots = roots[:1]
    return roots, flat


def loop_distance(a: DiscreteLoop, b: DiscreteLoop, circle_tol: float = 1e-9) -> float:
    """Distance between two loops modulo cyclic reindexing.

    Circles are also compared modulo a rigid theta rotation, which on a
    circle is the reparametrisation action.
    """
    if a.n != b.n:
        return math.inf
    ell = a.fiber_length
    circ = np.ptp(a.xs) <= circle_tol and np.ptp(b.xs) <= circle_tol
    best = math.inf
    for k in range(a.n):
        bs = b.shifted(k)
        dx = float(np.abs(a.xs - bs.xs).max())
        if dx >= best:
            continue
        if circ:
            dth = np.diff(np.append(a.thetas, a.thetas[0] + a.offset)) - \
                np.diff(np.append(bs.thetas, bs.thetas[0] + bs.offset))
            dt = float(np.abs(dth).max())
        else:
            diff = (a.thetas - bs.thetas) / ell
            dt = float(np.abs(diff - np.round(diff)).max()) * ell
        best = min(best, max(dx, dt))
        if best == 0.0:
            break
    return best


def multiplicity(loop: DiscreteLoop, tol: float) -> int:
    """Order of the cyclic isotropy group: the cover degree of the loop."""
    w = abs(loop.winding)
    n = loop.n
    ell = loop.fiber_length
    for d in sorted((d for d in range(1, w + 1) if w % d == 0 and n % d == 0), reverse=True):
        if d == 1:
            return 1
        s = n // d
        moved = loop.shifted(s)
        dx = np.abs(moved.xs - loop.xs).max()
        diff = (moved.thetas - loop.thetas) / ell
        dt = np.abs(diff - np.round(diff)).max() * ell
        if max(dx, dt) <= tol:
            return d
    return 1


def morse_index(g: WarpedMetric, loop: DiscreteLoop,
                opts: SolverOptions = SolverOptions()) -> Tuple[int, int]:
    neg, zero, _ = inertia(hessian(g, loop), opts.zero_tol(loop.n))
    return neg, zero


def transverse_count(K_perp: float, L: float) -> int:
    """#{k in Z : (2 pi k / L)^2 < K_perp}, so k=0 once and |k|>=1 twice."""
    if K_perp <= 0:
        return 0
    kmax = math.ceil(L * math.sqrt(K_perp) / (2 * math.pi)) + 1
    return sum(1 for k in range(-kmax, kmax + 1) if (2 * math.pi * k / L) ** 2 < K_perp)


def transverse_index(g: WarpedMetric, x0: float, L: float,
                     critical_tol: float = 1e-8) -> int:
    """Index of the second variation in the fiber directions at a critical circle."""
    m = g.fiber.m
    if m == 0:
        return 0
    if abs(float(g.df(x0))) > critical_tol * max(1.0, abs(float(g.f(x0)))):
        raise ValueError("transverse index is only known at critical circles")
    K = float(fiber_plane_curvature(g, x0))
    return m * transverse_count(K, L)


def fuller_sum(strings: Sequence[GeodesicString]) -> Fraction:
    if any(not s.nondegenerate for s in strings):
        raise UndefinedInvariantError("degenerate geodesic string: F undefined")
    return sum((s.contribution() for s in strings), Fraction(0))


# ---------------------------------------------------------------------------


def census_points(opts: SolverOptions, winding: int) -> int:
    """Sample count, rounded up so that every cover of degree |w| is exact."""
    w = abs(winding)
    return int(math.ceil(opts.n_points / w) * w)


def lattice(g: WarpedMetric, starts: int) -> np.ndarray:
    return np.linspace(-g.half_width, g.half_width, starts)


def _is_circle(loop: DiscreteLoop, tol: float) -> bool:
    return float(np.ptp(loop.xs)) <= tol


def _describe(g, loop, opts, origin) -> GeodesicString:
    ell = loop.fiber_length
    tol = opts.dedup_tol(ell)
    L = loop_length(g, loop)
    index, nullity = morse_index(g, loop, opts)
    x0 = float(np.mean(loop.xs))
    if g.fiber.m == 0:
        tindex: Optional[int] = 0
    elif _is_circle(loop, tol):
        try:
            tindex = transverse_index(g, x0, L)
        except ValueError:
            tindex = None
    else:
        tindex = None
    return GeodesicString(loop, L, x0, index, nullity, multiplicity(loop, tol),
                          tindex, origin)


def enumerate_strings(g: WarpedMetric, beta: HomotopyClass,
                      opts: SolverOptions = SolverOptions(),
                      starts: Optional[Sequence[float]] = None,
                      warm: Sequence[Tuple[str, SolveOutcome]] = (),
                      workers: int = 1) -> CensusReport:
    """Find the class-beta geodesic strings of ``g`` and assemble F.

    Candidates come from (a) circles at the critical points of f, refined by
    Newton, (b) ``warm`` loops already refined by the caller, and (c)
    multi-start minimisation from a lattice of circles.
    """
    n = census_points(opts, beta.winding)
    ell = g.fiber.length
    tol = opts.dedup_tol(ell)
    outcomes: List[Tuple[str, SolveOutcome]] = []

    roots, _ = critical_points(g, opts.seed_grid)
    for r in roots:
        loop = DiscreteLoop.circle(r, n, ell, beta)
        outcomes.append((f"seed x={r:.17g}", refine_newton(g, loop, opts)))

    outcomes += [(label, out) for label, out in warm if out.loop.n == n]

    positions = lattice(g, opts.starts) if starts is None else np.asarray(starts, float)
    inits = [DiscreteLoop.circle(p, n, ell, beta) for p in positions]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda lp: minimize(g, lp, opts), inits))
    else:
        results = [minimize(g, lp, opts) for lp in inits]
    outcomes += [(f"start x={p:.17g}", o) for p, o in zip(positions, results)]

    strings: List[GeodesicString] = []
    dedup: List[str] = []
    for label, out in outcomes:
        if out.status not in ("converged", "degenerate"):
            continue
        match = next((i for i, s in enumerate(strings)
                      if loop_distance(s.representative, out.loop, tol) <= tol), None)
        if match is not None:
            dedup.append(f"{label} -> string {match}")
            continue
        strings.append(_describe(g, out.loop, opts, label))
        dedup.append(f"{label} -> new string {len(strings) - 1}")

    strings.sort(key=lambda s: (round(s.x0, 9), s.length))
    regular = all(s.nondegenerate for s in strings)
    F = fuller_sum(strings) if regular else None
    return CensusReport(strings, F, regular, n, beta.winding, outcomes, dedup)


# ``enumerate`` would shadow the builtin
enumerate_census = enumerate_strings
