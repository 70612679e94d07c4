"""Sweeps along one-parameter families of warped metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .census import CensusReport, GeodesicString, enumerate_strings
from .geometry import (FiberModel, MembershipVerdict, MetricError, WarpedMetric,
                       membership, uniform_distance)
from .loops import (HomotopyClass, PreconditionError, SolveOutcome, SolverOptions,
                    minimize, refine_newton)
from .profile import ProfileDomainError, ProfileError, ProfileExpr, parse

EVENT_KINDS = ("escape", "length-collapse", "degeneracy", "membership-exit",
               "uniform-discontinuity")


@dataclass(frozen=True)
class MetricPath:
    family: ProfileExpr
    fiber: FiberModel
    samples: Tuple[float, ...]
    half_width: float = 10.0
    probe_radii: Tuple[float, ...] = (20.0, 40.0, 80.0)

    def __post_init__(self):
        s = tuple(float(v) for v in self.samples)
        object.__setattr__(self, "samples", s)
        if len(s) < 2 or s[0] != 0.0 or s[-1] != 1.0:
            raise ValueError("samples must start at 0 and end at 1")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("samples must be strictly increasing")

    @classmethod
    def from_text(cls, text: str, samples: Sequence[float],
                  fiber: Optional[FiberModel] = None, half_width: float = 10.0,
                  probe_radii: Sequence[float] = (20.0, 40.0, 80.0)) -> "MetricPath":
        fam = parse(text, window=(-half_width, half_width))
        return cls(fam, fiber or FiberModel.circle(), tuple(samples), half_width,
                   tuple(probe_radii))

    def slice(self, s: float) -> WarpedMetric:
        return WarpedMetric(self.family.bind(s), self.fiber, self.half_width,
                            self.probe_radii)


@dataclass(frozen=True)
class Event:
    s_lo: float
    s_hi: float
    kind: str
    detail: str = ""

    def touches(self, a: float, b: float) -> bool:
        return self.s_lo <= b and self.s_hi >= a


@dataclass
class SampleRecord:
    s: float
    metric: Optional[WarpedMetric] = None
    error: Optional[str] = None
    verdict: Optional[MembershipVerdict] = None
    census: Optional[CensusReport] = None
    continued: List[Tuple[str, SolveOutcome]] = field(default_factory=list)
    dist_prev: Optional[float] = None
    diverging_prev: Optional[bool] = None

    @property
    def F(self) -> Optional[Fraction]:
        return self.census.F if self.census is not None else None

    @property
    def strings(self) -> List[GeodesicString]:
        return self.census.strings if self.census is not None else []


@dataclass
class FamilyReport:
    records: List[SampleRecord]
    events: List[Event]
    direction: str
    k: int
    eps_len: float

    def events_between(self, a: float, b: float) -> List[Event]:
        return [e for e in self.events if e.touches(a, b)]

    def unexplained_jumps(self) -> List[Tuple[float, float]]:
        """Consecutive samples whose F differ with no event on the interval."""
        out = []
        for r0, r1 in zip(self.records, self.records[1:]):
            if r0.F is None or r1.F is None or r0.F == r1.F:
                continue
            if not self.events_between(r0.s, r1.s):
                out.append((r0.s, r1.s))
        return out


def continue_string(g_prev: WarpedMetric, g_next: WarpedMetric,
                    string: GeodesicString,
                    opts: SolverOptions = SolverOptions()) -> SolveOutcome:
    """Zeroth-order predictor (reuse the loop), Newton corrector, descent fallback."""
    loop = string.representative
    try:
        out = refine_newton(g_next, loop, opts, switch_tol=opts.continuation_tol)
        if out.status in ("converged", "degenerate", "escaped"):
            return out
    except (PreconditionError, ProfileDomainError):
        pass
    return minimize(g_next, loop, opts)


def detect_events(records: Sequence[SampleRecord], eps_len: float) -> List[Event]:
    events: List[Event] = []
    for r in records:
        s = r.s
        if r.error is not None:
            events.append(Event(s, s, "membership-exit", r.error))
            continue
        if r.verdict is not None and not r.verdict.member:
            where = "" if r.verdict.witness is None else f" near x={r.verdict.witness:.6g}"
            events.append(Event(s, s, "membership-exit", "curvature check failed" + where))
        if r.census is not None:
            if any(st.nullity > 1 for st in r.census.strings) or not r.census.regular:
                events.append(Event(s, s, "degeneracy", "degenerate or unresolved string"))
            short = [st.length for st in r.census.strings if st.length < eps_len]
            if short:
                events.append(Event(s, s, "length-collapse", f"string length {min(short):.3e}"))

    ordered = sorted(records, key=lambda r: r.s)
    for a, b in zip(ordered, ordered[1:]):
        lo, hi = a.s, b.s
        if b.diverging_prev:
            events.append(Event(lo, hi, "uniform-discontinuity",
                                f"sampled C^k distance {b.dist_prev:.3e}, growing at probes"))
        for r in (a, b):
            for label, out in r.continued:
                if not label.startswith(f"from s={_fmt(a.s if r is b else b.s)}"):
                    continue
                if out.status == "escaped":
                    events.append(Event(lo, hi, "escape", f"{label}: {out.note or 'escaped'}"))
                    if out.length < eps_len:
                        events.append(Event(lo, hi, "length-collapse",
                                            f"{label}: length {out.length:.3e}"))
                elif out.status == "degenerate":
                    events.append(Event(lo, hi, "degeneracy", f"{label}: {out.note}"))
    events.sort(key=lambda e: (e.s_lo, e.s_hi, EVENT_KINDS.index(e.kind), e.detail))
    return events


def _fmt(s: float) -> str:
    return repr(float(s))


def run_family(path: MetricPath, beta: HomotopyClass,
               opts: SolverOptions = SolverOptions(), *, direction: str = "down",
               k: int = 2, grid_n: int = 1001, workers: int = 1) -> FamilyReport:
    """Membership, census and continuation at every sample of ``path``.

    ``direction="down"`` sweeps from s=1 to s=0, continuing the strings of
    each slice into the next one visited; ``"up"`` sweeps the other way.
    """
    if direction not in ("down", "up"):
        raise ValueError("direction must be 'down' or 'up'")
    records = [SampleRecord(s) for s in path.samples]
    for r in records:
        try:
            r.metric = path.slice(r.s)
            r.verdict = membership(r.metric, grid_n)
        except (MetricError, ProfileError, ProfileDomainError) as exc:
            r.error = f"construction error: {exc}"
            r.metric = None

    order = list(range(len(records)))
    if direction == "down":
        order.reverse()
    prev: Optional[SampleRecord] = None
    for i in order:
        r = records[i]
        if r.metric is None:
            prev = r
            continue
        warm: List[Tuple[str, SolveOutcome]] = []
        if prev is not None and prev.metric is not None and prev.census is not None:
            for j, st in enumerate(prev.strings):
                label = f"from s={_fmt(prev.s)} string {j}"
                try:
                    out = continue_string(prev.metric, r.metric, st, opts)
                except ProfileDomainError as exc:
                    out = SolveOutcome("escaped", st.representative, 0.0, float("nan"),
                                       note=f"domain error: {exc}")
                r.continued.append((label, out))
                if out.status in ("converged", "degenerate"):
                    warm.append((label, out))
        try:
            r.census = enumerate_strings(r.metric, beta, opts, warm=warm, workers=workers)
        except ProfileDomainError as exc:
            r.error = f"census domain error: {exc}"
        prev = r

    for a, b in zip(records, records[1:]):
        if a.metric is not None and b.metric is not None:
            b.dist_prev, b.diverging_prev = uniform_distance(a.metric, b.metric, k, grid_n)

    eps_len = opts.eps_len(path.fiber.length, beta.winding)
    events = detect_events(records, eps_len)
    return FamilyReport(records, events, direction, k, eps_len)


def interpolation_samples(smallest: float = 0.002) -> Tuple[float, ...]:
    """Default grid for straight-line paths: dense near s=0, then uniform."""
    small = [smallest, 0.005, 0.01, 0.02, 0.05]
    coarse = [round(0.1 * i, 10) for i in range(1, 11)]
    return tuple(sorted({0.0, *[v for v in small if v > 0], *coarse}))
