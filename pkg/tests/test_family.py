import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import newton

from warpstrings import (HomotopyClass, MetricPath, SolverOptions, WarpedMetric,
                         continue_string, detect_events, enumerate_strings, run_family)
from warpstrings.family import interpolation_samples

TWO_PI = 2 * math.pi
INTERP = "(1-s)*exp(x)+s*(x^2+1)"
SAMPLES = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)


def root_oracle(s):
    """Critical point of (1-s)e^x + s(x^2+1), by Newton on a hand-written f'."""
    return newton(lambda x: (1 - s) * math.exp(x) + 2 * s * x, 0.0,
                  fprime=lambda x: (1 - s) * math.exp(x) + 2 * s, tol=1e-14, maxiter=200)


@pytest.fixture(scope="module")
def interp_report():
    return run_family(MetricPath.from_text(INTERP, SAMPLES), HomotopyClass(1))


def test_interpolation_membership_everywhere(interp_report):
    assert all(r.verdict.member for r in interp_report.records)
    assert not any(e.kind == "membership-exit" for e in interp_report.events)


def test_interpolation_diverging_at_small_s(interp_report):
    recs = interp_report.records
    assert recs[1].diverging_prev  # [0, 0.01]
    assert any(e.kind == "uniform-discontinuity" and e.s_lo == 0.0
               for e in interp_report.events)


def test_interpolation_escape_near_zero(interp_report):
    kinds = {e.kind for e in interp_report.events_between(0.0, 0.01)}
    assert {"escape", "length-collapse"} & kinds


def test_interpolation_F_values(interp_report):
    for r in interp_report.records:
        assert r.F == (Fraction(0) if r.s == 0.0 else Fraction(1))


def test_interpolation_tracks_root_oracle(interp_report):
    for r in interp_report.records[1:]:
        (st_,) = r.strings
        assert abs(st_.x0 - root_oracle(r.s)) <= 1e-4
        f = (1 - r.s) * math.exp(root_oracle(r.s)) + r.s * (root_oracle(r.s) ** 2 + 1)
        assert st_.length == pytest.approx(TWO_PI * f, rel=1e-6)
    xs = [r.strings[0].x0 for r in interp_report.records[1:]]
    assert all(a < b for a, b in zip(xs, xs[1:]))


def test_no_clean_constant_run_from_g0_to_g1(interp_report):
    rep = interp_report
    assert rep.records[0].F != rep.records[-1].F
    assert rep.events and not rep.unexplained_jumps()


def test_sweep_upward_also_flags_the_jump():
    rep = run_family(MetricPath.from_text(INTERP, (0.0, 0.01, 0.1, 1.0)), HomotopyClass(1),
                     direction="up")
    assert [r.F for r in rep.records] == [0, 1, 1, 1]
    assert rep.events_between(0.0, 0.01) and not rep.unexplained_jumps()


def test_constant_family():
    rep = run_family(MetricPath.from_text("x^2+1", (0.0, 0.5, 1.0)), HomotopyClass(1))
    assert rep.events == []
    assert [r.F for r in rep.records] == [1, 1, 1]
    assert [r.dist_prev for r in rep.records[1:]] == [0.0, 0.0]


def test_shifted_family():
    rep = run_family(MetricPath.from_text("x^2+1+s", (0.0, 0.25, 0.5, 1.0)), HomotopyClass(1))
    assert rep.events == []
    for r in rep.records:
        assert r.F == 1
        assert r.strings[0].length == pytest.approx(TWO_PI * (1 + r.s), rel=1e-12)
    for a, b in zip(rep.records, rep.records[1:]):
        assert b.dist_prev == pytest.approx(b.s - a.s, abs=1e-12)


def test_positivity_violation_recorded():
    rep = run_family(MetricPath.from_text("x^2+1-s*2", (0.0, 0.25, 0.75, 1.0)),
                     HomotopyClass(1))
    bad = [e for e in rep.events if e.kind == "membership-exit"]
    assert sorted({e.s_lo for e in bad}) == [0.75, 1.0]
    assert rep.records[2].error is not None and rep.records[2].F is None
    assert rep.records[1].F == 1


def test_continue_string_examples(g1, flat):
    s = enumerate_strings(g1, HomotopyClass(1)).strings[0]
    out = continue_string(g1, WarpedMetric.from_text("x^2+1.1"), s)
    assert out.converged and abs(float(np.mean(out.loop.xs))) <= 1e-12
    out = continue_string(g1, flat, s)
    assert out.status == "degenerate"


def test_continuation_drifts_with_root_oracle():
    path = MetricPath.from_text(INTERP, (0.0, 0.05, 0.1, 0.2, 1.0))
    g_prev = path.slice(1.0)
    string = enumerate_strings(g_prev, HomotopyClass(1)).strings[0]
    last = 0.0
    for s in (0.2, 0.1, 0.05):
        g_next = path.slice(s)
        out = continue_string(g_prev, g_next, string)
        assert out.converged
        x0 = float(np.mean(out.loop.xs))
        assert abs(x0 - root_oracle(s)) <= 1e-4 and x0 < last
        last = x0
        string = enumerate_strings(g_next, HomotopyClass(1)).strings[0]
        g_prev = g_next


def test_detect_events_constant(interp_report):
    rep = run_family(MetricPath.from_text("x^2+1", (0.0, 1.0)), HomotopyClass(1))
    assert detect_events(rep.records, rep.eps_len) == []
    assert detect_events(interp_report.records, interp_report.eps_len) == interp_report.events


def test_path_validation():
    with pytest.raises(ValueError):
        MetricPath.from_text(INTERP, (0.1, 1.0))
    with pytest.raises(ValueError):
        MetricPath.from_text(INTERP, (0.0, 0.5, 0.5, 1.0))


def test_interpolation_samples_grid():
    s = interpolation_samples()
    assert s[0] == 0.0 and s[1] == 0.002 and s[-1] == 1.0
    assert all(a < b for a, b in zip(s, s[1:]))


@settings(max_examples=3, deadline=None)
@given(st.sampled_from(["x^2+1+{a}*s", "(1+{a}*s)*(x^2+1)", "cosh(x)+{a}*s*x^2"]),
       st.floats(0.1, 2.0))
def test_F_constant_on_event_free_sweeps(template, a):
    text = template.format(a=repr(round(a, 3)))
    rep = run_family(MetricPath.from_text(text, (0.0, 0.5, 1.0)), HomotopyClass(1),
                     SolverOptions(n_points=64))
    if not rep.events:
        Fs = {r.F for r in rep.records if r.F is not None}
        assert len(Fs) <= 1
    assert not rep.unexplained_jumps()
