import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpstrings import (DiscreteLoop, FiberModel, GeodesicString, HomotopyClass,
                         SolverOptions, UndefinedInvariantError, WarpedMetric,
                         enumerate_strings, fuller_sum, morse_index, multiplicity,
                         refine_newton, transverse_index)
from warpstrings.census import critical_points, loop_distance, transverse_count

TWO_PI = 2 * math.pi


def spectrum_count(K, L):
    """#{k in Z : (2 pi k / L)^2 < K}, written out independently."""
    count, k = 0, 0
    while (2 * math.pi * k / L) ** 2 < K:
        count += 1 if k == 0 else 2
        k += 1
    return count


def circle(x0, n=256, w=1):
    return DiscreteLoop.circle(x0, n, TWO_PI, HomotopyClass(w))


def _string(index, mult, nullity=1, tindex=0):
    return GeodesicString(circle(0.0, 16), TWO_PI, 0.0, index, nullity, mult, tindex)


def test_census_g1(g1):
    c = enumerate_strings(g1, HomotopyClass(1))
    assert len(c.strings) == 1
    s = c.strings[0]
    assert abs(s.x0) <= 1e-6 and abs(s.length - TWO_PI) <= 1e-3
    assert (s.morse_index, s.nullity, s.multiplicity) == (0, 1, 1)
    assert c.regular and c.F == Fraction(1)


def test_census_g0(g0):
    c = enumerate_strings(g0, HomotopyClass(1))
    assert c.strings == [] and c.F == Fraction(0) and c.regular
    assert len(c.escapes) == len(c.outcomes) == 17


def test_census_double_well(double_well):
    c = enumerate_strings(double_well, HomotopyClass(1))
    xs = sorted(round(s.x0, 6) for s in c.strings)
    assert xs == [-1.0, 0.0, 1.0]
    I0 = spectrum_count(8 / 3, 3 * math.pi)
    for s in c.strings:
        expect = I0 if abs(s.x0) < 0.5 else 0
        assert s.morse_index == expect and s.nullity == 1
    assert c.F == 2 + (-1) ** I0


def test_morse_oracle(double_well):
    L = TWO_PI * 1.5
    expect = spectrum_count(8 / 3, L)
    assert expect == 5
    for n in (64, 128, 256):
        out = refine_newton(double_well, circle(0.0, n))
        assert out.converged
        assert morse_index(double_well, out.loop, SolverOptions(n_points=n)) == (expect, 1)
    for x0 in (-1.0, 1.0):
        assert morse_index(double_well, circle(x0))[0] == 0


def test_morse_index_examples(g1, flat):
    assert morse_index(g1, circle(0.0)) == (0, 1)
    assert morse_index(flat, circle(0.0, 64))[1] == 2


@pytest.mark.parametrize("w", [1, 2, 3])
def test_multiplicity_of_covers(g1, w):
    loop = circle(0.0, 240, w)
    assert multiplicity(loop, 1e-5 * TWO_PI) == w


def test_multiplicity_of_non_symmetric_loop():
    rng = np.random.default_rng(0)
    c = circle(0.0, 64, 2)
    bumpy = c.with_vector(c.vector() + np.concatenate([rng.normal(0, 0.1, 64), np.zeros(64)]))
    assert multiplicity(bumpy, 1e-5) == 1


def test_loop_distance_modulo_shift_and_rotation():
    a = circle(0.0, 32)
    assert loop_distance(a, a.shifted(5)) <= 1e-14
    b = DiscreteLoop.circle(0.0, 32, TWO_PI, phase=0.1)
    assert loop_distance(a, b) <= 1e-12
    assert loop_distance(a, circle(0.5, 32)) == pytest.approx(0.5)


def test_transverse_index_examples():
    hyp = FiberModel.geodesic(TWO_PI, 2, -1.0)
    assert transverse_index(WarpedMetric.from_text("x^2+1", hyp), 0.0, TWO_PI) == 0
    assert transverse_index(WarpedMetric.from_text("x^2+1"), 0.0, TWO_PI) == 0
    for m in (1, 3):
        sph = FiberModel.geodesic(TWO_PI, m, 1.0)
        g = WarpedMetric.from_text("1", sph)
        assert transverse_index(g, 0.0, TWO_PI) == m * spectrum_count(1.0, TWO_PI) == m
    with pytest.raises(ValueError):
        transverse_index(WarpedMetric.from_text("x^2+1", hyp), 1.0, TWO_PI)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 20), st.floats(0.1, 50))
def test_transverse_count_matches_oracle(K, L):
    assert transverse_count(K, L) == spectrum_count(K, L)


def test_fuller_sum_examples():
    assert fuller_sum([_string(0, 1)]) == 1
    assert fuller_sum([]) == 0
    assert fuller_sum([_string(0, 2)]) == Fraction(1, 2)
    assert fuller_sum([_string(0, 1), _string(0, 1), _string(5, 1)]) == 1
    assert isinstance(fuller_sum([_string(1, 3)]), Fraction)
    with pytest.raises(UndefinedInvariantError):
        fuller_sum([_string(0, 1, nullity=2)])
    with pytest.raises(UndefinedInvariantError):
        fuller_sum([_string(0, 1, tindex=None)])


@pytest.mark.parametrize("w", [1, 2, 3])
def test_cover_consistency(g1, w):
    c = enumerate_strings(g1, HomotopyClass(w))
    assert len(c.strings) == 1
    s = c.strings[0]
    assert s.multiplicity == w and s.morse_index == 0 and s.nullity == 1
    assert c.F == Fraction(1, w)
    assert w % s.multiplicity == 0


def test_flat_cylinder_not_regular(flat):
    c = enumerate_strings(flat, HomotopyClass(1), SolverOptions(n_points=64))
    assert not c.regular and c.F is None
    assert all(s.nullity == 2 for s in c.strings)


def test_hyperbolic_fiber_census(hyperbolic_fiber):
    g1 = WarpedMetric.from_text("x^2+1", hyperbolic_fiber)
    g0 = WarpedMetric.from_text("exp(x)", hyperbolic_fiber)
    c = enumerate_strings(g1, HomotopyClass(1))
    assert c.F == 1 and c.strings[0].transverse_index == 0
    assert enumerate_strings(g0, HomotopyClass(1)).F == 0


def test_positive_fiber_curvature_flips_sign():
    # K_perp = kappa / f(0)^2 = 1 at the x=0 circle: the k=0 mode is negative
    g = WarpedMetric.from_text("x^2+1", FiberModel.geodesic(TWO_PI, 1, 1.0))
    c = enumerate_strings(g, HomotopyClass(1))
    assert c.strings[0].transverse_index == spectrum_count(1.0, TWO_PI) == 1
    assert c.F == -1


def test_critical_points(double_well, g0, flat):
    roots, flat_flag = critical_points(double_well)
    np.testing.assert_allclose(roots, [-1.0, 0.0, 1.0], atol=1e-14)
    assert not flat_flag
    assert critical_points(g0) == ([], False)
    roots, flat_flag = critical_points(flat)
    assert flat_flag and len(roots) == 1


@pytest.mark.parametrize("text", ["x^2+1", "(x^2-1)^2+1/2"])
def test_dedup_independent_of_lattice(text):
    g = WarpedMetric.from_text(text)
    a = enumerate_strings(g, HomotopyClass(1))
    b = enumerate_strings(g, HomotopyClass(1), starts=np.linspace(-9.3, 8.1, 11))
    assert len(a.strings) == len(b.strings)
    for s, t in zip(a.strings, b.strings):
        assert abs(s.x0 - t.x0) <= 1e-6
        assert (s.morse_index, s.nullity, s.multiplicity) == (t.morse_index, t.nullity, t.multiplicity)


@pytest.mark.parametrize("text", ["x^2+1", "exp(x)", "(x^2-1)^2+1/2"])
def test_index_stability_under_refinement(text):
    g = WarpedMetric.from_text(text)
    sigs = []
    for n in (64, 128, 256):
        c = enumerate_strings(g, HomotopyClass(1), SolverOptions(n_points=n))
        sigs.append([(round(s.x0, 4), s.morse_index, s.nullity) for s in c.strings])
    assert sigs[0] == sigs[1] == sigs[2]


@settings(max_examples=4, deadline=None)
@given(st.sampled_from(["x^2+1", "exp(x)"]), st.sampled_from([0.5, 2.0, 3.0]))
def test_scale_invariance_negative_curvature(text, c):
    g = WarpedMetric.from_text(text)
    h = WarpedMetric.from_text(f"{c!r}*({text})")
    a = enumerate_strings(g, HomotopyClass(1))
    b = enumerate_strings(h, HomotopyClass(1))
    assert a.F == b.F and len(a.strings) == len(b.strings)
    for s, t in zip(a.strings, b.strings):
        assert t.length == pytest.approx(c * s.length, rel=1e-9)
        assert (s.morse_index, s.multiplicity) == (t.morse_index, t.multiplicity)


def test_scale_changes_index_where_base_curvature_positive(double_well):
    # rescaling f lengthens the saddle circle; the spectrum count grows with L
    h = WarpedMetric.from_text("2*((x^2-1)^2+1/2)")
    a = enumerate_strings(double_well, HomotopyClass(1))
    b = enumerate_strings(h, HomotopyClass(1))
    assert len(a.strings) == len(b.strings) == 3
    i_a = [s.morse_index for s in a.strings if abs(s.x0) < 0.5][0]
    i_b = [s.morse_index for s in b.strings if abs(s.x0) < 0.5][0]
    assert (i_a, i_b) == (spectrum_count(8 / 3, 3 * math.pi), spectrum_count(8 / 3, 6 * math.pi))
    # both counts are odd, so F survives the rescaling here
    assert a.F == b.F == 1
