"""Measure layer: induced functions, variation, Stieltjes integrals."""

import math

import numpy as np
import pytest

from stieltjes_spec.errors import MeasureFormatError, MeasureParseError
from stieltjes_spec.measure import (
    Atom,
    Measure,
    PolynomialPiece,
    lebesgue_integral_of_induced,
    ls_integral,
    oscillation_sequence,
    ramp_sequence,
)


def random_measure(rng, n_pieces=3, n_atoms=2, degree=3):
    cuts = np.sort(rng.uniform(0.05, 0.95, 2 * n_pieces))
    pieces = []
    for i in range(n_pieces):
        lo, hi = cuts[2 * i], cuts[2 * i + 1]
        if hi - lo < 1e-3:
            continue
        coeffs = tuple(rng.uniform(-2, 2, rng.integers(1, degree + 2)))
        pieces.append(PolynomialPiece(lo, hi, coeffs))
    atoms = []
    used = set()
    for _ in range(n_atoms):
        x = round(float(rng.uniform(0, 1)), 6)
        if x in used:
            continue
        used.add(x)
        atoms.append(Atom(x, float(rng.uniform(-1, 1)) or 0.5))
    return Measure(tuple(pieces), tuple(atoms))


def piecewise_midpoint(mu, f, n=50_000):
    """Oracle integral of f(t) * density(t), grid aligned per piece."""
    total = 0.0
    for p in mu.pieces:
        edges = np.linspace(p.lo, p.hi, n + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        total += float(np.sum(f(mids) * p.density(mids)) * (p.hi - p.lo) / n)
    return total


def riemann_tv(mu):
    """Variation oracle: midpoint rule on |density| plus atom weights."""
    tv = 0.0
    for p in mu.pieces:
        n = 50_000
        edges = np.linspace(p.lo, p.hi, n + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        tv += float(np.sum(np.abs(p.density(mids))) * (p.hi - p.lo) / n)
    return tv + sum(abs(a.w) for a in mu.atoms)


def test_eval_pinned_at_zero_with_zero_atom():
    mu = Measure.point(0.0, 2.5)
    assert mu.eval(0.0) == 0.0
    assert mu.eval(1e-12) == 2.5
    assert mu.eval(1.0) == 2.5


def test_eval_right_continuous_at_atom():
    mu = Measure.point(0.5, 1.0)
    assert mu.eval(0.5) == 1.0
    assert mu.eval(0.5 - 1e-12) == 0.0


def test_eval_matches_cumulative_density():
    # trapezoid oracle is only O(h) accurate across density jumps
    rng = np.random.default_rng(11)
    for _ in range(6):
        mu = Measure(random_measure(rng, n_atoms=0).pieces)
        xs = np.linspace(0, 1, 20_001)
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (mu.density_many(xs)[1:] + mu.density_many(xs)[:-1]) * np.diff(xs)
        )])
        assert np.max(np.abs(mu.eval_many(xs) - cum)) < 2e-4


def test_eval_exact_polynomial_antiderivative():
    mu = Measure.from_density(0.2, 0.8, (1.0, 2.0, 3.0))
    for x in (0.2, 0.35, 0.61, 0.8, 1.0):
        u = min(x, 0.8) - 0.2
        want = u + u**2 + u**3
        assert abs(mu.eval(x) - want) < 1e-15


def test_total_variation_sign_change_exact():
    # density 2t - 1 changes sign at 1/2; variation is exactly 1/2
    mu = Measure.from_density(0.0, 1.0, (-1.0, 2.0))
    assert abs(mu.total_variation() - 0.5) < 1e-15
    assert abs(mu.eval(1.0)) < 1e-15
    assert abs(riemann_tv(mu) - 0.5) < 1e-9


def test_total_variation_random_vs_riemann():
    rng = np.random.default_rng(7)
    for _ in range(8):
        mu = random_measure(rng)
        assert abs(mu.total_variation() - riemann_tv(mu)) < 1e-7


def test_zero_atom_counts_in_total_variation_not_running_variation():
    mu = Measure(atoms=(Atom(0.0, -3.0), Atom(0.25, 1.0)))
    assert mu.total_variation() == 4.0
    assert mu.tv_function(1.0) == 1.0
    assert mu.tv_function(0.25) == 1.0
    assert mu.tv_function(0.25 - 1e-12) == 0.0


def test_tv_function_monotone():
    rng = np.random.default_rng(3)
    mu = random_measure(rng)
    vals = [mu.tv_function(x) for x in np.linspace(0, 1, 301)]
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))
    assert abs(vals[-1] - (mu.total_variation() - sum(
        abs(a.w) for a in mu.atoms if a.x == 0.0))) < 1e-12


def test_ls_integral_lebesgue_closed_form():
    val = ls_integral(np.cos, Measure.lebesgue(), 1.0)
    assert abs(val - math.sin(1.0)) < 1e-12


def test_ls_integral_truncated_upper_limit():
    val = ls_integral(lambda t: t, Measure.lebesgue(), 0.5)
    assert abs(val - 0.125) < 1e-12


def test_ls_integral_atom_conventions():
    mu = Measure(atoms=(Atom(0.0, 2.0), Atom(0.5, -1.0)))
    g = lambda t: 3.0 + t
    assert abs(ls_integral(g, mu, 1.0) - (2 * 3.0 - 3.5)) < 1e-15
    assert abs(ls_integral(g, mu, 1.0, include_zero_atom=False) - (-3.5)) < 1e-15
    # endpoint atom included when x lands on it
    assert abs(ls_integral(g, mu, 0.5) - (6.0 - 3.5)) < 1e-15
    assert abs(ls_integral(g, mu, 0.4) - 6.0) < 1e-15


def test_ls_integral_random_vs_riemann():
    rng = np.random.default_rng(19)
    for _ in range(5):
        mu = random_measure(rng, n_atoms=0)
        g = lambda t: np.exp(np.sin(4.0 * t))
        oracle = piecewise_midpoint(mu, g)
        assert abs(ls_integral(g, mu, 1.0) - oracle) < 1e-7


def test_ramp_unit_mass_and_weak_star_moment():
    prev_err = None
    for m in (4, 16, 64, 256):
        mu = ramp_sequence(m)
        assert abs(mu.eval(1.0) - 1.0) < 1e-12
        moment = ls_integral(lambda t: t * t, mu, 1.0)
        err = abs(moment - 0.25)
        if prev_err is not None:
            assert err < prev_err
        prev_err = err
    assert prev_err < 1e-2
    with pytest.raises(MeasureFormatError):
        ramp_sequence(1)


def test_oscillation_variation_and_induced_values():
    for m in (1, 2, 3):
        mu = oscillation_sequence(m)
        assert abs(mu.total_variation() - 4.0 * m) / (4.0 * m) < 1e-6
        xs = np.linspace(0, 1, 200)
        target = np.sin(2 * np.pi * m * m * xs) / m
        assert np.max(np.abs(mu.eval_many(xs) - target)) < 1e-7
    with pytest.raises(MeasureFormatError):
        oscillation_sequence(2, nodes_per_period=16)


def test_plus_and_scaled_are_pointwise_linear():
    rng = np.random.default_rng(23)
    a = random_measure(rng)
    b = random_measure(rng)
    xs = np.linspace(0, 1, 500)
    combo = a.plus(b.scaled(-2.5))
    want = a.eval_many(xs) - 2.5 * b.eval_many(xs)
    assert np.max(np.abs(combo.eval_many(xs) - want)) < 1e-12
    assert a.scaled(0.0).is_zero


def test_plus_merges_coincident_atoms():
    total = Measure.point(0.5, 1.0).plus(Measure.point(0.5, -1.0))
    assert total.is_zero
    kept = Measure.point(0.5, 1.0).plus(Measure.point(0.5, 2.0))
    assert kept.atom_weight(0.5) == 3.0


def test_json_roundtrip_identity():
    rng = np.random.default_rng(5)
    mu = random_measure(rng)
    again = Measure.from_json(mu.to_json())
    assert again == mu
    assert Measure.zero() == Measure.from_json(Measure.zero().to_json())


def test_validation_rejects_malformed_input():
    with pytest.raises(MeasureFormatError):
        PolynomialPiece(0.5, 0.5, (1.0,))
    with pytest.raises(MeasureFormatError):
        PolynomialPiece(-0.1, 0.5, (1.0,))
    with pytest.raises(MeasureFormatError):
        Atom(1.5, 1.0)
    with pytest.raises(MeasureFormatError):
        Atom(0.5, 0.0)
    with pytest.raises(MeasureFormatError):
        Measure(pieces=(
            PolynomialPiece(0.0, 0.6, (1.0,)),
            PolynomialPiece(0.5, 1.0, (1.0,)),
        ))
    with pytest.raises(MeasureFormatError):
        Measure(atoms=(Atom(0.5, 1.0), Atom(0.5, 2.0)))
    with pytest.raises(MeasureParseError):
        Measure.from_json("{not json")
    with pytest.raises(MeasureParseError):
        Measure.from_json('{"pieces": [], "extra": 1}')


def test_breakpoints_sorted_union():
    mu = Measure(
        pieces=(PolynomialPiece(0.2, 0.4, (1.0,)),),
        atoms=(Atom(0.9, 1.0), Atom(0.1, 1.0)),
    )
    assert mu.breakpoints() == (0.1, 0.2, 0.4, 0.9)


def test_lebesgue_integral_of_induced_vs_trapezoid():
    rng = np.random.default_rng(31)
    for _ in range(5):
        mu = random_measure(rng)
        xs = np.linspace(0, 1, 400_001)
        oracle = np.trapezoid(mu.eval_many(xs), xs)
        assert abs(lebesgue_integral_of_induced(mu) - oracle) < 1e-5
