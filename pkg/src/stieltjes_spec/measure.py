"""Signed measures on the unit interval.

A measure is stored as polynomial density pieces plus point masses (atoms).
The induced distribution function f is normalized to f(0) = 0 and is right
continuous on (0, 1); an atom at 0 is legal and shows up as f(0+) != 0.
All objects are immutable and every operation is a pure function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import MeasureFormatError, MeasureParseError, QuadratureError

_ROOT_IMAG_TOL = 1e-9
_DEDUPE_TOL = 1e-14


def _shift_poly(coeffs: Sequence[float], d: float) -> tuple[float, ...]:
    """Re-expand a constant-first polynomial around a point shifted by d."""
    n = len(coeffs)
    out = [0.0] * n
    for i, c in enumerate(coeffs):
        if c == 0.0:
            continue
        # c * (s + d)^i contributes binomially to lower powers of s
        for j in range(i + 1):
            out[j] += c * math.comb(i, j) * d ** (i - j)
    return tuple(out)


def _poly_val(coeffs: Sequence[float], u):
    """Evaluate a constant-first polynomial at u (scalar or ndarray)."""
    u = np.asarray(u, dtype=float)
    acc = np.zeros_like(u)
    for c in reversed(coeffs):
        acc = acc * u + c
    return acc


def _poly_antideriv(coeffs: Sequence[float]) -> tuple[float, ...]:
    return (0.0,) + tuple(c / (i + 1) for i, c in enumerate(coeffs))


def _real_roots_in(coeffs: Sequence[float], length: float) -> list[float]:
    """Real roots of a constant-first polynomial inside (0, length)."""
    trimmed = list(coeffs)
    while trimmed and trimmed[-1] == 0.0:
        trimmed.pop()
    if len(trimmed) <= 1:
        return []
    roots = np.roots(list(reversed(trimmed)))
    keep = []
    for r in roots:
        if abs(r.imag) > _ROOT_IMAG_TOL * (1.0 + abs(r)):
            continue
        x = float(r.real)
        if 0.0 < x < length:
            keep.append(x)
    keep.sort()
    deduped: list[float] = []
    for x in keep:
        if not deduped or x - deduped[-1] > _DEDUPE_TOL:
            deduped.append(x)
    return deduped


@dataclass(frozen=True)
class PolynomialPiece:
    """Density piece on [lo, hi) with constant-first coefficients in (t - lo)."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise MeasureFormatError(
                f"piece [{self.lo}, {self.hi}] must satisfy 0 <= lo < hi <= 1"
            )
        if len(self.coeffs) == 0:
            raise MeasureFormatError("piece needs at least one coefficient")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def density(self, x):
        """Density value at x (no range check, local polynomial)."""
        return _poly_val(self.coeffs, np.asarray(x, dtype=float) - self.lo)

    def mass_to(self, x):
        """Integral of the density over [lo, min(x, hi)], vectorized."""
        u = np.clip(np.asarray(x, dtype=float) - self.lo, 0.0, self.length)
        return _poly_val(_poly_antideriv(self.coeffs), u)

    def abs_mass_between(self, a: float, b: float) -> float:
        """Exact integral of |density| over [a, b] within the piece."""
        a = max(a, self.lo)
        b = min(b, self.hi)
        if b <= a:
            return 0.0
        anti = _poly_antideriv(self.coeffs)
        cuts = [a - self.lo]
        cuts += [r for r in _real_roots_in(self.coeffs, self.length) if a - self.lo < r < b - self.lo]
        cuts.append(b - self.lo)
        total = 0.0
        vals = _poly_val(anti, np.array(cuts))
        for left, right in zip(vals[:-1], vals[1:]):
            total += abs(float(right) - float(left))
        return total


@dataclass(frozen=True)
class Atom:
    """Point mass of weight w at position x."""

    x: float
    w: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "w", float(self.w))
        if not 0.0 <= self.x <= 1.0:
            raise MeasureFormatError(f"atom position {self.x} outside [0, 1]")
        if self.w == 0.0:
            raise MeasureFormatError(f"atom at {self.x} has zero weight")


@dataclass(frozen=True)
class Measure:
    """Finite signed measure: ordered density pieces plus ordered atoms."""

    pieces: tuple[PolynomialPiece, ...] = field(default_factory=tuple)
    atoms: tuple[Atom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        pieces = tuple(sorted(self.pieces, key=lambda p: p.lo))
        atoms = tuple(sorted(self.atoms, key=lambda a: a.x))
        for left, right in zip(pieces[:-1], pieces[1:]):
            if right.lo < left.hi - 1e-15:
                raise MeasureFormatError(
                    f"pieces [{left.lo}, {left.hi}] and [{right.lo}, {right.hi}] overlap"
                )
        for left, right in zip(atoms[:-1], atoms[1:]):
            if left.x == right.x:
                raise MeasureFormatError(f"two atoms share location {left.x}")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "atoms", atoms)

    # ------------------------------------------------------------------
    # constructors

    @staticmethod
    def zero() -> "Measure":
        return Measure()

    @staticmethod
    def lebesgue(scale: float = 1.0) -> "Measure":
        if scale == 0.0:
            return Measure()
        return Measure(pieces=(PolynomialPiece(0.0, 1.0, (float(scale),)),))

    @staticmethod
    def point(x: float, w: float) -> "Measure":
        return Measure(atoms=(Atom(x, w),))

    @staticmethod
    def from_density(lo: float, hi: float, coeffs: Sequence[float]) -> "Measure":
        return Measure(pieces=(PolynomialPiece(lo, hi, tuple(coeffs)),))

    # ------------------------------------------------------------------
    # induced distribution function

    def eval(self, x: float) -> float:
        """Induced function value f(x), right continuous, f(0) = 0."""
        return float(self.eval_many(np.array([x]))[0])

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros_like(xs)
        for piece in self.pieces:
            out = out + piece.mass_to(xs)
        for atom in self.atoms:
            out = out + atom.w * (xs >= atom.x)
        # normalization pins f(0) = 0 even when an atom sits at 0
        out = np.where(xs == 0.0, 0.0, out)
        return out

    def drift(self, x: float) -> float:
        """Induced function as the dynamics see it: origin mass removed."""
        return float(self.drift_many(np.array([x]))[0])

    def drift_many(self, xs) -> np.ndarray:
        """Vector version of drift().

        A point mass at 0 is invisible to the evolution (it sits outside the
        right-open integration window), so the drift coefficient subtracts
        it from the induced function.
        """
        xs = np.asarray(xs, dtype=float)
        out = self.eval_many(xs)
        w0 = self.atom_weight(0.0)
        if w0 != 0.0:
            out = out - w0 * (xs > 0.0)
        return out

    def density_many(self, xs) -> np.ndarray:
        """Density at points that avoid piece boundaries."""
        xs = np.asarray(xs, dtype=float)
        out = np.zeros_like(xs)
        for piece in self.pieces:
            inside = (xs >= piece.lo) & (xs < piece.hi)
            if np.any(inside):
                out[inside] = piece.density(xs[inside])
        return out

    # ------------------------------------------------------------------
    # variation

    def total_variation(self) -> float:
        """Exact variation over the closed interval, atom at 0 included."""
        tv = sum(p.abs_mass_between(p.lo, p.hi) for p in self.pieces)
        tv += sum(abs(a.w) for a in self.atoms)
        return float(tv)

    def tv_function(self, x: float) -> float:
        """Running variation over (0, x]; the jump at 0 does not count."""
        if x <= 0.0:
            return 0.0
        tv = sum(p.abs_mass_between(0.0, x) for p in self.pieces)
        tv += sum(abs(a.w) for a in self.atoms if 0.0 < a.x <= x)
        return float(tv)

    # ------------------------------------------------------------------
    # structural queries

    def breakpoints(self) -> tuple[float, ...]:
        """Sorted union of piece endpoints and atom positions."""
        pts = set()
        for p in self.pieces:
            pts.add(p.lo)
            pts.add(p.hi)
        for a in self.atoms:
            pts.add(a.x)
        return tuple(sorted(pts))

    def atom_weight(self, x: float) -> float:
        for a in self.atoms:
            if a.x == x:
                return a.w
        return 0.0

    @property
    def is_atomic(self) -> bool:
        return len(self.pieces) == 0

    @property
    def is_zero(self) -> bool:
        return len(self.pieces) == 0 and len(self.atoms) == 0

    # ------------------------------------------------------------------
    # arithmetic (used by perturbation studies)

    def scaled(self, c: float) -> "Measure":
        if c == 0.0:
            return Measure()
        pieces = tuple(
            PolynomialPiece(p.lo, p.hi, tuple(c * v for v in p.coeffs)) for p in self.pieces
        )
        atoms = tuple(Atom(a.x, c * a.w) for a in self.atoms)
        return Measure(pieces, atoms)

    def plus(self, other: "Measure") -> "Measure":
        """Sum of two measures with pieces split on the joint breakpoints."""
        cuts = sorted(
            {0.0, 1.0}
            | {p.lo for p in self.pieces} | {p.hi for p in self.pieces}
            | {p.lo for p in other.pieces} | {p.hi for p in other.pieces}
        )
        pieces = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            combined = [0.0]
            for m in (self, other):
                for p in m.pieces:
                    if p.lo <= lo and hi <= p.hi:
                        shifted = _shift_poly(p.coeffs, lo - p.lo)
                        if len(shifted) > len(combined):
                            combined += [0.0] * (len(shifted) - len(combined))
                        for i, c in enumerate(shifted):
                            combined[i] += c
            if any(c != 0.0 for c in combined):
                pieces.append(PolynomialPiece(lo, hi, tuple(combined)))
        weights: dict[float, float] = {}
        for m in (self, other):
            for a in m.atoms:
                weights[a.x] = weights.get(a.x, 0.0) + a.w
        atoms = tuple(Atom(x, w) for x, w in sorted(weights.items()) if w != 0.0)
        return Measure(tuple(pieces), atoms)

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        return {
            "pieces": [
                {"lo": p.lo, "hi": p.hi, "coeffs": list(p.coeffs)} for p in self.pieces
            ],
            "atoms": [{"x": a.x, "w": a.w} for a in self.atoms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(data: dict) -> "Measure":
        if not isinstance(data, dict):
            raise MeasureParseError("measure document must be a JSON object")
        unknown = set(data) - {"pieces", "atoms"}
        if unknown:
            raise MeasureParseError(f"unknown measure keys: {sorted(unknown)}")
        try:
            pieces = tuple(
                PolynomialPiece(d["lo"], d["hi"], tuple(d["coeffs"]))
                for d in data.get("pieces", [])
            )
            atoms = tuple(Atom(d["x"], d["w"]) for d in data.get("atoms", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise MeasureParseError(f"malformed measure entry: {exc}") from exc
        return Measure(pieces, atoms)

    @staticmethod
    def from_json(text: str) -> "Measure":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MeasureParseError(f"invalid JSON: {exc}") from exc
        return Measure.from_dict(data)


# ---------------------------------------------------------------------------
# reference families


def ramp_sequence(m: int) -> Measure:
    """Unit mass smeared with constant density m over [1/2, 1/2 + 1/m]."""
    if m < 2:
        raise MeasureFormatError("ramp slope m must be at least 2 to fit in [0, 1]")
    return Measure.from_density(0.5, 0.5 + 1.0 / m, (float(m),))


def oscillation_sequence(m: int, nodes_per_period: int = 96) -> Measure:
    """Piecewise cubic density matching d/dx[(1/m) sin(2 pi m^2 x)].

    The interpolant is Hermite on each subinterval (values and exact slopes
    at both ends), with nodes_per_period >= 32 nodes per oscillation period.
    Its variation approaches the exact value 4 m to relative accuracy well
    under 1e-6 at the default resolution.
    """
    if m < 1:
        raise MeasureFormatError("oscillation index m must be positive")
    if nodes_per_period < 32:
        raise MeasureFormatError("need at least 32 nodes per period")
    freq = 2.0 * math.pi * m * m
    amp = 2.0 * math.pi * m  # density amplitude of the induced function
    n_cells = m * m * nodes_per_period
    xs = np.linspace(0.0, 1.0, n_cells + 1)
    rho = amp * np.cos(freq * xs)
    slope = -amp * freq * np.sin(freq * xs)
    pieces = []
    for i in range(n_cells):
        h = xs[i + 1] - xs[i]
        r0, r1 = rho[i], rho[i + 1]
        d0, d1 = slope[i], slope[i + 1]
        c2 = (3.0 * (r1 - r0) / h - 2.0 * d0 - d1) / h
        c3 = (2.0 * (r0 - r1) / h + d0 + d1) / (h * h)
        pieces.append(PolynomialPiece(xs[i], xs[i + 1], (r0, d0, c2, c3)))
    return Measure(tuple(pieces))


# ---------------------------------------------------------------------------
# Lebesgue-Stieltjes integration


_GAUSS10_NODES, _GAUSS10_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _call_vectorized(g: Callable, xs: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(g(xs))
        if vals.shape != xs.shape:
            raise TypeError
        return vals
    except Exception:
        return np.array([g(float(x)) for x in xs])


def _adaptive_piece_integral(
    g: Callable, piece: PolynomialPiece, a: float, b: float, tol: float, depth: int = 0
):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)

    def gauss(lo, hi):
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        nodes = c + h * _GAUSS10_NODES
        vals = _call_vectorized(g, nodes) * piece.density(nodes)
        return h * float(np.dot(_GAUSS10_WEIGHTS, vals))

    coarse = gauss(a, b)
    fine = gauss(a, mid) + gauss(mid, b)
    err = abs(fine - coarse)
    if err <= tol or b - a < 1e-13:
        return fine, err
    if depth > 40:
        raise QuadratureError(f"density quadrature stuck on [{a}, {b}], error {err:g}")
    left, el = _adaptive_piece_integral(g, piece, a, mid, tol / 2, depth + 1)
    right, er = _adaptive_piece_integral(g, piece, mid, b, tol / 2, depth + 1)
    return left + right, el + er


def ls_integral(
    g: Callable,
    mu: Measure,
    x: float = 1.0,
    include_zero_atom: bool = True,
    tol: float = 1e-10,
) -> float:
    """Integral of a continuous g against d(mu) over [0, x] or (0, x].

    include_zero_atom selects the closed-at-zero convention, where an atom
    sitting exactly at 0 contributes g(0) times its weight.
    """
    if not 0.0 <= x <= 1.0:
        raise MeasureFormatError(f"integration endpoint {x} outside [0, 1]")
    total = 0.0
    for atom in mu.atoms:
        if atom.x == 0.0:
            if include_zero_atom:
                total += float(np.asarray(g(0.0))) * atom.w
        elif atom.x <= x:
            total += float(np.asarray(g(atom.x))) * atom.w
    err_budget = tol
    for piece in mu.pieces:
        hi = min(piece.hi, x)
        if hi <= piece.lo:
            continue
        val, _ = _adaptive_piece_integral(g, piece, piece.lo, hi, err_budget)
        total += val
    return float(total)


def lebesgue_integral_of_induced(mu: Measure) -> float:
    """Integral over [0, 1] of the induced function x -> mu([0, x])."""
    total = 0.0
    for piece in mu.pieces:
        anti = _poly_antideriv(piece.coeffs)
        inner = _poly_antideriv(anti)
        total += float(_poly_val(inner, piece.length))
        total += float(_poly_val(anti, piece.length)) * (1.0 - piece.hi)
    for atom in mu.atoms:
        total += atom.w * (1.0 - atom.x)
    return total
