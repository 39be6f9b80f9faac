"""Eigenvalue location, counting and refinement for both endpoint pairings.

All spectra here are real.  Roots of the first pairing sit near the even
lattice k = 2 n pi, roots of the second near the odd lattice k = (2n+1) pi,
with k the signed real cube root of the eigenvalue.  The integer n indexes
eigenvalues in sorted order around 0.

Counting works on the characteristic function through the argument principle:
the winding of Delta_xi around a disc equals the number of enclosed zeros.
Contours are conjugate-closed, so each point costs one initial value solve.

counting_threshold turns the a-priori growth bound with constant c_pi into
the tail index N from which every lattice window (center +- pi/3) holds
exactly one root.  The constant is diagnostic: runtime verification is always
done by winding counts, never by trusting the threshold.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .charfn import _E1, _E2, real_split
from .errors import (
    BadArgumentError,
    ContourResolutionError,
    RootSearchError,
    SpectrumConsistencyError,
    ThresholdRangeError,
)
from .ivp import (
    InitialTriple,
    SolutionPath,
    SolverConfig,
    Workspace,
    _assemble_path,
    _solve_verified,
    solve_value,
)
from .measure import Measure

# rank ratio below which the 2x2 pairing matrix counts as doubly degenerate
_RANK_TOL = 1e-8
# largest admissible phase step along a counting contour, radians
_PHASE_STEP = 1.2
# contour values this small relative to the largest force a radius retry
_CLEARANCE = 1e-10
# scan grid spacing for real-axis root bracketing
_SCAN_STEP = math.pi / 8.0


@dataclass(frozen=True)
class SpectrumConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    c_pi: float = 1e4
    contour_points: int = 64
    contour_doublings: int = 3
    bisect_tol: float = 1e-12
    newton_steps: int = 3
    verify_tail_counts: bool = False

    def __post_init__(self):
        if self.c_pi <= 0:
            raise BadArgumentError("c_pi must be positive")
        if self.contour_points < 8:
            raise BadArgumentError("contour needs at least 8 points")
        if self.bisect_tol <= 0:
            raise BadArgumentError("bisect_tol must be positive")


@dataclass(frozen=True)
class Eigenpair:
    """One located eigenvalue with its normalized eigenfunction data.

    k is the signed real cube root of lam.  For a geometrically double
    eigenvalue (g_mult == 2) the kernel is two dimensional: E is None and
    basis holds two independent normalized solutions instead.
    """

    xi: int
    n: int
    lam: float
    k: float
    g_mult: int
    a: complex | None
    b: complex | None
    E: SolutionPath | None
    basis: tuple | None
    bc_residual: float
    norm_residual: float
    realness_residue: float

    @property
    def a_simple(self) -> bool:
        return self.g_mult == 1


def counting_threshold(p: Measure, q: Measure, xi, c_pi: float | None = None,
                       cfg: SpectrumConfig | None = None) -> int:
    """Smallest tail index N certified by the a-priori growth bound."""
    if xi not in (1, 2):
        raise BadArgumentError(f"boundary index must be 1 or 2, got {xi!r}")
    cfg = cfg or SpectrumConfig()
    c = cfg.c_pi if c_pi is None else float(c_pi)
    if c <= 0:
        raise BadArgumentError("c_pi must be positive")
    expo = 3.0 * (3.0 * q.total_variation() + p.total_variation())
    if expo > 690.0:
        raise ThresholdRangeError(
            "measure norms overflow the counting bound", exponent=expo
        )
    grow = math.exp(expo)
    if xi == 1:
        bound = 2.25 * c * grow
        n = max(0, math.ceil((bound / math.pi - 1.0) / 2.0))
        while (2 * n + 1) * math.pi <= bound:
            n += 1
        return n
    bound = max(4.5 * c * grow,
                2.0 * math.log(c / 2.0) if c > 2.0 else 0.0,
                2.0 * math.sqrt(2.0) * math.log(c / 4.0) if c > 4.0 else 0.0)
    n = max(1, math.ceil(bound / (2.0 * math.pi)))
    while 2 * n * math.pi <= bound:
        n += 1
    return n


def localize(xi, n) -> tuple[float, float]:
    """The k-window (center - pi/3, center + pi/3) for the n-th root."""
    if xi not in (1, 2):
        raise BadArgumentError(f"boundary index must be 1 or 2, got {xi!r}")
    center = (2 * int(n) + xi - 1) * math.pi
    return center - math.pi / 3.0, center + math.pi / 3.0


# ---------------------------------------------------------------------------
# argument-principle counting


def _delta_values(p, q, xi, lams, cfg, ws):
    """Delta_xi at a conjugate-closed list of lambdas, one solve per point."""
    sign = (-1.0) ** xi
    m = len(lams)
    vals = np.empty(m, dtype=complex)
    for i in range(m):
        vals[i] = solve_value(p, q, complex(lams[i]), _E1, cfg.solver, ws,
                              verify=False)
    out = np.empty(m, dtype=complex)
    for i in range(m):
        out[i] = vals[(m - i) % m].conjugate() + sign * vals[i]
    return out


def count_zeros_disc(p: Measure, q: Measure, xi, center: float, radius: float,
                     cfg: SpectrumConfig | None = None,
                     workspace: Workspace | None = None) -> int:
    """Zeros of Delta_xi enclosed by a k-plane disc, by winding count.

    center must be real.  A centered disc is counted on the lambda-circle of
    radius radius**3 (the cube of the k-sector); an offset disc is counted on
    its own k-circle, which the cube maps injectively away from 0.
    """
    cfg = cfg or SpectrumConfig()
    if xi not in (1, 2):
        raise BadArgumentError(f"boundary index must be 1 or 2, got {xi!r}")
    center = float(center)
    radius = float(radius)
    if radius <= 0:
        raise BadArgumentError("disc radius must be positive")
    ws = workspace if workspace is not None else Workspace(p, q)
    central = center == 0.0
    if not central and abs(center) <= radius:
        raise BadArgumentError("offset disc must exclude the origin")
    if central:
        base_m = max(cfg.contour_points,
                     8 * (2 * math.ceil(radius / math.pi) + 1))
    else:
        base_m = min(cfg.contour_points, 32)
    last = None
    for bump in (1.0, 1.013, 0.987, 1.029):
        r_eff = radius * bump
        m = base_m
        for _ in range(cfg.contour_doublings + 1):
            phis = 2.0 * math.pi * np.arange(m) / m
            if central:
                lams = (r_eff**3) * np.exp(1j * phis)
            else:
                lams = (center + r_eff * np.exp(1j * phis)) ** 3
            vals = _delta_values(p, q, xi, lams, cfg, ws)
            if float(np.min(np.abs(vals))) < _CLEARANCE * float(
                    np.max(np.abs(vals))):
                break  # a zero sits on the contour: bump the radius
            ratio = vals[np.r_[1:m, 0]] / vals
            steps = np.angle(ratio)
            if float(np.max(np.abs(steps))) > _PHASE_STEP:
                m *= 2
                continue
            winding = float(np.sum(steps)) / (2.0 * math.pi)
            last = winding
            if abs(winding - round(winding)) > 0.2:
                m *= 2
                continue
            return int(round(winding))
    raise ContourResolutionError(
        "winding count failed to stabilize",
        xi=xi, center=center, radius=radius, winding=last,
    )


# ---------------------------------------------------------------------------
# real root scans


def _root_fn(p, q, xi, cfg, ws):
    """The real characteristic along the real k axis for this pairing.

    Unverified solves: roots located here are always re-solved with full
    verification when they are packaged into an Eigenpair.
    """
    if xi == 1:
        return lambda k: solve_value(p, q, k**3, _E1, cfg.solver, ws,
                                     verify=False).imag
    return lambda k: solve_value(p, q, k**3, _E1, cfg.solver, ws,
                                 verify=False).real


def _bisect(f, lo, hi, f_lo, f_hi, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo < 0) != (f_mid < 0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def _newton_polish(f, k, steps, tol):
    fk = f(k)
    for _ in range(steps):
        d = 1e-5 * max(1.0, abs(k))
        slope = (f(k + d) - f(k - d)) / (2.0 * d)
        if slope == 0.0 or not math.isfinite(slope):
            break
        k_new = k - fk / slope
        if not math.isfinite(k_new) or abs(k_new - k) > 0.5:
            break
        f_new = f(k_new)
        if abs(f_new) >= abs(fk) and abs(k_new - k) > tol:
            break
        k, fk = k_new, f_new
    return k


def _refine_bracket(f, lo, hi, f_lo, f_hi, cfg):
    k = _bisect(f, lo, hi, f_lo, f_hi, cfg.bisect_tol)
    return _newton_polish(f, k, cfg.newton_steps, cfg.bisect_tol)


def _track_root(f, k_start, cfg, max_drift=0.3):
    """Newton from a known nearby root; raises on a tracking jump."""
    k = k_start
    fk = f(k)
    for _ in range(16):
        d = 1e-5 * max(1.0, abs(k))
        slope = (f(k + d) - f(k - d)) / (2.0 * d)
        if slope == 0.0 or not math.isfinite(slope):
            raise RootSearchError("flat characteristic while tracking a root",
                                  k=k)
        step = -fk / slope
        k_new = k + step
        if abs(k_new - k_start) > max_drift:
            raise RootSearchError(
                "root tracking jumped out of its window",
                k_start=k_start, k=k_new,
            )
        k = k_new
        fk = f(k)
        if abs(step) <= cfg.bisect_tol:
            return k
    raise RootSearchError("root tracking did not settle", k_start=k_start, k=k)


def _golden_min(g, lo, hi, iters=60):
    """Golden-section minimum of g on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        if b - a < 1e-13:
            break
        if gc < gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# eigenpair assembly


def _combine(geo, lam, cols, coefs):
    y_n = coefs[0] * cols[0]._y_node + coefs[1] * cols[1]._y_node
    y_e = coefs[0] * cols[0].y + coefs[1] * cols[1].y
    yp_n = coefs[0] * cols[0]._yp_node + coefs[1] * cols[1]._yp_node
    yp_e = coefs[0] * cols[0].yprime + coefs[1] * cols[1].yprime
    w_n = coefs[0] * cols[0]._w_node + coefs[1] * cols[1]._w_node
    w_e = coefs[0] * cols[0].w_post + coefs[1] * cols[1].w_post
    init = InitialTriple(coefs[0], coefs[1], 0)
    terms = max(c.n_terms for c in cols)
    return SolutionPath(lam, init, geo, y_n, y_e, yp_n, yp_e, w_n, w_e, terms)


def _l2_norm_sq(geo, path) -> float:
    return float(np.sum(geo.gw * np.abs(path._y_node) ** 2))


def _kernel_coefficients(m: np.ndarray):
    """Null direction of the pairing matrix by its largest entry."""
    flat = [abs(m[0, 0]), abs(m[0, 1]), abs(m[1, 0]), abs(m[1, 1])]
    case = int(np.argmax(flat))
    if case == 0:
        return m[0, 1] / m[0, 0], -1.0 + 0.0j
    if case == 1:
        return -1.0 + 0.0j, m[0, 0] / m[0, 1]
    if case == 2:
        return m[1, 1] / m[1, 0], -1.0 + 0.0j
    return -1.0 + 0.0j, m[1, 0] / m[1, 1]


def eigenfunction(p: Measure, q: Measure, xi, lam: float, n: int | None = None,
                  cfg: SpectrumConfig | None = None,
                  workspace: Workspace | None = None) -> Eigenpair:
    """Package the eigenpair at an already-located real eigenvalue."""
    cfg = cfg or SpectrumConfig()
    if xi not in (1, 2):
        raise BadArgumentError(f"boundary index must be 1 or 2, got {xi!r}")
    lam = float(lam)
    ws = workspace if workspace is not None else Workspace(p, q)
    eng, results = _solve_verified(ws, complex(lam), (_E1, _E2), cfg.solver)
    cols = [_assemble_path(eng, complex(lam), t, r)
            for t, r in zip((_E1, _E2), results)]
    sign = (-1.0) ** xi
    m = np.array([
        [cols[0].y_at_one, cols[1].y_at_one],
        [cols[0].yprime_at_one, cols[1].yprime_at_one + sign],
    ])
    sv = np.linalg.svd(m, compute_uv=False)
    col_scale = max(1.0, abs(cols[0].y_at_one), abs(cols[1].y_at_one),
                    abs(cols[0].yprime_at_one), abs(cols[1].yprime_at_one))
    k = math.copysign(abs(lam) ** (1.0 / 3.0), lam)
    residue = real_split(p, q, lam, cfg.solver, ws).residue
    geo = eng.geo
    label = int(n) if n is not None else 0
    # a doubly degenerate eigenvalue kills the whole pairing matrix, not
    # just its determinant
    if sv[0] < _RANK_TOL * col_scale:
        basis = []
        for coefs in ((1.0, 0.0), (0.0, 1.0)):
            raw = _combine(geo, lam, cols, coefs)
            nrm = math.sqrt(_l2_norm_sq(geo, raw))
            basis.append(_combine(geo, lam, cols,
                                  (coefs[0] / nrm, coefs[1] / nrm)))
        return Eigenpair(xi=int(xi), n=label, lam=lam, k=k, g_mult=2,
                         a=None, b=None, E=None, basis=tuple(basis),
                         bc_residual=float(sv[0]) / col_scale,
                         norm_residual=0.0, realness_residue=residue)
    a, b = _kernel_coefficients(m)
    raw = _combine(geo, lam, cols, (a, b))
    nrm = math.sqrt(_l2_norm_sq(geo, raw))
    a, b = a / nrm, b / nrm
    path = _combine(geo, lam, cols, (a, b))
    norm_res = abs(_l2_norm_sq(geo, path) - 1.0)
    vec = np.array([a, b])
    bc_res = float(np.max(np.abs(m @ vec))) / (
        col_scale * float(np.max(np.abs(vec))))
    return Eigenpair(xi=int(xi), n=label, lam=lam, k=k, g_mult=1,
                     a=complex(a), b=complex(b), E=path, basis=None,
                     bc_residual=bc_res, norm_residual=norm_res,
                     realness_residue=residue)


def find_eigenvalue(p: Measure, q: Measure, xi, n,
                    cfg: SpectrumConfig | None = None,
                    workspace: Workspace | None = None) -> Eigenpair:
    """Locate the root in the n-th lattice window and package it."""
    cfg = cfg or SpectrumConfig()
    ws = workspace if workspace is not None else Workspace(p, q)
    lo, hi = localize(xi, n)
    f = _root_fn(p, q, xi, cfg, ws)
    grid = np.linspace(lo, hi, 33)
    vals = [f(float(k)) for k in grid]
    brackets = [
        i for i in range(len(grid) - 1)
        if (vals[i] < 0) != (vals[i + 1] < 0)
    ]
    if not brackets:
        raise RootSearchError(
            "no sign change inside the lattice window",
            xi=xi, n=n, window=(lo, hi),
        )
    if len(brackets) > 1:
        raise RootSearchError(
            "several sign changes inside one lattice window",
            xi=xi, n=n, window=(lo, hi), count=len(brackets),
        )
    i = brackets[0]
    k = _refine_bracket(f, float(grid[i]), float(grid[i + 1]),
                        vals[i], vals[i + 1], cfg)
    return eigenfunction(p, q, xi, k**3, n=n, cfg=cfg, workspace=ws)


# ---------------------------------------------------------------------------
# full scans


def _central_geometry(xi, n_window):
    """Radius, expected count and index offset for the centered disc."""
    if xi == 1:
        return (2 * n_window + 1) * math.pi, 2 * n_window + 1, n_window
    m = n_window + 1
    return 2 * m * math.pi, 2 * m, m


def _double_candidates(f, grid, vals, cfg):
    """Local |f| minima without sign change: candidate double roots."""
    out = []
    absv = np.abs(np.asarray(vals))
    floor = float(np.median(absv))
    for i in range(1, len(grid) - 1):
        if (vals[i] < 0) != (vals[i - 1] < 0):
            continue
        if (vals[i] < 0) != (vals[i + 1] < 0):
            continue
        if absv[i] >= absv[i - 1] or absv[i] >= absv[i + 1]:
            continue
        if absv[i] > 0.05 * floor:
            continue
        k = _golden_min(lambda t: abs(f(t)),
                        float(grid[i - 1]), float(grid[i + 1]))
        out.append(k)
    return out


def spectrum_scan(p: Measure, q: Measure, xi, n_min, n_max,
                  cfg: SpectrumConfig | None = None,
                  workspace: Workspace | None = None) -> list[Eigenpair]:
    """Eigenpairs for indices n_min..n_max with verified central counting.

    Roots inside the central disc are anchored by a winding count; agreement
    between the count and the real-axis bracket scan fixes the sorted-order
    to index mapping.  A double root occupies two consecutive indices and
    yields two records with the same location.  Indices beyond the central
    window fall back to per-window root search.
    """
    cfg = cfg or SpectrumConfig()
    if xi not in (1, 2):
        raise BadArgumentError(f"boundary index must be 1 or 2, got {xi!r}")
    n_min, n_max = int(n_min), int(n_max)
    if n_min > n_max:
        raise BadArgumentError("n_min must not exceed n_max")
    ws = workspace if workspace is not None else Workspace(p, q)
    n_window = min(max(2, abs(n_min), abs(n_max)) + 1, 8)
    radius, expected, offset = _central_geometry(xi, n_window)
    counted = count_zeros_disc(p, q, xi, 0.0, radius, cfg, ws)
    if counted != expected:
        raise SpectrumConsistencyError(
            "central winding count disagrees with the lattice block",
            xi=xi, disc=("central", radius), expected=expected,
            counted=counted,
        )
    f = _root_fn(p, q, xi, cfg, ws)
    m_samples = int(math.ceil(2.0 * radius / _SCAN_STEP)) + 1
    grid = np.linspace(-radius, radius, m_samples)
    vals = [f(float(k)) for k in grid]
    brackets = [
        i for i in range(len(grid) - 1)
        if (vals[i] < 0) != (vals[i + 1] < 0)
    ]
    # coarse root list: (position, multiplicity, bracket index or None);
    # bracket order on the grid already fixes the sorted order, so only
    # requested slots get refined
    roots: list[tuple[float, int, int | None]] = [
        (float(grid[i]), 1, i) for i in brackets
    ]
    if len(brackets) != expected:
        for k in _double_candidates(f, grid, vals, cfg):
            pair = eigenfunction(p, q, xi, k**3, cfg=cfg, workspace=ws)
            if pair.g_mult == 2:
                roots.append((k, 2, None))
    if sum(mult for _, mult, _ in roots) != expected:
        raise SpectrumConsistencyError(
            "real-axis roots disagree with the central winding count",
            xi=xi, disc=("central", radius), expected=expected,
            located=sum(mult for _, mult, _ in roots),
        )
    roots.sort(key=lambda r: r[0])
    out: list[Eigenpair] = []
    slot = -offset
    for k_coarse, mult, bi in roots:
        indices = range(slot, slot + mult)
        slot += mult
        wanted = [n for n in indices if n_min <= n <= n_max]
        if not wanted:
            continue
        if bi is not None:
            k = _refine_bracket(f, float(grid[bi]), float(grid[bi + 1]),
                                vals[bi], vals[bi + 1], cfg)
        else:
            k = k_coarse
        pair = eigenfunction(p, q, xi, k**3, n=wanted[0], cfg=cfg,
                             workspace=ws)
        if (pair.g_mult == 2) != (mult == 2):
            raise SpectrumConsistencyError(
                "rank test disagrees with the scan multiplicity",
                xi=xi, k=k, scan_mult=mult, rank_mult=pair.g_mult,
            )
        out.append(pair)
        for n in wanted[1:]:
            out.append(dataclasses.replace(pair, n=n))
    covered_lo = -offset
    covered_hi = expected - 1 - offset
    for n in range(n_min, n_max + 1):
        if covered_lo <= n <= covered_hi:
            continue
        pair = find_eigenvalue(p, q, xi, n, cfg, ws)
        if cfg.verify_tail_counts:
            center = (2 * n + xi - 1) * math.pi
            got = count_zeros_disc(p, q, xi, center, math.pi / 3.0, cfg, ws)
            if got != pair.g_mult:
                raise SpectrumConsistencyError(
                    "tail window count does not match the located root",
                    xi=xi, disc=(center, math.pi / 3.0), counted=got,
                    expected=pair.g_mult,
                )
        out.append(pair)
    return sorted(out, key=lambda e: e.n)


def spectral_shift(p: Measure, q: Measure, xi, n, epsilon: float,
                   cfg: SpectrumConfig | None = None) -> tuple[float, float]:
    """Eigenvalue before and after adding epsilon * Lebesgue to p.

    The exact translation identity says the second value equals the first
    plus epsilon; returning both makes the comparison the caller's.
    """
    cfg = cfg or SpectrumConfig()
    base = find_eigenvalue(p, q, xi, n, cfg)
    shifted_p = p.plus(Measure.lebesgue(float(epsilon)))
    ws = Workspace(shifted_p, q)
    f = _root_fn(shifted_p, q, xi, cfg, ws)
    k = _track_root(f, base.k, cfg)
    return base.lam, k**3
