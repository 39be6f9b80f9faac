"""First-order response of eigenvalues and of the fundamental matrix.

Directional derivatives against a perturbing measure nu:

  eigenvalue, p channel:  integral of |E|^2 d(nu)
  eigenvalue, q channel:  integral of -2 Im(conj(E) E') nu(t) dt,
      nu(t) the induced function.  The same quantity can be written as a
      Stieltjes pairing plus the boundary term nu(1)|E(1)|^2, which dies
      because every eigenfunction has E(1) = 0.

  fundamental matrix, p channel:
      i N(x) . integral over [0, x] of col3(N^{-1}) (x) (y-row) d(nu)
  fundamental matrix, q channel:
      -N(x) . [ same integral + 2 . integral of col3(N^{-1}) (x) (y'-row)
                with weight nu(t) dt ]

col3(N^{-1}) is the adjugate column built from the continuous rows, so every
integrand above is continuous and the atom contributions are unambiguous.
The integrals run over [0, x], except that a point mass sitting exactly at
0 is dropped everywhere. The evolution integrates over a right-open window,
so an origin atom reaches neither the jump channel nor the drift; it cannot
move N or the spectrum, and every derivative along such a direction is 0.

fd_check compares each formula with centered finite differences, tracking
the perturbed eigenvalue inside its own lattice window.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import BadArgumentError, UnsupportedMultiplicityError
from .ivp import FundamentalPath, SolverConfig, Workspace, _adjugate_column3
from .measure import Measure, ls_integral
from .spectrum import (
    Eigenpair,
    SpectrumConfig,
    _root_fn,
    _track_root,
    find_eigenvalue,
)


class FdRow(NamedTuple):
    epsilon: float
    fd_value: float
    formula_value: float
    abs_error: float


def _require_simple(pair: Eigenpair):
    if pair.g_mult != 1 or pair.E is None:
        raise UnsupportedMultiplicityError(
            "sensitivity formulas cover simple eigenvalues only",
            n=pair.n, xi=pair.xi, g_mult=pair.g_mult,
        )


def eigenvalue_gradient_p(pair: Eigenpair, nu: Measure,
                          tol: float = 1e-10) -> float:
    """Directional derivative of the eigenvalue when nu is added to p."""
    _require_simple(pair)
    e = pair.E

    def density(t):
        return abs(e.eval_y(float(t))) ** 2

    return ls_integral(density, nu, 1.0, include_zero_atom=False, tol=tol)


def eigenvalue_gradient_q(pair: Eigenpair, nu: Measure,
                          tol: float = 1e-10) -> float:
    """Directional derivative of the eigenvalue when nu is added to q.

    The integrand carries the drift action nu(t) of the direction, which
    jumps at atoms of nu, so the integral is split there to keep each
    adaptive domain smooth.
    """
    _require_simple(pair)
    e = pair.E

    def weighted(t):
        t = float(t)
        g = -2.0 * (e.eval_y(t).conjugate() * e.eval_yprime(t)).imag
        return nu.drift(t) * g

    cuts = sorted({0.0, 1.0} | {b for b in nu.breakpoints() if 0.0 < b < 1.0})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        segment = Measure.from_density(lo, hi, (1.0,))
        total += ls_integral(weighted, segment, 1.0, tol=tol)
    return total


# ---------------------------------------------------------------------------
# fundamental matrix response


def _nu_workspace(p, q, nu, x):
    extras = list(nu.breakpoints())
    if 0.0 < x < 1.0:
        extras.append(float(x))
    return Workspace(p, q, extra_breakpoints=tuple(extras))


def _row_stacks(fp: FundamentalPath):
    y_rows = np.stack([c._y_node for c in fp.columns], axis=-1)
    yp_rows = np.stack([c._yp_node for c in fp.columns], axis=-1)
    return y_rows, yp_rows


def _edge_rows(fp: FundamentalPath, idx: int):
    y = np.array([c.y[idx] for c in fp.columns])
    yp = np.array([c.yprime[idx] for c in fp.columns])
    return y, yp


def _atom_term(fp: FundamentalPath, nu: Measure, x: float) -> np.ndarray:
    geo = fp._geo
    out = np.zeros((3, 3), dtype=complex)
    for atom in nu.atoms:
        # a point mass exactly at 0 never enters the dynamics (the induced
        # function is pinned to 0 there), so it cannot move N either
        if atom.x == 0.0 or atom.x > x:
            continue
        idx = int(np.searchsorted(geo.edges, atom.x))
        if idx >= len(geo.edges) or geo.edges[idx] != atom.x:
            raise BadArgumentError(
                f"perturbation atom at {atom.x} missing from the mesh")
        y, yp = _edge_rows(fp, idx)
        out += atom.w * np.outer(_adjugate_column3(y, yp), y)
    return out


def _cell_cut(geo, x: float) -> int:
    cut = int(np.searchsorted(geo.edges, x))
    if not math.isclose(float(geo.edges[cut]), x, abs_tol=1e-14):
        raise BadArgumentError(f"evaluation point {x} missing from the mesh")
    return cut


def fundamental_gradient_p(p: Measure, q: Measure, lam: complex, nu: Measure,
                           x: float = 1.0,
                           cfg: SolverConfig | None = None) -> np.ndarray:
    """Directional derivative of N(x) when nu is added to p."""
    if not 0.0 < x <= 1.0:
        raise BadArgumentError(f"evaluation point {x} outside (0, 1]")
    cfg = cfg or SolverConfig()
    fp = FundamentalPath(p, q, lam, cfg, _nu_workspace(p, q, nu, x))
    geo = fp._geo
    cut = _cell_cut(geo, x)
    y_rows, yp_rows = _row_stacks(fp)
    adj = _adjugate_column3(y_rows, yp_rows)
    kernel = np.einsum("cgi,cgj->cgij", adj, y_rows)
    dens = nu.density_many(geo.tg.ravel()).reshape(geo.tg.shape)
    acc = np.einsum("cg,cg,cgij->ij", geo.gw[:cut], dens[:cut], kernel[:cut])
    acc = acc + _atom_term(fp, nu, x)
    return 1j * (fp.matrix(x) @ acc)


def fundamental_gradient_q(p: Measure, q: Measure, lam: complex, nu: Measure,
                           x: float = 1.0,
                           cfg: SolverConfig | None = None) -> np.ndarray:
    """Directional derivative of N(x) when nu is added to q."""
    if not 0.0 < x <= 1.0:
        raise BadArgumentError(f"evaluation point {x} outside (0, 1]")
    cfg = cfg or SolverConfig()
    fp = FundamentalPath(p, q, lam, cfg, _nu_workspace(p, q, nu, x))
    geo = fp._geo
    cut = _cell_cut(geo, x)
    y_rows, yp_rows = _row_stacks(fp)
    adj = _adjugate_column3(y_rows, yp_rows)
    kernel = np.einsum("cgi,cgj->cgij", adj, y_rows)
    dens = nu.density_many(geo.tg.ravel()).reshape(geo.tg.shape)
    acc = np.einsum("cg,cg,cgij->ij", geo.gw[:cut], dens[:cut], kernel[:cut])
    acc = acc + _atom_term(fp, nu, x)
    drift = np.einsum("cgi,cgj->cgij", adj, yp_rows)
    induced = nu.drift_many(geo.tg.ravel()).reshape(geo.tg.shape)
    slide = np.einsum("cg,cg,cgij->ij", geo.gw[:cut], induced[:cut],
                      drift[:cut])
    return -(fp.matrix(x) @ (acc + 2.0 * slide))


# ---------------------------------------------------------------------------
# finite difference cross-checks


def fd_check(p: Measure, q: Measure, xi, n, nu: Measure, channel: str = "p",
             epsilons=(1e-2, 1e-3, 1e-4),
             cfg: SpectrumConfig | None = None) -> list[FdRow]:
    """Centered differences of the eigenvalue against the pairing formula.

    Each perturbed eigenvalue is tracked from the base root inside its own
    window; a tracking jump raises rather than silently comparing different
    branches.
    """
    if channel not in ("p", "q"):
        raise BadArgumentError(f"channel must be 'p' or 'q', got {channel!r}")
    cfg = cfg or SpectrumConfig()
    ws = _nu_workspace(p, q, nu, 1.0)
    base = find_eigenvalue(p, q, xi, n, cfg, ws)
    if channel == "p":
        formula = eigenvalue_gradient_p(base, nu)
    else:
        formula = eigenvalue_gradient_q(base, nu)
    rows = []
    for eps in epsilons:
        eps = float(eps)
        if eps <= 0:
            raise BadArgumentError("finite difference steps must be positive")
        lams = []
        for side in (eps, -eps):
            bumped = nu.scaled(side)
            if channel == "p":
                f = _root_fn(p.plus(bumped), q, xi, cfg,
                             Workspace(p.plus(bumped), q))
            else:
                f = _root_fn(p, q.plus(bumped), xi, cfg,
                             Workspace(p, q.plus(bumped)))
            lams.append(_track_root(f, base.k, cfg) ** 3)
        fd = (lams[0] - lams[1]) / (2.0 * eps)
        rows.append(FdRow(eps, fd, formula, abs(fd - formula)))
    return rows


def fundamental_fd_check(p: Measure, q: Measure, lam: complex, nu: Measure,
                         channel: str = "p", epsilon: float = 1e-4,
                         x: float = 1.0,
                         cfg: SolverConfig | None = None):
    """Centered difference of N(x) against the matrix formula.

    Returns (fd_matrix, formula_matrix, max entrywise abs error).
    """
    if channel not in ("p", "q"):
        raise BadArgumentError(f"channel must be 'p' or 'q', got {channel!r}")
    if epsilon <= 0:
        raise BadArgumentError("finite difference steps must be positive")
    cfg = cfg or SolverConfig()
    if channel == "p":
        formula = fundamental_gradient_p(p, q, lam, nu, x, cfg)
    else:
        formula = fundamental_gradient_q(p, q, lam, nu, x, cfg)
    sides = []
    for s in (epsilon, -epsilon):
        bumped = nu.scaled(s)
        pp = p.plus(bumped) if channel == "p" else p
        qq = q.plus(bumped) if channel == "q" else q
        ws = _nu_workspace(pp, qq, nu, x)
        sides.append(FundamentalPath(pp, qq, lam, cfg, ws).matrix(x))
    fd = (sides[0] - sides[1]) / (2.0 * epsilon)
    err = float(np.max(np.abs(fd - formula)))
    return fd, formula, err
