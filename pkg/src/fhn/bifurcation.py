"""Equilibria, codimension-one bifurcation loci, and parameter-sweep diagrams.

Analytic loci are returned in closed form (Hopf in c at +-2/sqrt(3), the
pitchfork at b = 1/4, Hopf in b at (-4 + sqrt(16 + 3 eps))/eps); the
homoclinic locus is found by bisection on a capture discriminant of the
backward-time periodic orbit around E+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import PhasePoint, SystemParams, TimeScale, jacobian, phi
from .dynamics import LimitCycle, Stability, cycle_length, find_limit_cycle, integrate
from .errors import (
    BracketFailureError,
    ConvergedToEquilibriumError,
    NoCycleError,
    NonFiniteError,
    StepSizeCollapseError,
)
from .singular import equilibrium_abscissae

_HYPERBOLICITY_TOL = 1e-9


class EquilibriumClass(Enum):
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_FOCUS = "UnstableFocus"
    SADDLE = "Saddle"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass(frozen=True)
class Equilibrium:
    point: PhasePoint
    eigenvalues: tuple[complex, complex]
    classification: EquilibriumClass


def classify_eigenvalues(lam: tuple[complex, complex]) -> EquilibriumClass:
    re1, re2 = lam[0].real, lam[1].real
    if min(abs(re1), abs(re2)) < _HYPERBOLICITY_TOL:
        return EquilibriumClass.NON_HYPERBOLIC
    if abs(lam[0].imag) > 0.0:
        return EquilibriumClass.STABLE_FOCUS if re1 < 0.0 else EquilibriumClass.UNSTABLE_FOCUS
    if re1 * re2 < 0.0:
        return EquilibriumClass.SADDLE
    return EquilibriumClass.STABLE_NODE if re1 < 0.0 else EquilibriumClass.UNSTABLE_NODE


def equilibria(params: SystemParams) -> list[Equilibrium]:
    """All equilibria (roots of b*x^3 + (1-4b)*x - c paired with y = phi(x))."""
    out = []
    for x, _mult in equilibrium_abscissae(params):
        p = PhasePoint(x, phi(x))
        lam = jacobian(p, params, TimeScale.FAST).eigenvalues
        out.append(Equilibrium(p, lam, classify_eigenvalues(lam)))
    return out


class BifKind(Enum):
    HOPF_SUB = "HopfSub"
    HOPF_SUPER = "HopfSuper"
    PITCHFORK = "Pitchfork"
    HOMOCLINIC = "Homoclinic"


@dataclass(frozen=True)
class BifurcationPoint:
    kind: BifKind
    param_name: str
    param_value: float
    eps: float
    equilibrium: Equilibrium | None = None
    orbit: LimitCycle | None = None  # near-bifurcation cycle, when the search produces one


def hopf_in_c(eps: float) -> tuple[BifurcationPoint, BifurcationPoint]:
    """Hopf pair of the b = 0 family at c = +-2/sqrt(3), analytic.

    Eigenvalues there are +-i*sqrt(eps).  Subcritical in the c orientation:
    the fold normal form has a negative cubic coefficient and the
    translated parameter runs opposite to c, so the periodic solutions live
    on c below the locus.
    """
    if eps <= 0.0:
        raise ValueError("hopf_in_c requires eps > 0")
    c_h = 2.0 / math.sqrt(3.0)
    pts = []
    for c in (c_h, -c_h):
        params = SystemParams(0.0, c, eps)
        eq = equilibria(params)[0]
        pts.append(BifurcationPoint(BifKind.HOPF_SUB, "c", c, eps, eq))
    return pts[0], pts[1]


def pitchfork_in_b() -> BifurcationPoint:
    """Pitchfork of the c = 0 family at b = 1/4 where E+- branch off the origin."""
    params = SystemParams(0.25, 0.0, 0.0)
    eq = equilibria(params)[0]
    return BifurcationPoint(BifKind.PITCHFORK, "b", 0.25, 0.0, eq)


def hopf_in_b(eps: float) -> BifurcationPoint:
    """Hopf of E+- in the c = 0 family: b = (-4 + sqrt(16 + 3 eps))/eps.

    Closed-form root of Tr(J_{E+}) = -eps*b + 3/b - 8 = 0; tends to 3/8 as
    eps -> 0.  Supercritical in b (negative cubic normal-form coefficient
    with matching parameter orientation).
    """
    if eps <= 0.0:
        raise ValueError("hopf_in_b requires eps > 0")
    b_h = (-4.0 + math.sqrt(16.0 + 3.0 * eps)) / eps
    params = SystemParams(b_h, 0.0, eps)
    eq_plus = max(equilibria(params), key=lambda e: e.point.x)
    return BifurcationPoint(BifKind.HOPF_SUPER, "b", b_h, eps, eq_plus)


_CAPTURE_DISTANCE = 1e-2


def homoclinic_in_b(
    eps: float,
    bracket_width: float = 0.02,
    b_tol: float = 1e-6,
    tol: float = 1e-10,
    capture_distance: float = _CAPTURE_DISTANCE,
) -> BifurcationPoint:
    """Homoclinic locus of the c = 0 family by bisection above the Hopf in b.

    For each trial b the unstable periodic orbit around E+ is located by
    backward-time integration from a seed near E+.  The discriminant is
    capture: either the located orbit passes within `capture_distance` of
    the saddle at the origin, or it no longer exists (the backward search
    dies once the cycle has been destroyed, which is the side that fires in
    practice: the saddle index here is so small that the cycle-to-saddle
    distance stays O(1) until machine-level parameter distances).  The
    returned point carries a shadow of the homoclinic loop obtained by
    shooting along the saddle's unstable manifold at the converged b.
    """
    if eps <= 0.0:
        raise ValueError("homoclinic_in_b requires eps > 0")
    b_h = hopf_in_b(eps).param_value
    hi = b_h + bracket_width

    def captured(b: float) -> bool:
        params = SystemParams(b, 0.0, eps)
        x_plus = math.sqrt(4.0 - 1.0 / b)
        seed = PhasePoint(x_plus + 1e-3, phi(x_plus))
        try:
            lc = find_limit_cycle(params, seed, direction="backward", tol=tol, max_periods=80.0)
        except (NoCycleError, ConvergedToEquilibriumError, NonFiniteError, StepSizeCollapseError):
            return True
        return lc.min_distance_to(0.0, 0.0) < capture_distance

    # the just-born Hopf cycle converges slowly; start a little above the Hopf
    lo = None
    for offset in (1e-3, 2e-3, 4e-3):
        if not captured(b_h + offset):
            lo = b_h + offset
            break
    if lo is None or not captured(hi):
        raise BracketFailureError(
            f"capture discriminant does not change over ({b_h}, {hi}) at eps={eps}"
        )
    while hi - lo > b_tol:
        mid = 0.5 * (lo + hi)
        if captured(mid):
            hi = mid
        else:
            lo = mid

    # refine by shooting: the return of the saddle's unstable manifold flips
    # from escaping outward to being captured by E+ exactly at the homoclinic;
    # the backward-search discriminant above dies slightly early (the cycle's
    # neighborhood becomes ill-conditioned near the saddle), so widen upward
    # until the capture side is seen, then bisect the manifold fate
    if not _wu_escapes_outward(lo, eps, tol):
        raise BracketFailureError("unstable manifold already captured at the lower bracket")
    step = max(2.0 * (hi - lo), 2e-5)
    while _wu_escapes_outward(hi, eps, tol):
        hi += step
        step *= 2.0
        if hi > b_h + bracket_width:
            raise BracketFailureError("no manifold-capture side found above the bracket")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if _wu_escapes_outward(mid, eps, tol):
            lo = mid
        else:
            hi = mid
    b_hom = 0.5 * (lo + hi)
    params = SystemParams(b_hom, 0.0, eps)
    saddle = min(equilibria(params), key=lambda e: abs(e.point.x))
    return BifurcationPoint(
        BifKind.HOMOCLINIC, "b", b_hom, eps, saddle, orbit=_homoclinic_shadow(b_hom, eps, tol)
    )


def _wu_seed(b: float, eps: float) -> PhasePoint:
    """A point 1e-6 along the saddle's unstable eigenvector."""
    tr = 4.0 - eps * b
    det = eps * (1.0 - 4.0 * b)
    lam_u = 0.5 * (tr + math.sqrt(tr * tr - 4.0 * det))
    v = (1.0, 4.0 - lam_u)
    norm = math.hypot(*v)
    return PhasePoint(1e-6 * v[0] / norm, 1e-6 * v[1] / norm)


def _wu_escapes_outward(b: float, eps: float, tol: float, t_budget: float = 400.0) -> bool:
    """Fate of the unstable manifold of the origin: outward jump vs capture by E+."""
    from .dynamics import _Stepper

    seed = _wu_seed(b, eps)
    st = _Stepper(seed.x, seed.y, SystemParams(b, 0.0, eps), TimeScale.SLOW, 1, tol, 1e3)
    while st.t < t_budget:
        st.advance(t_cap=t_budget)
        if st.x < -0.5:
            return True
    return False


def _homoclinic_shadow(b: float, eps: float, tol: float = 1e-10) -> LimitCycle:
    """Trace the homoclinic loop as two invariant-manifold arcs joined on it.

    The saddle index here is extreme (the expansion rate exceeds the
    contraction rate by a factor around sixty), so no single initial-value
    orbit can follow the loop into the saddle: any transversal error blows
    up along the stable-manifold descent.  Instead the loop is the forward
    arc of the unstable manifold (origin, excursion around E+, descent
    until it derails) concatenated with the reversed backward trace of the
    stable manifold (origin upward), each started 1e-6 from the saddle
    along the exact eigendirections.  Both representations overlap in the
    middle of the descent, and both ends of the result lie at the saddle.
    """
    params = SystemParams(b, 0.0, eps)
    tr = 4.0 - eps * b
    det = eps * (1.0 - 4.0 * b)
    disc = math.sqrt(tr * tr - 4.0 * det)
    lam_s = 0.5 * (tr - disc)

    # unstable-manifold arc, forward time, stopped once it ejects leftward
    from .dynamics import _Stepper

    seed_u = _wu_seed(b, eps)
    st = _Stepper(seed_u.x, seed_u.y, params, TimeScale.SLOW, 1, tol, 1e3)
    nodes = [(st.t, st.x, st.y, st.dx, st.dy)]
    while st.t < 30.0 and st.x > -0.5:
        st.advance()
        nodes.append((st.t, st.x, st.y, st.dx, st.dy))
    arr = np.array(nodes)
    d_u = np.hypot(arr[:, 1], arr[:, 2])
    ia = int(np.argmax(d_u))
    # first turn-back after the apex bounds the usable part of the descent
    iend_u = len(arr) - 1
    for i in range(ia + 1, len(arr) - 1):
        if d_u[i] < 0.9 * d_u[ia] and d_u[i + 1] > d_u[i]:
            iend_u = i
            break

    # stable-manifold arc, backward time from the saddle, partial on blow-up
    v = (1.0, 4.0 - lam_s)
    norm = math.hypot(*v)
    seed_s = PhasePoint(1e-6 * v[0] / norm, 1e-6 * v[1] / norm)
    crawl = abs(lam_s) / eps
    t_s = 40.0 + math.log(1e7) / max(crawl, 1e-3)
    try:
        traj_s = integrate(seed_s, params, t_s, tol=tol, direction=-1, max_norm=1e3)
    except NonFiniteError as exc:
        traj_s = exc.trajectory
    d_s = np.hypot(traj_s.x, traj_s.y)
    bad = np.nonzero((d_s > 3.45) | (traj_s.x < -0.5))[0]
    s_stop = int(bad[0]) if len(bad) else len(d_s)

    # join the arcs where they agree best: both trace the descent of the
    # stable manifold, the unstable arc from above, the stable arc exactly
    ut = np.arange(ia, iend_u + 1)
    ss = np.arange(0, s_stop)
    du = arr[ut, 1][:, None] - traj_s.x[ss][None, :]
    dv = arr[ut, 2][:, None] - traj_s.y[ss][None, :]
    gap = np.hypot(du, dv)
    iu_rel, is_rel = np.unravel_index(int(np.argmin(gap)), gap.shape)
    icut_u = int(ut[iu_rel])
    icut_s = max(int(ss[is_rel]), 1)

    # forward-loop orientation: unstable arc first, then the stable descent,
    # at adaptive node resolution (uniform-time sampling starves the jumps)
    xs = np.concatenate([arr[: icut_u + 1, 1], traj_s.x[icut_s::-1]])
    ys = np.concatenate([arr[: icut_u + 1, 2], traj_s.y[icut_s::-1]])
    t_u_end = arr[icut_u, 0]
    t_loop = np.concatenate(
        [arr[: icut_u + 1, 0], t_u_end + (traj_s.t[icut_s] - traj_s.t[icut_s::-1])]
    )
    return LimitCycle(
        t_loop,
        xs,
        ys,
        float(t_loop[-1]),
        cycle_length(xs, ys),
        Stability.UNSTABLE,
        False,
        seed_u.x,
        1,
        float(np.hypot(xs[-1], ys[-1])),
    )


@dataclass(frozen=True)
class CycleRecord:
    period: float
    length: float
    stability: Stability
    converged: bool
    seed: PhasePoint


@dataclass
class DiagramRow:
    param_value: float
    equilibria: list[Equilibrium]
    cycles: list[CycleRecord] = field(default_factory=list)
    error: str | None = None


def sweep(
    param_name: str,
    lo: float,
    hi: float,
    steps: int,
    params0: SystemParams,
    cycles: bool = True,
    continuation: bool = True,
    tol: float = 1e-9,
    max_periods: float = 30.0,
) -> list[DiagramRow]:
    """One-parameter diagram over a uniform grid; see sweep_values.

    The grid is built ascending and flipped for descending ranges, so a
    reversed range produces exactly the reversed grid.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    a, b = min(lo, hi), max(lo, hi)
    values = [a + (b - a) * k / (steps - 1) for k in range(steps)]
    if lo > hi:
        values.reverse()
    return sweep_values(
        param_name, values, params0, cycles=cycles, continuation=continuation,
        tol=tol, max_periods=max_periods,
    )


def sweep_values(
    param_name: str,
    values: list[float],
    params0: SystemParams,
    cycles: bool = True,
    continuation: bool = True,
    tol: float = 1e-9,
    max_periods: float = 30.0,
) -> list[DiagramRow]:
    """One-parameter diagram: equilibria per value, plus cycle records.

    Stable cycles come from forward integration (warm-started from the
    previous row's cycle when `continuation` is on); an unstable cycle is
    attempted by backward integration seeded near a stable focus/node
    whenever one exists.  Per-row failures are recorded in the row and never
    abort the sweep.  Chunked callers get fresh seeding per chunk.
    """
    if param_name not in ("b", "c"):
        raise ValueError("param_name must be 'b' or 'c'")
    rows: list[DiagramRow] = []
    seed_stable = PhasePoint(-2.8, 1.64)
    for v in values:
        v = float(v)
        params = SystemParams(
            b=v if param_name == "b" else params0.b,
            c=v if param_name == "c" else params0.c,
            eps=params0.eps,
        )
        row = DiagramRow(v, equilibria(params))
        if cycles and params.eps > 0.0:
            _sweep_cycles(row, params, seed_stable, tol, max_periods)
            if continuation:
                for rec in row.cycles:
                    if rec.stability is Stability.STABLE:
                        seed_stable = rec.seed
        rows.append(row)
    return rows


def _sweep_cycles(row: DiagramRow, params: SystemParams, seed_stable: PhasePoint, tol, max_periods):
    try:
        lc = find_limit_cycle(params, seed_stable, "forward", tol=tol, max_periods=max_periods)
        row.cycles.append(
            CycleRecord(lc.period, lc.length, lc.stability, lc.converged,
                        PhasePoint(float(lc.x[0]), float(lc.y[0])))
        )
    except (NoCycleError, ConvergedToEquilibriumError, NonFiniteError, StepSizeCollapseError) as exc:
        row.error = f"stable: {type(exc).__name__}"
    stable_eq = [
        e
        for e in row.equilibria
        if e.classification in (EquilibriumClass.STABLE_FOCUS, EquilibriumClass.STABLE_NODE)
        and e.point.x > 0
    ]
    if stable_eq:
        seed = PhasePoint(stable_eq[0].point.x + 1e-3, stable_eq[0].point.y)
        try:
            lc = find_limit_cycle(params, seed, "backward", tol=tol, max_periods=max_periods)
            row.cycles.append(
                CycleRecord(lc.period, lc.length, lc.stability, lc.converged,
                            PhasePoint(float(lc.x[0]), float(lc.y[0])))
            )
        except (NoCycleError, ConvergedToEquilibriumError, NonFiniteError, StepSizeCollapseError) as exc:
            msg = f"unstable: {type(exc).__name__}"
            row.error = f"{row.error}; {msg}" if row.error else msg
