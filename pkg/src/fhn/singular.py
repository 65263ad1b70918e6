"""Singular-limit machinery: critical manifold, folds, reduced flow, orbits.

The critical manifold is y = phi(x) = 4x - x^3 with fold abscissae at
x = +-2/sqrt(3).  Orbits of the eps = 0 system are composed combinatorially
from horizontal fast segments and on-manifold slow segments; slow-segment
durations are filled in by integrating the reduced flow xdot = psi(x), which
keeps them independent of the quadrature route used by relaxation_period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.integrate import quad

from .core import (
    PhasePoint,
    SystemParams,
    eval_fast,
    fx,
    phi,
    phi_roots_with_multiplicity,
    solve_cubic,
)
from .errors import (
    EquilibriumInPathError,
    FoldSingularityError,
    NotAnEquilibriumError,
    OnManifoldError,
)

FOLD_X = 2.0 / math.sqrt(3.0)
FOLD_Y = 16.0 / (3.0 * math.sqrt(3.0))

# jump landing abscissa on the opposite branch, |x| = 4/sqrt(3)
LANDING_X = 4.0 / math.sqrt(3.0)

_FOLD_DENOM_TOL = 1e-12
_EQ_RESIDUAL_TOL = 1e-10
_ON_MANIFOLD_TOL = 1e-9
_FOLD_ARRIVAL_TOL = 1e-8
_REVISIT_TOL = 1e-9
_MAX_JUMPS = 10


class Branch(Enum):
    LEFT_ATTRACTING = "left"
    MIDDLE_REPELLING = "middle"
    RIGHT_ATTRACTING = "right"
    FOLD_MINUS = "fold-"
    FOLD_PLUS = "fold+"


class SegmentKind(Enum):
    FAST = "fast"
    SLOW = "slow"


class Fate(Enum):
    EQUILIBRIUM_REACHED = "EquilibriumReached"
    DIVERGES_PLUS_Y = "DivergesPlusY"
    DIVERGES_MINUS_Y = "DivergesMinusY"
    PERIODIC_CYCLE = "PeriodicCycle"
    DEGENERATE = "Degenerate"


def fold_points() -> tuple[PhasePoint, PhasePoint]:
    """Fold points (P-, P+) = -+(2/sqrt(3), 16/(3 sqrt(3))), closed form."""
    return (PhasePoint(-FOLD_X, -FOLD_Y), PhasePoint(FOLD_X, FOLD_Y))


def branch_of(x: float) -> Branch:
    if x == -FOLD_X:
        return Branch.FOLD_MINUS
    if x == FOLD_X:
        return Branch.FOLD_PLUS
    if x < -FOLD_X:
        return Branch.LEFT_ATTRACTING
    if x > FOLD_X:
        return Branch.RIGHT_ATTRACTING
    return Branch.MIDDLE_REPELLING


def slow_flow_numerator(x: float, params: SystemParams) -> float:
    """g restricted to the critical manifold: b*x^3 + (1 - 4b)*x - c.

    Equals eval_slow((x, phi(x))); its roots are the equilibria of the full
    system.
    """
    b = params.b
    return b * x * x * x + (1.0 - 4.0 * b) * x - params.c


def slow_flow(x: float, params: SystemParams) -> float:
    """Reduced flow psi(x) = (b*x^3 + (1-4b)*x - c) / (4 - 3x^2)."""
    denom = fx(x)
    if abs(denom) < _FOLD_DENOM_TOL:
        raise FoldSingularityError(f"reduced flow undefined at fold abscissa x={x!r}")
    return slow_flow_numerator(x, params) / denom


def slow_flow_linearization(x_star: float, params: SystemParams) -> float:
    """d psi/dx at a reduced-flow equilibrium: (1 - b*(4-3x*^2)) / (4-3x*^2)."""
    denom = fx(x_star)
    if abs(denom) < _FOLD_DENOM_TOL:
        raise FoldSingularityError(f"x*={x_star!r} is a fold abscissa")
    if abs(slow_flow_numerator(x_star, params) / denom) > _EQ_RESIDUAL_TOL:
        raise NotAnEquilibriumError(f"psi({x_star!r}) != 0")
    return (1.0 - params.b * denom) / denom


def equilibrium_abscissae(params: SystemParams) -> list[tuple[float, int]]:
    """Real roots (with multiplicity) of the slow-flow numerator, ascending."""
    b = params.b
    if abs(b) < 1e-14:
        # cubic degenerates; avoids cancellation in the cubic path
        return [(params.c, 1)]
    return solve_cubic(b, 0.0, 1.0 - 4.0 * b, -params.c)


@dataclass(frozen=True)
class OrbitSegment:
    kind: SegmentKind
    start: PhasePoint
    end: PhasePoint
    duration: float  # slow-time units; 0 for fast segments

    def sample(self, n: int = 100) -> list[PhasePoint]:
        """n points along the segment: horizontal for fast, on C0 for slow."""
        xs = [self.start.x + (self.end.x - self.start.x) * k / (n - 1) for k in range(n)]
        if self.kind is SegmentKind.FAST:
            return [PhasePoint(x, self.start.y) for x in xs]
        return [PhasePoint(x, phi(x)) for x in xs]


@dataclass
class SingularOrbit:
    segments: list[OrbitSegment]
    fate: Fate
    cycle_start: int | None = None  # index of the first segment of the periodic part
    params: SystemParams | None = None

    def cycle_period(self) -> float:
        if self.fate is not Fate.PERIODIC_CYCLE or self.cycle_start is None:
            raise ValueError("orbit is not periodic")
        return sum(s.duration for s in self.segments[self.cycle_start :])


def classify_singular_fate(start: PhasePoint, params: SystemParams) -> SingularOrbit:
    """Compose the eps = 0 orbit from `start` and determine its fate.

    The fate is decided combinatorially from the branch membership and
    ordering of the slow-flow equilibria relative to the fold band; slow
    segments refuse to cross the fold abscissae and jump when they arrive
    within 1e-8 of one.  Fast jump targets are the distinct other root of
    phi(x) = y_fold.
    """
    if params.eps != 0.0:
        raise ValueError("classify_singular_fate requires eps = 0")
    if abs(eval_fast(start)) <= _ON_MANIFOLD_TOL:
        raise OnManifoldError(f"start {start} lies on the critical manifold")

    roots = equilibrium_abscissae(params)
    segments: list[OrbitSegment] = []
    landings: list[PhasePoint] = []

    # initial horizontal fast segment to the first root in the flow direction
    target, mult = _fast_target(start)
    land = PhasePoint(target, start.y)
    segments.append(OrbitSegment(SegmentKind.FAST, start, land, 0.0))

    jumps = 0
    while True:
        if mult == 2:
            # landed exactly on a fold: jump immediately
            land, segment = _jump_from_fold(land)
            segments.append(segment)
            jumps += 1
            mult = 1
            continue

        hit = _equilibrium_at(land.x, roots)
        if hit is not None:
            fate = (
                Fate.DEGENERATE
                if slow_flow_linearization(hit, params) > 0.0
                else Fate.EQUILIBRIUM_REACHED
            )
            return SingularOrbit(segments, fate, None, params)

        for prev_idx, prev in enumerate(landings):
            if math.hypot(prev.x - land.x, prev.y - land.y) <= _REVISIT_TOL:
                # revisit: the orbit is periodic from that landing onward
                cycle_start = _segment_index_of_landing(segments, prev_idx)
                return SingularOrbit(segments, Fate.PERIODIC_CYCLE, cycle_start, params)
        landings.append(land)

        end_kind, x_end = _slow_segment_end(land.x, params, roots)
        end = PhasePoint(x_end, phi(x_end))
        duration = _slow_transit_time(land.x, x_end, params) if end_kind != "equilibrium" else math.inf
        segments.append(OrbitSegment(SegmentKind.SLOW, land, end, duration))

        if end_kind == "equilibrium":
            return SingularOrbit(segments, Fate.EQUILIBRIUM_REACHED, None, params)
        if end_kind == "diverge":
            fate = Fate.DIVERGES_PLUS_Y if land.x < 0 else Fate.DIVERGES_MINUS_Y
            return SingularOrbit(segments, fate, None, params)

        # arrived at a fold point; a fold that is itself an equilibrium is a
        # singular fold and lies outside the scenario classification
        if abs(slow_flow_numerator(end.x, params)) <= _EQ_RESIDUAL_TOL:
            raise FoldSingularityError(
                f"slow flow reaches the fold x={end.x!r} where g also vanishes (singular fold)"
            )
        if jumps >= _MAX_JUMPS:
            raise RuntimeError("no fate after the fold-jump budget; degenerate parameters")
        land, segment = _jump_from_fold(end)
        segments.append(segment)
        jumps += 1
        mult = 1


def _fast_target(start: PhasePoint) -> tuple[float, int]:
    direction = 1.0 if eval_fast(start) > 0.0 else -1.0
    candidates = [
        (r, m) for r, m in phi_roots_with_multiplicity(start.y) if (r - start.x) * direction > 0.0
    ]
    # f(x) = phi(x) - y has a root in the flow direction for every off-manifold start
    return min(candidates, key=lambda rm: abs(rm[0] - start.x))


def _equilibrium_at(x: float, roots: list[tuple[float, int]]) -> float | None:
    for r, _ in roots:
        if abs(r - x) <= _REVISIT_TOL:
            return r
    return None


def _segment_index_of_landing(segments: list[OrbitSegment], landing_idx: int) -> int:
    slow_seen = 0
    for i, seg in enumerate(segments):
        if seg.kind is SegmentKind.SLOW:
            if slow_seen == landing_idx:
                return i
            slow_seen += 1
    raise RuntimeError("landing index out of range")


def _slow_segment_end(
    x_from: float, params: SystemParams, roots: list[tuple[float, int]]
) -> tuple[str, float]:
    """Where the slow motion from x_from ends: equilibrium, fold, or cap."""
    on_left = x_from < -FOLD_X
    direction = math.copysign(1.0, slow_flow(x_from, params))

    branch_lo, branch_hi = (-math.inf, -FOLD_X) if on_left else (FOLD_X, math.inf)
    ahead = [
        r
        for r, _ in roots
        if branch_lo < r < branch_hi and (r - x_from) * direction > _REVISIT_TOL
    ]
    if ahead:
        return "equilibrium", min(ahead, key=lambda r: abs(r - x_from))

    toward_fold = direction > 0.0 if on_left else direction < 0.0
    if toward_fold:
        return "fold", -FOLD_X if on_left else FOLD_X
    # truncate the diverging tail at a bounded window for reporting
    cap = x_from + direction * max(2.0, abs(x_from))
    return "diverge", cap


def _jump_from_fold(fold_pt: PhasePoint) -> tuple[PhasePoint, OrbitSegment]:
    """Horizontal jump to the distinct other root of phi(x) = y_fold."""
    others = [
        r
        for r, _ in phi_roots_with_multiplicity(fold_pt.y)
        if abs(r - fold_pt.x) > _FOLD_ARRIVAL_TOL
    ]
    if len(others) != 1:
        raise RuntimeError(f"jump target at {fold_pt} is not unique: {others}")
    land = PhasePoint(others[0], fold_pt.y)
    return land, OrbitSegment(SegmentKind.FAST, fold_pt, land, 0.0)


# -- slow-segment durations: adaptive RK on xdot = psi(x) ---------------------

# Cash-Karp 5(4) tableau for the scalar reduced flow
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


def _slow_transit_time(x_from: float, x_to: float, params: SystemParams, rtol: float = 1e-10) -> float:
    """Slow time to move from x_from to x_to under xdot = psi(x).

    Adaptive Cash-Karp steps in slow time that refuse to cross the endpoint;
    arrival within 1e-8 of the target stops the integration (the omitted
    tail is O(1e-15) because psi diverges at folds).
    """
    if x_from == x_to:
        return 0.0
    direction = math.copysign(1.0, x_to - x_from)
    stop = x_to - direction * _FOLD_ARRIVAL_TOL
    x, tau = x_from, 0.0
    speed = abs(slow_flow(x_from, params))
    h = abs(stop - x_from) / (8.0 * (speed + 1e-12))
    for _ in range(500_000):
        if (stop - x) * direction <= 0.0:
            return tau
        try:
            ks: list[float] = []
            for row in _CK_A:
                xi = x + h * sum(a * k for a, k in zip(row, ks))
                ks.append(slow_flow(xi, params))
            x5 = x + h * sum(b * k for b, k in zip(_CK_B5, ks))
            x4 = x + h * sum(b * k for b, k in zip(_CK_B4, ks))
        except FoldSingularityError:
            h *= 0.5
            continue
        if (x5 - stop) * direction > 0.0 and abs(x5 - x) > 0.0:
            # would cross the stop line: shrink proportionally and retry
            h *= max(0.1, 0.9 * abs(stop - x) / abs(x5 - x))
            continue
        err = abs(x5 - x4)
        scale = rtol * (abs(x) + abs(h * ks[0])) + 1e-14
        if err <= scale or h <= 1e-14:
            tau += h
            x = x5
            h *= min(5.0, 0.9 * (scale / err) ** 0.2 if err > 0.0 else 5.0)
        else:
            h *= max(0.2, 0.9 * (scale / err) ** 0.2)
    raise RuntimeError("slow transit did not terminate")


# -- relaxation-oscillation period --------------------------------------------


def relaxation_period(params: SystemParams) -> float:
    """Period of the singular relaxation cycle by adaptive quadrature.

    Sum of the two slow transits (right branch 4/sqrt(3) -> 2/sqrt(3) and
    left branch -4/sqrt(3) -> -2/sqrt(3)); for c = 0 the oddness of the
    cubic makes both equal and the result is twice the one-branch integral.
    """
    if params.eps != 0.0:
        raise ValueError("relaxation_period requires eps = 0")
    for lo, hi in ((FOLD_X, LANDING_X), (-LANDING_X, -FOLD_X)):
        for r, _ in equilibrium_abscissae(params):
            if lo - 1e-12 <= r <= hi + 1e-12:
                raise EquilibriumInPathError(
                    f"equilibrium at x={r} lies in the slow transit [{lo}, {hi}]"
                )

    def integrand(x: float) -> float:
        return fx(x) / slow_flow_numerator(x, params)

    t_right, _ = quad(integrand, LANDING_X, FOLD_X, epsabs=1e-9, epsrel=1e-12, limit=200)
    t_left, _ = quad(integrand, -LANDING_X, -FOLD_X, epsabs=1e-9, epsrel=1e-12, limit=200)
    return t_right + t_left
