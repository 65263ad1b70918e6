"""Singular-fold recognition, fold normal-form data, and canard location.

The fold normal form around a regular singular fold gives the asymptotic
Hopf and canard parameter offsets lambda_H = -B*eps and
lambda_c = -(B + A)*eps.  Those are asymptotic in sqrt(eps) and carry a
sign-orientation subtlety for the c-family, so the numerical explosion
locator (bisection on the cycle length) is the authoritative source of
canard parameter values here; the formula values are reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .core import PhasePoint, SystemParams, eval_fast, eval_slow, f_scalar, fx, fxx, g_scalar, phi
from .dynamics import LimitCycle, find_limit_cycle
from .errors import BracketFailureError, NoCycleError
from .singular import FOLD_X

_ZERO_TOL = 1e-10

# classifier constants, fixed and recorded in CLI output metadata
MIDDLE_BAND = 0.05
MIN_MIDDLE_ARC = 0.5
SMALL_CYCLE_DIAMETER = 0.5
MIDDLE_SAMPLES = 2000

# explosion-window thresholds: lengths below/above bracket the near-vertical
# growth of the cycle length, and the bisection discriminant is the midpoint
SMALL_LENGTH = 5.0
LARGE_LENGTH = 15.0
EXPLOSION_LENGTH = 10.0


@dataclass(frozen=True)
class SingularFoldReport:
    """Evaluated singular-fold and regularity conditions at a phase point."""

    point: PhasePoint
    param_name: str
    checks: dict[str, tuple[float, bool]]

    @property
    def is_singular_fold(self) -> bool:
        return all(self.checks[k][1] for k in ("f", "f_x", "f_xx", "f_y", "g"))

    @property
    def is_regular(self) -> bool:
        return self.is_singular_fold and self.checks["g_x"][1] and self.checks["g_lambda"][1]


def check_singular_fold(point: PhasePoint, params: SystemParams, param_name: str = "c") -> SingularFoldReport:
    """Evaluate the five singular-fold conditions plus the two regularity ones.

    The designated bifurcation parameter is `param_name` ('c' or 'b'); its
    role only enters through the g_lambda condition.
    """
    if param_name not in ("b", "c"):
        raise ValueError("param_name must be 'b' or 'c'")
    g_lambda = -1.0 if param_name == "c" else -point.y
    vals = {
        "f": (eval_fast(point), abs(eval_fast(point)) <= _ZERO_TOL),
        "f_x": (fx(point.x), abs(fx(point.x)) <= _ZERO_TOL),
        "f_xx": (fxx(point.x), abs(fxx(point.x)) > _ZERO_TOL),
        "f_y": (-1.0, True),
        "g": (eval_slow(point, params), abs(eval_slow(point, params)) <= _ZERO_TOL),
        "g_x": (1.0, True),
        "g_lambda": (g_lambda, abs(g_lambda) > _ZERO_TOL),
    }
    return SingularFoldReport(point, param_name, vals)


@dataclass(frozen=True)
class NormalFormCoeffs:
    """Fold normal-form data: the l_i at the origin, x-derivatives, and A, B."""

    l1: float
    l2: float
    l3: float
    l4: float
    l5: float
    l6: float
    dl1_dx: float
    dl2_dx: float
    dl3_dx: float
    dl4_dx: float
    a_coeff: float
    b_coeff: float
    x_plus: float | None = None

    def __post_init__(self):
        a = (-self.dl1_dx + 3.0 * self.dl2_dx - 2.0 * self.dl4_dx + 2.0 * self.l6) / 8.0
        b = (self.dl3_dx + self.l6) / 2.0
        if a != self.a_coeff or b != self.b_coeff:
            raise ValueError("stored A/B disagree with the defining formulas")


def normal_form_case_i() -> NormalFormCoeffs:
    """Coefficients at the fold of the b = 0 family (parameter offset in c).

    Translating the fold and the parameter to the origin gives
    xdot = -y + x^2(-2*sqrt(3) - x), ydot = eps*(x + cbar), so A = -3/8 and
    B = 0: the bifurcation in the translated parameter is supercritical,
    and subcritical in c because the orientations are opposite.
    """
    return NormalFormCoeffs(
        l1=1.0,
        l2=-2.0 * math.sqrt(3.0),
        l3=0.0,
        l4=1.0,
        l5=-1.0,
        l6=0.0,
        dl1_dx=0.0,
        dl2_dx=-1.0,
        dl3_dx=0.0,
        dl4_dx=0.0,
        a_coeff=-3.0 / 8.0,
        b_coeff=0.0,
    )


def normal_form_case_ii() -> NormalFormCoeffs:
    """Coefficients at the E+ fold of the c = 0 family (parameter offset in b).

    The coefficient record keeps x_plus = 4/3, which is the square of the
    geometric fold abscissa sqrt(4/3); A and B depend only on the
    x-derivatives and l6, so they are unaffected either way:
    A = -15/32 < 0 and B = -3/16, supercritical in b.
    """
    x_plus = 4.0 / 3.0
    return NormalFormCoeffs(
        l1=-1.0,
        l2=-3.0 * x_plus,
        l3=0.0,
        l4=1.0,
        l5=1.0,
        l6=-3.0 / 8.0,
        dl1_dx=0.0,
        dl2_dx=-1.0,
        dl3_dx=0.0,
        dl4_dx=0.0,
        a_coeff=-15.0 / 32.0,
        b_coeff=-3.0 / 16.0,
        x_plus=x_plus,
    )


_C_H = 2.0 / math.sqrt(3.0)


def translated_field_case_i(xb: float, yb: float, cbar: float, eps: float) -> tuple[float, float]:
    """Exact b = 0 field in fold-centred coordinates (x - c_H, y - phi(c_H), c_H - c)."""
    x = xb + _C_H
    y = yb + phi(_C_H)
    c = _C_H - cbar
    return f_scalar(x, y), eps * g_scalar(x, y, 0.0, c)


def translated_field_case_ii(xb: float, yb: float, lam: float, eps: float) -> tuple[float, float]:
    """Exact c = 0 field in fold-centred coordinates around E+ at b = 3/8.

    The shift uses the geometric abscissa sqrt(4 - 8/3) = 2/sqrt(3); the
    constant -lam * y_plus term that a first-order normal form drops is kept,
    so this is an exact change of variables for every lam.
    """
    x_plus = math.sqrt(4.0 / 3.0)
    y_plus = 8.0 * x_plus / 3.0
    b = lam + 3.0 / 8.0
    x = xb + x_plus
    y = yb + y_plus
    return f_scalar(x, y), eps * g_scalar(x, y, b, 0.0)


@dataclass(frozen=True)
class AsymptoticLoci:
    """First-order Hopf and canard offsets of the fold normal form."""

    lambda_h: float
    lambda_c: float
    gap: float  # lambda_h - lambda_c = A*eps
    lambda_c_flipped: float
    note: str


def asymptotic_loci(coeffs: NormalFormCoeffs, eps: float) -> AsymptoticLoci:
    """lambda_H = -B*eps and lambda_c = -(B+A)*eps, reported verbatim.

    The translated parameter of the c-family runs opposite to c, and the
    worked c-family value in circulation carries the opposite sign of the
    formula; both signs are reported and the numerical locator is the
    authority for actual parameter values.
    """
    if not 0.0 < eps <= 0.5:
        raise ValueError("asymptotic loci are reported for eps in (0, 0.5]")
    lam_h = -coeffs.b_coeff * eps
    lam_c = -(coeffs.b_coeff + coeffs.a_coeff) * eps
    return AsymptoticLoci(
        lambda_h=lam_h,
        lambda_c=lam_c,
        gap=coeffs.a_coeff * eps,
        lambda_c_flipped=-lam_c,
        note=(
            "first-order fold-normal-form offsets; sign orientation of the "
            "translated parameter is opposite to c in the c-family, and the "
            "numerically located explosion is authoritative"
        ),
    )


class CanardClass(Enum):
    HOPF_SMALL = "HopfSmall"
    HEADLESS = "Headless"
    HEADED = "Headed"
    RELAXATION = "Relaxation"


@dataclass(frozen=True)
class CanardRecord:
    c: float
    period: float
    length: float
    klass: CanardClass
    converged: bool


_middle_tree = None


def _middle_branch_tree() -> cKDTree:
    global _middle_tree
    if _middle_tree is None:
        xs = np.linspace(-FOLD_X, FOLD_X, MIDDLE_SAMPLES)
        _middle_tree = cKDTree(np.column_stack([xs, phi(xs)]))
    return _middle_tree


def middle_branch_distances(cycle: LimitCycle) -> np.ndarray:
    """Distance of each loop sample to the repelling middle branch."""
    pts = np.column_stack([cycle.x, cycle.y])
    d, _ = _middle_branch_tree().query(pts)
    return d


def classify_canard(cycle: LimitCycle) -> CanardClass:
    """Headless/headed/relaxation/small classification of a closed orbit.

    Headless: a slow arc of length >= 0.5 within 0.05 of the repelling
    middle branch and no excursion past the left fold.  Headed: such an arc
    plus the excursion (x < -2/sqrt(3)).  Relaxation: no middle-branch arc.
    Small: diameter below 0.5 (Hopf-born cycles).  Thresholds are the fixed
    module constants so classifications are reproducible.
    """
    if len(cycle.x) < 3:
        raise ValueError("cycle has too few samples to classify")
    if cycle.diameter < SMALL_CYCLE_DIAMETER:
        return CanardClass.HOPF_SMALL
    d = middle_branch_distances(cycle)
    seg = np.hypot(np.diff(cycle.x), np.diff(cycle.y))
    in_band = d <= MIDDLE_BAND
    best = run = 0.0
    for k in range(len(seg)):
        if in_band[k] and in_band[k + 1]:
            run += seg[k]
            best = max(best, run)
        else:
            run = 0.0
    if best < MIN_MIDDLE_ARC:
        return CanardClass.RELAXATION
    if np.any(cycle.x < -FOLD_X):
        return CanardClass.HEADED
    return CanardClass.HEADLESS


def time_near_middle_branch(cycle: LimitCycle, band: float) -> float:
    """Slow time the loop spends within `band` of the repelling branch."""
    d = middle_branch_distances(cycle)
    dt = np.diff(cycle.t)
    inside = (d[:-1] <= band) & (d[1:] <= band)
    return float(np.sum(dt[inside]))


_SCAN_SEED = PhasePoint(-2.8, 1.64)
_DEFAULT_TOL = 1e-11


def _measure(c: float, eps: float, tol: float, cache: dict) -> LimitCycle:
    if c not in cache:
        cache[c] = find_limit_cycle(SystemParams(0.0, c, eps), _SCAN_SEED, tol=tol)
    return cache[c]


def locate_canard_explosion(
    eps: float,
    bracket: tuple[float, float] | None = None,
    c_tol: float = 1e-7,
    tol: float = _DEFAULT_TOL,
    cache: dict | None = None,
) -> float:
    """Parameter value of the canard explosion of the b = 0 family.

    Bisection on the discriminant length >= 10 (midpoint of the explosion
    window); the bracket must hold values on both sides of the near-vertical
    transition, with length > 15 at the low end and < 5 at the high end.
    When no bracket is given, a 41-point pre-sweep below the Hopf value
    produces one.  Converges when the c bracket is narrower than `c_tol`
    and returns the midpoint.
    """
    if eps <= 0.0:
        raise ValueError("locate_canard_explosion requires eps > 0")
    cache = cache if cache is not None else {}
    if bracket is None:
        bracket = _auto_bracket(eps, tol, cache)
    lo, hi = bracket
    if not lo < hi:
        raise BracketFailureError("bracket must satisfy lo < hi")
    a_lo = _measure(lo, eps, tol, cache).length
    a_hi = _measure(hi, eps, tol, cache).length
    if not (a_lo > LARGE_LENGTH and a_hi < SMALL_LENGTH):
        raise BracketFailureError(
            f"bracket lengths A({lo})={a_lo:.3f}, A({hi})={a_hi:.3f} do not straddle "
            f"the explosion window ({SMALL_LENGTH}, {LARGE_LENGTH})"
        )
    while hi - lo > c_tol:
        mid = 0.5 * (lo + hi)
        if _measure(mid, eps, tol, cache).length >= EXPLOSION_LENGTH:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _auto_bracket(eps: float, tol: float, cache: dict) -> tuple[float, float]:
    """Coarse 41-point pre-sweep below the Hopf value to bracket the explosion."""
    c_h = _C_H
    grid = np.linspace(c_h - 0.05, c_h - 1e-5, 41)
    prev = None
    for c in grid:
        try:
            a = _measure(float(c), eps, tol, cache).length
        except NoCycleError:
            continue
        if prev is not None and prev[1] >= EXPLOSION_LENGTH > a:
            return prev[0], float(c)
        prev = (float(c), a)
    raise BracketFailureError("pre-sweep found no explosion transition below the Hopf value")


def explosion_scan(
    eps: float,
    bracket: tuple[float, float] | None = None,
    n_points: int = 40,
    tol: float = _DEFAULT_TOL,
) -> tuple[float, list[CanardRecord]]:
    """Locate the explosion and assemble an n-point scan across it.

    The scan concentrates points logarithmically around the located value
    (the window is exponentially narrow), adding small-cycle points on the
    Hopf side and relaxation points below, and targets intermediate cycle
    lengths inside the window so both canard classes appear.  Records come
    back sorted by decreasing c, which is the small-to-large direction.
    """
    cache: dict[float, LimitCycle] = {}
    c_star = locate_canard_explosion(eps, bracket, c_tol=1e-9, tol=tol, cache=cache)

    # deepen: target intermediate lengths inside the window
    for target in (3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0):
        _bisect_to_length(target, eps, tol, cache)

    # flanks: small cycles toward the Hopf value, relaxation below
    for off in np.geomspace(3e-4, max(2.0 * (_C_H - c_star), 1e-3), 10):
        c = c_star + off
        if c < _C_H - 5e-5:
            _try_measure(float(c), eps, tol, cache)
    for off in np.geomspace(1e-5, 1e-2, 8):
        _try_measure(float(c_star - off), eps, tol, cache)

    # mid-size cycles on the Hopf flank sit between the small-diameter and
    # middle-arc thresholds and belong to no class cleanly; the scan skips
    # them: flank points are kept only with their flank's class
    records = []
    for c, lc in sorted(cache.items(), key=lambda kv: -kv[0]):
        klass = classify_canard(lc)
        if klass is CanardClass.RELAXATION and c > c_star:
            continue
        if klass is CanardClass.HOPF_SMALL and c < c_star:
            continue
        records.append(CanardRecord(c, lc.period, lc.length, klass, lc.converged))
    if len(records) > n_points:
        records = _thin_preserving_classes(records, n_points)
    return c_star, records


def _try_measure(c: float, eps: float, tol: float, cache: dict) -> None:
    try:
        _measure(c, eps, tol, cache)
    except NoCycleError:
        pass


def _bisect_to_length(target: float, eps: float, tol: float, cache: dict) -> None:
    """Refine the cache with a c whose cycle length is near `target`."""
    pts = sorted((c, lc.length) for c, lc in cache.items())
    # lengths decrease with c: find the tightest pair straddling the target
    lo = max((c for c, a in pts if a >= target), default=None)
    hi = min((c for c, a in pts if a < target), default=None)
    if lo is None or hi is None:
        return
    for _ in range(50):
        if hi - lo <= max(1e-12, 4.0 * np.spacing(hi)):
            return
        a_lo, a_hi = cache[lo].length, cache[hi].length
        if abs(a_lo - target) < 0.8 or abs(a_hi - target) < 0.8:
            return
        mid = 0.5 * (lo + hi)
        try:
            a = _measure(mid, eps, tol, cache).length
        except NoCycleError:
            return
        if a >= target:
            lo = mid
        else:
            hi = mid


def _thin_preserving_classes(records: list[CanardRecord], n_points: int) -> list[CanardRecord]:
    """Drop surplus points from the largest class groups, keeping order."""
    out = list(records)
    while len(out) > n_points:
        counts: dict[CanardClass, int] = {}
        for r in out:
            counts[r.klass] = counts.get(r.klass, 0) + 1
        biggest = max(counts, key=lambda k: counts[k])
        if counts[biggest] <= 2:
            break
        members = [i for i, r in enumerate(out) if r.klass is biggest]
        out.pop(members[len(members) // 2])
    return out


def locate_canard_explosion_in_b(
    eps: float,
    bracket: tuple[float, float] | None = None,
    length_threshold: float = 3.0,
    b_tol: float = 1e-7,
    tol: float = 1e-10,
) -> float:
    """Steep-growth locus of the unstable-cycle family of the c = 0 system.

    Backward-time cycles around E+ grow steeply in length just below the
    homoclinic value; this reports where the length crosses the threshold.
    No published reference value exists for it, so output is flagged as
    unvalidated by the CLI.
    """
    from .bifurcation import hopf_in_b

    if eps <= 0.0:
        raise ValueError("requires eps > 0")
    b_h = hopf_in_b(eps).param_value
    lo, hi = bracket if bracket is not None else (b_h + 1e-4, b_h + 0.02)

    def length_or_none(b: float):
        from .errors import ConvergedToEquilibriumError, NonFiniteError, StepSizeCollapseError

        x_plus = math.sqrt(4.0 - 1.0 / b)
        seed = PhasePoint(x_plus + 1e-3, phi(x_plus))
        try:
            return find_limit_cycle(
                SystemParams(b, 0.0, eps), seed, direction="backward", tol=tol, max_periods=80.0
            ).length
        except (NoCycleError, ConvergedToEquilibriumError, NonFiniteError, StepSizeCollapseError):
            return None

    a_lo = length_or_none(lo)
    if a_lo is None or a_lo >= length_threshold:
        raise BracketFailureError("lower bracket end is not on the small-cycle side")
    while hi - lo > b_tol:
        mid = 0.5 * (lo + hi)
        a = length_or_none(mid)
        if a is not None and a < length_threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
