"""Stiff integration of the regular (eps > 0) system and limit-cycle location.

The integrator is a six-stage, stiffly accurate, L-stable linearly implicit
Rosenbrock method of order 4 with an embedded order-3 error estimate
(coefficients from Hairer & Wanner's RODAS), specialized to the
FitzHugh-Nagumo field with its exact 2x2 Jacobian.  Cycles are found by
Poincare return maps on a vertical section; unstable cycles are made
attracting by integrating backward in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import PhasePoint, SystemParams, TimeScale
from .errors import (
    ConvergedToEquilibriumError,
    DegenerateLoopError,
    NoCycleError,
    NonFiniteError,
    StepSizeCollapseError,
)

_GAMMA = 0.25
_A = (
    (1.544,),
    (0.9466785280815826, 0.2557011698983284),
    (3.314825187068521, 2.896124015972201, 0.9986419139977817),
    (1.221224509226641, 6.019134481288629, 12.53708332932087, -0.687886036105895),
    (1.221224509226641, 6.019134481288629, 12.53708332932087, -0.687886036105895, 1.0),
)
_C = (
    (-5.6688,),
    (-2.430093356833875, -0.2063599157091915),
    (-0.1073529058151375, -9.594562251023355, -20.47028614809616),
    (7.496443313967647, -10.24680431464352, -33.99990352819905, 11.7089089320616),
    (8.083246795921522, -7.981132988064893, -31.52159432874371, 16.31930543123136, -6.058818238834054),
)
_M = (1.221224509226641, 6.019134481288629, 12.53708332932087, -0.687886036105895, 1.0, 1.0)

_H_FLOOR = 1e-14
_MAX_REJECTS = 200


class Stability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass
class Trajectory:
    """Accepted integration nodes with node derivatives for dense output."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    scale: TimeScale
    direction: int
    stats: dict = field(default_factory=dict)

    def sample(self, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cubic-Hermite dense output at the requested times."""
        ts = np.asarray(ts, dtype=float)
        idx = np.clip(np.searchsorted(self.t, ts, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        s = np.where(h > 0.0, (ts - self.t[idx]) / np.where(h > 0.0, h, 1.0), 0.0)
        xs = _hermite(s, self.x[idx], self.x[idx + 1], self.dx[idx], self.dx[idx + 1], h)
        ys = _hermite(s, self.y[idx], self.y[idx + 1], self.dy[idx], self.dy[idx + 1], h)
        return xs, ys

    def sample_uniform(self, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        ts = np.arange(self.t[0], self.t[-1] + 0.5 * dt, dt)
        ts = ts[ts <= self.t[-1]]
        xs, ys = self.sample(ts)
        return ts, xs, ys


def _hermite(s, p0, p1, d0, d1, h):
    s2 = s * s
    s3 = s2 * s
    return (
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * h * d1
    )


class _Stepper:
    """One-state adaptive Rosenbrock driver for the FitzHugh-Nagumo field.

    State is advanced in the requested time scale; `direction=-1` integrates
    the time-reversed field so that timestamps always increase.
    """

    def __init__(self, x, y, params: SystemParams, scale: TimeScale, direction: int, tol: float, max_norm: float):
        if params.eps <= 0.0:
            raise ValueError("stiff integration requires eps > 0")
        self.b = params.b
        self.c = params.c
        self.eps = params.eps
        # component scaling: fast scale integrates (f, eps*g), slow scale (f/eps, g)
        if scale is TimeScale.FAST:
            self.sx, self.sy = float(direction), direction * params.eps
        else:
            self.sx, self.sy = direction / params.eps, float(direction)
        self.tol = tol
        self.max_norm = max_norm
        self.t = 0.0
        self.x = float(x)
        self.y = float(y)
        self.dx, self.dy = self._field(self.x, self.y)
        fn = math.hypot(self.dx, self.dy)
        self.h = min(1e-3, 0.01 * tol ** 0.25 / (fn + 1e-6) + 1e-9)
        self.naccept = 0
        self.nreject = 0

    def _field(self, x, y):
        return (
            self.sx * (-y + 4.0 * x - x * x * x),
            self.sy * (x - self.b * y - self.c),
        )

    def advance(self, t_cap: float | None = None) -> None:
        """Take one accepted step (clamped to t_cap when given)."""
        b = self.b
        h = self.h
        x0, y0 = self.x, self.y
        f0x, f0y = self.dx, self.dy
        # exact Jacobian of the scaled field
        j11 = self.sx * (4.0 - 3.0 * x0 * x0)
        j12 = -self.sx
        j21 = self.sy
        j22 = -self.sy * b
        tol = self.tol

        for _ in range(_MAX_REJECTS):
            if t_cap is not None and self.t + h > t_cap:
                h = t_cap - self.t
            if h < _H_FLOOR:
                raise StepSizeCollapseError(f"step {h:.3e} below floor at t={self.t!r}")
            ghinv = 1.0 / (h * _GAMMA)
            w11 = ghinv - j11
            w22 = ghinv - j22
            det = w11 * w22 - j12 * j21
            if det == 0.0 or not math.isfinite(det):
                h *= 0.5
                continue
            inv = 1.0 / det

            k = []
            fx_i, fy_i = f0x, f0y
            for i in range(6):
                if i > 0:
                    ax = x0
                    ay = y0
                    for a, (k1, k2) in zip(_A[i - 1], k):
                        ax += a * k1
                        ay += a * k2
                    fx_i, fy_i = self._field(ax, ay)
                r1, r2 = fx_i, fy_i
                if i > 0:
                    hinv = 1.0 / h
                    for cc, (k1, k2) in zip(_C[i - 1], k):
                        r1 += cc * hinv * k1
                        r2 += cc * hinv * k2
                # solve (I/(h*gamma) - J) k = r, closed form 2x2
                k.append(((r1 * w22 + r2 * j12) * inv, (w11 * r2 + j21 * r1) * inv))

            xn = x0
            yn = y0
            for m, (k1, k2) in zip(_M, k):
                xn += m * k1
                yn += m * k2
            e1, e2 = k[5]

            if not (math.isfinite(xn) and math.isfinite(yn)):
                h *= 0.5
                self.nreject += 1
                continue
            sc1 = tol + tol * max(abs(x0), abs(xn))
            sc2 = tol + tol * max(abs(y0), abs(yn))
            err = math.sqrt(0.5 * ((e1 / sc1) ** 2 + (e2 / sc2) ** 2))
            if err <= 1.0:
                self.t += h
                self.x, self.y = xn, yn
                self.dx, self.dy = self._field(xn, yn)
                self.naccept += 1
                fac = min(6.0, max(0.2, 0.9 * err ** -0.25)) if err > 0.0 else 6.0
                self.h = h * fac
                if max(abs(xn), abs(yn)) > self.max_norm:
                    raise NonFiniteError(
                        f"state left |u| <= {self.max_norm} at t={self.t!r}",
                        last_state=PhasePoint(xn, yn) if math.isfinite(xn + yn) else None,
                    )
                return
            self.nreject += 1
            h *= max(0.1, 0.9 * err ** -0.25)
        raise StepSizeCollapseError("step repeatedly rejected")


def integrate(
    start: PhasePoint,
    params: SystemParams,
    t_end: float,
    scale: TimeScale = TimeScale.SLOW,
    tol: float = 1e-8,
    direction: int = 1,
    max_norm: float = 1e8,
) -> Trajectory:
    """Adaptive stiff integration from `start` for `t_end` time units.

    Local error is kept at or below `tol` per step (mixed absolute/relative
    weighting); the returned trajectory holds the accepted nodes together
    with node derivatives, so dense output at any requested spacing is
    available through Trajectory.sample / sample_uniform.

    Raises StepSizeCollapseError if the step falls below 1e-14 and
    NonFiniteError (carrying the partial trajectory) if the state blows up,
    which is the legitimate outcome for divergent parameter regimes.
    """
    if params.eps <= 0.0:
        raise ValueError("integrate requires eps > 0; use the singular module for eps = 0")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if not 1e-12 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-12, 1e-3]")
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")

    st = _Stepper(start.x, start.y, params, scale, direction, tol, max_norm)
    ts, xs, ys, dxs, dys = [st.t], [st.x], [st.y], [st.dx], [st.dy]
    try:
        while st.t < t_end:
            st.advance(t_cap=t_end)
            ts.append(st.t)
            xs.append(st.x)
            ys.append(st.y)
            dxs.append(st.dx)
            dys.append(st.dy)
    except NonFiniteError as exc:
        exc.trajectory = _make_traj(ts, xs, ys, dxs, dys, scale, direction, st)
        raise
    return _make_traj(ts, xs, ys, dxs, dys, scale, direction, st)


def _make_traj(ts, xs, ys, dxs, dys, scale, direction, st: _Stepper) -> Trajectory:
    return Trajectory(
        np.array(ts),
        np.array(xs),
        np.array(ys),
        np.array(dxs),
        np.array(dys),
        scale,
        direction,
        stats={"steps": st.naccept, "rejected": st.nreject, "tol": st.tol},
    )


@dataclass
class LimitCycle:
    """One-period sample loop with period (slow time) and arc length."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    period: float
    length: float
    stability: Stability
    converged: bool
    section_x: float
    section_sign: int
    return_gap: float

    def min_distance_to(self, px: float, py: float) -> float:
        return float(np.min(np.hypot(self.x - px, self.y - py)))

    @property
    def diameter(self) -> float:
        return float(math.hypot(np.ptp(self.x), np.ptp(self.y)))


def cycle_length(x, y=None) -> float:
    """Polygonal perimeter of a loop in the phase plane, closing segment included."""
    if y is None:
        arr = np.asarray(x, dtype=float)
        xs, ys = arr[:, 0], arr[:, 1]
    else:
        xs, ys = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(xs) < 3:
        raise DegenerateLoopError("loop needs at least 3 samples")
    total = float(np.sum(np.hypot(np.diff(xs), np.diff(ys))))
    total += float(math.hypot(xs[0] - xs[-1], ys[0] - ys[-1]))
    if total == 0.0:
        raise DegenerateLoopError("loop has zero length")
    return total


_TRANSIENT_WINDOWS = 2
_PROBE_WINDOW = 10.0
_EQUILIBRIUM_DISP = 1e-8
_LOOSE_RETURN_FRACTION = 0.01
_MIN_CYCLE_DIAMETER = 1e-6


def find_limit_cycle(
    params: SystemParams,
    seed: PhasePoint,
    direction: str = "forward",
    tol: float = 1e-10,
    return_tol: float = 1e-8,
    max_periods: float = 50.0,
    dense_n: int = 2000,
    max_norm: float = 1e6,
) -> LimitCycle:
    """Locate a limit cycle by convergence of Poincare returns.

    Integration runs in slow time, backward for unstable cycles.  After a
    transient, the section is the vertical line through the point of fastest
    horizontal motion on the attractor (fixed crossing orientation); returns
    are the section ordinates, and the cycle is accepted when successive
    returns agree to `return_tol`.  If the budget of `max_periods` estimated
    periods runs out while returns still jitter inside one percent of the
    cycle amplitude (the regime near a canard explosion, where tolerance
    noise is amplified exponentially along the repelling branch), the last
    loop is returned flagged `converged=False` rather than raising.

    Raises ConvergedToEquilibriumError or NoCycleError otherwise.
    """
    if params.eps <= 0.0:
        raise ValueError("find_limit_cycle requires eps > 0")
    sgn = 1 if direction == "forward" else -1
    stability = Stability.STABLE if sgn == 1 else Stability.UNSTABLE

    st = _Stepper(seed.x, seed.y, params, TimeScale.SLOW, sgn, tol, max_norm)

    # transient, with equilibrium detection per window
    for _ in range(_TRANSIENT_WINDOWS):
        _run_window(st, _PROBE_WINDOW)

    # probe one window for the most transversal section anchor
    best = (abs(st.dx), st.x, 1 if st.dx > 0 else -1)
    t_stop = st.t + _PROBE_WINDOW
    x_min = x_max = st.x
    while st.t < t_stop:
        st.advance()
        x_min = min(x_min, st.x)
        x_max = max(x_max, st.x)
        if abs(st.dx) > best[0]:
            best = (abs(st.dx), st.x, 1 if st.dx > 0 else -1)
    if best[0] < 1e-12 or (x_max - x_min) < _MIN_CYCLE_DIAMETER:
        raise ConvergedToEquilibriumError(
            "attractor has no horizontal extent; trajectory spiralled into an equilibrium",
            point=PhasePoint(st.x, st.y),
        )
    section_x, section_sign = best[1], best[2]
    amplitude = max(x_max - x_min, 1e-12)

    crossings: list[tuple[float, float]] = []
    t_budget_ref = _PROBE_WINDOW
    budget_start = st.t
    converged_at = None
    recording: list[tuple[float, float, float, float, float]] | None = None
    # rolling extent window: a state that stops moving is an equilibrium
    mark_t, wx_lo, wx_hi, wy_lo, wy_hi = st.t, st.x, st.x, st.y, st.y

    prev = (st.t, st.x, st.y, st.dx, st.dy)
    while True:
        st.advance()
        node = (st.t, st.x, st.y, st.dx, st.dy)
        if recording is not None:
            recording.append(node)
        wx_lo, wx_hi = min(wx_lo, st.x), max(wx_hi, st.x)
        wy_lo, wy_hi = min(wy_lo, st.y), max(wy_hi, st.y)
        if st.t - mark_t >= _PROBE_WINDOW:
            extent = max(wx_hi - wx_lo, wy_hi - wy_lo)
            if extent < _MIN_CYCLE_DIAMETER and converged_at is None:
                raise ConvergedToEquilibriumError(
                    "state stopped moving during cycle search", point=PhasePoint(st.x, st.y)
                )
            mark_t, wx_lo, wx_hi, wy_lo, wy_hi = st.t, st.x, st.x, st.y, st.y
        cross = _crossing_in_step(prev, node, section_x, section_sign)
        if cross is not None:
            t_c, y_c = cross
            crossings.append((t_c, y_c))
            if len(crossings) >= 2:
                t_budget_ref = max(crossings[-1][0] - crossings[-2][0], 1e-3)
            if converged_at is not None:
                # final full period recorded: build the loop
                loop = _build_loop(
                    recording,
                    converged_at[0],
                    t_c,
                    dense_n,
                    stability,
                    section_x,
                    section_sign,
                    converged_at[2],
                    converged_at[3],
                )
                if loop.diameter < _MIN_CYCLE_DIAMETER:
                    raise ConvergedToEquilibriumError(
                        "returns converged onto a point, not a cycle",
                        point=PhasePoint(st.x, st.y),
                    )
                return loop
            if len(crossings) >= 2:
                gap = abs(crossings[-1][1] - crossings[-2][1])
                elapsed = st.t - budget_start
                out_of_budget = elapsed > max_periods * t_budget_ref
                loose_ok = (
                    len(crossings) >= 5
                    and _spread(crossings[-4:]) < _LOOSE_RETURN_FRACTION * amplitude
                )
                if gap < return_tol or (out_of_budget and loose_ok):
                    converged_at = (t_c, y_c, gap < return_tol, gap)
                    recording = [prev, node]
                elif out_of_budget:
                    raise NoCycleError(
                        f"returns did not settle within {max_periods} estimated periods"
                    )
        else:
            elapsed = st.t - budget_start
            if elapsed > max_periods * t_budget_ref and not crossings:
                raise NoCycleError("no section crossings within the time budget")
        prev = node


def _spread(crossings) -> float:
    ys = [y for _, y in crossings]
    return max(ys) - min(ys)


def _run_window(st: _Stepper, duration: float) -> None:
    """Advance by `duration`, raising if the state has parked at an equilibrium."""
    t_stop = st.t + duration
    x_ref, y_ref = st.x, st.y
    disp = 0.0
    while st.t < t_stop:
        st.advance(t_cap=t_stop)
        disp = max(disp, abs(st.x - x_ref), abs(st.y - y_ref))
    scale = 1.0 + max(abs(st.x), abs(st.y))
    if disp < _EQUILIBRIUM_DISP * scale and math.hypot(st.dx, st.dy) < 1e-6:
        raise ConvergedToEquilibriumError(
            "trajectory parked at an equilibrium", point=PhasePoint(st.x, st.y)
        )


def _crossing_in_step(prev, node, section_x: float, section_sign: int):
    t0, x0, y0, dx0, dy0 = prev
    t1, x1, y1, dx1, dy1 = node
    s0, s1 = x0 - section_x, x1 - section_x
    if s0 == 0.0 or s0 * s1 >= 0.0:
        return None
    if (1 if x1 > x0 else -1) != section_sign:
        return None
    h = t1 - t0
    lo, hi = 0.0, 1.0
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        val = _hermite(mid, x0, x1, dx0, dx1, h) - section_x
        if (val > 0.0) == (s1 > 0.0):
            hi = mid
        else:
            lo = mid
    s = 0.5 * (lo + hi)
    return t0 + s * h, float(_hermite(s, y0, y1, dy0, dy1, h))


def _build_loop(nodes, t_start, t_end, dense_n, stability, section_x, section_sign, strict, gap):
    arr = np.array(nodes)
    traj = Trajectory(
        arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], TimeScale.SLOW, +1
    )
    period = t_end - t_start
    ts = np.linspace(t_start, t_end, dense_n + 1)
    xs, ys = traj.sample(ts)
    length = cycle_length(xs, ys)
    return LimitCycle(
        ts - t_start,
        xs,
        ys,
        period,
        length,
        stability,
        bool(strict),
        section_x,
        section_sign,
        gap,
    )
