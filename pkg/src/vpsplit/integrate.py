"""Fixed-step trajectories and Poincare sections for splitting schemes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DomainError, MaxSteps, SingularStep, StepUnderflow
from .oracle import Rk45
from .problems import build_cubic_stokes, build_laurent, build_quadratic_stokes
from .splitting import SplitScheme
from .trajectory import ABORTED, COMPLETED, Trajectory

__all__ = [
    "Trajectory",
    "SectionSpec",
    "Section",
    "run",
    "poincare",
    "step_count",
    "default_record_every",
    "OVERFLOW_GUARD",
    "build_cubic_stokes",
    "build_quadratic_stokes",
    "build_laurent",
]

OVERFLOW_GUARD = 1e12
MAX_RECORDED = 1_000_000
CROSSING_TOL = 1e-10
MAX_BISECTIONS = 60


def step_count(T: float, h: float) -> int:
    """Number of steps of size ``h`` needed to reach ``T``; the last may be shorter."""
    if T <= 0:
        return 0
    return max(1, math.ceil(T / h - 1e-9))


def default_record_every(nsteps: int) -> int:
    return 1 if nsteps <= MAX_RECORDED else math.ceil(nsteps / MAX_RECORDED)


def _abort_reason(exc: Exception) -> str:
    if isinstance(exc, SingularStep):
        return "singular_step"
    if isinstance(exc, DomainError):
        return "domain_error"
    if isinstance(exc, StepUnderflow):
        return "step_underflow"
    if isinstance(exc, MaxSteps):
        return "max_steps"
    return type(exc).__name__


def _bad(x) -> bool:
    for v in x:
        if not abs(v) <= OVERFLOW_GUARD:  # also catches nan
            return True
    return False


def run(
    method: Union[SplitScheme, Rk45],
    x0,
    h: float,
    T: float,
    record_every: Optional[int] = None,
    substep: bool = False,
) -> Trajectory:
    """Integrate from ``x0`` over ``[0, T]``.

    A :class:`SplitScheme` is stepped ``step_count(T, h)`` times with fixed
    ``h``, the last step shortened to land on ``T``. Every
    ``record_every``-th state is kept, plus the final one. An :class:`Rk45`
    method ignores ``h`` and records its accepted steps.

    Failures never raise: a singular step, a domain error or a state with
    ``max |x_i| > 1e12`` ends the run with ``status == "aborted"``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    x = [float(v) for v in x0]

    if isinstance(method, Rk45):
        try:
            tr = method.integrate(x, T)
        except (StepUnderflow, MaxSteps) as exc:
            tr = exc.trajectory
        except DomainError as exc:
            tr = Trajectory.from_lists([0.0], [x], status=ABORTED, reason=_abort_reason(exc), t_abort=0.0)
        bad = [k for k, s in enumerate(tr.states) if _bad(s)]
        if bad:
            k = bad[0]
            tr = Trajectory(tr.times[:k], tr.states[:k], ABORTED, "overflow", float(tr.times[k - 1]), tr.steps)
        if record_every and record_every > 1 and len(tr) > 1:
            keep = list(range(0, len(tr) - 1, record_every)) + [len(tr) - 1]
            tr = Trajectory(tr.times[keep], tr.states[keep], tr.status, tr.reason, tr.t_abort, tr.steps)
        return tr

    nsteps = step_count(T, h)
    every = record_every or default_record_every(nsteps)
    times, states = [0.0], [x]
    t = 0.0
    for k in range(1, nsteps + 1):
        t_next = T if k == nsteps else k * h
        try:
            x_new = method.step_list(x, t_next - t, substep=substep)
        except (SingularStep, DomainError) as exc:
            reason = _abort_reason(exc)
        except OverflowError:
            reason = "overflow"
        else:
            reason = None if not _bad(x_new) else "overflow"
        if reason is not None:
            if times[-1] != t:
                times.append(t)
                states.append(x)
            return Trajectory.from_lists(times, states, status=ABORTED, reason=reason, t_abort=t, steps=k - 1)
        x, t = x_new, t_next
        if k % every == 0 or k == nsteps:
            times.append(t)
            states.append(x)
    return Trajectory.from_lists(times, states, steps=nsteps)


@dataclass(frozen=True)
class SectionSpec:
    """The hyperplane ``x[axis] == level`` crossed in ``direction``.

    ``direction`` is ``+1`` (upward), ``-1`` (downward) or ``"both"``.
    Axes are 0-based.
    """

    axis: int
    level: float = 0.0
    direction: Union[int, str] = "both"

    def __post_init__(self):
        if self.axis < 0:
            raise ValueError("axis must be non-negative")
        if self.direction not in (1, -1, "both"):
            raise ValueError("direction must be +1, -1 or 'both'")

    def crosses(self, g0: float, g1: float) -> bool:
        up = g0 < 0.0 <= g1
        down = g0 > 0.0 >= g1
        if self.direction == 1:
            return up
        if self.direction == -1:
            return down
        return up or down


@dataclass
class Section:
    """Section points (the coordinates other than ``axis``) and their times."""

    points: np.ndarray
    times: np.ndarray
    axis: int
    status: str = COMPLETED
    reason: Optional[str] = None
    t_abort: Optional[float] = None
    full_points: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)


def _refine(scheme: SplitScheme, x: list, h: float, sec: SectionSpec, g0: float, substep: bool):
    lo, hi = 0.0, 1.0
    y = None
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        y = scheme.step_list(x, mid * h, substep=substep)
        gm = y[sec.axis] - sec.level
        if abs(gm) <= CROSSING_TOL:
            break
        if (gm < 0.0) == (g0 < 0.0):
            lo = mid
        else:
            hi = mid
    return y, mid


def poincare(
    scheme: SplitScheme,
    x0,
    h: float,
    T: float,
    sec: SectionSpec,
    substep: bool = False,
) -> Section:
    """Intersections of the trajectory from ``x0`` with a hyperplane.

    A crossing between two steps is located by bisecting the step fraction
    and re-stepping from the pre-crossing state until the section
    coordinate is within 1e-10 of ``level`` (at most 60 halvings).
    """
    if not h > 0:
        raise ValueError("h must be positive")
    n = scheme.dim
    if sec.axis >= n:
        raise ValueError(f"axis {sec.axis} out of range for dim {n}")
    keep = [i for i in range(n) if i != sec.axis]
    x = [float(v) for v in x0]
    pts, times = [], []
    status, reason, t_abort = COMPLETED, None, None
    nsteps = step_count(T, h)
    t = 0.0
    g = x[sec.axis] - sec.level
    for k in range(1, nsteps + 1):
        t_next = T if k == nsteps else k * h
        hk = t_next - t
        try:
            x_new = scheme.step_list(x, hk, substep=substep)
            if _bad(x_new):
                raise OverflowError
            g_new = x_new[sec.axis] - sec.level
            if sec.crosses(g, g_new):
                if g_new == 0.0:
                    y, frac = x_new, 1.0
                else:
                    y, frac = _refine(scheme, x, hk, sec, g, substep)
                pts.append(y)
                times.append(t + frac * hk)
        except (SingularStep, DomainError, OverflowError) as exc:
            status, reason, t_abort = ABORTED, ("overflow" if isinstance(exc, OverflowError) else _abort_reason(exc)), t
            break
        x, t, g = x_new, t_next, g_new
    full = np.array(pts, dtype=float).reshape(-1, n)
    return Section(full[:, keep], np.array(times), sec.axis, status, reason, t_abort, full)
