"""Independent reference machinery.

``rk45`` is an adaptive Dormand-Prince 5(4) integrator (the pair behind
MATLAB's ode45), used as the non-volume-preserving baseline and as the
accuracy reference for the exact flows. ``jacobian_det`` measures volume
change of any step map by central finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, MaxSteps, StepUnderflow
from .polyfield import VectorField
from .trajectory import Trajectory

__all__ = ["RkOptions", "rk45", "Rk45", "jacobian_det"]

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
# b - b_hat
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 5.0
_ALPHA, _BETA = 0.7 / 5, 0.4 / 5


@dataclass(frozen=True)
class RkOptions:
    """Tolerances and limits for :func:`rk45`.

    The defaults mirror ode45 (``RelTol=1e-3``, ``AbsTol=1e-6``). With
    ``h_init=None`` the first step is chosen automatically.
    """

    rel_tol: float = 1e-3
    abs_tol: float = 1e-6
    h_init: Optional[float] = None
    h_min: float = 1e-14
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.h_min > 0:
            raise ValueError("h_min must be positive")

    @classmethod
    def tight(cls, tol: float) -> "RkOptions":
        return cls(rel_tol=tol, abs_tol=tol)


def _as_rhs(f) -> Callable[[list], list]:
    if isinstance(f, VectorField):
        return f.compile()
    return lambda x: [float(v) for v in f(x)]


def _initial_step(rhs, x, k0, T, opts: RkOptions) -> float:
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    sc = [opts.abs_tol + opts.rel_tol * abs(v) for v in x]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(x, sc)) / len(x))
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(k0, sc)) / len(x))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, T)
    try:
        k1 = rhs([v + h0 * k for v, k in zip(x, k0)])
    except DomainError:
        return max(h0 * 1e-3, opts.h_min)
    d2 = math.sqrt(sum(((a - b) / s) ** 2 for a, b, s in zip(k1, k0, sc)) / len(x)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, T)


def rk45(f, x0: Sequence[float], T: float, opts: RkOptions | None = None, record: bool = True) -> Trajectory:
    """Integrate ``dx/dt = f(x)`` from 0 to ``T`` with Dormand-Prince 5(4).

    A step is accepted when ``max_i |err_i| / (abs_tol + rel_tol * |x_i|) <= 1``
    with ``|x_i|`` the larger of the old and new magnitudes. Step sizes follow
    a PI controller (safety 0.9, factor clamped to [0.2, 5]). Stages that
    leave the field's domain count as a rejected step.

    Parameters
    ----------
    f : VectorField or callable
        Right-hand side; any callable returning a sequence works.
    record : bool
        Keep every accepted state; otherwise only the initial and final one.

    Raises
    ------
    StepUnderflow
        When the controller needs a step below ``opts.h_min``.
    MaxSteps
        When ``opts.max_steps`` steps have been taken.

    Both carry the partial trajectory in ``.trajectory``.
    """
    opts = opts or RkOptions()
    rhs = _as_rhs(f)
    x = [float(v) for v in x0]
    n = len(x)
    t = 0.0
    times, states = [0.0], [list(x)]
    if T <= 0.0:
        return Trajectory.from_lists(times, states)
    k1 = rhs(x)
    h = opts.h_init if opts.h_init is not None else _initial_step(rhs, x, k1, T, opts)
    err_prev = 1e-4
    steps = 0
    rtol, atol = opts.rel_tol, opts.abs_tol

    def partial_traj():
        ts, xs = (times, states) if record else (times + [t], states + [x])
        return Trajectory.from_lists(ts, xs, status="aborted", t_abort=t, steps=steps)

    while t < T:
        if steps >= opts.max_steps:
            tr = partial_traj()
            tr.reason = "max_steps"
            raise MaxSteps(t, tr)
        last = t + h >= T
        if last:
            h = T - t
        if h < opts.h_min:
            tr = partial_traj()
            tr.reason = "step_underflow"
            raise StepUnderflow(t, h, tr)
        ks = [k1]
        try:
            for s in range(1, 7):
                a = _A[s]
                xs = [x[i] + h * sum(a[m] * ks[m][i] for m in range(s)) for i in range(n)]
                ks.append(rhs(xs))
            x_new = xs  # stage 7 is evaluated at the 5th-order solution (FSAL)
            err = 0.0
            for i in range(n):
                e = h * sum(_E[m] * ks[m][i] for m in range(7))
                sc = atol + rtol * max(abs(x[i]), abs(x_new[i]))
                err = max(err, abs(e) / sc)
            if not math.isfinite(err):
                raise OverflowError
        except (DomainError, OverflowError, ZeroDivisionError):
            err = math.inf
        steps += 1
        if err <= 1.0:
            t = T if last else t + h
            x = x_new
            k1 = ks[6]
            if record:
                times.append(t)
                states.append(x)
            fac = _SAFETY * max(err, 1e-10) ** -_ALPHA * err_prev**_BETA
            h *= min(_FAC_MAX, max(_FAC_MIN, fac))
            err_prev = max(err, 1e-4)
        else:
            fac = _SAFETY * err ** -0.2 if math.isfinite(err) else _FAC_MIN
            h *= max(_FAC_MIN, min(1.0, fac))
    if not record:
        times.append(t)
        states.append(x)
    return Trajectory.from_lists(times, states, steps=steps)


@dataclass(frozen=True)
class Rk45:
    """The reference integrator packaged as a method for :func:`integrate.run`."""

    field: VectorField
    opts: RkOptions = RkOptions()

    def integrate(self, x0, T: float, record: bool = True) -> Trajectory:
        return rk45(self.field, x0, T, self.opts, record=record)

    def step(self, x0, h: float) -> np.ndarray:
        """Map ``x0`` to the rk45 solution at time ``h``."""
        return rk45(self.field, x0, h, self.opts, record=False).final


def jacobian_det(step_map: Callable, x, h: float, delta: float = 1e-5) -> float:
    """Determinant of the Jacobian of ``x -> step_map(x, h)``.

    Central differences with perturbation ``delta * max(1, |x_i|)`` on axis
    ``i``; the determinant comes from an LU factorisation with partial
    pivoting.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for k in range(n):
        d = delta * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += d
        xm[k] -= d
        # divide by the realised spacing so identity columns come out exact
        J[:, k] = (np.asarray(step_map(xp, h)) - np.asarray(step_map(xm, h))) / (xp[k] - xm[k])
    return float(np.linalg.det(J))
