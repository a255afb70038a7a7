"""Built-in test problems: quadratic and cubic Stokes flows, a Laurent field."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError
from .polyfield import SparsePolynomial, VectorField, divergence

__all__ = [
    "build_quadratic_stokes",
    "build_cubic_stokes",
    "build_laurent",
    "Problem",
    "BUILTINS",
    "get_problem",
    "sample_points",
]


def _checked(f: VectorField, name: str) -> VectorField:
    div = divergence(f)
    if not div.is_zero():
        raise ConstructionError(f"{name}: divergence does not vanish: {div!r}")
    return f


def build_quadratic_stokes(epsilon: float = 0.1) -> VectorField:
    """Quadratic volume-preserving flow; integrable for ``epsilon == 0``.

        x1' = -8 x1 x2 + eps x3
        x2' = 11 x1^2 + 3 x2^2 + x3^2 - 3
        x3' = 2 x3 x2 - eps x1
    """
    P = SparsePolynomial
    f1 = P(3, {(1, 1, 0): -8.0, (0, 0, 1): epsilon})
    f2 = P(3, {(2, 0, 0): 11.0, (0, 2, 0): 3.0, (0, 0, 2): 1.0, (0, 0, 0): -3.0})
    f3 = P(3, {(0, 1, 1): 2.0, (1, 0, 0): -epsilon})
    return _checked(VectorField([f1, f2, f3]), "quadratic Stokes")


def build_cubic_stokes(alpha: float = 1.0, w_norm: float = 1.5, theta: float = 0.275 * math.pi) -> VectorField:
    """Streamlines inside a drop in a general linear flow.

    ``x' = ((5 r^2 - 3) E x - 2 x (x^T E x)) / 2 + (w x x) / 2`` with
    ``E = diag(1/(1+alpha), alpha/(1+alpha), -1)`` and vorticity
    ``w = w_norm (sin theta, 0, cos theta)``, theta measured from the x3 axis.
    """
    if alpha == -1:
        raise ValueError("alpha = -1 makes the strain tensor singular")
    x = [SparsePolynomial.variable(3, i) for i in range(3)]
    e = [1.0 / (1.0 + alpha), alpha / (1.0 + alpha), -1.0]
    w = [w_norm * math.sin(theta), 0.0, w_norm * math.cos(theta)]
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    xex = e[0] * (x[0] * x[0]) + e[1] * (x[1] * x[1]) + e[2] * (x[2] * x[2])
    strain = [0.5 * ((5.0 * r2 - 3.0) * (e[i] * x[i]) - 2.0 * x[i] * xex) for i in range(3)]
    rot = [
        w[1] * x[2] - w[2] * x[1],
        w[2] * x[0] - w[0] * x[2],
        w[0] * x[1] - w[1] * x[0],
    ]
    return _checked(VectorField([s + 0.5 * r for s, r in zip(strain, rot)]), "cubic Stokes")


def build_laurent() -> VectorField:
    """Two-dimensional Laurent field with negative exponents.

        x1' = 3 x1^-2 x2^2 + 2 x1^3 x2^-3
        x2' = 2 x1^-3 x2^3 + 3 x1^2 x2^-2
    """
    f1 = SparsePolynomial(2, {(-2, 2): 3.0, (3, -3): 2.0})
    f2 = SparsePolynomial(2, {(-3, 3): 2.0, (2, -2): 3.0})
    return _checked(VectorField([f1, f2]), "Laurent")


def _ball(rng: np.random.Generator, n: int, radius: float = 1.0) -> np.ndarray:
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    return v * radius * rng.uniform() ** (1.0 / n)


def _signed_box(rng: np.random.Generator, n: int, lo: float = 0.05, hi: float = 1.0) -> np.ndarray:
    return rng.uniform(lo, hi, size=n) * rng.choice([-1.0, 1.0], size=n)


@dataclass(frozen=True)
class Problem:
    """A named problem with its default experiment settings."""

    name: str
    build: Callable[..., VectorField]
    x0: tuple[float, ...]
    h: float
    T: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    params: dict = field(default_factory=dict)

    def field(self, **overrides) -> VectorField:
        kw = {**self.params, **{k: v for k, v in overrides.items() if k in self.params and v is not None}}
        return self.build(**kw)


BUILTINS: dict[str, Problem] = {
    "quad_stokes": Problem(
        "quad_stokes", build_quadratic_stokes, (0.0, 0.0, 0.96), 0.01, 500.0, _ball,
        {"epsilon": 0.1},
    ),
    "cubic_stokes": Problem(
        "cubic_stokes", build_cubic_stokes, (-0.1689, 0.0, -0.0437), 0.01, 2000.0, _ball,
        {"alpha": 1.0, "w_norm": 1.5, "theta": 0.275 * math.pi},
    ),
    "laurent": Problem("laurent", build_laurent, (-0.5689, 0.0437), 0.001, 10.0, _signed_box),
}


def get_problem(name: str) -> Problem:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTINS)}") from None


def sample_points(name: str, count: int, seed: int = 0, accept=None) -> np.ndarray:
    """Seeded draws from the problem's sampling region.

    ``accept`` is an optional predicate; rejected draws are replaced.
    """
    prob = get_problem(name)
    rng = np.random.default_rng(seed)
    n = len(prob.x0)
    pts = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > 1000 * count:
            raise RuntimeError(f"could not draw {count} admissible points for {name}")
        p = prob.sampler(rng, n)
        if accept is None or accept(p):
            pts.append(p)
    return np.array(pts)
