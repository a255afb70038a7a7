"""Exact splitting of divergence-free polynomial fields.

The diagonal part of a field is cut into elementary divergence-free fields
``dx_i/dt = a_i x_i x**j``, one per monomial ``j`` of the divergence. Each is
integrated in closed form; the off-diagonal part is integrated as canonical
shears. Composing these exact flows gives explicit volume-preserving maps of
order 1 (sequential) or 2 (symmetric half-step palindrome).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateField, NotDiagonal, NotDivergenceFree, SingularStep
from .polyfield import (
    DIV_TOL,
    MultiIndex,
    SparsePolynomial,
    VectorField,
    diag_offdiag_split,
    monomial_evaluator,
)

__all__ = [
    "Edfvf",
    "Shear",
    "ShearField",
    "SplitScheme",
    "decompose_diagonal",
    "edfvf_flow",
    "shear_flow",
    "integrals_basis",
    "build_scheme",
    "step",
    "MAX_SUBSTEP_DEPTH",
]

#: relative size of c below which the exponential branch of the flow is used
C_ZERO_TOL = 1e-14
MAX_SUBSTEP_DEPTH = 40


class Edfvf:
    """Elementary divergence-free field ``dx_i/dt = a_i x_i x**j``.

    Parameters
    ----------
    j : MultiIndex or sequence
        The divergence monomial the field belongs to.
    a : sequence of float
        Per-axis coefficients. Entries on axes with ``j_i == -1`` are forced
        to zero.
    check : bool
        Verify ``sum_i a_i (j_i + 1) == 0`` to relative tolerance ``DIV_TOL``.

    Attributes
    ----------
    c : float
        ``a . j`` evaluated exactly in rational arithmetic, then rounded.
    r : ndarray
        ``a / c``; all zeros on the exponential branch.
    """

    __slots__ = ("j", "a", "c", "r", "exponential", "_mono", "_moving")

    def __init__(self, j, a: Sequence[float], check: bool = True):
        j = j if isinstance(j, MultiIndex) else MultiIndex(j)
        if len(a) != j.dim:
            raise ValueError(f"coefficient vector has length {len(a)}, expected {j.dim}")
        a = [0.0 if e == -1 else float(ai) for ai, e in zip(a, j.exps)]
        if check:
            terms = [ai * float(e + 1) for ai, e in zip(a, j.exps)]
            residual = math.fsum(terms)
            scale = max((abs(t) for t in terms), default=0.0)
            if abs(residual) > DIV_TOL * scale:
                raise NotDivergenceFree(j, residual)
        self.j = j
        self.a = np.array(a)
        self.c = float(sum((Fraction(ai) * e for ai, e in zip(a, j.exps)), Fraction(0)))
        norm = sum(abs(ai) for ai in a) * sum(abs(float(e)) for e in j.exps) + 1.0
        self.exponential = abs(self.c) <= C_ZERO_TOL * norm
        self.r = np.zeros(j.dim) if self.exponential else self.a / self.c
        self._mono = monomial_evaluator(j)
        coeffs = self.a if self.exponential else self.r
        self._moving = tuple((i, float(coeffs[i])) for i in range(j.dim) if a[i] != 0.0)

    @property
    def dim(self) -> int:
        return self.j.dim

    def as_field(self) -> VectorField:
        """The generator as a polynomial vector field."""
        n = self.dim
        return VectorField(
            [
                SparsePolynomial(n, {self.j + MultiIndex.unit(n, i): self.a[i]})
                for i in range(n)
            ]
        )

    def vector(self, x) -> np.ndarray:
        """Evaluate ``a_i x_i x**j`` at ``x``."""
        m = self._mono([float(v) for v in x])
        return self.a * np.asarray(x, dtype=float) * m

    def blowup_time(self, x) -> float:
        """``1 / (c x**j)`` if the power-law flow from ``x`` blows up forward, else inf."""
        if self.exponential:
            return math.inf
        cm = self.c * self._mono([float(v) for v in x])
        return 1.0 / cm if cm > 0 else math.inf

    def flow(self, x: list, h: float) -> list:
        """Exact flow on a list of floats; see :func:`edfvf_flow`."""
        if not self._moving or h == 0.0:
            return list(x)
        m0 = self._mono(x)
        y = list(x)
        if self.exponential:
            s = m0 * h
            for i, ai in self._moving:
                y[i] = x[i] * math.exp(ai * s)
            return y
        cm = self.c * m0
        if cm * h >= 1.0:
            raise SingularStep(1.0 / cm, self.j)
        # log1p keeps (1 - c m h)**(-r) accurate when c m h is tiny
        lg = math.log1p(-cm * h)
        for i, ri in self._moving:
            y[i] = x[i] * math.exp(-ri * lg)
        return y

    def __eq__(self, other):
        if not isinstance(other, Edfvf):
            return NotImplemented
        return self.j == other.j and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash((self.j, tuple(self.a)))

    def __repr__(self):
        return f"Edfvf(j={self.j}, a={self.a.tolist()}, c={self.c!r})"


@dataclass(frozen=True)
class Shear:
    """One canonical shear ``dx_axis/dt = g(x)`` with ``g`` free of ``x_axis``."""

    axis: int
    g: SparsePolynomial

    def __post_init__(self):
        if not 0 <= self.axis < self.g.dim:
            raise IndexError(f"axis {self.axis} out of range")
        for mi in self.g:
            if mi[self.axis] != 0:
                raise ValueError(f"shear term {mi} depends on its own axis {self.axis}")

    @property
    def dim(self) -> int:
        return self.g.dim

    def as_field(self) -> VectorField:
        n = self.dim
        return VectorField([self.g if i == self.axis else SparsePolynomial(n) for i in range(n)])

    def vector(self, x) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.axis] = self.g(x)
        return v

    def flow(self, x: list, h: float) -> list:
        y = list(x)
        y[self.axis] = x[self.axis] + h * self.g.compile()(x)
        return y


@dataclass(frozen=True)
class ShearField:
    """Off-diagonal part of a field, one polynomial per axis."""

    components: tuple[SparsePolynomial, ...]

    def __init__(self, components):
        comps = tuple(components.components if isinstance(components, VectorField) else components)
        for i, g in enumerate(comps):
            Shear(i, g)  # validates
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def shear(self, axis: int) -> Shear:
        return Shear(axis, self.components[axis])

    def shears(self) -> list[Shear]:
        """Non-empty shears in ascending axis order."""
        return [Shear(i, g) for i, g in enumerate(self.components) if not g.is_zero()]


Flow = Union[Edfvf, Shear]


def _point(x0) -> list:
    return [float(v) for v in x0]


def decompose_diagonal(diag: VectorField) -> list[Edfvf]:
    """Split a diagonal field into elementary divergence-free fields.

    Every term ``a x**k`` of component ``i`` is assigned to the monomial
    ``j = k - e_i``. The result is sorted by ``j`` and consumes each term
    exactly once.

    Raises
    ------
    NotDiagonal
        If some term of component ``i`` has zero exponent on axis ``i``.
    NotDivergenceFree
        If the coefficients grouped under some ``j`` violate
        ``a . (j + 1) = 0``.
    """
    n = diag.dim
    groups: dict[MultiIndex, list[float]] = {}
    for i, comp in enumerate(diag.components):
        e_i = MultiIndex.unit(n, i)
        for k, coef in comp.items():
            if k[i] == 0:
                raise NotDiagonal(f"term {k} of component {i} does not depend on x{i}")
            groups.setdefault(k - e_i, [0.0] * n)[i] = coef
    return [Edfvf(j, groups[j]) for j in sorted(groups)]


def edfvf_flow(e: Edfvf, x0, h: float) -> np.ndarray:
    """Exact time-``h`` flow of an elementary field.

    With ``m0 = x0**j`` the solution is ``x_i(h) = x_i(0) (1 - c m0 h)**(-r_i)``
    or, when ``c`` vanishes, ``x_i(0) exp(a_i m0 h)``.

    Raises
    ------
    SingularStep
        If ``1 - c m0 h <= 0``; ``t_star`` carries ``1 / (c m0)``.
    DomainError
        If ``x0**j`` is not defined.
    """
    return np.array(e.flow(_point(x0), float(h)))


def shear_flow(g: ShearField | Shear, axis: int | None, x0, h: float) -> np.ndarray:
    """Exact flow of one shear: ``x_axis += h g_axis(x0)``."""
    s = g if isinstance(g, Shear) else g.shear(axis)
    return np.array(s.flow(_point(x0), float(h)))


def integrals_basis(e: Edfvf) -> list[np.ndarray]:
    """Exponent vectors ``b`` with ``a . b = 0``; each ``x**b`` is conserved.

    The first vector is ``j + 1``; the remaining ``n - 2`` come from
    Gram-Schmidt on the canonical basis against ``a`` and the vectors
    already chosen.
    """
    a = np.asarray(e.a, dtype=float)
    if not np.any(a):
        raise DegenerateField(f"elementary field at j={e.j} has a = 0")
    n = e.dim
    b1 = e.j.as_floats() + 1.0
    basis = [b1]
    q1 = a / np.linalg.norm(a)
    w = b1 - np.dot(b1, q1) * q1
    ortho = [q1, w / np.linalg.norm(w)]
    for k in range(n):
        if len(basis) == n - 1:
            break
        w = np.zeros(n)
        w[k] = 1.0
        for _ in range(2):  # re-orthogonalise once for stability
            w = w - sum(np.dot(w, q) * q for q in ortho)
        norm = np.linalg.norm(w)
        if norm < 1e-8:
            continue
        w = w / norm
        ortho.append(w)
        basis.append(w)
    return basis


@dataclass(frozen=True)
class SplitScheme:
    """Ordered exact flows with a Lie-Trotter (1) or Strang (2) composition."""

    flows: tuple[Flow, ...]
    order: int
    dim: int

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        object.__setattr__(self, "flows", tuple(self.flows))

    def sequence(self, h: float) -> list[tuple[Flow, float]]:
        """The (flow, substep) pairs one step applies, in order."""
        if self.order == 1:
            return [(f, h) for f in self.flows]
        half = 0.5 * h
        return [(f, half) for f in self.flows] + [(f, half) for f in reversed(self.flows)]

    def generator(self, x) -> np.ndarray:
        """Sum of all flow generators at ``x``; equals the input field."""
        out = np.zeros(self.dim)
        for f in self.flows:
            out += f.vector(x)
        return out

    def step_ratio(self, x, h: float) -> float:
        """Largest ``|c x**j h|`` over the power-law flows at ``x``.

        Values near or above 1 mean the step is close to (or, when
        ``c x**j > 0``, beyond) a blow-up of the exact flow.
        """
        xs = _point(x)
        return max(
            (abs(f.c * f._mono(xs) * h) for f in self.flows if isinstance(f, Edfvf) and not f.exponential),
            default=0.0,
        )

    def step(self, x0, h: float, substep: bool = False) -> np.ndarray:
        return step(self, x0, h, substep=substep)

    def step_list(self, x: list, h: float, substep: bool = False) -> list:
        """One step on a list of floats (no array conversion)."""
        if not substep:
            for f, hh in self.sequence(h):
                x = f.flow(x, hh)
            return x
        return _substep(self, x, h, 0)

    def __len__(self):
        return len(self.flows)


def _substep(s: SplitScheme, x: list, h: float, depth: int) -> list:
    try:
        return s.step_list(x, h)
    except SingularStep:
        if depth >= MAX_SUBSTEP_DEPTH:
            raise
    x_half = _substep(s, x, 0.5 * h, depth + 1)
    return _substep(s, x_half, 0.5 * h, depth + 1)


def build_scheme(f: VectorField, order: int = 2) -> SplitScheme:
    """Decompose ``f`` and return its splitting scheme.

    Elementary fields come first in lexicographic order of ``j``, followed by
    the non-empty canonical shears in ascending axis order.
    """
    diag, off = diag_offdiag_split(f)
    flows: list[Flow] = list(decompose_diagonal(diag))
    flows += ShearField(off).shears()
    return SplitScheme(tuple(flows), order, f.dim)


def step(s: SplitScheme, x0, h: float, substep: bool = False) -> np.ndarray:
    """Advance ``x0`` by one step of size ``h``.

    With ``substep=True`` a step whose power-law flow would blow up is
    retried as two half steps, recursively up to ``MAX_SUBSTEP_DEPTH``.
    """
    return np.array(s.step_list(_point(x0), float(h), substep=substep))
