"""Sparse multivariate Laurent polynomials with exact rational exponents.

Exponent vectors are stored as :class:`fractions.Fraction` tuples so that
grouping terms by monomial is exact, while coefficients are plain floats.
Every iteration over terms follows the lexicographic order of the exponent
vectors, which makes all sums bit-reproducible.

Axes are numbered from 0 throughout the Python API.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ProblemFormatError

__all__ = [
    "DIV_TOL",
    "MultiIndex",
    "SparsePolynomial",
    "VectorField",
    "evaluate",
    "partial",
    "divergence",
    "divergence_residuals",
    "diag_offdiag_split",
    "coefficient_count",
    "field_from_dict",
    "field_to_dict",
    "load_field",
    "save_field",
]

#: relative tolerance used to decide that a divergence coefficient cancels
DIV_TOL = 1e-12

_INT64_MAX = 2**63 - 1


def _as_fraction(e) -> Fraction:
    if isinstance(e, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(e, (Integral, Rational)):
        return Fraction(e)
    if isinstance(e, float):
        if not e.is_integer():
            raise TypeError(f"inexact float exponent {e!r}; use a Fraction or a 'p/q' string")
        return Fraction(int(e))
    if isinstance(e, str):
        try:
            return Fraction(e.strip())
        except ZeroDivisionError:
            raise ProblemFormatError(f"zero denominator in exponent {e!r}") from None
        except ValueError:
            raise ProblemFormatError(f"cannot parse exponent {e!r}") from None
    raise TypeError(f"unsupported exponent type {type(e).__name__}")


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Exponent vector of a monomial ``x**j = x_1**j_1 * ... * x_n**j_n``.

    Entries are exact rationals in lowest terms. Instances hash, compare for
    equality exactly and order lexicographically.
    """

    exps: tuple[Fraction, ...]

    def __init__(self, exps: Iterable):
        exps = tuple(_as_fraction(e) for e in exps)
        if not exps:
            raise ValueError("a multi-index needs at least one entry")
        object.__setattr__(self, "exps", exps)

    @classmethod
    def zeros(cls, n: int) -> MultiIndex:
        return cls((0,) * n)

    @classmethod
    def ones(cls, n: int) -> MultiIndex:
        return cls((1,) * n)

    @classmethod
    def unit(cls, n: int, i: int) -> MultiIndex:
        return cls(tuple(1 if k == i else 0 for k in range(n)))

    @property
    def dim(self) -> int:
        return len(self.exps)

    @property
    def degree(self) -> Fraction:
        return sum(self.exps, Fraction(0))

    def is_integral(self) -> bool:
        return all(e.denominator == 1 for e in self.exps)

    def __len__(self):
        return len(self.exps)

    def __iter__(self):
        return iter(self.exps)

    def __getitem__(self, i):
        return self.exps[i]

    def _check(self, other: MultiIndex):
        if not isinstance(other, MultiIndex):
            other = MultiIndex(other)
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return MultiIndex(a + b for a, b in zip(self.exps, other.exps))

    def __sub__(self, other):
        other = self._check(other)
        return MultiIndex(a - b for a, b in zip(self.exps, other.exps))

    def __neg__(self):
        return MultiIndex(-a for a in self.exps)

    def as_floats(self) -> np.ndarray:
        return np.array([float(e) for e in self.exps])

    def __str__(self):
        return "(" + ", ".join(str(e) for e in self.exps) + ")"

    def __repr__(self):
        return f"MultiIndex({self})"


def _power_plan(mi: MultiIndex):
    """Per-axis (index, exponent) factors with integer exponents kept as int."""
    return tuple(
        (i, e.numerator if e.denominator == 1 else float(e)) for i, e in enumerate(mi.exps) if e != 0
    )


def _domain_axes(keys: Iterable[MultiIndex]):
    poles, fractional = set(), set()
    for mi in keys:
        for i, e in enumerate(mi.exps):
            if e.denominator != 1:
                fractional.add(i)
            elif e < 0:
                poles.add(i)
    return tuple(sorted(poles - fractional)), tuple(sorted(fractional))


def _domain_checker(poles, fractional) -> Callable[[Sequence[float]], None]:
    def check(x):
        for i in fractional:
            if not x[i] > 0.0:
                raise DomainError(f"x[{i}] = {x[i]!r} raised to a fractional power", i, x[i])
        for i in poles:
            if x[i] == 0.0:
                raise DomainError(f"pole at x[{i}] = 0", i, x[i])

    return check


def monomial_evaluator(mi: MultiIndex) -> Callable[[Sequence[float]], float]:
    """Compile ``x -> x**mi`` with the domain policy of :func:`evaluate`."""
    plan = _power_plan(mi)
    check = _domain_checker(*_domain_axes([mi]))

    def mono(x):
        check(x)
        v = 1.0
        for i, e in plan:
            v *= x[i] ** e
        return v

    return mono


class SparsePolynomial:
    """Finite sum of ``coef * x**j`` with float coefficients.

    Parameters
    ----------
    dim : int
        Number of variables.
    terms : mapping or iterable of pairs, optional
        Exponent vector to coefficient. Duplicate keys in an iterable are
        summed; entries whose coefficient is exactly zero are dropped.

    Instances are immutable. Evaluate with ``p(x)``.
    """

    __array_ufunc__ = None

    __slots__ = ("dim", "_terms", "_eval")

    def __init__(self, dim: int, terms: Mapping | Iterable | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        acc: dict[MultiIndex, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        for key, coef in items:
            mi = key if isinstance(key, MultiIndex) else MultiIndex(key)
            if mi.dim != dim:
                raise ValueError(f"exponent {mi} has length {mi.dim}, expected {dim}")
            acc[mi] = acc.get(mi, 0.0) + float(coef)
        self.dim = dim
        self._terms = MappingProxyType({k: acc[k] for k in sorted(acc) if acc[k] != 0.0})
        self._eval = None

    # construction helpers

    @classmethod
    def zero(cls, dim: int) -> SparsePolynomial:
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: float) -> SparsePolynomial:
        return cls(dim, {MultiIndex.zeros(dim): c})

    @classmethod
    def variable(cls, dim: int, i: int) -> SparsePolynomial:
        return cls(dim, {MultiIndex.unit(dim, i): 1.0})

    @classmethod
    def monomial(cls, coef: float, exps: Iterable) -> SparsePolynomial:
        mi = exps if isinstance(exps, MultiIndex) else MultiIndex(exps)
        return cls(mi.dim, {mi: coef})

    # container protocol

    @property
    def terms(self) -> Mapping[MultiIndex, float]:
        return self._terms

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __contains__(self, mi):
        return mi in self._terms

    def coefficient(self, exps) -> float:
        mi = exps if isinstance(exps, MultiIndex) else MultiIndex(exps)
        return self._terms.get(mi, 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other):
        if not isinstance(other, SparsePolynomial):
            return NotImplemented
        return self.dim == other.dim and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self.dim, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return f"SparsePolynomial({self.dim}, 0)"
        parts = []
        for mi, c in self._terms.items():
            mono = "*".join(
                f"x{i}" if e == 1 else f"x{i}**({e})" for i, e in enumerate(mi.exps) if e != 0
            )
            parts.append(f"{c!r}*{mono}" if mono else repr(c))
        return f"SparsePolynomial({self.dim}, " + " + ".join(parts) + ")"

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, SparsePolynomial):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other
        if isinstance(other, (int, float)):
            return SparsePolynomial.constant(self.dim, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return SparsePolynomial(self.dim, list(self.items()) + list(other.items()))

    __radd__ = __add__

    def __neg__(self):
        return SparsePolynomial(self.dim, {k: -c for k, c in self.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return SparsePolynomial(self.dim, {k: c * other for k, c in self.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        prod = [(a + b, ca * cb) for a, ca in self.items() for b, cb in other.items()]
        return SparsePolynomial(self.dim, prod)

    __rmul__ = __mul__

    # calculus and evaluation

    def derivative(self, i: int) -> SparsePolynomial:
        return partial(self, i)

    def compile(self) -> Callable[[Sequence[float]], float]:
        """Return a fast evaluator taking any indexable sequence of floats."""
        if self._eval is None:
            plan = tuple((c, _power_plan(mi)) for mi, c in self._terms.items())
            check = _domain_checker(*_domain_axes(self._terms))

            def ev(x):
                check(x)
                s = 0.0
                for coef, factors in plan:
                    v = coef
                    for i, e in factors:
                        v *= x[i] ** e
                    s += v
                return s

            self._eval = ev
        return self._eval

    def __call__(self, x) -> float:
        return evaluate(self, x)


def evaluate(p: SparsePolynomial, x) -> float:
    """Evaluate ``p`` at the point ``x``.

    Raises
    ------
    DomainError
        If ``x[i] == 0`` for an axis carrying a negative exponent, or
        ``x[i] <= 0`` for an axis carrying a non-integer exponent.
    """
    if len(x) != p.dim:
        raise ValueError(f"point has length {len(x)}, expected {p.dim}")
    return p.compile()([float(v) for v in x])


def partial(p: SparsePolynomial, i: int) -> SparsePolynomial:
    """Partial derivative of ``p`` with respect to ``x[i]``."""
    if not 0 <= i < p.dim:
        raise IndexError(f"axis {i} out of range for dim {p.dim}")
    e_i = MultiIndex.unit(p.dim, i)
    return SparsePolynomial(
        p.dim, [(mi - e_i, c * float(mi[i])) for mi, c in p.items() if mi[i] != 0]
    )


class VectorField:
    """The system ``dx/dt = f(x)``, one :class:`SparsePolynomial` per axis."""

    __slots__ = ("components", "_eval")
    __array_ufunc__ = None  # make numpy scalars defer to __rmul__

    def __init__(self, components: Sequence[SparsePolynomial]):
        components = tuple(components)
        if not components:
            raise ValueError("a vector field needs at least one component")
        n = len(components)
        for k, c in enumerate(components):
            if c.dim != n:
                raise ValueError(f"component {k} has dim {c.dim}, expected {n}")
        self.components = components
        self._eval = None

    @classmethod
    def zero(cls, n: int) -> VectorField:
        return cls([SparsePolynomial(n) for _ in range(n)])

    @property
    def dim(self) -> int:
        return len(self.components)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return "VectorField(\n  " + ",\n  ".join(repr(c) for c in self.components) + ")"

    def __add__(self, other):
        return VectorField([a + b for a, b in zip(self, other)])

    def __sub__(self, other):
        return VectorField([a - b for a, b in zip(self, other)])

    def __mul__(self, s: float):
        return VectorField([c * s for c in self])

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def compile(self) -> Callable[[Sequence[float]], list[float]]:
        """Return an evaluator mapping a float sequence to a list of floats."""
        if self._eval is None:
            evs = tuple(c.compile() for c in self.components)

            def ev(x):
                return [f(x) for f in evs]

            self._eval = ev
        return self._eval

    def __call__(self, x) -> np.ndarray:
        if len(x) != self.dim:
            raise ValueError(f"point has length {len(x)}, expected {self.dim}")
        return np.array(self.compile()([float(v) for v in x]))

    def divergence(self) -> SparsePolynomial:
        return divergence(self)

    def split(self) -> tuple[VectorField, VectorField]:
        return diag_offdiag_split(self)


def divergence_residuals(f: VectorField) -> dict[MultiIndex, tuple[float, float]]:
    """Unpruned divergence coefficients.

    Returns a mapping from each monomial ``j`` of the divergence to
    ``(coefficient, scale)`` where ``scale`` is the largest magnitude among
    the contributions ``a * k_i`` that were summed into it.
    """
    n = f.dim
    sums: dict[MultiIndex, float] = {}
    scales: dict[MultiIndex, float] = {}
    for i, comp in enumerate(f.components):
        e_i = MultiIndex.unit(n, i)
        for k, a in comp.items():
            if k[i] == 0:
                continue
            j = k - e_i
            contrib = a * float(k[i])
            sums[j] = sums.get(j, 0.0) + contrib
            scales[j] = max(scales.get(j, 0.0), abs(contrib))
    return {j: (sums[j], scales[j]) for j in sorted(sums)}


def divergence(f: VectorField, tol: float = DIV_TOL) -> SparsePolynomial:
    """Divergence polynomial of ``f``.

    Coefficients that cancel to within ``tol`` times the largest contributing
    term are dropped, so a divergence-free field yields the zero polynomial.
    """
    res = divergence_residuals(f)
    return SparsePolynomial(f.dim, {j: s for j, (s, scale) in res.items() if abs(s) > tol * scale})


def diag_offdiag_split(f: VectorField) -> tuple[VectorField, VectorField]:
    """Split ``f`` into the terms of ``f_i`` that depend on ``x_i`` and the rest."""
    diag, off = [], []
    for i, comp in enumerate(f.components):
        diag.append(SparsePolynomial(f.dim, {k: a for k, a in comp.items() if k[i] != 0}))
        off.append(SparsePolynomial(f.dim, {k: a for k, a in comp.items() if k[i] == 0}))
    return VectorField(diag), VectorField(off)


def coefficient_count(n: int, d: int) -> int:
    """Number of monomials of total degree ``d`` in ``n`` variables."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    count = math.comb(n + d - 1, d)
    if count > _INT64_MAX:
        raise OverflowError(f"N({n}, {d}) does not fit in a signed 64-bit integer")
    return count


# problem files


def _exp_to_json(e: Fraction):
    return e.numerator if e.denominator == 1 else f"{e.numerator}/{e.denominator}"


def field_to_dict(f: VectorField) -> dict:
    return {
        "dim": f.dim,
        "components": [
            [{"exp": [_exp_to_json(e) for e in mi], "coef": c} for mi, c in comp.items()]
            for comp in f.components
        ],
    }


def field_from_dict(data: Mapping) -> VectorField:
    """Build a field from the JSON problem-file layout.

    ``{"dim": n, "components": [[{"exp": [...], "coef": c}, ...], ...]}``
    where each exponent is an integer or a ``"p/q"`` string.
    """
    try:
        n = data["dim"]
        comps = data["components"]
    except (KeyError, TypeError):
        raise ProblemFormatError("problem needs 'dim' and 'components'") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError(f"invalid dim {n!r}")
    if not isinstance(comps, list) or len(comps) != n:
        raise ProblemFormatError(f"expected {n} components")
    polys = []
    for i, terms in enumerate(comps):
        if not isinstance(terms, list):
            raise ProblemFormatError(f"component {i} is not a list of terms")
        pairs = []
        for t in terms:
            try:
                exps, coef = t["exp"], t["coef"]
            except (KeyError, TypeError):
                raise ProblemFormatError(f"component {i}: term needs 'exp' and 'coef'") from None
            if not isinstance(exps, list) or len(exps) != n:
                raise ProblemFormatError(f"component {i}: exponent {exps!r} must have length {n}")
            for e in exps:
                if isinstance(e, bool) or not isinstance(e, (int, str)):
                    raise ProblemFormatError(f"component {i}: exponent entry {e!r} must be int or 'p/q'")
            if isinstance(coef, bool) or not isinstance(coef, (int, float)):
                raise ProblemFormatError(f"component {i}: coefficient {coef!r} is not a number")
            pairs.append((MultiIndex(exps), coef))
        polys.append(SparsePolynomial(n, pairs))
    return VectorField(polys)


def load_field(path) -> VectorField:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"{path}: {exc}") from None
    return field_from_dict(data)


def save_field(f: VectorField, path) -> None:
    Path(path).write_text(json.dumps(field_to_dict(f), indent=1) + "\n", encoding="utf-8")
