"""Exact symbolic expression kernel.

Everything downstream (structure tensors, BCH matrices, coupling matrices,
ODE systems, explicit propagators) is built on the classes defined here:

* ``Coefficient`` -- an exact scalar from Q(i) extended by square roots of
  square-free integers.  Closed under + - * / with exact inversion.
* ``Symbol`` -- a typed symbol (coordinate, driving coefficient, parameter,
  time, angle).
* ``Expr`` -- a canonical sum of terms ``coeff * monomial * exp(arg)``.
  Exponential atoms combine multiplicatively; arguments are constant-free,
  exponential-free polynomials.  Trigonometric and hyperbolic functions are
  never stored; they exist only as exponential pairs recognized at render
  time.
* ``RationalExpr`` -- a normalized quotient of two ``Expr``.
* ``SymMatrix`` -- a dense matrix of ``Expr``.

pi and other transcendentals never enter an expression; they belong to
numeric bindings only.
"""

from __future__ import annotations

import cmath
import json
import math
import re as _re
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "Coefficient",
    "Symbol",
    "Expr",
    "RationalExpr",
    "SymMatrix",
    "UnsupportedFormError",
    "UnboundSymbolError",
    "ParseError",
    "lambda_sym",
    "theta_sym",
    "eta_sym",
    "small_lambda_sym",
    "param_sym",
    "TIME",
    "normalize",
    "substitute",
    "eval_numeric",
    "parse_expr",
    "render",
    "render_matrix",
    "exact_div",
    "symbol_name",
]


class UnsupportedFormError(ValueError):
    """An operation would leave the canonical expression class."""


class UnboundSymbolError(ValueError):
    """Numeric evaluation hit a symbol with no binding."""

    def __init__(self, symbol):
        self.symbol = symbol
        super().__init__(f"unbound symbol '{symbol_name(symbol)}'")


class ParseError(ValueError):
    """Syntax or vocabulary error while parsing; carries a byte offset."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


_F0 = Fraction(0)
_F1 = Fraction(1)


def _squarefree_split(n):
    """n = s**2 * d with d square-free; returns (s, d) for n >= 1."""
    s, d, f = 1, 1, 2
    while f * f <= n:
        while n % (f * f) == 0:
            n //= f * f
            s *= f
        if n % f == 0:
            n //= f
            d *= f
        f += 1
    return s, d * n


def _smallest_prime_factor(n):
    f = 2
    while f * f <= n:
        if n % f == 0:
            return f
        f += 1
    return n


class Coefficient:
    """Exact scalar: a finite sum of Gaussian-rational multiples of sqrt(d).

    Internally a sorted tuple of parts ``(d, re, im)`` with ``d`` square-free,
    ``d = 1`` the rational part, and ``re``, ``im`` Fractions not both zero.
    The value is ``sum((re + i*im) * sqrt(d))``.
    """

    __slots__ = ("_parts", "_hash")

    def __init__(self, parts=()):
        self._parts = tuple(parts)
        self._hash = None

    @staticmethod
    def _make(accum):
        parts = tuple(
            (d, re, im)
            for d, (re, im) in sorted(accum.items())
            if re != 0 or im != 0
        )
        return Coefficient(parts)

    @staticmethod
    def rational(re, im=0):
        re, im = Fraction(re), Fraction(im)
        if re == 0 and im == 0:
            return Coefficient()
        return Coefficient(((1, re, im),))

    @staticmethod
    def from_int(n):
        return Coefficient.rational(n)

    @staticmethod
    def sqrt_int(d):
        """Exact square root of a positive integer."""
        if d < 1:
            raise UnsupportedFormError(f"sqrt of non-positive integer {d}")
        s, rad = _squarefree_split(d)
        if rad == 1:
            return Coefficient.rational(s)
        return Coefficient(((rad, Fraction(s), _F0),))

    @property
    def parts(self):
        return self._parts

    def is_zero(self):
        return not self._parts

    def is_one(self):
        return self._parts == ((1, _F1, _F0),)

    def is_rational(self):
        return not self._parts or (
            len(self._parts) == 1
            and self._parts[0][0] == 1
            and self._parts[0][2] == 0
        )

    @property
    def real(self):
        """Rational real part; only valid on single-radical values."""
        if not self._parts:
            return _F0
        if len(self._parts) > 1:
            raise ValueError("mixed radical support; no single real part")
        return self._parts[0][1]

    @property
    def imag(self):
        if not self._parts:
            return _F0
        if len(self._parts) > 1:
            raise ValueError("mixed radical support; no single imaginary part")
        return self._parts[0][2]

    @property
    def radicals(self):
        """Map square-free d -> 1 for each radical present (d = 1 omitted)."""
        return {d: 1 for d, _, _ in self._parts if d != 1}

    def __add__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        p1, p2 = self._parts, other._parts
        if len(p1) == 1 and len(p2) == 1 and p1[0][0] == p2[0][0]:
            d, a1, b1 = p1[0]
            _, a2, b2 = p2[0]
            re, im = a1 + a2, b1 + b2
            if re == 0 and im == 0:
                return Coefficient.ZERO
            return Coefficient(((d, re, im),))
        accum = {d: (re, im) for d, re, im in p1}
        for d, re, im in p2:
            ore, oim = accum.get(d, (_F0, _F0))
            accum[d] = (ore + re, oim + im)
        return Coefficient._make(accum)

    __radd__ = __add__

    def __neg__(self):
        return Coefficient(tuple((d, -re, -im) for d, re, im in self._parts))

    def __sub__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        p1, p2 = self._parts, other._parts
        if len(p1) == 1 and len(p2) == 1:
            d1, a1, b1 = p1[0]
            d2, a2, b2 = p2[0]
            if d1 == d2:
                re = d1 * (a1 * a2 - b1 * b2)
                im = d1 * (a1 * b2 + b1 * a2)
                if re == 0 and im == 0:
                    return Coefficient.ZERO
                return Coefficient(((1, re, im),))
        accum = {}
        for d1, a1, b1 in p1:
            for d2, a2, b2 in p2:
                g = math.gcd(d1, d2)
                d = (d1 // g) * (d2 // g)
                re = g * (a1 * a2 - b1 * b2)
                im = g * (a1 * b2 + b1 * a2)
                ore, oim = accum.get(d, (_F0, _F0))
                accum[d] = (ore + re, oim + im)
        return Coefficient._make(accum)

    __rmul__ = __mul__

    def conjugate(self):
        return Coefficient(tuple((d, re, -im) for d, re, im in self._parts))

    def inverse(self):
        if not self._parts:
            raise ZeroDivisionError("inverse of zero coefficient")
        if len(self._parts) == 1:
            d, re, im = self._parts[0]
            den = (re * re + im * im) * d
            return Coefficient(((d, re / den, -im / den),))
        # Split off one radical prime p and rationalize: with c = x + sqrt(p)*y
        # and x, y free of p, c*(x - sqrt(p)*y) = x^2 - p*y^2 has one radical
        # prime fewer, so recursion terminates.
        p = None
        for d, _, _ in self._parts:
            if d != 1:
                p = _smallest_prime_factor(d)
                break
        x_parts, y_parts = {}, {}
        for d, re, im in self._parts:
            if p is not None and d % p == 0:
                y_parts[d // p] = (re, im)
            else:
                x_parts[d] = (re, im)
        x = Coefficient._make(x_parts)
        y = Coefficient._make(y_parts)
        denom = x * x - Coefficient.from_int(p) * y * y
        sqrt_p = Coefficient(((p, _F1, _F0),))
        return (x - sqrt_p * y) * denom.inverse()

    def __truediv__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, n):
        if not isinstance(n, int):
            raise UnsupportedFormError("coefficient powers must be integers")
        if n < 0:
            return self.inverse() ** (-n)
        out = Coefficient.ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def eval(self):
        """Numeric value as a complex float."""
        return complex(
            sum(float(re) * math.sqrt(d) for d, re, _ in self._parts),
            sum(float(im) * math.sqrt(d) for d, _, im in self._parts),
        )

    def __eq__(self, other):
        other = _as_coefficient(other)
        if other is None:
            return NotImplemented
        return self._parts == other._parts

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self._parts)
            self._hash = h
        return h

    def __repr__(self):
        return f"Coefficient<{_coeff_text(self)}>"


def _as_coefficient(x):
    if isinstance(x, Coefficient):
        return x
    if isinstance(x, (int, Fraction)):
        return Coefficient.rational(x)
    return None


def _coeff_cmp(a, b):
    """Total order on coefficients compatible with addition."""
    pa = {d: (re, im) for d, re, im in a.parts}
    pb = {d: (re, im) for d, re, im in b.parts}
    for d in sorted(set(pa) | set(pb)):
        are, aim = pa.get(d, (_F0, _F0))
        bre, bim = pb.get(d, (_F0, _F0))
        if are != bre:
            return 1 if are > bre else -1
        if aim != bim:
            return 1 if aim > bim else -1
    return 0


def _coeff_sign(c):
    return _coeff_cmp(c, Coefficient.ZERO)


Coefficient.ZERO = Coefficient()
Coefficient.ONE = Coefficient.rational(1)
Coefficient.I = Coefficient.rational(0, 1)
Coefficient.MINUS_ONE = Coefficient.rational(-1)


# --------------------------------------------------------------------------
# Symbols

KINDS = ("Lambda", "Theta", "Eta", "SmallLambda", "Parameter", "Time")
_KIND_RANK = {k: r for r, k in enumerate(KINDS)}
# Rendering puts parameters and driving coefficients before coordinates.
_DISPLAY_RANK = {
    "Parameter": 0,
    "Eta": 1,
    "SmallLambda": 2,
    "Lambda": 3,
    "Theta": 4,
    "Time": 5,
}

_RESERVED_NAMES = {"i", "t", "sqrt", "exp", "pi"}
_INDEXED_PREFIX = {"L": "Lambda", "Th": "Theta", "eta": "Eta", "lam": "SmallLambda"}
_KIND_PREFIX = {v: k for k, v in _INDEXED_PREFIX.items()}
_GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta_", "theta",
    "iota", "kappa", "mu", "nu", "xi", "omicron", "rho", "sigma",
    "tau", "upsilon", "phi", "chi", "psi", "omega", "varepsilon", "varphi",
    "Delta", "Gamma", "Omega", "Phi", "Psi", "Sigma", "Theta_", "Xi",
}


@dataclass(frozen=True)
class Symbol:
    """A typed symbol; ``index`` is a 1-based int or, for parameters, a name."""

    kind: str
    index: object

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if self.kind == "Parameter":
            if not isinstance(self.index, str) or not self.index:
                raise ValueError("parameter symbols need a non-empty name")
        elif self.kind == "Time":
            pass
        elif not (isinstance(self.index, int) and self.index >= 1):
            raise ValueError(f"{self.kind} index must be a positive integer")

    def key(self):
        if isinstance(self.index, int):
            return (_KIND_RANK[self.kind], 0, self.index, "")
        return (_KIND_RANK[self.kind], 1, 0, str(self.index))

    def display_key(self):
        if isinstance(self.index, int):
            return (_DISPLAY_RANK[self.kind], 0, self.index, "")
        return (_DISPLAY_RANK[self.kind], 1, 0, str(self.index))

    def __repr__(self):
        return f"Symbol<{symbol_name(self)}>"


TIME = Symbol("Time", "t")


def lambda_sym(i):
    return Symbol("Lambda", i)


def theta_sym(i):
    return Symbol("Theta", i)


def eta_sym(i):
    return Symbol("Eta", i)


def small_lambda_sym(i):
    return Symbol("SmallLambda", i)


def param_sym(name):
    if name in _RESERVED_NAMES:
        raise ValueError(f"'{name}' is reserved and cannot name a parameter")
    if _re.fullmatch(r"(L|Th|eta|lam)\d+", name):
        raise ValueError(f"'{name}' collides with an indexed symbol name")
    if not _re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", name):
        raise ValueError(f"'{name}' is not a valid parameter name")
    return Symbol("Parameter", name)


def symbol_name(sym):
    """Canonical text name, also accepted back by the parser."""
    if sym.kind == "Time":
        return "t"
    if sym.kind == "Parameter":
        return sym.index
    return f"{_KIND_PREFIX[sym.kind]}{sym.index}"


def _symbol_latex(sym):
    if sym.kind == "Time":
        return "t"
    if sym.kind == "Parameter":
        name = sym.index
        if name in _GREEK:
            return "\\" + name
        return f"\\mathrm{{{name}}}"
    head = {"Lambda": "\\Lambda", "Theta": "\\Theta",
            "Eta": "\\eta", "SmallLambda": "\\lambda"}[sym.kind]
    return f"{head}_{{{sym.index}}}"


# --------------------------------------------------------------------------
# Monomials and exponential arguments (internal canonical forms)
#
# Monomial: tuple of (Symbol, power>0), sorted by Symbol.key().
# ExpArg:   tuple of (Monomial, Coefficient), sorted by monomial descending;
#           represents the exponent polynomial (constant-free, exp-free).


_MONO_KEYS = {}
_SYM_INV_KEYS = {}


def _sym_inv_key(s):
    """Order-reversing encoding of Symbol.key(); smaller symbols map to
    larger keys.  Strings invert bytewise with a high terminator so that a
    proper prefix still ends up on the correct side."""
    k = _SYM_INV_KEYS.get(s)
    if k is None:
        r, f, i, name = s.key()
        k = (-r, -f, -i, tuple(-b for b in name.encode()) + (1,))
        _SYM_INV_KEYS[s] = k
    return k


def _mono_key(m):
    """Static tuple whose natural order equals the monomial order.

    Element (inverted symbol key, power): at the first difference a smaller
    (earlier) symbol or a higher power makes the key larger, matching
    lexicographic comparison over exponent vectors."""
    k = _MONO_KEYS.get(m)
    if k is None:
        k = tuple((_sym_inv_key(s), p) for s, p in m)
        _MONO_KEYS[m] = k
    return k


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    out = []
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 and j < n2:
        s1, p1 = m1[i]
        s2, p2 = m2[j]
        if s1 is s2 or s1 == s2:
            out.append((s1, p1 + p2))
            i += 1
            j += 1
        elif s1.key() < s2.key():
            out.append(m1[i])
            i += 1
        else:
            out.append(m2[j])
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out)


def _mono_cmp(m1, m2):
    """Lexicographic on the exponent vector over symbols in canonical order."""
    k1, k2 = _mono_key(m1), _mono_key(m2)
    if k1 == k2:
        return 0
    return 1 if k1 > k2 else -1


def _mono_div(m1, m2):
    """m1 / m2 as a monomial, or None when not divisible."""
    d = dict(m1)
    for sym, p in m2:
        q = d.get(sym, 0) - p
        if q < 0:
            return None
        if q == 0:
            d.pop(sym, None)
        else:
            d[sym] = q
    return tuple(sorted(d.items(), key=lambda e: e[0].key()))


def _exparg_make(accum):
    items = [(m, c) for m, c in accum.items() if not c.is_zero()]
    items.sort(key=lambda e: _mono_key(e[0]), reverse=True)
    return tuple(items)


def _exparg_add(a1, a2):
    if not a1:
        return a2
    if not a2:
        return a1
    out = []
    i = j = 0
    n1, n2 = len(a1), len(a2)
    while i < n1 and j < n2:
        m1, c1 = a1[i]
        m2, c2 = a2[j]
        k1, k2 = _mono_key(m1), _mono_key(m2)
        if k1 == k2:
            c = c1 + c2
            if not c.is_zero():
                out.append((m1, c))
            i += 1
            j += 1
        elif k1 > k2:
            out.append(a1[i])
            i += 1
        else:
            out.append(a2[j])
            j += 1
    out.extend(a1[i:])
    out.extend(a2[j:])
    return tuple(out)


def _exparg_neg(a):
    return tuple((m, -c) for m, c in a)


def _exparg_cmp(a1, a2):
    i = j = 0
    n1, n2 = len(a1), len(a2)
    while i < n1 and j < n2:
        m1, c1 = a1[i]
        m2, c2 = a2[j]
        k1, k2 = _mono_key(m1), _mono_key(m2)
        if k1 > k2:
            return _coeff_sign(c1)
        if k1 < k2:
            return -_coeff_sign(c2)
        c = _coeff_cmp(c1, c2)
        if c:
            return c
        i += 1
        j += 1
    if i < n1:
        return _coeff_sign(a1[i][1])
    if j < n2:
        return -_coeff_sign(a2[j][1])
    return 0


def _exparg_sign(a):
    """Sign of the leading coefficient; 0 only for the empty argument."""
    if not a:
        return 0
    return _coeff_sign(a[0][1])


def _term_cmp(t1, t2):
    c = _mono_cmp(t1[1], t2[1])
    if c:
        return c
    return _exparg_cmp(t1[2], t2[2])


class _ExpargKey:
    """Order adapter so expression arguments sort with plain tuple keys."""

    __slots__ = ("a",)

    def __init__(self, a):
        self.a = a

    def __eq__(self, other):
        return self.a == other.a

    def __lt__(self, other):
        return _exparg_cmp(self.a, other.a) < 0

    def __gt__(self, other):
        return _exparg_cmp(self.a, other.a) > 0


def _term_sort_key(t):
    return (_mono_key(t[1]), _ExpargKey(t[2]))


def _pair_sort_key(p):
    return (_mono_key(p[0]), _ExpargKey(p[1]))


# --------------------------------------------------------------------------
# Expr


class Expr:
    """Canonical multivariate expression: sum of coeff * monomial * exp(arg).

    Immutable.  Terms are unique in (monomial, exp argument) and stored in
    descending canonical order, so structural equality is semantic equality.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        self._terms = tuple(terms)

    @staticmethod
    def _from_map(accum):
        terms = [
            (c, m, a) for (m, a), c in accum.items() if not c.is_zero()
        ]
        terms.sort(key=_term_sort_key, reverse=True)
        return Expr(tuple(terms))

    @staticmethod
    def coefficient(c):
        c = _as_coefficient(c)
        if c.is_zero():
            return Expr.ZERO
        return Expr(((c, (), ()),))

    @staticmethod
    def integer(n):
        return Expr.coefficient(Coefficient.rational(n))

    @staticmethod
    def symbol(sym):
        return Expr(((Coefficient.ONE, ((sym, 1),), ()),))

    @staticmethod
    def exp(arg):
        """Exponential atom exp(arg); arg must be exp-free and constant-free."""
        arg = _as_expr(arg)
        accum = {}
        for c, m, a in arg._terms:
            if a:
                raise UnsupportedFormError("nested exponential in exp argument")
            if not m:
                raise UnsupportedFormError(
                    "constant term in exp argument; fold constants out first")
            accum[m] = accum.get(m, Coefficient.ZERO) + c
        exparg = _exparg_make(accum)
        if not exparg:
            return Expr.ONE
        return Expr(((Coefficient.ONE, (), exparg),))

    @property
    def terms(self):
        """Tuple of (Coefficient, monomial, exp-argument) in canonical order."""
        return self._terms

    def is_zero(self):
        return not self._terms

    def is_one(self):
        return self._terms == ((Coefficient.ONE, (), ()),)

    def is_constant(self):
        return self.as_coefficient() is not None

    def as_coefficient(self):
        """The value as a Coefficient, or None if symbols are present."""
        if not self._terms:
            return Coefficient.ZERO
        if len(self._terms) == 1:
            c, m, a = self._terms[0]
            if not m and not a:
                return c
        return None

    def free_symbols(self):
        syms = set()
        for _, m, a in self._terms:
            for sym, _p in m:
                syms.add(sym)
            for mono, _c in a:
                for sym, _p in mono:
                    syms.add(sym)
        return syms

    def has_exp(self):
        return any(a for _, _, a in self._terms)

    def __add__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        accum = {}
        for c, m, a in self._terms:
            accum[(m, a)] = c
        for c, m, a in other._terms:
            key = (m, a)
            prev = accum.get(key)
            accum[key] = c if prev is None else prev + c
        return Expr._from_map(accum)

    __radd__ = __add__

    def __neg__(self):
        return Expr(tuple((-c, m, a) for c, m, a in self._terms))

    def __sub__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        # multiplying by a single term keeps the canonical order, so the
        # result can be built without re-accumulating or sorting
        if len(self._terms) == 1:
            c1, m1, a1 = self._terms[0]
            return Expr(tuple(
                (c1 * c2, _mono_mul(m1, m2), _exparg_add(a1, a2))
                for c2, m2, a2 in other._terms))
        if len(other._terms) == 1:
            c2, m2, a2 = other._terms[0]
            return Expr(tuple(
                (c1 * c2, _mono_mul(m1, m2), _exparg_add(a1, a2))
                for c1, m1, a1 in self._terms))
        accum = {}
        for c1, m1, a1 in self._terms:
            for c2, m2, a2 in other._terms:
                key = (_mono_mul(m1, m2), _exparg_add(a1, a2))
                c = c1 * c2
                prev = accum.get(key)
                accum[key] = c if prev is None else prev + c
        return Expr._from_map(accum)

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int):
            raise UnsupportedFormError("exponents must be integers")
        if n < 0:
            inv = self._invert_term()
            if inv is None:
                raise UnsupportedFormError(
                    "negative power of a non-invertible expression")
            return inv ** (-n)
        out = Expr.ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def _invert_term(self):
        """Inverse when the value is a single monomial-free term, else None."""
        if len(self._terms) != 1:
            return None
        c, m, a = self._terms[0]
        if m:
            return None
        return Expr(((c.inverse(), (), _exparg_neg(a)),))

    def __truediv__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("division by zero expression")
        inv = other._invert_term()
        if inv is not None:
            return self * inv
        q = exact_div(self, other)
        if q is not None:
            return q
        return RationalExpr(self, other)

    def __rtruediv__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        return other / self

    def substitute(self, bindings):
        """Simultaneous substitution followed by normalization.

        ``bindings`` maps Symbol -> Expr-like.  Raises UnsupportedFormError if
        a substituted exponential argument leaves the canonical class.
        """
        bind = {s: _as_expr(v) for s, v in bindings.items()}
        out = Expr.ZERO
        for c, m, a in self._terms:
            piece = Expr.coefficient(c)
            for sym, p in m:
                rep = bind.get(sym)
                piece = piece * (rep ** p if rep is not None
                                 else Expr(((Coefficient.ONE, ((sym, p),), ()),)))
            if a:
                arg = Expr.ZERO
                for mono, cc in a:
                    mono_val = Expr.coefficient(cc)
                    for sym, p in mono:
                        rep = bind.get(sym)
                        mono_val = mono_val * (
                            rep ** p if rep is not None
                            else Expr(((Coefficient.ONE, ((sym, p),), ()),)))
                    arg = arg + mono_val
                const = arg._constant_part()
                if not const.is_zero():
                    if arg.is_constant():
                        piece = piece * Expr.coefficient(_exp_of_constant(const))
                        arg = Expr.ZERO
                    else:
                        raise UnsupportedFormError(
                            "substitution produced a constant offset inside exp")
                piece = piece * Expr.exp(arg)
            out = out + piece
        return out

    def _constant_part(self):
        for c, m, a in self._terms:
            if not m and not a:
                return c
        return Coefficient.ZERO

    def eval_numeric(self, bindings):
        """Evaluate to a complex float; every free symbol must be bound."""
        val = 0j
        for c, m, a in self._terms:
            x = c.eval()
            for sym, p in m:
                x *= _lookup_binding(bindings, sym) ** p
            if a:
                arg = 0j
                for mono, cc in a:
                    y = cc.eval()
                    for sym, p in mono:
                        y *= _lookup_binding(bindings, sym) ** p
                    arg += y
                x *= cmath.exp(arg)
            val += x
        return val

    def __eq__(self, other):
        other = _as_expr_or_none(other)
        if other is None:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)

    def __repr__(self):
        return f"Expr<{_expr_text(self)}>"


def _exp_of_constant(c):
    raise UnsupportedFormError(
        "exp of a nonzero constant has no exact representation here")


def _lookup_binding(bindings, sym):
    try:
        return bindings[sym]
    except KeyError:
        raise UnboundSymbolError(sym) from None


Expr.ZERO = Expr()
Expr.ONE = Expr(((Coefficient.ONE, (), ()),))


def _as_expr(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, Symbol):
        return Expr.symbol(x)
    c = _as_coefficient(x)
    if c is not None:
        return Expr.coefficient(c)
    raise TypeError(f"cannot interpret {x!r} as an expression")


def _as_expr_or_none(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, Symbol):
        return Expr.symbol(x)
    c = _as_coefficient(x)
    if c is not None:
        return Expr.coefficient(c)
    return None


def exact_div(f, h):
    """Exact quotient f / h as an Expr, or None when h does not divide f."""
    f = _as_expr(f)
    h = _as_expr(h)
    if h.is_zero():
        raise ZeroDivisionError("division by zero expression")
    if f.is_zero():
        return Expr.ZERO
    ch, mh, ah = h.terms[0]
    rem = {(m, a): c for c, m, a in f.terms}
    quot = {}
    # When the division is exact the leading term of the remainder is the
    # leading quotient term times lt(h), so each round peels one quotient
    # term; the bound below only trips on inexact input.
    max_rounds = len(f.terms) * (len(h.terms) + 1) + 8
    for _ in range(max_rounds):
        if not rem:
            return Expr._from_map(quot)
        mr, ar = max(rem, key=_pair_sort_key)
        cr = rem[(mr, ar)]
        mq = _mono_div(mr, mh)
        if mq is None:
            return None
        aq = _exparg_add(ar, _exparg_neg(ah))
        cq = cr / ch
        quot[(mq, aq)] = cq
        for c2, m2, a2 in h.terms:
            key = (_mono_mul(mq, m2), _exparg_add(aq, a2))
            prev = rem.get(key, Coefficient.ZERO)
            new = prev - cq * c2
            if new.is_zero():
                rem.pop(key, None)
            else:
                rem[key] = new
    return None


# --------------------------------------------------------------------------
# Raw-tree normalization (spec entry point; also used by the parser)


def normalize(tree):
    """Normalize a raw expression tree into a canonical Expr.

    A tree node is an Expr / Coefficient / Symbol / int / Fraction leaf, or a
    tuple ``(op, *children)`` with op in {'add','mul','neg','pow','exp'} (the
    operator spellings '+', '*', '^' are accepted too).
    """
    if isinstance(tree, tuple) and tree and isinstance(tree[0], str):
        op = tree[0]
        if op in ("add", "+"):
            out = Expr.ZERO
            for child in tree[1:]:
                out = out + normalize(child)
            return out
        if op in ("mul", "*"):
            out = Expr.ONE
            for child in tree[1:]:
                out = out * normalize(child)
            return out
        if op == "neg":
            return -normalize(tree[1])
        if op in ("pow", "^"):
            base = normalize(tree[1])
            n = tree[2]
            if not isinstance(n, int):
                raise UnsupportedFormError("exponents must be integers")
            if n < 0 and base._invert_term() is None:
                raise UnsupportedFormError(
                    "negative power of a non-invertible expression")
            return base ** n
        if op == "exp":
            return Expr.exp(normalize(tree[1]))
        raise UnsupportedFormError(f"unknown tree operator {op!r}")
    return _as_expr(tree)


def substitute(e, bindings):
    """Simultaneous substitution into an Expr or RationalExpr."""
    return e.substitute(bindings)


def eval_numeric(e, bindings):
    """Evaluate an Expr or RationalExpr to a complex number."""
    return e.eval_numeric(bindings)


# --------------------------------------------------------------------------
# Parser

_TOKEN_RE = _re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9_]*)|([-+*/^()]))")


def _tokenize(s):
    tokens = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if m is None or m.end() == pos:
            stripped = s[pos:].lstrip()
            if not stripped:
                break
            off = len(s) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", off)
        if m.group(1) is not None:
            tokens.append(("num", int(m.group(1)), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), m.start(2)))
        else:
            tokens.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    tokens.append(("end", None, len(s)))
    return tokens


class _Parser:
    def __init__(self, s, parameters):
        self.s = s
        self.tokens = _tokenize(s)
        self.i = 0
        self.parameters = set(parameters or ())

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected '{op}'", off)

    def parse(self):
        e = self.sum_()
        kind, _, off = self.peek()
        if kind != "end":
            raise ParseError("trailing input", off)
        return e

    def sum_(self):
        e = self.product()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.product()
                e = e + rhs if val == "+" else e - rhs
            else:
                return e

    def product(self):
        e = self.signed_factor()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.signed_factor()
                if val == "*":
                    e = e * rhs
                else:
                    e = self._divide(e, rhs, off)
            else:
                return e

    def _divide(self, e, rhs, off):
        if rhs.is_zero():
            raise ParseError("division by zero", off)
        inv = rhs._invert_term()
        if inv is not None:
            return e * inv
        q = exact_div(e, rhs)
        if q is None:
            raise ParseError("division does not yield a polynomial form", off)
        return q

    def signed_factor(self):
        sign = 1
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                if val == "-":
                    sign = -sign
            else:
                break
        e = self.power()
        return -e if sign < 0 else e

    def power(self):
        e = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, n, off = self.take()
            if kind != "num" or n < 1:
                raise ParseError("exponent must be a positive integer", off)
            e = e ** n
        return e

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Expr.integer(val)
        if kind == "op" and val == "(":
            e = self.sum_()
            self.expect_op(")")
            return e
        if kind == "name":
            return self.named(val, off)
        raise ParseError("expected a value", off)

    def named(self, name, off):
        if name == "i":
            return Expr.coefficient(Coefficient.I)
        if name == "t":
            return Expr.symbol(TIME)
        if name == "pi":
            raise ParseError(
                "pi has no exact symbolic form here; bind it numerically", off)
        if name == "sqrt":
            self.expect_op("(")
            kind, d, doff = self.take()
            if kind != "num":
                raise ParseError("sqrt takes a positive integer", doff)
            if d < 2:
                raise ParseError("sqrt argument must be an integer >= 2", doff)
            self.expect_op(")")
            return Expr.coefficient(Coefficient.sqrt_int(d))
        if name == "exp":
            self.expect_op("(")
            e = self.sum_()
            self.expect_op(")")
            try:
                return Expr.exp(e)
            except UnsupportedFormError as err:
                raise ParseError(str(err), off) from None
        m = _re.fullmatch(r"(L|Th|eta|lam)(\d+)", name)
        if m:
            idx = int(m.group(2))
            if idx < 1:
                raise ParseError("symbol indices start at 1", off)
            return Expr.symbol(Symbol(_INDEXED_PREFIX[m.group(1)], idx))
        if name in self.parameters:
            return Expr.symbol(param_sym(name))
        raise ParseError(f"unknown symbol '{name}'", off)


def parse_expr(s, parameters=None):
    """Parse the expression grammar into a canonical Expr.

    Vocabulary: integers, fractions p/q, i, sqrt(d) for integer d >= 2,
    exp(...), coordinate names L<n>/Th<n>, driving names eta<n>/lam<n>, t,
    declared parameter names, and + - * / ^ ( ).
    """
    return _Parser(s, parameters).parse()


# --------------------------------------------------------------------------
# Rendering


def _frac_text(f):
    return str(f)


def _gauss_text(re, im):
    """Text of re + im*i with both possibly zero; returns (text, is_sum)."""
    if im == 0:
        return _frac_text(re), False
    if re == 0:
        if im == 1:
            return "i", False
        if im == -1:
            return "-i", False
        return f"{_frac_text(im)}*i", False
    im_abs = abs(im)
    im_txt = "i" if im_abs == 1 else f"{_frac_text(im_abs)}*i"
    op = "+" if im > 0 else "-"
    return f"{_frac_text(re)}{op}{im_txt}", True


def _part_text(d, re, im):
    g, is_sum = _gauss_text(re, im)
    if d == 1:
        return g, is_sum
    root = f"sqrt({d})"
    if g == "1":
        return root, False
    if g == "-1":
        return f"-{root}", False
    if is_sum:
        return f"({g})*{root}", False
    return f"{g}*{root}", False


def _coeff_text(c):
    """Text form; returns '0' for zero."""
    if c.is_zero():
        return "0"
    pieces = []
    for d, re, im in c.parts:
        txt, _ = _part_text(d, re, im)
        pieces.append(txt)
    out = pieces[0]
    for p in pieces[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def _coeff_is_compound(c):
    if len(c.parts) > 1:
        return True
    if not c.parts:
        return False
    _, re, im = c.parts[0]
    return re != 0 and im != 0


def _exparg_to_expr(a):
    return Expr(tuple((c, m, ()) for m, c in a))


def _mono_text(m):
    parts = []
    for sym, p in sorted(m, key=lambda e: e[0].display_key()):
        name = symbol_name(sym)
        parts.append(name if p == 1 else f"{name}^{p}")
    return "*".join(parts)


def _term_text(c, m, a):
    pieces = []
    lead = ""
    if not m and not a:
        return _coeff_text(c)
    if c.is_one():
        pass
    elif c == Coefficient.MINUS_ONE:
        lead = "-"
    else:
        txt = _coeff_text(c)
        if _coeff_is_compound(c):
            txt = f"({txt})"
        pieces.append(txt)
    if m:
        pieces.append(_mono_text(m))
    if a:
        pieces.append(f"exp({_expr_text(_exparg_to_expr(a))})")
    return lead + "*".join(pieces)


def _expr_text(e):
    if e.is_zero():
        return "0"
    out = ""
    for idx, (c, m, a) in enumerate(e.terms):
        t = _term_text(c, m, a)
        if idx == 0:
            out = t
        elif t.startswith("-"):
            out += f" - {t[1:]}"
        else:
            out += f" + {t}"
    return out


def _frac_latex(f, *, suppress_one=False):
    sign = "-" if f < 0 else ""
    f = abs(f)
    if f.denominator == 1:
        if suppress_one and f == 1:
            return sign
        return f"{sign}{f.numerator}"
    return f"{sign}\\frac{{{f.numerator}}}{{{f.denominator}}}"


def _part_latex(d, re, im, *, suppress_one=False):
    root = f"\\sqrt{{{d}}}" if d != 1 else ""
    if im == 0:
        body = _frac_latex(re, suppress_one=bool(root) or suppress_one)
        return body + root
    if re == 0:
        body = _frac_latex(im, suppress_one=True)
        return f"{body}i{root}"
    lhs = _frac_latex(re)
    rhs = _frac_latex(im, suppress_one=True) + "i"
    if not rhs.startswith("-"):
        rhs = "+" + rhs
    inner = f"{lhs}{rhs}"
    if root or not suppress_one:
        return f"\\left({inner}\\right){root}"
    return inner


def _coeff_latex(c, *, suppress_one=False):
    if c.is_zero():
        return "0"
    if len(c.parts) == 1:
        d, re, im = c.parts[0]
        return _part_latex(d, re, im, suppress_one=suppress_one)
    pieces = [_part_latex(d, re, im) for d, re, im in c.parts]
    out = pieces[0]
    for p in pieces[1:]:
        out += p if p.startswith("-") else "+" + p
    if suppress_one:
        return f"\\left({out}\\right)"
    return out


def _mono_latex(m):
    out = ""
    for sym, p in sorted(m, key=lambda e: e[0].display_key()):
        s = _symbol_latex(sym)
        out += s if p == 1 else f"({s})^{{{p}}}"
    return out


def _poly_latex(e):
    """LaTeX of an exp-free Expr (used for exp arguments and trig arguments)."""
    if e.is_zero():
        return "0"
    out = ""
    for idx, (c, m, _a) in enumerate(e.terms):
        if not m:
            t = _coeff_latex(c)
        else:
            t = _coeff_latex(c, suppress_one=True) + _mono_latex(m)
        if idx == 0:
            out = t
        else:
            out += t if t.startswith("-") else "+" + t
    return out


def _imaginary_quotient(a):
    """If every coefficient of the exp argument is purely imaginary, return
    the real polynomial b with a = i*b, else None."""
    accum = {}
    for m, c in a:
        for d, re, im in c.parts:
            if re != 0:
                return None
        accum[m] = c * Coefficient.rational(0, -1)
    return _exparg_make(accum)


def _display_atoms(e):
    """Group exponential pairs into cos/sin/cosh/sinh display nodes.

    Returns a list of (coeff, monomial, node) where node is None (no exp),
    ('exp', arg), or (fn, argExpr) with fn in {cos,sin,cosh,sinh}.
    """
    terms = list(e.terms)
    by_key = {(m, a): c for c, m, a in terms}
    consumed = set()
    atoms = []
    for c, m, a in terms:
        key = (m, a)
        if key in consumed:
            continue
        if not a:
            atoms.append((c, m, None))
            continue
        partner = (m, _exparg_neg(a))
        if partner in by_key and partner not in consumed and partner != key:
            c2 = by_key[partner]
            pos_first = _exparg_sign(a) > 0
            arg = a if pos_first else _exparg_neg(a)
            c_pos = c if pos_first else c2
            c_neg = c2 if pos_first else c
            node = None
            if c_pos == c_neg:
                imag = _imaginary_quotient(arg)
                if imag is not None:
                    node = ("cos", _exparg_to_expr(imag))
                else:
                    node = ("cosh", _exparg_to_expr(arg))
                coeff = c_pos * Coefficient.rational(2)
            elif c_pos == -c_neg:
                imag = _imaginary_quotient(arg)
                if imag is not None:
                    node = ("sin", _exparg_to_expr(imag))
                    coeff = c_pos * Coefficient.rational(2) * Coefficient.I
                else:
                    node = ("sinh", _exparg_to_expr(arg))
                    coeff = c_pos * Coefficient.rational(2)
            if node is not None:
                consumed.add(key)
                consumed.add(partner)
                atoms.append((coeff, m, node))
                continue
        atoms.append((c, m, ("exp", a)))
    return atoms


def _expr_latex(e):
    if e.is_zero():
        return "0"
    out = ""
    for idx, (c, m, node) in enumerate(_display_atoms(e)):
        has_body = bool(m) or node is not None
        if not has_body:
            t = _coeff_latex(c)
        else:
            t = _coeff_latex(c, suppress_one=True)
            t += _mono_latex(m)
            if node is not None:
                fn, payload = node
                if fn == "exp":
                    t += f"e^{{{_poly_latex(_exparg_to_expr(payload))}}}"
                else:
                    t += f"\\{fn}\\left({_poly_latex(payload)}\\right)"
        if idx == 0:
            out = t
        else:
            out += t if t.startswith("-") else "+" + t
    return out


def _coeff_json(c):
    return [[d, str(re), str(im)] for d, re, im in c.parts]


def _mono_json(m):
    return [[sym.kind, sym.index, p] for sym, p in m]


def _expr_json_obj(e):
    return {
        "type": "expr",
        "terms": [
            {
                "coeff": _coeff_json(c),
                "monomial": _mono_json(m),
                "exp": [[_mono_json(mono), _coeff_json(cc)] for mono, cc in a],
            }
            for c, m, a in e.terms
        ],
    }


def render(e, style="latex"):
    """Render an Expr or RationalExpr as latex, text, or json.

    The latex style rewrites balanced exponential pairs to cos/sin/cosh/sinh;
    text and json are exact canonical forms (text round-trips through
    parse_expr).
    """
    if isinstance(e, RationalExpr):
        if style == "json":
            return json.dumps(
                {"type": "rational",
                 "num": _expr_json_obj(e.num),
                 "den": _expr_json_obj(e.den)},
                sort_keys=True, separators=(",", ":"))
        if e.den.is_one():
            return render(e.num, style)
        if style == "text":
            return f"({_expr_text(e.num)}) / ({_expr_text(e.den)})"
        if style == "latex":
            return f"\\frac{{{_expr_latex(e.num)}}}{{{_expr_latex(e.den)}}}"
        raise ValueError(f"unknown render style {style!r}")
    e = _as_expr(e)
    if style == "text":
        return _expr_text(e)
    if style == "latex":
        return _expr_latex(e)
    if style == "json":
        return json.dumps(_expr_json_obj(e), sort_keys=True,
                          separators=(",", ":"))
    raise ValueError(f"unknown render style {style!r}")


# --------------------------------------------------------------------------
# RationalExpr


class RationalExpr:
    """Quotient of canonical expressions, normalized on construction.

    Normalization: zero numerator collapses to 0/1; a single-term denominator
    is folded into the numerator (coefficient, exponential factor, and
    monomial when divisible); a multi-term denominator that divides the
    numerator exactly collapses to denominator 1; otherwise the denominator
    is scaled monic (leading coefficient 1).  The multi-term cancellation is
    attempted only while len(num) * len(den) stays below a work limit,
    because a failing trial division costs a number of rounds on that order;
    larger quotients simply keep their rational form.
    """

    _CANCEL_WORK_LIMIT = 5000

    __slots__ = ("_num", "_den")

    def __init__(self, num, den):
        num = _as_expr(num)
        den = _as_expr(den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        self._num, self._den = self._normalize(num, den)

    @staticmethod
    def _normalize(num, den):
        if num.is_zero():
            return Expr.ZERO, Expr.ONE
        if den.is_one():
            return num, den
        if len(den.terms) == 1:
            c, m, a = den.terms[0]
            scale = Expr(((c.inverse(), (), _exparg_neg(a)),))
            num = num * scale
            if not m:
                return num, Expr.ONE
            q = exact_div(num, Expr(((Coefficient.ONE, m, ()),)))
            if q is not None:
                return q, Expr.ONE
            return num, Expr(((Coefficient.ONE, m, ()),))
        if len(num.terms) * len(den.terms) <= RationalExpr._CANCEL_WORK_LIMIT:
            q = exact_div(num, den)
            if q is not None:
                return q, Expr.ONE
        c0 = den.terms[0][0]
        inv = Expr.coefficient(c0.inverse())
        return num * inv, den * inv

    @property
    def num(self):
        return self._num

    @property
    def den(self):
        return self._den

    def is_expr(self):
        return self._den.is_one()

    def as_expr(self):
        if not self._den.is_one():
            raise UnsupportedFormError("denominator does not cancel")
        return self._num

    def free_symbols(self):
        return self._num.free_symbols() | self._den.free_symbols()

    def substitute(self, bindings):
        return RationalExpr(self._num.substitute(bindings),
                            self._den.substitute(bindings))

    def eval_numeric(self, bindings):
        den = self._den.eval_numeric(bindings)
        if den == 0:
            raise ZeroDivisionError("denominator vanished at the given point")
        return self._num.eval_numeric(bindings) / den

    def __neg__(self):
        return RationalExpr(-self._num, self._den)

    def __add__(self, other):
        other = _as_rational(other)
        if other is None:
            return NotImplemented
        return RationalExpr(self._num * other._den + other._num * self._den,
                            self._den * other._den)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_rational(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        other = _as_rational(other)
        if other is None:
            return NotImplemented
        return RationalExpr(self._num * other._num, self._den * other._den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_rational(other)
        if other is None:
            return NotImplemented
        return RationalExpr(self._num * other._den, self._den * other._num)

    def __eq__(self, other):
        other = _as_rational(other)
        if other is None:
            return NotImplemented
        return self._num == other._num and self._den == other._den

    def __hash__(self):
        return hash((self._num, self._den))

    def __repr__(self):
        if self._den.is_one():
            return f"RationalExpr<{_expr_text(self._num)}>"
        return (f"RationalExpr<({_expr_text(self._num)}) / "
                f"({_expr_text(self._den)})>")


def _as_rational(x):
    if isinstance(x, RationalExpr):
        return x
    e = _as_expr_or_none(x)
    if e is not None:
        return RationalExpr(e, Expr.ONE)
    return None


# --------------------------------------------------------------------------
# SymMatrix


class SymMatrix:
    """Immutable dense matrix of canonical expressions."""

    __slots__ = ("_rows",)

    def __init__(self, rows):
        self._rows = tuple(tuple(_as_expr(x) for x in row) for row in rows)
        if self._rows:
            w = len(self._rows[0])
            if any(len(r) != w for r in self._rows):
                raise ValueError("ragged matrix rows")

    @staticmethod
    def identity(n):
        return SymMatrix(
            [[Expr.ONE if i == j else Expr.ZERO for j in range(n)]
             for i in range(n)])

    @staticmethod
    def zeros(n, m=None):
        m = n if m is None else m
        return SymMatrix([[Expr.ZERO] * m for _ in range(n)])

    @property
    def rows(self):
        return self._rows

    @property
    def shape(self):
        if not self._rows:
            return (0, 0)
        return (len(self._rows), len(self._rows[0]))

    def at(self, i, j):
        """1-based entry accessor."""
        return self._rows[i - 1][j - 1]

    def transpose(self):
        return SymMatrix(tuple(zip(*self._rows))) if self._rows else self

    def map(self, fn):
        return SymMatrix([[fn(x) for x in row] for row in self._rows])

    def substitute(self, bindings):
        return self.map(lambda x: x.substitute(bindings))

    def eval_numeric(self, bindings):
        return [[x.eval_numeric(bindings) for x in row] for row in self._rows]

    def __add__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise ValueError("matrix shape mismatch")
        return SymMatrix(
            [[a + b for a, b in zip(r1, r2)]
             for r1, r2 in zip(self._rows, other._rows)])

    def __sub__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self + other.scale(Coefficient.MINUS_ONE)

    def scale(self, x):
        x = _as_expr(x)
        return self.map(lambda e: e * x)

    def __matmul__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise ValueError("matrix shape mismatch in product")
        cols = tuple(zip(*other._rows))
        out = []
        for row in self._rows:
            out_row = []
            for col in cols:
                acc = Expr.ZERO
                for a, b in zip(row, col):
                    if a.is_zero() or b.is_zero():
                        continue
                    acc = acc + a * b
                out_row.append(acc)
            out.append(out_row)
        return SymMatrix(out)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self._rows == other._rows

    def __hash__(self):
        return hash(self._rows)

    def is_identity(self):
        n, m = self.shape
        if n != m:
            return False
        return self == SymMatrix.identity(n)

    def __repr__(self):
        body = "; ".join(
            ", ".join(_expr_text(x) for x in row) for row in self._rows)
        return f"SymMatrix[{body}]"


def render_matrix(m, style="latex"):
    """Render a SymMatrix (latex pmatrix, aligned text grid, or json)."""
    if style == "json":
        return json.dumps(
            {"type": "matrix",
             "rows": [[_expr_json_obj(x) for x in row] for row in m.rows]},
            sort_keys=True, separators=(",", ":"))
    if style == "latex":
        body = " \\\\\n".join(
            " & ".join(_expr_latex(x) for x in row) for row in m.rows)
        return f"\\begin{{pmatrix}}\n{body}\n\\end{{pmatrix}}"
    if style == "text":
        cells = [[_expr_text(x) for x in row] for row in m.rows]
        if not cells:
            return "[]"
        widths = [max(len(r[j]) for r in cells) for j in range(len(cells[0]))]
        lines = []
        for r in cells:
            lines.append("[ " + "  ".join(
                c.ljust(w) for c, w in zip(r, widths)) + " ]")
        return "\n".join(lines)
    raise ValueError(f"unknown render style {style!r}")
