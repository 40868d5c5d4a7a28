"""Wei-Norman machinery: BCH matrices, coupling matrix, ODE systems.

For a closed algebra with structure tensor gamma and factorization
coordinates Lambda_l (or Theta_l), this module derives:

* the BCH matrices  b^i = exp(coord_i * Y^i)  with Y^i the transverse matrix
  of generator i  (b^0 is the identity);
* the coupling matrix  xi, whose row n is row n of  b^(n-1) ... b^1, and its
  determinant by exact fraction-free elimination;
* the coupled system  eta = i * xi^T * dLambda/dt;
* the decoupled system  i * dLambda/dt = (xi^T)^(-1) * eta  (time evolution)
  and its theta-parametrized sibling  dLambda/dtheta = (xi^T)^(-1) * lambda
  (factorization), both solved exactly;
* similarity transforms (rows of BCH matrix products applied to algebra
  vectors);
* the closed-form BCH-like relations for the three-generator family, plus
  the unitarity constraint check for the su(2) propagator.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .liealg import AlgebraError, transverse_matrix
from .matexp import sym_exp, sym_exp_scaled
from .symcore import (
    Coefficient,
    Expr,
    RationalExpr,
    SymMatrix,
    render,
    small_lambda_sym,
    symbol_name,
    _as_expr,
    _expr_json_obj,
    _expr_latex,
    _expr_text,
    _mono_key,
    _symbol_latex,
    _term_sort_key,
)

__all__ = [
    "BCHMatrixSet",
    "CouplingMatrix",
    "CoupledSystem",
    "ODESystem",
    "LieVector",
    "SingularCouplingError",
    "BranchSingularityError",
    "bch_matrices",
    "coupling_matrix",
    "coupled_odes",
    "decoupled_odes",
    "factorization_odes",
    "similarity_transform",
    "nested_similarity",
    "bch_closed_form_3gen",
    "unitarity_check_su2",
    "UnitarityReport",
    "ConstraintCheck",
]


class SingularCouplingError(AlgebraError):
    """The coupling matrix is structurally singular (det identically 0)."""


class BranchSingularityError(ValueError):
    """Closed-form BCH relations hit a vanishing branch denominator."""


@dataclass(frozen=True)
class BCHMatrixSet:
    """BCH matrices; index 0 is the identity, index i is exp(coord_i Y^i)."""

    order: int
    b: tuple
    coordinates: tuple

    def __getitem__(self, i):
        if not 0 <= i <= self.order:
            raise AlgebraError(f"index {i} out of range 0..{self.order}")
        return self.b[i]


@dataclass(frozen=True)
class CouplingMatrix:
    xi: SymMatrix
    det: Expr


@dataclass(frozen=True)
class LieVector:
    """A vector in the algebra: sum_l coeffs[l-1] * g_l."""

    coeffs: tuple

    def render(self, style="text"):
        parts = []
        for l, c in enumerate(self.coeffs, start=1):
            if c.is_zero():
                continue
            gen = f"g{l}" if style != "latex" else f"\\hat{{g}}_{{{l}}}"
            if c.is_one():
                parts.append(gen)
                continue
            if c == Expr.coefficient(Coefficient.MINUS_ONE):
                parts.append(f"-{gen}")
                continue
            body = _expr_latex(c) if style == "latex" else _expr_text(c)
            if len(c.terms) > 1:
                body = f"({body})"
            sep = "" if style == "latex" else "*"
            parts.append(f"{body}{sep}{gen}")
        if not parts:
            return "0"
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out


@dataclass(frozen=True)
class CoupledSystem:
    """eta = (i * xi^T) @ dLambda/dt, kept in matrix form."""

    coupling: CouplingMatrix
    matrix: SymMatrix
    coordinates: tuple
    inputs: tuple

    def render(self, style="text"):
        if style == "json":
            return json.dumps({
                "type": "coupled",
                "inputs": [symbol_name(s) for s in self.inputs],
                "coordinates": [symbol_name(s) for s in self.coordinates],
                "matrix": [[_expr_json_obj(x) for x in row]
                           for row in self.matrix.rows],
            }, sort_keys=True, separators=(",", ":"))
        lines = []
        for l, eta in enumerate(self.inputs):
            terms = []
            for n, lam in enumerate(self.coordinates):
                c = self.matrix.rows[l][n]
                if c.is_zero():
                    continue
                if style == "latex":
                    dot = f"\\dot{{{_symbol_latex(lam)}}}"
                    body = _expr_latex(c)
                    piece = f"\\left({body}\\right){dot}" \
                        if len(c.terms) > 1 else f"{body}{dot}"
                else:
                    dot = f"d{symbol_name(lam)}/dt"
                    body = _expr_text(c)
                    piece = f"({body})*{dot}" if len(c.terms) > 1 \
                        else f"{body}*{dot}"
                terms.append(piece)
            if terms:
                rhs = terms[0]
                for p in terms[1:]:
                    rhs += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
            else:
                rhs = "0"
            lhs = _symbol_latex(eta) if style == "latex" else symbol_name(eta)
            lines.append(f"{lhs} = {rhs}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ODESystem:
    """First-order system for the factorization coordinates.

    kind "TimeEvolution":  i * d(coord_l)/dt     = rhs_l(coords, eta)
    kind "Factorization":  d(coord_l)/dtheta     = rhs_l(coords, lambda)

    rhs entries are RationalExpr (denominator 1 whenever the coupling
    determinant is a single exponential monomial).
    """

    kind: str
    rhs: tuple
    coupling: CouplingMatrix
    coordinates: tuple
    inputs: tuple
    singular_locus_note: str = ""

    def render(self, style="text"):
        if style == "json":
            return json.dumps({
                "type": "odesystem",
                "kind": self.kind,
                "inputs": [symbol_name(s) for s in self.inputs],
                "coordinates": [symbol_name(s) for s in self.coordinates],
                "rhs": [json.loads(render(r, "json")) for r in self.rhs],
                "singular_locus_note": self.singular_locus_note,
            }, sort_keys=True, separators=(",", ":"))
        lines = []
        for l, lam in enumerate(self.coordinates):
            if style == "latex":
                lhs = (f"i\\dot{{{_symbol_latex(lam)}}}"
                       if self.kind == "TimeEvolution"
                       else f"{_symbol_latex(lam)}'")
            else:
                lhs = (f"i*d{symbol_name(lam)}/dt"
                       if self.kind == "TimeEvolution"
                       else f"d{symbol_name(lam)}/dtheta")
            lines.append(f"{lhs} = {render(self.rhs[l], style)}")
        if self.singular_locus_note:
            lines.append(f"note: {self.singular_locus_note}")
        return "\n".join(lines)


def bch_matrices(a):
    """The BCH matrix set b^0 .. b^L for the algebra's coordinates."""
    coords = a.coordinate_symbols()
    mats = [SymMatrix.identity(a.order)]
    for i in range(1, a.order + 1):
        y = transverse_matrix(a, i).m
        mats.append(sym_exp(y, coords[i - 1]))
    return BCHMatrixSet(order=a.order, b=tuple(mats), coordinates=coords)


def coupling_matrix(a, bset=None):
    """Coupling matrix xi (row n = row n of b^(n-1)...b^1) and exact det."""
    if bset is None:
        bset = bch_matrices(a)
    L = a.order
    rows = []
    for n in range(1, L + 1):
        # row n of b^(n-1)...b^1 as a chain of vector-matrix products
        vec = [Expr.ZERO] * L
        vec[n - 1] = Expr.ONE
        for k in range(n - 1, 0, -1):
            vec = _row_times(vec, bset.b[k])
        rows.append(tuple(vec))
    xi = SymMatrix(rows)
    det = _exact_det(xi)
    return CouplingMatrix(xi=xi, det=det)


def _row_times(vec, m):
    out = []
    for j in range(len(vec)):
        acc = Expr.ZERO
        for k in range(len(vec)):
            v = vec[k]
            e = m.rows[k][j]
            if v.is_zero() or e.is_zero():
                continue
            acc = acc + v * e
        out.append(acc)
    return out


def _pick_pivot(rows, start, col):
    best = None
    best_size = None
    for r in range(start, len(rows)):
        e = rows[r][col]
        if e.is_zero():
            continue
        size = len(e.terms)
        if best is None or size < best_size:
            best, best_size = r, size
            if size == 1:
                break
    return best


def _exact_quot(num, den):
    from .symcore import exact_div

    if den.is_one():
        return num
    q = den._invert_term()
    if q is not None:
        return num * q
    q = exact_div(num, den)
    if q is None:
        raise AssertionError("fraction-free elimination lost exactness")
    return q


# orders up to this size use the division-free subset expansion; larger
# systems fall back to fraction-free elimination, whose intermediate minors
# stay small for the triangular-leaning coupling matrices that arise there
_DP_LIMIT = 11


def _perm_parity(order):
    inv = 0
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if order[i] > order[j]:
                inv += 1
    return -1 if inv & 1 else 1


class _DPArena:
    """Interning tables for the subset-expansion determinant engine.

    Monomials, exponential arguments and coefficients are mapped to dense
    integer ids with memoized pairwise products/sums, so the inner loop of
    the expansion works on small ints instead of nested tuples."""

    _KEY_BASE = 1 << 20

    def __init__(self):
        from .symcore import _exparg_add, _mono_mul
        self._exparg_add = _exparg_add
        self._mono_mul = _mono_mul
        self.monos = [()]
        self.mono_ids = {(): 0}
        self.eas = [()]
        self.ea_ids = {(): 0}
        self.cos = []
        self.co_ids = {}
        self.mono_mul_cache = {}
        self.ea_sum_cache = {}
        self.co_mul_cache = {}
        self.co_add_cache = {}
        self.co_neg_cache = {}

    def mono_id(self, m):
        i = self.mono_ids.get(m)
        if i is None:
            i = len(self.monos)
            self.monos.append(m)
            self.mono_ids[m] = i
        return i

    def ea_id(self, a):
        i = self.ea_ids.get(a)
        if i is None:
            i = len(self.eas)
            self.eas.append(a)
            self.ea_ids[a] = i
        return i

    def co_id(self, c):
        i = self.co_ids.get(c)
        if i is None:
            i = len(self.cos)
            self.cos.append(c)
            self.co_ids[c] = i
        return i

    def encode(self, e):
        base = self._KEY_BASE
        return [(self.mono_id(m) * base + self.ea_id(a), self.co_id(c))
                for c, m, a in e.terms]

    def decode(self, tmap):
        from .symcore import _term_sort_key
        base = self._KEY_BASE
        terms = [(self.cos[ci], self.monos[k // base], self.eas[k % base])
                 for k, ci in tmap.items()]
        terms.sort(key=_term_sort_key, reverse=True)
        return Expr(tuple(terms))

    def key_mul(self, k1, k2):
        if k1 == 0:
            return k2
        if k2 == 0:
            return k1
        base = self._KEY_BASE
        m1, a1 = divmod(k1, base)
        m2, a2 = divmod(k2, base)
        if m1 == m2 == 0:
            mi = 0
        else:
            mk = (m1, m2) if m1 <= m2 else (m2, m1)
            mi = self.mono_mul_cache.get(mk)
            if mi is None:
                mi = self.mono_id(self._mono_mul(self.monos[m1],
                                                 self.monos[m2]))
                self.mono_mul_cache[mk] = mi
        if a1 == 0:
            ai = a2
        elif a2 == 0:
            ai = a1
        else:
            ak = (a1, a2) if a1 <= a2 else (a2, a1)
            ai = self.ea_sum_cache.get(ak)
            if ai is None:
                ai = self.ea_id(self._exparg_add(self.eas[a1], self.eas[a2]))
                self.ea_sum_cache[ak] = ai
        return mi * base + ai

    def co_mul(self, i, j):
        k = (i, j) if i <= j else (j, i)
        r = self.co_mul_cache.get(k)
        if r is None:
            r = self.co_id(self.cos[i] * self.cos[j])
            self.co_mul_cache[k] = r
        return r

    def co_add(self, i, j):
        """Id of the sum, or -1 when the sum is zero."""
        k = (i, j) if i <= j else (j, i)
        r = self.co_add_cache.get(k)
        if r is None:
            s = self.cos[i] + self.cos[j]
            r = -1 if s.is_zero() else self.co_id(s)
            self.co_add_cache[k] = r
        return r

    def co_neg(self, i):
        r = self.co_neg_cache.get(i)
        if r is None:
            r = self.co_id(-self.cos[i])
            self.co_neg_cache[i] = r
        return r


def _subset_sweep(rows, arena):
    """Run the row-by-row Laplace expansion over column subsets.

    ``rows`` are encoded rows (lists of (key, coeff-id) term lists per
    column).  Returns the map {final column mask -> term map} after all rows
    are processed, where a term map is {key: coeff-id}.  Rows are visited
    sparsest first; the returned masks carry the sign convention of that
    visit order, which the caller corrects via the permutation parity."""
    n = len(rows)
    ncols = len(rows[0])
    visit = sorted(range(n),
                   key=lambda r: (sum(len(c) for c in rows[r]), r))
    sign = _perm_parity(visit)
    key_mul = arena.key_mul
    co_mul = arena.co_mul
    co_add = arena.co_add
    co_neg = arena.co_neg
    cur = {0: {0: arena.co_id(Coefficient.ONE)}}
    for r in visit:
        row = rows[r]
        nxt = {}
        for mask, tmap in cur.items():
            if not tmap:
                continue
            for j in range(ncols):
                if mask & (1 << j):
                    continue
                entry = row[j]
                if not entry:
                    continue
                neg = bin(mask >> (j + 1)).count("1") & 1
                key = mask | (1 << j)
                acc = nxt.get(key)
                if acc is None:
                    acc = {}
                    nxt[key] = acc
                for k2, c2 in entry:
                    if neg:
                        c2 = co_neg(c2)
                    for k1, c1 in tmap.items():
                        kk = key_mul(k1, k2)
                        prev = acc.get(kk)
                        if prev is None:
                            acc[kk] = co_mul(c1, c2)
                        else:
                            s = co_add(prev, co_mul(c1, c2))
                            if s < 0:
                                del acc[kk]
                            else:
                                acc[kk] = s
        cur = nxt
        if not cur:
            break
    return cur, sign


def _det_subsets(rows):
    """Division-free determinant: Laplace expansion row by row with the
    partial minors memoized per column subset."""
    n = len(rows)
    lat = _TrigLattice.build(rows)
    if lat is not None:
        try:
            return lat.det(list(range(n)))
        except OverflowError:
            pass
    arena = _DPArena()
    enc = [[arena.encode(e) for e in row] for row in rows]
    cur, sign = _subset_sweep(enc, arena)
    tmap = cur.get((1 << n) - 1)
    if not tmap:
        return Expr.ZERO
    det = arena.decode(tmap)
    return det if sign > 0 else -det


class _TrigLattice:
    """Packed-integer fast lane for matrices of pure trigonometric entries.

    Eligible entries are monomial-free sums c * exp(arg) whose coefficients
    live in Z[i, sqrt(d)] / 2^s for at most one square-free d and whose exp
    arguments lie on an integer lattice spanned by one unit per symbol
    direction.  Terms then pack into an int64 key per lattice point and a
    pair of exactly-represented complex values (the rational lane a and the
    sqrt(d) lane b, value a + b*sqrt(d)), so subset sweeps run on numpy
    arrays with the product rule (a1+b1*r)(a2+b2*r) = (a1*a2 + d*b1*b2) +
    (a1*b2 + b1*a2)*r.  All lane values are integers scaled by a power of
    two; every state carries per-lane L1 bounds (sum of |re| + |im|) that
    majorize each product and every partial sum formed while merging, so
    keeping the bounds below 2^52 (half the 53-bit exact-integer range,
    leaving margin for rounding of the bounds themselves) guarantees the
    doubles never round and the lane stays exact.  Overflow raises and the
    caller falls back to the generic path.
    """

    _SUM_LIMIT = float(1 << 52)

    def __init__(self, rows, axes, units, bits, offs, shifts, surd):
        self.rows = rows
        self.axes = axes
        self.units = units
        self.bits = bits
        self.offs = offs
        self.shifts = shifts
        self.surd = surd
        self.n = len(rows)
        self.base_key = sum(o << s for o, s in zip(offs, shifts))
        self.enc = [[self._encode(e) for e in row] for row in rows]

    @staticmethod
    def build(rows):
        try:
            return _TrigLattice._build(rows)
        except OverflowError:
            return None

    @staticmethod
    def _build(rows):
        n = len(rows)
        surd = 0
        axis_unit = {}
        axis_ratios = {}
        for row in rows:
            for e in row:
                for c, m, a in e.terms:
                    if m:
                        return None
                    for d, _re, _im in c.parts:
                        if d == 1:
                            continue
                        if surd and d != surd:
                            return None
                        surd = d
                    if _surd_parts(c, surd) is None:
                        return None
                    for mono, cc in a:
                        base = axis_unit.get(mono)
                        if base is None:
                            axis_unit[mono] = cc
                            axis_ratios[mono] = [Fraction(1)]
                            continue
                        q = (cc * base.inverse())
                        parts = q.parts
                        if len(parts) != 1 or parts[0][0] != 1 or parts[0][2]:
                            return None
                        axis_ratios[mono].append(parts[0][1])
        if not axis_unit:
            return None
        axes = sorted(axis_unit, key=_mono_key)
        units = []
        emax = []
        for mono in axes:
            dens = 1
            for r in axis_ratios[mono]:
                dens = dens * r.denominator // math.gcd(dens, r.denominator)
            unit = axis_unit[mono] * Coefficient.rational(Fraction(1, dens))
            units.append(unit)
            m = 1
            for r in axis_ratios[mono]:
                m = max(m, abs(int(r * dens)))
            emax.append(m)
        bits = []
        offs = []
        shifts = []
        shift = 0
        for m in emax:
            off = n * m
            b = (2 * off + 1).bit_length()
            bits.append(b)
            offs.append(off)
            shifts.append(shift)
            shift += b
        if shift > 62:
            return None
        return _TrigLattice(rows, axes, units, bits, offs, shifts, surd)

    def _encode(self, e):
        axis_index = {m: i for i, m in enumerate(self.axes)}
        smax = 0
        raw = []
        for c, _m, a in e.terms:
            ra, ia, rb, ib, s = _surd_parts(c, self.surd)
            key = self.base_key
            for mono, cc in a:
                i = axis_index[mono]
                q = cc * self.units[i].inverse()
                exp = int(q.parts[0][1])
                key += exp << self.shifts[i]
            raw.append((key, ra, ia, rb, ib, s))
            smax = max(smax, s)
        keys = []
        va = []
        vb = []
        na = 0
        nb = 0
        for key, ra, ia, rb, ib, s in raw:
            sh = smax - s
            ra, ia, rb, ib = ra << sh, ia << sh, rb << sh, ib << sh
            na += abs(ra) + abs(ia)
            nb += abs(rb) + abs(ib)
            keys.append(key)
            va.append(complex(ra, ia))
            vb.append(complex(rb, ib))
        if float(max(na, nb)) >= self._SUM_LIMIT:
            raise OverflowError("trig fast lane entry outside the exact range")
        return (np.array(keys, dtype=np.int64),
                np.array(va, dtype=np.complex128),
                np.array(vb, dtype=np.complex128), smax,
                float(na), float(nb))

    def _compress(self, keys, va, vb):
        uniq, inv = np.unique(keys, return_inverse=True)
        ra = np.bincount(inv, weights=va.real, minlength=len(uniq))
        ia = np.bincount(inv, weights=va.imag, minlength=len(uniq))
        rb = np.bincount(inv, weights=vb.real, minlength=len(uniq))
        ib = np.bincount(inv, weights=vb.imag, minlength=len(uniq))
        nz = (ra != 0.0) | (ia != 0.0) | (rb != 0.0) | (ib != 0.0)
        out_a = ra[nz] + 1j * ia[nz]
        out_b = rb[nz] + 1j * ib[nz]
        if out_a.size:
            na = float(np.sum(np.abs(out_a.real)) + np.sum(np.abs(out_a.imag)))
            nb = float(np.sum(np.abs(out_b.real)) + np.sum(np.abs(out_b.imag)))
        else:
            na = nb = 0.0
        return uniq[nz], out_a, out_b, na, nb

    def _sweep(self, row_ids):
        """Subset sweep over the given rows; returns ({mask: state}, sign)
        with states (keys, va, vb, scale, na, nb)."""
        ncols = self.n
        d = float(self.surd)
        visit = sorted(row_ids,
                       key=lambda r: (sum(len(c.terms) for c in self.rows[r]),
                                      r))
        order = [sorted(row_ids).index(r) for r in visit]
        sign = _perm_parity(order)
        base = self.base_key
        cur = {0: (np.array([base], dtype=np.int64),
                   np.array([1.0 + 0.0j]), np.array([0.0 + 0.0j]),
                   0, 1.0, 0.0)}
        for r in visit:
            row = self.enc[r]
            pieces = {}
            for mask, (k1, a1, b1, s1, na1, nb1) in cur.items():
                for j in range(ncols):
                    if mask & (1 << j):
                        continue
                    k2, a2, b2, s2, na2, nb2 = row[j]
                    if k2.size == 0:
                        continue
                    kk = (k1[:, None] + k2[None, :] - base).ravel()
                    aa = (a1[:, None] * a2[None, :]).ravel()
                    bb = (a1[:, None] * b2[None, :]
                          + b1[:, None] * a2[None, :]).ravel()
                    if d:
                        aa = aa + d * (b1[:, None] * b2[None, :]).ravel()
                    if bin(mask >> (j + 1)).count("1") & 1:
                        aa = -aa
                        bb = -bb
                    na = na1 * na2 + d * nb1 * nb2
                    nb = na1 * nb2 + nb1 * na2
                    pieces.setdefault(mask | (1 << j), []).append(
                        (kk, aa, bb, s1 + s2, na, nb))
            nxt = {}
            for mask, plist in pieces.items():
                smax = max(p[3] for p in plist)
                bound = max(
                    sum(p[4] * float(1 << (smax - p[3])) for p in plist),
                    sum(p[5] * float(1 << (smax - p[3])) for p in plist))
                if bound >= self._SUM_LIMIT:
                    raise OverflowError("trig fast lane left the exact range")
                kcat = np.concatenate([p[0] for p in plist])
                acat = np.concatenate(
                    [p[1] * float(1 << (smax - p[3])) for p in plist])
                bcat = np.concatenate(
                    [p[2] * float(1 << (smax - p[3])) for p in plist])
                keys, va, vb, na, nb = self._compress(kcat, acat, bcat)
                if keys.size:
                    nxt[mask] = (keys, va, vb, smax, na, nb)
            cur = nxt
            if not cur:
                break
        return cur, sign

    def _decode(self, state):
        keys, va, vb, scale, _na, _nb = state
        axis_count = len(self.axes)
        terms = []
        den = 1 << scale
        root = Coefficient.sqrt_int(self.surd) if self.surd else None
        for key, a, b in zip(keys.tolist(), va.tolist(), vb.tolist()):
            items = []
            for i in range(axis_count):
                field = (key >> self.shifts[i]) & ((1 << self.bits[i]) - 1)
                exp = field - self.offs[i]
                if exp:
                    items.append(
                        (self.axes[i],
                         self.units[i] * Coefficient.from_int(exp)))
            items.sort(key=lambda e: _mono_key(e[0]), reverse=True)
            c = Coefficient.rational(
                Fraction(int(a.real), den), Fraction(int(a.imag), den))
            if b:
                c = c + Coefficient.rational(
                    Fraction(int(b.real), den),
                    Fraction(int(b.imag), den)) * root
            terms.append((c, (), tuple(items)))
        terms.sort(key=_term_sort_key, reverse=True)
        return Expr(tuple(terms))

    def det(self, row_ids):
        cur, sign = self._sweep(row_ids)
        state = cur.get((1 << self.n) - 1)
        if state is None:
            return Expr.ZERO
        e = self._decode(state)
        return e if sign > 0 else -e

    def cofactor_row(self, m):
        """All cofactors C[m][l] of row m (0-based), as Exprs."""
        others = [r for r in range(self.n) if r != m]
        cur, sign = self._sweep(others)
        full = (1 << self.n) - 1
        out = []
        for l in range(self.n):
            state = cur.get(full ^ (1 << l))
            if state is None:
                out.append(Expr.ZERO)
                continue
            e = self._decode(state)
            flip = sign * (-1 if (m + l) & 1 else 1)
            out.append(e if flip > 0 else -e)
        return out


def _surd_parts(c, surd):
    """Split c into integer lanes (ra, ia, rb, ib, scale) so that
    c = (ra + i*ia + (rb + i*ib) * sqrt(surd)) / 2^scale, or None when c
    involves other radicals or non-dyadic denominators.  surd = 0 admits
    only the rational lane."""
    lanes = {1: (Fraction(0), Fraction(0)), surd: (Fraction(0), Fraction(0))}
    for d, re, im in c.parts:
        if d not in lanes or (d == surd and surd <= 1):
            return None
        lanes[d] = (re, im)
    ra, ia = lanes[1]
    rb, ib = lanes.get(surd, (Fraction(0), Fraction(0))) if surd else \
        (Fraction(0), Fraction(0))
    s = 0
    for f in (ra, ia, rb, ib):
        den = f.denominator
        if den & (den - 1):
            return None
        s = max(s, den.bit_length() - 1)
    return (int(ra * (1 << s)), int(ia * (1 << s)),
            int(rb * (1 << s)), int(ib * (1 << s)), s)


def _exact_det(m):
    n, mm = m.shape
    if n != mm:
        raise AlgebraError("determinant needs a square matrix")
    if n <= _DP_LIMIT:
        return _det_subsets([list(r) for r in m.rows])
    return _bareiss_det(m)


def _bareiss_det(m):
    """Exact determinant by fraction-free forward elimination."""
    n, mm = m.shape
    if n != mm:
        raise AlgebraError("determinant needs a square matrix")
    rows = [list(r) for r in m.rows]
    prev = Expr.ONE
    sign = 1
    for k in range(n):
        sel = _pick_pivot(rows, k, k)
        if sel is None:
            return Expr.ZERO
        if sel != k:
            rows[k], rows[sel] = rows[sel], rows[k]
            sign = -sign
        piv = rows[k][k]
        for i in range(k + 1, n):
            fik = rows[i][k]
            for j in range(k + 1, n):
                num = piv * rows[i][j] - fik * rows[k][j]
                rows[i][j] = _exact_quot(num, prev)
            rows[i][k] = Expr.ZERO
        prev = piv
    return prev if sign > 0 else -prev


def _montante_solve(a_rows, b_col):
    """Solve A x = b by fraction-free Gauss-Jordan.

    Returns (den, nums) with x_l = nums[l] / den exactly; raises
    SingularCouplingError when A is structurally singular.
    """
    n = len(a_rows)
    rows = [list(r) + [b] for r, b in zip(a_rows, b_col)]
    prev = Expr.ONE
    for k in range(n):
        sel = _pick_pivot(rows, k, k)
        if sel is None:
            raise SingularCouplingError(
                "coupling matrix is structurally singular (det identically 0)")
        if sel != k:
            rows[k], rows[sel] = rows[sel], rows[k]
        piv = rows[k][k]
        for i in range(n):
            if i == k:
                continue
            fik = rows[i][k]
            for j in range(n + 1):
                if j == k:
                    continue
                num = piv * rows[i][j] - fik * rows[k][j]
                rows[i][j] = _exact_quot(num, prev)
            rows[i][k] = Expr.ZERO
        prev = piv
    # after full Jordan elimination every diagonal entry equals the last
    # pivot, so each solution component is aug_l / prev
    for i in range(n):
        if rows[i][i] != prev:
            raise AssertionError("elimination endpoint lost its normal form")
    return prev, [rows[i][n] for i in range(n)]


def coupled_odes(a, coupling=None):
    """The system eta = i * xi^T * dLambda/dt in matrix form."""
    if coupling is None:
        coupling = coupling_matrix(a)
    mat = coupling.xi.transpose().scale(Coefficient.I)
    return CoupledSystem(coupling=coupling, matrix=mat,
                         coordinates=a.coordinate_symbols(),
                         inputs=a.eta_symbols())


def _cramer_solve(a_rows, b_col):
    """Solve A x = b by column replacement: one subset sweep over the
    augmented matrix [A | b] yields det(A) and every replaced-column
    determinant at once (the full masks that omit one column each).
    Pure trigonometric systems instead assemble the numerators from the
    fast-lane cofactor rows, keeping the b symbols out of the sweep."""
    n = len(a_rows)
    lat = _TrigLattice.build(a_rows)
    if lat is not None:
        try:
            det = lat.det(list(range(n)))
            if det.is_zero():
                raise SingularCouplingError(
                    "coupling matrix is structurally singular "
                    "(det identically 0)")
            nums = [Expr.ZERO] * n
            for m in range(n):
                cof = lat.cofactor_row(m)
                for l in range(n):
                    if not cof[l].is_zero():
                        nums[l] = nums[l] + cof[l] * b_col[m]
            return det, nums
        except OverflowError:
            pass
    arena = _DPArena()
    enc = [[arena.encode(e) for e in row] + [arena.encode(b_col[i])]
           for i, row in enumerate(a_rows)]
    cur, sign = _subset_sweep(enc, arena)

    def grab(mask, flip):
        tmap = cur.get(mask)
        if not tmap:
            return Expr.ZERO
        e = arena.decode(tmap)
        return e if (sign * flip) > 0 else -e

    det = grab((1 << n) - 1, 1)
    if det.is_zero():
        raise SingularCouplingError(
            "coupling matrix is structurally singular (det identically 0)")
    full = (1 << (n + 1)) - 1
    nums = []
    for l in range(n):
        # the b column sits last; moving it into slot l crosses n-1-l columns
        flip = -1 if (n - 1 - l) & 1 else 1
        nums.append(grab(full ^ (1 << l), flip))
    return det, nums


def _solve_system(a, inputs, coupling):
    xi_t = coupling.xi.transpose()
    b_col = [Expr.symbol(s) for s in inputs]
    rows = [list(r) for r in xi_t.rows]
    if a.order <= _DP_LIMIT:
        den, nums = _cramer_solve(rows, b_col)
    else:
        den, nums = _montante_solve(rows, b_col)
    rhs = tuple(RationalExpr(num, den) for num in nums)
    if all(r.den.is_one() for r in rhs):
        note = ""
    else:
        note = ("locally valid: right-hand sides hold away from the "
                f"singular locus det = 0, det = {render(coupling.det, 'text')}")
    return rhs, note


def decoupled_odes(a, coupling=None):
    """Exact decoupled time-evolution system i*dLambda/dt = (xi^T)^-1 eta."""
    if coupling is None:
        coupling = coupling_matrix(a)
    if coupling.det.is_zero():
        raise SingularCouplingError(
            "coupling matrix is structurally singular (det identically 0)")
    inputs = a.eta_symbols()
    rhs, note = _solve_system(a, inputs, coupling)
    return ODESystem(kind="TimeEvolution", rhs=rhs, coupling=coupling,
                     coordinates=a.coordinate_symbols(), inputs=inputs,
                     singular_locus_note=note)


def factorization_odes(a, coupling=None):
    """Theta-parametrized system dLambda/dtheta = (xi^T)^-1 lambda.

    Same shape as the time-evolution system but driven by the constant
    lambda coefficients and with no imaginary unit; integrating from 0 to
    theta = 1 yields the BCH-like relations.
    """
    if coupling is None:
        coupling = coupling_matrix(a)
    if coupling.det.is_zero():
        raise SingularCouplingError(
            "coupling matrix is structurally singular (det identically 0)")
    inputs = tuple(small_lambda_sym(l) for l in range(1, a.order + 1))
    rhs, note = _solve_system(a, inputs, coupling)
    return ODESystem(kind="Factorization", rhs=rhs, coupling=coupling,
                     coordinates=a.coordinate_symbols(), inputs=inputs,
                     singular_locus_note=note)


def similarity_transform(a, i, j):
    """Row j of the BCH matrix b^i as an algebra vector.

    Returns (LieVector, rendering).  The vector expands
    e^(coord_i ad_i) g_j in the generator basis.
    """
    for idx in (i, j):
        if not 1 <= idx <= a.order:
            raise AlgebraError(f"index {idx} out of range 1..{a.order}")
    coords = a.coordinate_symbols()
    b_i = sym_exp(transverse_matrix(a, i).m, coords[i - 1])
    vec = LieVector(coeffs=tuple(b_i.rows[j - 1]))
    return vec, vec.render("text")


def nested_similarity(a, chain, v):
    """Apply a chain of scaled BCH matrices to an algebra vector.

    ``chain`` lists (generator index, scale expression); the vector row is
    multiplied on the right by each BCH matrix in the listed order, so the
    chain [(2, L2), (1, L1)] applied to the basis row e_j reproduces row j
    of b^2 b^1.  An empty chain returns the vector unchanged.
    """
    if isinstance(v, LieVector):
        coeffs = list(v.coeffs)
    else:
        coeffs = [_as_expr(x) for x in v]
    if len(coeffs) != a.order:
        raise AlgebraError(
            f"vector length {len(coeffs)} does not match order {a.order}")
    row = SymMatrix([coeffs])
    for idx, scale in chain:
        if not 1 <= idx <= a.order:
            raise AlgebraError(f"index {idx} out of range 1..{a.order}")
        b = sym_exp_scaled(transverse_matrix(a, idx).m, _as_expr(scale))
        row = row @ b
    return LieVector(coeffs=tuple(row.rows[0]))


# -- closed-form BCH relations for the three-generator family ---------------


def _sinhc(nu):
    if abs(nu) < 1e-4:
        nu2 = nu * nu
        return 1.0 + nu2 / 6.0 + nu2 * nu2 / 120.0 + nu2 * nu2 * nu2 / 5040.0
    return cmath.sinh(nu) / nu


def bch_closed_form_3gen(lambda1, lambda2, lambda3, upsilon, epsilon):
    """Closed-form factorization coefficients for the three-generator
    algebra family [g1,g2] = -u g1, [g1,g3] = -2e g2, [g2,g3] = -u g3.

    Maps exp(l1 g1 + l2 g2 + l3 g3) to (L1, L2, L3) with
    exp(l1 g1 + l2 g2 + l3 g3) = exp(L1 g1) exp(L2 g2) exp(L3 g3):

        nu^2 = (u*l2/2)^2 - e*u*l1*l3
        L1 = l1 * sinhc(nu) / Q,   L3 = l3 * sinhc(nu) / Q
        L2 = -(2/u) * ln(Q),       Q  = cosh(nu) - (u*l2/2) * sinhc(nu)

    Raises BranchSingularityError when Q vanishes (the factorization branch
    does not exist there).
    """
    u = complex(upsilon)
    e = complex(epsilon)
    if u == 0:
        raise ValueError("upsilon must be nonzero")
    l1, l2, l3 = complex(lambda1), complex(lambda2), complex(lambda3)
    nu = cmath.sqrt((u * l2 / 2.0) ** 2 - e * u * l1 * l3)
    s = _sinhc(nu)
    q = cmath.cosh(nu) - (u * l2 / 2.0) * s
    if abs(q) < 1e-14:
        raise BranchSingularityError(
            "branch singularity: cosh(nu) - (upsilon*lambda2/2)*sinhc(nu) "
            "vanished; the factorization coefficients diverge here")
    big1 = l1 * s / q
    big3 = l3 * s / q
    big2 = -(2.0 / u) * cmath.log(q)
    return big1, big2, big3


# -- su(2) unitarity constraints -------------------------------------------


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    residual: float          # None for a degenerate-consistent constraint
    status: str              # "pass" | "fail" | "degenerate-consistent"


@dataclass(frozen=True)
class UnitarityReport:
    constraints: tuple
    tol: float

    @property
    def ok(self):
        return all(c.status != "fail" for c in self.constraints)

    def lines(self):
        out = []
        for c in self.constraints:
            r = "-" if c.residual is None else f"{c.residual:.3e}"
            out.append(f"{c.name}: residual {r} [{c.status}]")
        return out


def unitarity_check_su2(big1, big2, big3, tol=1e-8):
    """Check the three unitarity constraints of the su(2) propagator
    U = e^(-L2/2) [[e^L2 + L1 L3, L1], [L3, 1]]:

      1. |L3| = |L1|
      2. e^(Re L2) = 1 + |L1|^2
      3. e^(i Im L2) + e^(i (phi1 + phi3)) = 0

    With |L1| = 0 the phases in constraint 3 carry no content and the
    constraint is reported as degenerate-consistent.
    """
    l1, l2, l3 = complex(big1), complex(big2), complex(big3)
    checks = []
    r1 = abs(abs(l3) - abs(l1))
    checks.append(ConstraintCheck(
        "modulus-match |L3| = |L1|", r1,
        "pass" if r1 <= tol else "fail"))
    r2 = abs(math.exp(l2.real) - (1.0 + abs(l1) ** 2))
    checks.append(ConstraintCheck(
        "amplitude e^(Re L2) = 1 + |L1|^2", r2,
        "pass" if r2 <= tol else "fail"))
    if abs(l1) == 0.0 or abs(l3) == 0.0:
        checks.append(ConstraintCheck(
            "phase e^(i Im L2) + e^(i(phi1 + phi3)) = 0", None,
            "degenerate-consistent"))
    else:
        phi1 = cmath.phase(l1)
        phi3 = cmath.phase(l3)
        r3 = abs(cmath.exp(1j * l2.imag) + cmath.exp(1j * (phi1 + phi3)))
        checks.append(ConstraintCheck(
            "phase e^(i Im L2) + e^(i(phi1 + phi3)) = 0", r3,
            "pass" if r3 <= tol else "fail"))
    return UnitarityReport(constraints=tuple(checks), tol=tol)
