"""Symbolic matrix exponentials for structure matrices.

Classifies a square symbolic matrix and produces exp(s*M) exactly:

* Nilpotent: truncated power series (works with parameterized entries).
* Diagonal: per-entry exponential atoms (works with parameterized entries).
* Spectral: constant entries with exact eigenvalues on the lattice
  (p/q) * i^a * sqrt(d), |p|, q <= 64, d in {1, 2, 3, 5}; the exponential is
  assembled by the Putzer recurrence, so no Jordan forms are needed.

Eigenvalues are found numerically first and then verified exactly against the
characteristic polynomial; a failed verification is reported as Unsupported
rather than silently accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .symcore import (
    Coefficient,
    Expr,
    SymMatrix,
    _as_expr,
)

__all__ = [
    "ExpClass",
    "MatexpError",
    "UnsupportedMatrixError",
    "classify",
    "eigenvalues_exact",
    "sym_exp",
    "sym_exp_scaled",
]


class MatexpError(ValueError):
    """Matrix outside the supported exponential classes or bad input."""


class UnsupportedMatrixError(MatexpError):
    """Eigenvalue structure not representable on the exact lattice."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class ExpClass:
    """Classification result; exactly one payload field is meaningful."""

    tag: str                 # "Nilpotent" | "Diagonal" | "Spectral" | "Unsupported"
    degree: int = None       # Nilpotent: smallest k with M^k = 0
    eigenvalues: tuple = None  # Spectral: ((Coefficient, multiplicity), ...)
    reason: str = ""         # Unsupported


def _as_symmatrix(m):
    return m if isinstance(m, SymMatrix) else SymMatrix(m)


def _is_zero_matrix(m):
    return all(x.is_zero() for row in m.rows for x in row)


def classify(m):
    """Classify a square matrix for symbolic exponentiation."""
    m = _as_symmatrix(m)
    n, mm = m.shape
    if n != mm:
        raise MatexpError("matrix must be square")
    if n == 0:
        return ExpClass(tag="Nilpotent", degree=1)
    power = m
    for k in range(1, n + 1):
        if _is_zero_matrix(power):
            return ExpClass(tag="Nilpotent", degree=k)
        power = power @ m
    if all(m.rows[i][j].is_zero()
           for i in range(n) for j in range(n) if i != j):
        return ExpClass(tag="Diagonal")
    if any(x.as_coefficient() is None for row in m.rows for x in row):
        return ExpClass(
            tag="Unsupported",
            reason="parameterized entries in a matrix that is neither "
                   "nilpotent nor diagonal")
    try:
        eigs = eigenvalues_exact(m)
    except UnsupportedMatrixError as exc:
        return ExpClass(tag="Unsupported", reason=exc.reason)
    return ExpClass(tag="Spectral", eigenvalues=eigs)


# -- exact characteristic polynomial ---------------------------------------


def _const_matrix(m):
    rows = []
    for row in m.rows:
        out = []
        for x in row:
            c = x.as_coefficient()
            if c is None:
                raise MatexpError(
                    "parameterized entries have no numeric spectrum")
            out.append(c)
        rows.append(out)
    return rows


def _cmat_mul(a, b):
    n = len(a)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = Coefficient.ZERO
            for k in range(n):
                if not a[i][k].is_zero() and not b[k][j].is_zero():
                    acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def _cmat_trace(a):
    t = Coefficient.ZERO
    for i in range(len(a)):
        t = t + a[i][i]
    return t


def _char_poly(c):
    """Monic characteristic polynomial coefficients [1, c1, ..., cn],
    computed exactly by the Faddeev-LeVerrier recurrence."""
    n = len(c)
    coeffs = [Coefficient.ONE]
    mk = [row[:] for row in c]
    for k in range(1, n + 1):
        ck = _cmat_trace(mk) * Coefficient.rational(Fraction(-1, k))
        coeffs.append(ck)
        if k == n:
            break
        for i in range(n):
            mk[i][i] = mk[i][i] + ck
        mk = _cmat_mul(c, mk)
    return coeffs


def _poly_eval(coeffs, x):
    acc = Coefficient.ZERO
    for c in coeffs:
        acc = acc * x + c
    return acc


_LATTICE_RADICANDS = (1, 2, 3, 5)
_LATTICE_BOUND = 64


def _snap_root(z, coeffs):
    """Snap a numeric root to a verified exact lattice point, or None."""
    best = None
    for d in _LATTICE_RADICANDS:
        rd = math.sqrt(d)
        cands = []
        if abs(z.imag) < 4e-3:
            fr = Fraction(z.real / rd).limit_denominator(_LATTICE_BOUND)
            if abs(fr.numerator) <= _LATTICE_BOUND:
                if d == 1 or fr != 0:
                    cands.append(Coefficient.sqrt_int(d)
                                 * Coefficient.rational(fr))
        if abs(z.real) < 4e-3:
            fr = Fraction(z.imag / rd).limit_denominator(_LATTICE_BOUND)
            if abs(fr.numerator) <= _LATTICE_BOUND and fr != 0:
                cands.append(Coefficient.sqrt_int(d)
                             * Coefficient.rational(0, 1) * Coefficient.rational(fr))
        for cand in cands:
            if abs(cand.eval() - z) < 5e-3 and _poly_eval(coeffs, cand).is_zero():
                if best is None or abs(cand.eval() - z) < abs(best.eval() - z):
                    best = cand
    return best


def eigenvalues_exact(m):
    """Exact eigenvalues with multiplicities for a constant matrix.

    Returns a deterministically ordered tuple of (Coefficient, multiplicity).
    Raises UnsupportedMatrixError when a root cannot be verified on the
    lattice, and MatexpError on parameterized entries.
    """
    import numpy as np

    m = _as_symmatrix(m)
    n, mm = m.shape
    if n != mm:
        raise MatexpError("matrix must be square")
    c = _const_matrix(m)
    coeffs = _char_poly(c)
    roots = np.roots([x.eval() for x in coeffs])
    counts = {}
    order = {}
    for z in roots:
        cand = _snap_root(complex(z), coeffs)
        if cand is None:
            raise UnsupportedMatrixError(
                f"eigenvalue near {complex(z):.6g} is not on the exact "
                f"lattice (p/q)*i^a*sqrt(d) with |p|,q<=64, d in {{1,2,3,5}}")
        key = cand.parts
        counts[key] = counts.get(key, 0) + 1
        order[key] = cand
    # exact certificate: the product of (x - eig)^mult must reproduce the
    # characteristic polynomial, which pins both values and multiplicities
    prod = [Coefficient.ONE]
    for key, mult in counts.items():
        eig = order[key]
        for _ in range(mult):
            nxt = [Coefficient.ZERO] * (len(prod) + 1)
            for i, a in enumerate(prod):
                nxt[i] = nxt[i] + a
                nxt[i + 1] = nxt[i + 1] - a * eig
            prod = nxt
    if prod != coeffs:
        raise UnsupportedMatrixError(
            "numeric multiplicities failed the exact factorization check")
    out = sorted(((order[k], mult) for k, mult in counts.items()),
                 key=lambda p: p[0].parts)
    return tuple(out)


# -- exponential assembly ---------------------------------------------------


def _putzer_coefficients(eigs_flat):
    """Putzer r_j(s) for the flattened eigenvalue list, exactly.

    Each r_j is a dict (power, eigenvalue) -> Coefficient standing for
    sum c * s^power * e^(eigenvalue*s).  r_1 = e^(lambda1*s); each next
    r_j(s) = integral_0^s e^(lambda_j (s-u)) r_{j-1}(u) du.
    """
    rs = []
    r = {(0, eigs_flat[0].parts): (eigs_flat[0], Coefficient.ONE)}
    rs.append(r)
    for j in range(1, len(eigs_flat)):
        lam_j = eigs_flat[j]
        nxt = {}

        def add(power, eig, coeff):
            key = (power, eig.parts)
            prev = nxt.get(key)
            total = coeff if prev is None else prev[1] + coeff
            nxt[key] = (eig, total)

        for (mpow, _), (mu, c) in r.items():
            alpha = mu - lam_j
            if alpha.is_zero():
                add(mpow + 1, mu, c * Coefficient.rational(
                    Fraction(1, mpow + 1)))
            else:
                inv = alpha.inverse()
                mfact = math.factorial(mpow)
                for k in range(mpow + 1):
                    scale = Coefficient.rational(
                        Fraction((-1) ** (mpow - k) * mfact,
                                 math.factorial(k)))
                    add(k, mu, c * scale * inv ** (mpow + 1 - k))
                bscale = Coefficient.rational(Fraction((-1) ** mpow * mfact))
                add(0, lam_j, -(c * bscale * inv ** (mpow + 1)))
        r = {k: v for k, v in nxt.items() if not v[1].is_zero()}
        rs.append(r)
    return rs


def _piece_expr(power, eig, coeff, scale):
    e = Expr.coefficient(coeff)
    if power:
        e = e * scale ** power
    if not eig.is_zero():
        e = e * Expr.exp(scale * Expr.coefficient(eig))
    return e


def sym_exp_scaled(m, scale):
    """exp(scale * M) as a SymMatrix, with an arbitrary expression scale."""
    m = _as_symmatrix(m)
    scale = _as_expr(scale)
    cls = classify(m)
    n = m.shape[0]
    if cls.tag == "Nilpotent":
        out = SymMatrix.identity(n)
        power = SymMatrix.identity(n)
        for k in range(1, cls.degree):
            power = power @ m
            out = out + power.scale(
                Expr.coefficient(Coefficient.rational(
                    Fraction(1, math.factorial(k)))) * scale ** k)
        return out
    if cls.tag == "Diagonal":
        rows = []
        for i in range(n):
            row = [Expr.ZERO] * n
            d = m.rows[i][i]
            row[i] = Expr.exp(scale * d) if not d.is_zero() else Expr.ONE
            rows.append(row)
        return SymMatrix(rows)
    if cls.tag == "Spectral":
        eigs_flat = []
        for eig, mult in cls.eigenvalues:
            eigs_flat.extend([eig] * mult)
        rs = _putzer_coefficients(eigs_flat)
        out = SymMatrix.zeros(n)
        p = SymMatrix.identity(n)
        for j, r in enumerate(rs):
            rj = Expr.ZERO
            for (power, _), (eig, coeff) in r.items():
                rj = rj + _piece_expr(power, eig, coeff, scale)
            out = out + p.scale(rj)
            if j + 1 < len(rs):
                shift = m - SymMatrix.identity(n).scale(
                    Expr.coefficient(eigs_flat[j]))
                p = p @ shift
        return out
    raise MatexpError(f"unsupported matrix: {cls.reason}")


def sym_exp(m, s):
    """exp(s * M) for a Symbol s, as a SymMatrix of canonical expressions."""
    return sym_exp_scaled(m, Expr.symbol(s))
