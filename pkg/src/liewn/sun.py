"""su(N) basis factories and explicit symbolic time-evolution operators.

Builds the generic Cartan-Weyl basis for su(N) (single-entry root matrices
around a diagonal Cartan block ladder), the Gell-Mann basis for su(3), and
assembles the ordered product of symbolic exponentials U = prod exp(s_l g_l)
as an explicit N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .matexp import sym_exp_scaled
from .symcore import Coefficient, Expr, SymMatrix, lambda_sym

__all__ = [
    "GeneratorSet",
    "explicit_teo",
    "gellmann_generators",
    "sun_generators",
]


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered matrix generators with role labels.

    ``labels[l]`` is ("positive-root", n, k), ("cartan", j) or
    ("negative-root", n, k) for the generator at 1-based position l+1.
    """

    dim: int
    mats: tuple
    labels: tuple

    @property
    def order(self):
        return len(self.mats)

    def __iter__(self):
        return iter(self.mats)

    def __getitem__(self, l):
        """1-based generator access."""
        if not 1 <= l <= len(self.mats):
            raise IndexError(f"generator index out of range 1..{len(self.mats)}")
        return self.mats[l - 1]


def _single_entry(dim, n, k):
    """dim x dim matrix with a lone 1 at 1-based entry (n, k)."""
    rows = [[Expr.ZERO] * dim for _ in range(dim)]
    rows[n - 1][k - 1] = Expr.ONE
    return SymMatrix(rows)


def _cartan(dim, j):
    rows = [[Expr.ZERO] * dim for _ in range(dim)]
    rows[j - 1][j - 1] = Expr.ONE
    rows[j][j] = -Expr.ONE
    return SymMatrix(rows)


def _f1(dim, n, k):
    # exact rational evaluation; the result must land on an integer
    v = Fraction(k) + dim * (n - 1) - Fraction(n, 2) * (n + 1)
    if v.denominator != 1:
        raise AssertionError(f"positive-root index f1({n},{k}) not integral")
    return int(v)


def _f2(n, k):
    v = Fraction(k) + Fraction((n - 1) * (n - 2), 2)
    if v.denominator != 1:
        raise AssertionError(f"negative-root index f2({n},{k}) not integral")
    return int(v)


def sun_generators(N):
    """Cartan-Weyl basis of su(N): positive roots, Cartan, negative roots.

    Positive-root generators are the above-diagonal single-entry matrices at
    positions f1(n,k); the N-1 Cartan generators diag(..,1,-1,..) follow;
    negative roots (below diagonal) close the list at offset (N^2+N-2)/2 +
    f2(n,k).  The placement is checked to be a bijection onto 1..N^2-1.
    """
    if not isinstance(N, int) or N < 2:
        raise ValueError(f"su(N) needs an integer N >= 2, got {N!r}")
    order = N * N - 1
    half = N * (N - 1) // 2
    slots = {}
    for n in range(1, N + 1):
        for k in range(n + 1, N + 1):
            slots[_f1(N, n, k)] = (_single_entry(N, n, k),
                                   ("positive-root", n, k))
    for j in range(1, N):
        slots[half + j] = (_cartan(N, j), ("cartan", j))
    neg_base = (N * N + N - 2) // 2
    for n in range(1, N + 1):
        for k in range(1, n):
            slots[neg_base + _f2(n, k)] = (_single_entry(N, n, k),
                                           ("negative-root", n, k))
    if sorted(slots) != list(range(1, order + 1)):
        raise AssertionError("generator index maps do not cover 1..N^2-1")
    mats = tuple(slots[l][0] for l in range(1, order + 1))
    labels = tuple(slots[l][1] for l in range(1, order + 1))
    return GeneratorSet(dim=N, mats=mats, labels=labels)


def gellmann_generators():
    """The eight Gell-Mann matrices, exact (i and sqrt(3) as coefficients)."""
    one = Coefficient.ONE
    i = Coefficient.I
    inv_sqrt3 = Coefficient.sqrt_int(3) * Coefficient.rational(Fraction(1, 3))
    specs = (
        {(1, 2): one, (2, 1): one},
        {(1, 2): -i, (2, 1): i},
        {(1, 1): one, (2, 2): -one},
        {(1, 3): one, (3, 1): one},
        {(1, 3): -i, (3, 1): i},
        {(2, 3): one, (3, 2): one},
        {(2, 3): -i, (3, 2): i},
        {(1, 1): inv_sqrt3, (2, 2): inv_sqrt3,
         (3, 3): Coefficient.from_int(-2) * inv_sqrt3},
    )
    mats = []
    labels = []
    for idx, spec in enumerate(specs, start=1):
        rows = [[Expr.ZERO] * 3 for _ in range(3)]
        for (r, c), v in spec.items():
            rows[r - 1][c - 1] = Expr.coefficient(v)
        mats.append(SymMatrix(rows))
        labels.append(("gellmann", idx))
    return GeneratorSet(dim=3, mats=tuple(mats), labels=tuple(labels))


def explicit_teo(g, symbols=None):
    """Ordered product prod_l exp(symbols[l] * g[l]) as one N x N matrix.

    ``symbols`` defaults to Lambda_1..Lambda_L; entries may be Symbols or
    expressions.  Raises the matexp unsupported-class error when a generator
    has no exact symbolic exponential.
    """
    mats = tuple(g)
    if symbols is None:
        scales = [Expr.symbol(lambda_sym(l))
                  for l in range(1, len(mats) + 1)]
    else:
        scales = [s if isinstance(s, Expr) else Expr.symbol(s)
                  for s in symbols]
    if len(scales) != len(mats):
        raise ValueError(
            f"need {len(mats)} coefficient symbols, got {len(scales)}")
    dim = mats[0].shape[0]
    out = SymMatrix.identity(dim)
    for mat, scale in zip(mats, scales):
        out = out @ sym_exp_scaled(mat, scale)
    return out
