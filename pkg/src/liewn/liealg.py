"""Lie algebra structures: structure-constant tensors and algebra objects.

An algebra of order L is described by its structure tensor gamma with
[g_i, g_j] = sum_l gamma[i][j][l] g_l.  Entries are stored for i < j only;
antisymmetry fills the rest.  Coefficients are exact expressions and may
involve declared parameters.  An algebra may additionally carry an explicit
matrix representation of its generators, from which the tensor can also be
derived by solving the commutator expansions exactly.

Public indices are 1-based throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .symcore import (
    Coefficient,
    Expr,
    SymMatrix,
    eta_sym,
    lambda_sym,
    param_sym,
    parse_expr,
    render,
    theta_sym,
    _as_expr,
)

__all__ = [
    "Algebra",
    "StructureTensor",
    "TransverseMatrix",
    "ValidationReport",
    "Finding",
    "AlgebraError",
    "ClosureError",
    "AlgebraFileError",
    "from_structure_constants",
    "from_matrix_generators",
    "validate",
    "transverse_matrix",
    "reorder",
    "algebra_from_dict",
    "load_algebra",
    "shipped_algebra",
    "shipped_algebra_names",
    "algebra_to_dict",
]


class AlgebraError(ValueError):
    """Invalid structure data or indices."""


class ClosureError(AlgebraError):
    """A commutator left the span of the generators."""

    def __init__(self, i, j, message):
        self.pair = (i, j)
        super().__init__(message)


class AlgebraFileError(AlgebraError):
    """An algebra file failed schema or content validation."""


class StructureTensor:
    """Sparse antisymmetric structure tensor, entries stored for i < j."""

    __slots__ = ("order", "_entries")

    def __init__(self, order, entries):
        # entries: dict (i, j) -> dict l -> Expr, with i < j, 1-based
        self.order = order
        self._entries = {
            pair: {l: e for l, e in sup.items() if not e.is_zero()}
            for pair, sup in entries.items()
        }
        self._entries = {p: s for p, s in self._entries.items() if s}

    def gamma(self, i, j, l):
        """Entry gamma[i][j][l]; antisymmetry applied for i >= j."""
        for idx in (i, j, l):
            if not 1 <= idx <= self.order:
                raise AlgebraError(
                    f"index {idx} out of range 1..{self.order}")
        if i == j:
            return Expr.ZERO
        if i < j:
            return self._entries.get((i, j), {}).get(l, Expr.ZERO)
        return -self._entries.get((j, i), {}).get(l, Expr.ZERO)

    def __getitem__(self, key):
        i, j, l = key
        return self.gamma(i, j, l)

    def support(self, i, j):
        """dict l -> Expr for the (possibly sign-flipped) pair."""
        if i == j:
            return {}
        if i < j:
            return dict(self._entries.get((i, j), {}))
        return {l: -e for l, e in self._entries.get((j, i), {}).items()}

    def upper_entries(self):
        """Iterate (i, j, l, Expr) over stored entries, i < j, sorted."""
        for (i, j) in sorted(self._entries):
            for l in sorted(self._entries[(i, j)]):
                yield i, j, l, self._entries[(i, j)][l]


@dataclass(frozen=True)
class TransverseMatrix:
    """Row-indexed slice of the structure tensor for one generator.

    ``m.at(j, l) = gamma[index][j][l]``; exponentiating ``index``-th
    coordinate times this matrix gives the corresponding BCH matrix.
    """

    index: int
    m: SymMatrix


@dataclass(frozen=True)
class Finding:
    kind: str          # "antisymmetry" | "jacobi" | "representation"
    indices: tuple
    detail: str

    def line(self):
        idx = ",".join(str(i) for i in self.indices)
        return f"{self.kind}({idx}): {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = ()

    @property
    def ok(self):
        return not self.findings

    def lines(self):
        if self.ok:
            return ["valid"]
        return [f.line() for f in self.findings]


@dataclass(frozen=True)
class Algebra:
    """A closed Lie algebra with optional matrix representation."""

    name: str
    order: int
    tensor: StructureTensor
    parameters: tuple = ()
    generators: tuple = None
    coefficient_kind: str = "Lambda"   # "Lambda" | "Theta"

    def coordinate_symbols(self):
        """The factorization coordinates (Lambda_l or Theta_l), 1-based."""
        maker = theta_sym if self.coefficient_kind == "Theta" else lambda_sym
        return tuple(maker(l) for l in range(1, self.order + 1))

    def eta_symbols(self):
        return tuple(eta_sym(l) for l in range(1, self.order + 1))

    def parameter_symbols(self):
        return tuple(param_sym(p) for p in self.parameters)


def _coerce_coeff(value, parameters):
    if isinstance(value, str):
        return parse_expr(value, parameters=parameters)
    return _as_expr(value)


def from_structure_constants(order, entries, parameters=(), name="algebra",
                             generators=None, coefficient_kind="Lambda"):
    """Build an Algebra from upper structure entries (i, j, l, coeff), i < j.

    ``coeff`` may be an Expr, an exact scalar, or a string in the expression
    grammar (parsed with the declared parameter names in scope).
    """
    parameters = tuple(parameters)
    if coefficient_kind not in ("Lambda", "Theta"):
        raise AlgebraError(f"unknown coefficient kind {coefficient_kind!r}")
    store = {}
    seen = set()
    for entry in entries:
        try:
            i, j, l, coeff = entry
        except Exception:
            raise AlgebraError(f"malformed structure entry {entry!r}")
        for idx in (i, j, l):
            if not isinstance(idx, int) or not 1 <= idx <= order:
                raise AlgebraError(f"index {idx} out of range 1..{order}")
        if i >= j:
            raise AlgebraError(
                f"structure entries must have i < j, got ({i},{j},{l})")
        if (i, j, l) in seen:
            raise AlgebraError(f"duplicate structure entry ({i},{j},{l})")
        seen.add((i, j, l))
        e = _coerce_coeff(coeff, parameters)
        if e.is_zero():
            continue
        store.setdefault((i, j), {})[l] = e
    tensor = StructureTensor(order, store)
    gens = None
    if generators is not None:
        gens = tuple(g if isinstance(g, SymMatrix) else SymMatrix(g)
                     for g in generators)
    return Algebra(name=name, order=order, tensor=tensor,
                   parameters=parameters, generators=gens,
                   coefficient_kind=coefficient_kind)


# -- exact linear solve machinery for matrix generators ---------------------


def _rref_with_transform(rows):
    """Row-reduce ``rows`` (list of list of Expr) tracking the transform.

    Returns (R, T, pivots) with T @ rows = R and pivots the list of
    (row, col) pivot positions.
    """
    n = len(rows)
    m = len(rows[0]) if n else 0
    R = [list(r) for r in rows]
    T = [[Expr.ONE if i == j else Expr.ZERO for j in range(n)]
         for i in range(n)]
    pivots = []
    prow = 0
    for col in range(m):
        sel = None
        for r in range(prow, n):
            if not R[r][col].is_zero():
                sel = r
                break
        if sel is None:
            continue
        R[prow], R[sel] = R[sel], R[prow]
        T[prow], T[sel] = T[sel], T[prow]
        pin = R[prow][col]._invert_term()
        if pin is None:
            # Entries here are constants, so single-term inversion applies.
            pin = Expr.coefficient(R[prow][col].as_coefficient().inverse())
        R[prow] = [x * pin for x in R[prow]]
        T[prow] = [x * pin for x in T[prow]]
        for r in range(n):
            if r != prow and not R[r][col].is_zero():
                f = R[r][col]
                R[r] = [a - f * b for a, b in zip(R[r], R[prow])]
                T[r] = [a - f * b for a, b in zip(T[r], T[prow])]
        pivots.append((prow, col))
        prow += 1
        if prow == n:
            break
    return R, T, pivots


def _commutator(a, b):
    return a @ b - b @ a


def from_matrix_generators(mats, name="algebra", coefficient_kind="Lambda",
                           parameters=()):
    """Build an Algebra from explicit matrix generators.

    Expands every commutator [g_i, g_j] exactly in the generator basis.
    Raises ClosureError naming the offending pair when a commutator leaves
    the span, and AlgebraError when the generators are linearly dependent.
    """
    gens = tuple(g if isinstance(g, SymMatrix) else SymMatrix(g)
                 for g in mats)
    L = len(gens)
    if L == 0:
        raise AlgebraError("no generators given")
    n, m = gens[0].shape
    for g in gens:
        if g.shape != (n, m):
            raise AlgebraError("generator dimensions disagree")
    if n != m:
        raise AlgebraError("generators must be square matrices")
    # Columns of A are the flattened generators; solve A x = vec(C).
    A = [[gens[k].rows[r][c] for k in range(L)]
         for r in range(n) for c in range(n)]
    R, T, pivots = _rref_with_transform(A)
    if len(pivots) < L:
        raise AlgebraError("generators are linearly dependent")

    def solve(mat):
        b = [mat.rows[r][c] for r in range(n) for c in range(n)]
        tb = []
        for trow in T:
            acc = Expr.ZERO
            for t, x in zip(trow, b):
                if not t.is_zero() and not x.is_zero():
                    acc = acc + t * x
            tb.append(acc)
        x = [Expr.ZERO] * L
        for (prow, col) in pivots:
            x[col] = tb[prow]
        # verify exactly; this covers inconsistent systems as well
        recon = SymMatrix.zeros(n)
        for k in range(L):
            if not x[k].is_zero():
                recon = recon + gens[k].scale(x[k])
        if recon != mat:
            return None
        return x

    entries = []
    for i in range(1, L + 1):
        for j in range(i + 1, L + 1):
            c = _commutator(gens[i - 1], gens[j - 1])
            x = solve(c)
            if x is None:
                raise ClosureError(
                    i, j, f"commutator [g{i}, g{j}] leaves the span of the "
                          f"generators; the algebra does not close")
            for l in range(1, L + 1):
                if not x[l - 1].is_zero():
                    entries.append((i, j, l, x[l - 1]))
    return from_structure_constants(
        L, entries, parameters=parameters, name=name, generators=gens,
        coefficient_kind=coefficient_kind)


def validate(a):
    """Check antisymmetry, the Jacobi identity, and (when a representation is
    attached) agreement of the tensor with the matrix commutators.

    Returns a ValidationReport; an empty report means the algebra is valid.
    Findings are data, not exceptions.
    """
    findings = []
    L = a.order
    sup = {}
    for i in range(1, L + 1):
        for j in range(1, L + 1):
            if i != j:
                sup[(i, j)] = a.tensor.support(i, j)
    # antisymmetry is structural (storage is i < j); verify the diagonal
    for i in range(1, L + 1):
        for l in range(1, L + 1):
            if not a.tensor.gamma(i, i, l).is_zero():
                findings.append(Finding(
                    "antisymmetry", (i, i, l), "nonzero diagonal entry"))
    for i in range(1, L + 1):
        for j in range(i + 1, L + 1):
            for k in range(j + 1, L + 1):
                acc = {}
                for (p, q, r) in ((j, k, i), (k, i, j), (i, j, k)):
                    for m_idx, e1 in sup[(p, q)].items():
                        if m_idx == r:
                            continue
                        for l, e2 in sup[(r, m_idx)].items():
                            prev = acc.get(l, Expr.ZERO)
                            acc[l] = prev + e1 * e2
                for l, e in acc.items():
                    if not e.is_zero():
                        findings.append(Finding(
                            "jacobi", (i, j, k),
                            f"component {l} residue {render(e, 'text')}"))
    if a.generators is not None:
        for i in range(1, L + 1):
            for j in range(i + 1, L + 1):
                c = _commutator(a.generators[i - 1], a.generators[j - 1])
                recon = SymMatrix.zeros(a.generators[0].shape[0])
                for l, e in sup[(i, j)].items():
                    recon = recon + a.generators[l - 1].scale(e)
                if recon != c:
                    findings.append(Finding(
                        "representation", (i, j),
                        "tensor disagrees with the matrix commutator"))
    return ValidationReport(tuple(findings))


def transverse_matrix(a, i):
    """The L x L matrix with row j, column l holding gamma[i][j][l]."""
    if not 1 <= i <= a.order:
        raise AlgebraError(f"index {i} out of range 1..{a.order}")
    L = a.order
    rows = []
    for j in range(1, L + 1):
        sup = a.tensor.support(i, j)
        rows.append([sup.get(l, Expr.ZERO) for l in range(1, L + 1)])
    return TransverseMatrix(index=i, m=SymMatrix(rows))


def reorder(a, perm):
    """Relabel generators: new generator a is old generator perm[a-1].

    ``perm`` is a 1-based permutation of 1..L.  Structure entries and the
    representation (if any) are permuted consistently.
    """
    L = a.order
    perm = tuple(perm)
    if sorted(perm) != list(range(1, L + 1)):
        raise AlgebraError(f"not a permutation of 1..{L}: {perm}")
    inv = [0] * (L + 1)
    for newpos, old in enumerate(perm, start=1):
        inv[old] = newpos
    entries = []
    for na in range(1, L + 1):
        for nb in range(na + 1, L + 1):
            sup = a.tensor.support(perm[na - 1], perm[nb - 1])
            for l, e in sup.items():
                entries.append((na, nb, inv[l], e))
    gens = None
    if a.generators is not None:
        gens = tuple(a.generators[perm[k] - 1] for k in range(L))
    return from_structure_constants(
        L, entries, parameters=a.parameters, name=a.name,
        generators=gens, coefficient_kind=a.coefficient_kind)


# -- JSON algebra files -----------------------------------------------------

_ALGEBRA_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "order": {"type": "integer", "minimum": 1},
        "dimension": {"type": "integer", "minimum": 1},
        "parameters": {"type": "array", "items": {"type": "string"}},
        "coefficient_symbols": {"enum": ["lambda", "theta"]},
        "structure": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [
                    {"type": "integer"},
                    {"type": "integer"},
                    {"type": "integer"},
                    {"type": "string"},
                ],
                "minItems": 4,
                "maxItems": 4,
            },
        },
        "generators": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "string"}},
            },
        },
    },
    "required": ["name"],
    "oneOf": [
        {"required": ["order", "structure"], "not": {"required": ["generators"]}},
        {"required": ["dimension", "generators"], "not": {"required": ["structure"]}},
    ],
    "additionalProperties": False,
}


def _schema_check(doc):
    import jsonschema

    validator = jsonschema.Draft202012Validator(_ALGEBRA_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise AlgebraFileError(f"schema violation at {pointer}: {err.message}")


def algebra_from_dict(doc, skip_validation=False):
    """Build an Algebra from a parsed algebra-file dictionary.

    The document carries exactly one of ``structure`` (with ``order``) or
    ``generators`` (with ``dimension``).  Jacobi and representation checks
    run by default; pass skip_validation=True to skip them.
    """
    _schema_check(doc)
    name = doc["name"]
    parameters = tuple(doc.get("parameters", ()))
    kind = "Theta" if doc.get("coefficient_symbols") == "theta" else "Lambda"
    if "structure" in doc:
        entries = []
        for k, item in enumerate(doc["structure"]):
            i, j, l, coeff = item
            try:
                e = parse_expr(coeff, parameters=parameters)
            except ValueError as exc:
                raise AlgebraFileError(
                    f"bad coefficient at /structure/{k}/3: {exc}") from None
            entries.append((i, j, l, e))
        a = from_structure_constants(
            doc["order"], entries, parameters=parameters, name=name,
            coefficient_kind=kind)
    else:
        dim = doc["dimension"]
        mats = []
        for gi, g in enumerate(doc["generators"]):
            if len(g) != dim or any(len(row) != dim for row in g):
                raise AlgebraFileError(
                    f"generator at /generators/{gi} is not {dim}x{dim}")
            rows = []
            for ri, row in enumerate(g):
                out = []
                for ci, cell in enumerate(row):
                    try:
                        e = parse_expr(cell, parameters=parameters)
                    except ValueError as exc:
                        raise AlgebraFileError(
                            f"bad entry at /generators/{gi}/{ri}/{ci}: {exc}"
                        ) from None
                    if e.as_coefficient() is None:
                        raise AlgebraFileError(
                            f"generator entry at /generators/{gi}/{ri}/{ci} "
                            f"is not a constant")
                    out.append(e)
                rows.append(out)
            mats.append(SymMatrix(rows))
        a = from_matrix_generators(mats, name=name, coefficient_kind=kind,
                                   parameters=parameters)
    if not skip_validation:
        report = validate(a)
        if not report.ok:
            raise AlgebraFileError(
                "algebra failed validation: " + "; ".join(report.lines()))
    return a


def load_algebra(path, skip_validation=False):
    """Load an algebra JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AlgebraFileError(f"not valid JSON: {exc}") from None
    return algebra_from_dict(doc, skip_validation=skip_validation)


def algebra_to_dict(a):
    """Serialize an Algebra to the structure-form file dictionary."""
    doc = {"name": a.name, "order": a.order}
    if a.parameters:
        doc["parameters"] = list(a.parameters)
    if a.coefficient_kind == "Theta":
        doc["coefficient_symbols"] = "theta"
    doc["structure"] = [
        [i, j, l, render(e, "text")]
        for i, j, l, e in a.tensor.upper_entries()
    ]
    return doc


_SHIPPED = (
    "table1",
    "su2_pauli",
    "su2_cwb",
    "su3_gellmann",
    "su3_cwb",
    "su4_cwb",
    "coupled_oscillators",
)


def shipped_algebra_names():
    return _SHIPPED


def shipped_algebra(name, skip_validation=False):
    """Load one of the algebra files shipped with the package."""
    from importlib import resources

    if name not in _SHIPPED:
        raise AlgebraError(
            f"unknown shipped algebra {name!r}; available: {', '.join(_SHIPPED)}")
    ref = resources.files("liewn.data").joinpath(f"{name}.json")
    doc = json.loads(ref.read_text(encoding="utf-8"))
    return algebra_from_dict(doc, skip_validation=skip_validation)
