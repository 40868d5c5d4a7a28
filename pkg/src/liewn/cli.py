"""Command-line surface for the engine.

Verbs map one-to-one onto library pipelines: load an algebra, derive the
coupled or decoupled coordinate systems, factorization flows, coupling
matrices and BCH matrices, build su(N) bases and explicit evolution
operators, run numeric integrations, verify quantum gates, and replay the
frozen reference fixtures.  Output styles are latex, text, and json; every
result goes to stdout or to --out, and every failure exits nonzero with a
single-line diagnostic.
"""

import argparse
import ast
import cmath
import json
import math
import sys

import numpy as np

from .liealg import (algebra_to_dict, from_matrix_generators, load_algebra,
                     reorder, shipped_algebra, shipped_algebra_names)
from .propagate import (EtaBinding, assemble_teo_numeric, gate_matrix,
                        integrate, qubit_generators, verify_gate)
from .sun import explicit_teo, gellmann_generators, sun_generators
from .symcore import render, render_matrix, symbol_name
from .weinorman import (bch_matrices, coupled_odes, coupling_matrix,
                        decoupled_odes, factorization_odes)
from . import fixtures as fixture_mod

_EMIT_CHOICES = ("latex", "text", "json")


# ---------------------------------------------------------------------------
# scalar expressions on the command line

_SCALAR_NAMES = {
    "i": 1j,
    "j": 1j,
    "pi": complex(math.pi),
    "e": complex(math.e),
    "ln2": complex(math.log(2.0)),
}

_SCALAR_FUNCS = {
    "exp": cmath.exp,
    "log": cmath.log,
    "ln": cmath.log,
    "sqrt": cmath.sqrt,
    "sin": cmath.sin,
    "cos": cmath.cos,
    "tan": cmath.tan,
}


def eval_scalar(text):
    """Evaluate a numeric scalar such as "-1", "ln2-i*pi", "pi/4"."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"cannot parse scalar {text.strip()!r}") from None

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float, complex)):
                return complex(node.value)
            raise ValueError(f"non-numeric literal in {text.strip()!r}")
        if isinstance(node, ast.Name):
            if node.id in _SCALAR_NAMES:
                return _SCALAR_NAMES[node.id]
            raise ValueError(f"unknown name {node.id!r} in scalar "
                             f"{text.strip()!r}")
        if isinstance(node, ast.UnaryOp):
            value = walk(node.operand)
            if isinstance(node.op, ast.USub):
                return -value
            if isinstance(node.op, ast.UAdd):
                return value
        if isinstance(node, ast.BinOp):
            left, right = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                return left / right
            if isinstance(node.op, (ast.Pow, ast.BitXor)):
                return left ** right
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _SCALAR_FUNCS
                and len(node.args) == 1 and not node.keywords):
            return complex(_SCALAR_FUNCS[node.func.id](walk(node.args[0])))
        raise ValueError(f"unsupported scalar syntax in {text.strip()!r}")

    return walk(tree)


def _scalar_list(text, count, what):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != count:
        raise ValueError(f"{what}: expected {count} values, got {len(parts)}")
    return [eval_scalar(p) for p in parts]


def _parse_eta(spec, order):
    if spec.startswith("const:"):
        values = _scalar_list(spec[len("const:"):], order, "--eta")
        return EtaBinding.constant(values)
    with open(spec, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ValueError("--eta spec file must hold a JSON list of "
                         "per-input specs")
    if len(doc) != order:
        raise ValueError(f"--eta spec file: expected {order} specs, "
                         f"got {len(doc)}")
    return EtaBinding.from_specs(doc)


def _parse_params(pairs):
    out = {}
    for pair in pairs or ():
        name, sep, value = pair.partition("=")
        if not sep or not name.strip():
            raise ValueError(f"--param expects name=value, got {pair!r}")
        out[name.strip()] = eval_scalar(value)
    return out


# ---------------------------------------------------------------------------
# shared loading and emission helpers

def _resolve_algebra(args):
    spec = args.algebra
    skip = getattr(args, "no_validate", False)
    if spec.endswith(".json"):
        return load_algebra(spec, skip_validation=skip)
    names = shipped_algebra_names()
    if spec in names:
        return shipped_algebra(spec, skip_validation=skip)
    raise ValueError(f"unknown algebra {spec!r}; shipped names: "
                     f"{', '.join(names)} (or pass a .json path)")


def _emit(args, text):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True)


def _system_json(system):
    obj = {
        "kind": system.kind,
        "coordinates": [symbol_name(s) for s in system.coordinates],
        "inputs": [symbol_name(s) for s in system.inputs],
        "equations": [render(r, style="text") for r in system.rhs],
        "determinant": render(system.coupling.det, style="text"),
    }
    if system.singular_locus_note:
        obj["note"] = system.singular_locus_note
    return obj


def _system_text(system, style):
    lines = [system.render(style=style)]
    det = render(system.coupling.det, style=style)
    lines.append(("\\det \\xi = " if style == "latex" else "det xi = ") + det)
    if system.singular_locus_note:
        lines.append("note: " + system.singular_locus_note)
    return "\n".join(lines)


def _emit_system(args, system):
    if args.emit == "json":
        _emit(args, _json_dumps(_system_json(system)))
    else:
        _emit(args, _system_text(system, args.emit))


def _matrix_json(m):
    return [[render(e, style="text") for e in row] for row in m.rows]


def _emit_matrix(args, name, m):
    if args.emit == "json":
        _emit(args, _json_dumps({name: _matrix_json(m)}))
    else:
        _emit(args, f"{name} =\n{render_matrix(m, style=args.emit)}")


def _generator_text(gens, style):
    blocks = []
    for k in range(1, gens.dim + 1):
        label = gens.labels[k - 1]
        tag = " ".join(str(p) for p in label)
        blocks.append(f"g{k}  [{tag}]\n"
                      f"{render_matrix(gens[k], style=style)}")
    return "\n".join(blocks)


def _generator_json(gens):
    return {
        "dim": gens.dim,
        "labels": [list(label) for label in gens.labels],
        "matrices": [_matrix_json(gens[k]) for k in range(1, gens.dim + 1)],
    }


# ---------------------------------------------------------------------------
# verb implementations

def _cmd_derive(args):
    system = coupled_odes(_resolve_algebra(args))
    if args.emit == "json":
        obj = {
            "coordinates": [symbol_name(s) for s in system.coordinates],
            "inputs": [symbol_name(s) for s in system.inputs],
            "equations": system.render(style="text").splitlines(),
        }
        _emit(args, _json_dumps(obj))
    else:
        _emit(args, system.render(style=args.emit))
    return 0


def _cmd_bch(args):
    bset = bch_matrices(_resolve_algebra(args))
    if args.emit == "json":
        obj = {
            "order": bset.order,
            "matrices": [_matrix_json(m) for m in bset.b],
        }
        _emit(args, _json_dumps(obj))
    else:
        blocks = []
        for k, m in enumerate(bset.b, start=1):
            head = f"B_{{{k}}} =" if args.emit == "latex" else f"B{k} ="
            blocks.append(f"{head}\n{render_matrix(m, style=args.emit)}")
        _emit(args, "\n".join(blocks))
    return 0


def _cmd_coupling(args):
    cm = coupling_matrix(_resolve_algebra(args))
    if args.emit == "json":
        obj = {
            "xi": _matrix_json(cm.xi),
            "det": render(cm.det, style="text"),
        }
        _emit(args, _json_dumps(obj))
    else:
        det = render(cm.det, style=args.emit)
        head = "\\xi =" if args.emit == "latex" else "xi ="
        dhead = "\\det \\xi = " if args.emit == "latex" else "det xi = "
        _emit(args, f"{head}\n{render_matrix(cm.xi, style=args.emit)}\n"
              f"{dhead}{det}")
    return 0


def _cmd_decouple(args):
    _emit_system(args, decoupled_odes(_resolve_algebra(args)))
    return 0


def _cmd_factorize(args):
    _emit_system(args, factorization_odes(_resolve_algebra(args)))
    return 0


def _cmd_reorder(args):
    a = _resolve_algebra(args)
    try:
        perm = tuple(int(p) for p in args.order.split(","))
    except ValueError:
        raise ValueError(f"--order expects integers, got {args.order!r}") \
            from None
    b = reorder(a, perm)
    if args.emit == "json":
        _emit(args, _json_dumps(algebra_to_dict(b)))
        return 0
    grouped = {}
    for i, j, l, coeff in b.tensor.upper_entries():
        grouped.setdefault((i, j), []).append((l, coeff))
    lines = []
    for (i, j), terms in sorted(grouped.items()):
        if args.emit == "latex":
            rhs = " + ".join(
                f"\\left({render(c, style='latex')}\\right) g_{{{l}}}"
                for l, c in terms)
            lines.append(f"[g_{{{i}}}, g_{{{j}}}] = {rhs}")
        else:
            rhs = " + ".join(f"({render(c, style='text')})*g{l}"
                             for l, c in terms)
            lines.append(f"[g{i}, g{j}] = {rhs}")
    _emit(args, "\n".join(lines) if lines else "all brackets vanish")
    return 0


def _cmd_sun(args):
    gens = sun_generators(args.n)
    if args.decouple or args.coupling:
        a = from_matrix_generators(gens.mats, name=f"su{args.n}_cwb")
        if args.decouple:
            _emit_system(args, decoupled_odes(a))
        else:
            cm = coupling_matrix(a)
            if args.emit == "json":
                _emit(args, _json_dumps({
                    "xi": _matrix_json(cm.xi),
                    "det": render(cm.det, style="text"),
                }))
            else:
                det = render(cm.det, style=args.emit)
                head = "\\xi =" if args.emit == "latex" else "xi ="
                dhead = ("\\det \\xi = " if args.emit == "latex"
                         else "det xi = ")
                _emit(args, f"{head}\n"
                      f"{render_matrix(cm.xi, style=args.emit)}\n"
                      f"{dhead}{det}")
        return 0
    if args.teo:
        _emit_matrix(args, "U", explicit_teo(gens))
        return 0
    if args.emit == "json":
        _emit(args, _json_dumps(_generator_json(gens)))
    else:
        _emit(args, _generator_text(gens, args.emit))
    return 0


def _cmd_gellmann(args):
    if args.decouple or args.coupling:
        a = shipped_algebra("su3_gellmann",
                            skip_validation=getattr(args, "no_validate",
                                                    False))
        if args.decouple:
            _emit_system(args, decoupled_odes(a))
        else:
            cm = coupling_matrix(a)
            if args.emit == "json":
                _emit(args, _json_dumps({
                    "xi": _matrix_json(cm.xi),
                    "det": render(cm.det, style="text"),
                }))
            else:
                det = render(cm.det, style=args.emit)
                head = "\\xi =" if args.emit == "latex" else "xi ="
                dhead = ("\\det \\xi = " if args.emit == "latex"
                         else "det xi = ")
                _emit(args, f"{head}\n"
                      f"{render_matrix(cm.xi, style=args.emit)}\n"
                      f"{dhead}{det}")
        return 0
    gens = gellmann_generators()
    if args.emit == "json":
        _emit(args, _json_dumps(_generator_json(gens)))
    else:
        _emit(args, _generator_text(gens, args.emit))
    return 0


def _cmd_teo(args):
    _emit_matrix(args, "U", explicit_teo(sun_generators(args.sun)))
    return 0


def _cmd_integrate(args):
    if args.emit == "latex":
        raise ValueError("integrate supports --emit text or json")
    a = _resolve_algebra(args)
    system = (factorization_odes(a) if args.factorization
              else decoupled_odes(a))
    eta = _parse_eta(args.eta, len(system.inputs))
    params = _parse_params(args.param)
    traj = integrate(system, eta, args.t0, args.t1,
                     rtol=args.rtol, atol=args.atol,
                     params=params or None, max_step=args.max_step)
    if args.emit == "json":
        _emit(args, traj.to_json())
        return 0
    lines = [f"accepted points: {len(traj.grid)}",
             f"final time: {traj.grid[-1]!r}"]
    for k, z in enumerate(traj.final_state, start=1):
        lines.append(f"L{k}({traj.grid[-1]}) = {complex(z)!r}")
    d = traj.det_samples[-1]
    lines.append(f"final det xi = {complex(d)!r}")
    for t, kind in traj.events:
        lines.append(f"event: {kind} at t = {t}")
    _emit(args, "\n".join(lines))
    return 0


def _cmd_verify_gate(args):
    target = gate_matrix(args.target)
    if args.sun == 2:
        gens = qubit_generators()
    else:
        gens = sun_generators(args.sun)
    lambdas = _scalar_list(args.lambdas, args.sun ** 2 - 1, "--lambdas")
    u = assemble_teo_numeric(gens, lambdas)
    if u.shape != target.shape:
        raise ValueError(f"target {args.target} is "
                         f"{target.shape[0]}x{target.shape[1]} but the "
                         f"assembled operator is {u.shape[0]}x{u.shape[1]}")
    ok, phase, residual = verify_gate(u, target, tol=args.tol)
    lines = [f"{'pass' if ok else 'fail'}  target={args.target}",
             f"residual = {residual:.3e}  (tol {args.tol:g})",
             f"global phase = {phase:.6g}"]
    corner = u[-1, -1]
    if abs(corner) > 1e-12:
        ok2, phase2, _ = verify_gate(u * (abs(corner) / corner), target,
                                     tol=args.tol)
        if ok2:
            lines.append(f"polar-representative phase = {phase2:.6g}")
    _emit(args, "\n".join(lines))
    return 0 if ok else 1


def _cmd_fixtures(args):
    if args.list:
        _emit(args, "\n".join(fixture_mod.fixture_names()))
        return 0
    names = args.names or None
    results = fixture_mod.run_fixtures(names=names)
    _emit(args, "\n".join(fixture_mod.report_lines(results)))
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p, algebra=False):
    p.add_argument("--emit", choices=_EMIT_CHOICES, default="text",
                   help="output style (default text)")
    p.add_argument("--out", default=None, help="write output to this path")
    if algebra:
        p.add_argument("--algebra", required=True,
                       help="shipped algebra name or path to a .json file")
        p.add_argument("--no-validate", action="store_true",
                       dest="no_validate",
                       help="skip structure validation on load")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="liewn",
        description="Factorized time-evolution engine for closed Lie "
                    "algebras: symbolic derivations, su(N) bases, numeric "
                    "integration, gate verification.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("derive", help="coupled input/coordinate relations")
    _add_common(p, algebra=True)
    p.set_defaults(fn=_cmd_derive)

    p = sub.add_parser("bch", help="BCH matrices B_k")
    _add_common(p, algebra=True)
    p.set_defaults(fn=_cmd_bch)

    p = sub.add_parser("coupling", help="coupling matrix xi and det")
    _add_common(p, algebra=True)
    p.set_defaults(fn=_cmd_coupling)

    p = sub.add_parser("decouple", help="decoupled coordinate ODE system")
    _add_common(p, algebra=True)
    p.set_defaults(fn=_cmd_decouple)

    p = sub.add_parser("factorize",
                       help="factorization flow d/dtheta system")
    _add_common(p, algebra=True)
    p.set_defaults(fn=_cmd_factorize)

    p = sub.add_parser("reorder", help="relabel generators")
    _add_common(p, algebra=True)
    p.add_argument("--order", required=True,
                   help="1-based permutation, e.g. \"2,1,3\"")
    p.set_defaults(fn=_cmd_reorder)

    p = sub.add_parser("sun", help="su(N) Cartan-Weyl pipelines")
    _add_common(p)
    p.add_argument("--n", type=int, required=True, help="N for su(N)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--decouple", action="store_true",
                   help="derive the decoupled system")
    g.add_argument("--coupling", action="store_true",
                   help="derive the coupling matrix")
    g.add_argument("--teo", action="store_true",
                   help="explicit factorized evolution operator")
    p.set_defaults(fn=_cmd_sun)

    p = sub.add_parser("gellmann", help="Gell-Mann basis pipelines")
    _add_common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--decouple", action="store_true",
                   help="derive the decoupled system")
    g.add_argument("--coupling", action="store_true",
                   help="derive the coupling matrix")
    p.set_defaults(fn=_cmd_gellmann)

    p = sub.add_parser("teo", help="explicit su(N) evolution operator")
    _add_common(p)
    p.add_argument("--sun", type=int, required=True, help="N for su(N)")
    p.set_defaults(fn=_cmd_teo)

    p = sub.add_parser("integrate", help="integrate the coordinate ODEs")
    _add_common(p, algebra=True)
    p.add_argument("--eta", required=True,
                   help="const:c1,c2,... or a JSON spec file")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--max-step", type=float, default=None, dest="max_step")
    p.add_argument("--param", action="append", default=[],
                   help="name=value for an algebra parameter (repeatable)")
    p.add_argument("--factorization", action="store_true",
                   help="integrate the factorization flow over theta "
                        "(then --eta supplies the constant coefficients)")
    p.set_defaults(fn=_cmd_integrate)

    p = sub.add_parser("verify-gate",
                       help="assemble a factorized operator and compare "
                            "to a gate")
    _add_common(p)
    p.add_argument("--sun", type=int, required=True,
                   help="2 for the qubit triple, else N for su(N)")
    p.add_argument("--lambdas", required=True,
                   help="comma-separated coordinates, e.g. "
                        "\"-1, ln2-i*pi, -1\"")
    p.add_argument("--target", required=True,
                   help="hadamard, t, x, y, z, or cnot")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(fn=_cmd_verify_gate)

    p = sub.add_parser("fixtures", help="replay the frozen reference suite")
    _add_common(p)
    p.add_argument("names", nargs="*",
                   help="run only these fixtures (default: all)")
    p.add_argument("--list", action="store_true",
                   help="list fixture names and exit")
    p.set_defaults(fn=_cmd_fixtures)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
