"""Numerical realization of the derived ODE systems.

Compiles symbolic right-hand sides to flat evaluation tapes, integrates the
coordinate ODEs with an adaptive embedded Runge-Kutta 5(4) pair on the
complex state, samples det of the coupling matrix along the way, and offers
independent oracles: back-substitution residuals, direct matrix-ODE
integration, and closed-form exponentials for constant coefficients.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .symcore import RationalExpr, lambda_sym
from .weinorman import coupling_matrix

__all__ = [
    "EtaBinding",
    "IntegrationError",
    "Trajectory",
    "assemble_teo_numeric",
    "direct_exponential",
    "gate_matrix",
    "integrate",
    "matrix_oracle",
    "residual_check",
    "verify_gate",
]

SINGULARITY_THRESHOLD = 1e-8


class IntegrationError(RuntimeError):
    """Step-size underflow; carries the trajectory integrated so far."""

    def __init__(self, message, trajectory):
        self.trajectory = trajectory
        super().__init__(message)


# ---------------------------------------------------------------------------
# eta bindings

def _const_fn(value):
    v = complex(value)
    return lambda t: v


def _poly_fn(coeffs):
    cs = [complex(c) for c in coeffs]

    def f(t):
        acc = 0j
        for c in reversed(cs):
            acc = acc * t + c
        return acc
    return f


def _sinusoid_fn(amplitude, frequency, phase=0.0, offset=0.0):
    a = complex(amplitude)
    w = float(frequency)
    p = float(phase)
    b = complex(offset)
    return lambda t: a * cmath.sin(w * t + p) + b


def _tabulated_fn(times, values):
    ts = np.asarray(times, dtype=float)
    vs = np.asarray([complex(v) for v in values])
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("tabulated eta needs at least 2 increasing times")
    sp_re = CubicSpline(ts, vs.real)
    sp_im = CubicSpline(ts, vs.imag)
    return lambda t: complex(sp_re(t), sp_im(t))


class EtaBinding:
    """One time function per coefficient index (length = algebra order)."""

    def __init__(self, fns):
        self._fns = tuple(fns)
        if not self._fns:
            raise ValueError("empty eta binding")

    def __len__(self):
        return len(self._fns)

    def __call__(self, t):
        return np.array([f(t) for f in self._fns], dtype=complex)

    @staticmethod
    def constant(values):
        return EtaBinding([_const_fn(v) for v in values])

    @staticmethod
    def from_callables(fns):
        return EtaBinding([f if callable(f) else _const_fn(f) for f in fns])

    @staticmethod
    def from_specs(specs):
        """List of per-index spec dicts: kind in {constant, polynomial,
        sinusoid, tabulated} with the matching parameters."""
        fns = []
        for i, spec in enumerate(specs):
            kind = spec.get("kind")
            try:
                if kind == "constant":
                    fns.append(_const_fn(_spec_complex(spec["value"])))
                elif kind == "polynomial":
                    fns.append(_poly_fn([_spec_complex(c)
                                         for c in spec["coeffs"]]))
                elif kind == "sinusoid":
                    fns.append(_sinusoid_fn(
                        _spec_complex(spec["amplitude"]),
                        spec["frequency"],
                        spec.get("phase", 0.0),
                        _spec_complex(spec.get("offset", 0.0))))
                elif kind == "tabulated":
                    fns.append(_tabulated_fn(
                        spec["times"],
                        [_spec_complex(v) for v in spec["values"]]))
                else:
                    raise ValueError(f"unknown eta kind {kind!r}")
            except KeyError as exc:
                raise ValueError(
                    f"eta spec {i}: missing field {exc.args[0]!r}") from None
        return EtaBinding(fns)


def _spec_complex(v):
    """Accept a number or an [re, im] pair."""
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(re, im)
    return complex(v)


# ---------------------------------------------------------------------------
# evaluation tapes

class _Tape:
    """Flat straight-line program over a complex value array.

    Ops: ("sym", dst, input_index), ("const", dst, value),
    ("mul", dst, a, b), ("add", dst, a, b), ("pow", dst, a, k),
    ("exp", dst, a).  Shared subterms (monomials, exponential arguments)
    are emitted once per tape.
    """

    def __init__(self, symbols):
        self.symbols = tuple(symbols)
        self.ops = []
        self.n = 0
        self._sym_slots = {}
        self._memo = {}

    def _new(self):
        s = self.n
        self.n += 1
        return s

    def slot_sym(self, sym):
        s = self._sym_slots.get(sym)
        if s is None:
            try:
                idx = self.symbols.index(sym)
            except ValueError:
                raise KeyError(f"unbound symbol {sym!r} in compiled "
                               "expression") from None
            s = self._new()
            self.ops.append(("sym", s, idx))
            self._sym_slots[sym] = s
        return s

    def slot_const(self, value):
        key = ("const", value)
        s = self._memo.get(key)
        if s is None:
            s = self._new()
            self.ops.append(("const", s, value))
            self._memo[key] = s
        return s

    def _slot_mono(self, mono):
        if not mono:
            return self.slot_const(1.0 + 0j)
        key = ("mono", mono)
        s = self._memo.get(key)
        if s is not None:
            return s
        acc = None
        for sym, p in mono:
            base = self.slot_sym(sym)
            if p != 1:
                pw = self._memo.get(("pow", sym, p))
                if pw is None:
                    pw = self._new()
                    self.ops.append(("pow", pw, base, p))
                    self._memo[("pow", sym, p)] = pw
                base = pw
            if acc is None:
                acc = base
            else:
                nxt = self._new()
                self.ops.append(("mul", nxt, acc, base))
                acc = nxt
        self._memo[key] = acc
        return acc

    def _slot_exparg(self, exparg):
        key = ("ea", exparg)
        s = self._memo.get(key)
        if s is not None:
            return s
        acc = None
        for mono, coeff in exparg:
            ms = self._slot_mono(mono)
            cs = self.slot_const(complex(coeff.eval()))
            prod = self._new()
            self.ops.append(("mul", prod, cs, ms))
            if acc is None:
                acc = prod
            else:
                nxt = self._new()
                self.ops.append(("add", nxt, acc, prod))
                acc = nxt
        e = self._new()
        self.ops.append(("exp", e, acc))
        self._memo[key] = e
        return e

    def slot_expr(self, e):
        key = ("expr", e)
        s = self._memo.get(key)
        if s is not None:
            return s
        if not e.terms:
            s = self.slot_const(0j)
            self._memo[key] = s
            return s
        acc = None
        for coeff, mono, exparg in e.terms:
            t = self.slot_const(complex(coeff.eval()))
            if mono:
                ms = self._slot_mono(mono)
                nt = self._new()
                self.ops.append(("mul", nt, t, ms))
                t = nt
            if exparg:
                es = self._slot_exparg(exparg)
                nt = self._new()
                self.ops.append(("mul", nt, t, es))
                t = nt
            if acc is None:
                acc = t
            else:
                nxt = self._new()
                self.ops.append(("add", nxt, acc, t))
                acc = nxt
        self._memo[key] = acc
        return acc

    def run(self, inputs, out, out_slots):
        vals = [0j] * self.n
        for op in self.ops:
            tag = op[0]
            if tag == "mul":
                vals[op[1]] = vals[op[2]] * vals[op[3]]
            elif tag == "add":
                vals[op[1]] = vals[op[2]] + vals[op[3]]
            elif tag == "exp":
                vals[op[1]] = cmath.exp(vals[op[2]])
            elif tag == "sym":
                vals[op[1]] = inputs[op[2]]
            elif tag == "const":
                vals[op[1]] = op[2]
            else:  # pow
                vals[op[1]] = vals[op[2]] ** op[3]
        for i, s in enumerate(out_slots):
            out[i] = vals[s]
        return out


def _compile_system(exprs, symbols):
    """One shared tape for a list of Expr / RationalExpr; returns
    (tape, out_slots, den_slots) with den_slots[i] None for plain values."""
    tape = _Tape(symbols)
    out_slots = []
    den_slots = []
    for e in exprs:
        if isinstance(e, RationalExpr):
            out_slots.append(tape.slot_expr(e.num))
            den_slots.append(None if e.den.is_one()
                             else tape.slot_expr(e.den))
        else:
            out_slots.append(tape.slot_expr(e))
            den_slots.append(None)
    return tape, out_slots, den_slots


def _free_symbols(e):
    return e.free_symbols()


def _bind_parameters(exprs, params):
    """Parameter symbols appearing in exprs, with bound numeric values.

    Raises ValueError when a parameter has no binding.
    """
    params = dict(params or {})
    free = set()
    for e in exprs:
        free |= _free_symbols(e)
    psyms = sorted((s for s in free if s.kind == "Parameter"),
                   key=lambda s: str(s.index))
    missing = [str(s.index) for s in psyms if str(s.index) not in params]
    if missing:
        raise ValueError("unbound parameters: " + ", ".join(missing))
    return tuple(psyms), [complex(params[str(s.index)]) for s in psyms]


class _VectorFn:
    """Evaluates a list of Expr / RationalExpr over one shared tape."""

    def __init__(self, exprs, symbols):
        self.tape, self.out_slots, self.den_slots = _compile_system(
            exprs, symbols)
        self.nsym = len(symbols)
        self.nout = len(exprs)

    def __call__(self, sym_vals, out=None):
        regs = [0j] * self.tape.n
        for op in self.tape.ops:
            tag = op[0]
            if tag == "mul":
                regs[op[1]] = regs[op[2]] * regs[op[3]]
            elif tag == "add":
                regs[op[1]] = regs[op[2]] + regs[op[3]]
            elif tag == "exp":
                regs[op[1]] = cmath.exp(regs[op[2]])
            elif tag == "sym":
                regs[op[1]] = sym_vals[op[2]]
            elif tag == "const":
                regs[op[1]] = op[2]
            else:
                regs[op[1]] = regs[op[2]] ** op[3]
        if out is None:
            out = np.empty(self.nout, dtype=complex)
        for i in range(self.nout):
            v = regs[self.out_slots[i]]
            d = self.den_slots[i]
            out[i] = v if d is None else v / regs[d]
        return out


class _CompiledSystem:
    """Derivative and det evaluators for an ODESystem at bound parameters."""

    def __init__(self, sys, params=None):
        self.coords = tuple(sys.coordinates)
        self.inputs = tuple(sys.inputs)
        n = self.ncoord = len(self.coords)
        exprs = list(sys.rhs) + [sys.coupling.det]
        psyms, self.param_vals = _bind_parameters(exprs, params)
        self.symbols = self.coords + self.inputs + tuple(psyms)
        self._rhs_fn = _VectorFn(list(sys.rhs), self.symbols)
        self._det_fn = _VectorFn([sys.coupling.det], self.symbols)
        self.factor = -1j if sys.kind == "TimeEvolution" else 1.0 + 0j
        self._vals = [0j] * len(self.symbols)
        self._ninp = len(self.inputs)

    def _load(self, y, eta_vals):
        vals = self._vals
        n = self.ncoord
        for i in range(n):
            vals[i] = complex(y[i])
        for i in range(self._ninp):
            vals[n + i] = complex(eta_vals[i])
        for i, v in enumerate(self.param_vals):
            vals[n + self._ninp + i] = v
        return vals

    def derivative(self, y, eta_vals):
        return self.factor * self._rhs_fn(self._load(y, eta_vals))

    def det(self, y):
        vals = self._load(y, [0j] * self._ninp)
        return complex(self._det_fn(vals)[0])


# ---------------------------------------------------------------------------
# adaptive Runge-Kutta 5(4), Dormand-Prince pair

_RK_C = (0.2, 0.3, 0.8, 8 / 9, 1.0, 1.0)
_RK_A = (
    (0.2,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_RK_ERR = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
           22 / 525, -1 / 40)


def _scaled_norm(diff, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return math.sqrt(float(np.mean((np.abs(diff) / scale) ** 2)))


def _rk45(f, t0, y0, t1, rtol, atol, max_step):
    """Integrate dy/dt = f(t, y) from t0 to t1.

    Yields nothing; returns (ts, ys, status) with status "done" when t1 was
    reached, "nonfinite" when the state stopped being finite (partial
    result), or "underflow" when the step size collapsed (partial result).
    """
    span = t1 - t0
    if span == 0:
        return [t0], [np.array(y0, dtype=complex)], "done"
    direction = 1.0 if span > 0 else -1.0
    span = abs(span)
    hmax = span if max_step is None else min(abs(max_step), span)

    y = np.array(y0, dtype=complex)
    t = t0
    ts = [t0]
    ys = [y.copy()]

    k1 = f(t, y)
    if not np.all(np.isfinite(k1.view(float))):
        return ts, ys, "nonfinite"

    # starting step from the first derivative scale
    scale = atol + rtol * np.abs(y)
    d0 = math.sqrt(float(np.mean((np.abs(y) / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((np.abs(k1) / scale) ** 2)))
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6 * span
    else:
        h = 0.01 * d0 / d1
    h = min(h, hmax)

    ks = [None] * 7
    ks[0] = k1
    while True:
        remaining = abs(t1 - t)
        if remaining <= 1e-14 * max(abs(t0), abs(t1), 1.0):
            return ts, ys, "done"
        h = min(h, remaining, hmax)
        if h < 2.3e-15 * max(abs(t), 1.0):
            return ts, ys, "underflow"
        hs = direction * h
        bad = False
        for i in range(6):
            yi = y + hs * sum(a * ks[j]
                              for j, a in enumerate(_RK_A[i]) if a)
            ks[i + 1] = f(t + _RK_C[i] * hs, yi)
            if not np.all(np.isfinite(ks[i + 1].view(float))):
                bad = True
                break
        if bad:
            # retry on a shorter step; below the underflow floor this exits
            # through the nonfinite branch so the caller sees the blow-up
            if h < 1e-13 * max(abs(t), 1.0):
                return ts, ys, "nonfinite"
            h *= 0.25
            continue
        y_new = y + hs * sum(b * ks[j]
                             for j, b in enumerate(_RK_A[5]) if b)
        err_vec = hs * sum(e * ks[j] for j, e in enumerate(_RK_ERR) if e)
        if not np.all(np.isfinite(y_new.view(float))):
            if h < 1e-13 * max(abs(t), 1.0):
                return ts, ys, "nonfinite"
            h *= 0.25
            continue
        err = _scaled_norm(err_vec, y, y_new, rtol, atol)
        if err <= 1.0:
            t = t1 if abs(t + hs - t1) <= 1e-14 * max(abs(t1), 1.0) \
                else t + hs
            y = y_new
            ts.append(t)
            ys.append(y.copy())
            ks[0] = ks[6]  # first-same-as-last
            grow = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            h *= max(0.2, grow)
        else:
            h *= max(0.2, min(1.0, 0.9 * err ** -0.2))


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True)
class Trajectory:
    """Accepted integration points for one coordinate system.

    grid starts at the initial time and states[0] is the zero vector; det
    holds the coupling determinant at each grid point; events is a tuple of
    (time, kind) with kind "singularity-warning" or "step-failure".
    """

    grid: tuple
    states: tuple
    det_samples: tuple
    events: tuple = ()

    @property
    def final_state(self):
        return self.states[-1]

    def to_json_obj(self):
        return {
            "grid": [float(t) for t in self.grid],
            "lambdas": [[[z.real, z.imag] for z in st]
                        for st in self.states],
            "det": [[d.real, d.imag] for d in self.det_samples],
            "events": [{"time": float(t), "kind": k}
                       for t, k in self.events],
        }

    def to_json(self):
        return json.dumps(self.to_json_obj(), sort_keys=True,
                          separators=(",", ":"))


def integrate(system, eta, t0, t1, rtol=1e-10, atol=1e-12, params=None,
              max_step=None):
    """Integrate an ODESystem from the zero initial vector.

    eta binds the system inputs (coefficient functions for a time-evolution
    system, constant targets for a factorization system).  The coupling
    determinant is sampled at every accepted point; points with
    |det| < 1e-8 raise singularity-warning events.  A state that stops
    being finite ends the trajectory with a step-failure event; a step-size
    collapse raises IntegrationError carrying the partial trajectory.
    """
    comp = _CompiledSystem(system, params)
    if len(eta) != len(comp.inputs):
        raise ValueError(
            f"eta binds {len(eta)} inputs, system has {len(comp.inputs)}")

    def f(t, y):
        return comp.derivative(y, eta(t))

    y0 = np.zeros(len(comp.coords), dtype=complex)
    ts, ys, status = _rk45(f, float(t0), y0, float(t1), rtol, atol, max_step)

    dets = []
    events = []
    for t, y in zip(ts, ys):
        d = comp.det(y)
        dets.append(d)
        if abs(d) < SINGULARITY_THRESHOLD:
            events.append((t, "singularity-warning"))
    if status == "nonfinite":
        events.append((ts[-1], "step-failure"))
    traj = Trajectory(grid=tuple(ts), states=tuple(ys),
                      det_samples=tuple(dets), events=tuple(events))
    if status == "underflow":
        raise IntegrationError(
            f"step size underflow at t = {ts[-1]!r}", traj)
    return traj


def _fd_weights(x0, xs):
    """First-derivative finite-difference weights at x0 for nodes xs."""
    n = len(xs)
    c = np.zeros((n, 2))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, n):
        mn = min(i, 1)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1]
                                    - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, 1]


def residual_check(algebra, traj, eta, params=None):
    """Max back-substitution residual ||i xi^T dLambda/dt - eta|| over the
    interior grid points.  The derivative comes from centered
    finite-difference stencils (up to 5 points, nonuniform weights), so
    accuracy is set by the grid spacing; integrate with a small max_step
    for tight residuals.  Needs at least 3 grid points."""
    if len(traj.grid) < 3:
        raise ValueError("need at least 3 grid points for the residual")
    cm = coupling_matrix(algebra)
    n = algebra.order
    if len(traj.states[0]) != n:
        raise ValueError(
            f"trajectory has {len(traj.states[0])} coordinates, "
            f"algebra order is {n}")
    entries = [e for row in cm.xi.rows for e in row]
    psyms, pvals = _bind_parameters(entries + [cm.det], params)
    coords = tuple(lambda_sym(l) for l in range(1, n + 1))
    symbols = coords + tuple(psyms)
    fn = _VectorFn(entries, symbols)

    worst = 0.0
    grid = traj.grid
    states = traj.states
    npts = len(grid)
    for i in range(1, npts - 1):
        lo = max(0, i - 2)
        hi = min(npts, i + 3)
        w = _fd_weights(grid[i], np.array(grid[lo:hi]))
        dy = sum(wj * states[lo + j] for j, wj in enumerate(w))
        vals = [complex(v) for v in states[i]] + list(pvals)
        xi = np.array(fn(vals), dtype=complex).reshape(n, n)
        r = 1j * (xi.T @ dy) - eta(grid[i])
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


# ---------------------------------------------------------------------------
# matrix-side oracles

def _numeric_matrix(sm):
    rows = sm.rows
    out = np.empty((len(rows), len(rows[0])), dtype=complex)
    for i, row in enumerate(rows):
        for j, e in enumerate(row):
            c = e.as_coefficient()
            if c is None:
                raise ValueError("matrix entry is not constant")
            out[i, j] = c.eval()
    return out


def _numeric_generators(gens):
    mats = gens.mats if hasattr(gens, "mats") else gens
    out = []
    for m in mats:
        if hasattr(m, "rows"):
            out.append(_numeric_matrix(m))
        else:
            out.append(np.asarray(m, dtype=complex))
    if not out:
        raise ValueError("no generators")
    shape = out[0].shape
    for m in out:
        if m.shape != shape or m.shape[0] != m.shape[1]:
            raise ValueError("generators must be square and equal-sized")
    return out


def matrix_oracle(gens, eta, t0, t1, rtol=1e-10, atol=1e-12, max_step=None):
    """Final U of i dU/dt = H(t) U, U(t0) = identity, H = sum eta_l g_l,
    via the same adaptive integrator acting on the flattened matrix."""
    mats = _numeric_generators(gens)
    if len(eta) != len(mats):
        raise ValueError(
            f"eta binds {len(eta)} coefficients, basis has {len(mats)}")
    dim = mats[0].shape[0]
    stack = np.stack(mats)

    def f(t, u):
        h = np.tensordot(eta(t), stack, axes=1)
        return (-1j * h @ u.reshape(dim, dim)).ravel()

    u0 = np.eye(dim, dtype=complex).ravel()
    ts, us, status = _rk45(f, float(t0), u0, float(t1), rtol, atol, max_step)
    if status != "done":
        partial = [(t, u.reshape(dim, dim)) for t, u in zip(ts, us)]
        raise IntegrationError(
            f"matrix integration stopped at t = {ts[-1]!r} ({status})",
            partial)
    return us[-1].reshape(dim, dim)


def direct_exponential(gens, eta, t):
    """exp(-i t H) for constant coefficients eta, H = sum eta_l g_l."""
    mats = _numeric_generators(gens)
    if len(eta) != len(mats):
        raise ValueError(
            f"eta has {len(eta)} coefficients, basis has {len(mats)}")
    h = sum(complex(c) * m for c, m in zip(eta, mats))
    return expm(-1j * float(t) * h)


def assemble_teo_numeric(gens, lambdas):
    """Ordered product exp(L_1 g_1) exp(L_2 g_2) ... for numeric L_l."""
    mats = _numeric_generators(gens)
    if len(lambdas) != len(mats):
        raise ValueError(
            f"{len(lambdas)} coordinates for {len(mats)} generators")
    dim = mats[0].shape[0]
    u = np.eye(dim, dtype=complex)
    for lam, m in zip(lambdas, mats):
        u = u @ expm(complex(lam) * m)
    return u


# ---------------------------------------------------------------------------
# gate verification

def qubit_generators():
    """Two-level triple {raising, half Cartan, lowering}.

    This is the basis in which the single-qubit gate coordinates are
    quoted: exp(L2 g2) = diag(e^{L2/2}, e^{-L2/2}).
    """
    return (np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
            np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex),
            np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex))


_GATES = {
    "hadamard": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "t": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex),
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                      [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


def gate_matrix(name):
    """Built-in gate targets: hadamard, x, y, z, t, cnot."""
    key = name.lower()
    if key not in _GATES:
        raise ValueError(f"unknown gate {name!r}; "
                         f"choices: {', '.join(sorted(_GATES))}")
    return _GATES[key].copy()


def verify_gate(u, target, tol=1e-8):
    """Compare u to target up to a global phase.

    Returns (passed, phase, residual) with phase from the overlap trace
    (largest-entry ratio when the trace vanishes) and residual the
    Frobenius norm of u - phase * target.
    """
    u = np.asarray(u, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if u.shape != target.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {target.shape}")
    tr = complex(np.trace(target.conj().T @ u))
    if abs(tr) > 1e-9:
        phase = tr / abs(tr)
    else:
        idx = int(np.argmax(np.abs(target)))
        ratio = u.flat[idx] / target.flat[idx]
        phase = ratio / abs(ratio) if abs(ratio) > 0 else 1.0 + 0j
    residual = float(np.linalg.norm(u - phase * target))
    return residual <= tol, phase, residual
