"""Reference interpreter for Grfns: execution and forward-mode AD.

Execution is demand-driven from the output variables, so any valid
topological order yields the same result. All arithmetic is IEEE double
precision. Derivatives use dual numbers: one forward pass per input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import ir
from .errors import (DomainError, NonDifferentiableError, UnboundInputError,
                     ValidationError)
from .grfn import ASSIGN, CONDITION, DECISION, LOOPBODY, Grfn, LoopSpec


@dataclass(frozen=True)
class Dual:
    """A first-order dual number: value plus directional derivative."""

    re: float
    dv: float

    def __add__(self, other):
        other = _lift(other)
        return Dual(self.re + other.re, self.dv + other.dv)

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other)
        return Dual(self.re - other.re, self.dv - other.dv)

    def __rsub__(self, other):
        other = _lift(other)
        return Dual(other.re - self.re, other.dv - self.dv)

    def __mul__(self, other):
        other = _lift(other)
        return Dual(self.re * other.re,
                    self.dv * other.re + self.re * other.dv)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        if other.re == 0.0:
            raise DomainError("division by zero")
        return Dual(self.re / other.re,
                    (self.dv * other.re - self.re * other.dv) / (other.re ** 2))

    def __rtruediv__(self, other):
        return _lift(other).__truediv__(self)

    def __neg__(self):
        return Dual(-self.re, -self.dv)


def _lift(x) -> Dual:
    return x if isinstance(x, Dual) else Dual(float(x), 0.0)


def _primal(x) -> float:
    return x.re if isinstance(x, Dual) else x


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _pow(a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        a, b = _lift(a), _lift(b)
        p = _pow(a.re, b.re)
        if b.dv == 0.0:
            if a.dv == 0.0:
                return Dual(p, 0.0)
            slope = b.re * _pow(a.re, b.re - 1.0)
            return Dual(p, slope * a.dv)
        if a.re <= 0.0:
            raise DomainError("derivative of a power needs a positive base "
                              "when the exponent varies")
        return Dual(p, p * (b.dv * math.log(a.re) + b.re * a.dv / a.re))
    try:
        return math.pow(a, b)
    except ValueError:
        raise DomainError(f"{a!r} ** {b!r} is undefined") from None
    except OverflowError:
        return math.inf


_UNARY_INTRINSICS = {"EXP", "LOG", "SIN", "COS", "TAN", "SQRT", "ABS"}


def _intrinsic(name: str, args: list):
    if name in _UNARY_INTRINSICS:
        if len(args) != 1:
            raise DomainError(f"{name} takes one argument, got {len(args)}")
        return _unary_intrinsic(name, args[0])
    if name in ("MIN", "MAX"):
        if not args:
            raise DomainError(f"{name} needs at least one argument")
        best = args[0]
        for a in args[1:]:
            if name == "MIN":
                if _primal(a) < _primal(best):
                    best = a
            else:
                if _primal(a) > _primal(best):
                    best = a
        return best
    if name == "MOD":
        if len(args) != 2:
            raise DomainError(f"MOD takes two arguments, got {len(args)}")
        a, p = args
        if _primal(p) == 0.0:
            raise DomainError("MOD with zero divisor")
        if isinstance(a, Dual) or isinstance(p, Dual):
            a, p = _lift(a), _lift(p)
            quotient = math.trunc(a.re / p.re)
            return Dual(math.fmod(a.re, p.re), a.dv - quotient * p.dv)
        return math.fmod(a, p)
    raise DomainError(f"unknown intrinsic {name}")


def _unary_intrinsic(name: str, x):
    if isinstance(x, Dual):
        if name == "EXP":
            p = _safe_exp(x.re)
            return Dual(p, 0.0 if x.dv == 0.0 else p * x.dv)
        if name == "LOG":
            if x.re <= 0.0:
                raise DomainError("log of a non-positive value")
            return Dual(math.log(x.re), x.dv / x.re)
        if name == "SIN":
            return Dual(math.sin(x.re), math.cos(x.re) * x.dv)
        if name == "COS":
            return Dual(math.cos(x.re), -math.sin(x.re) * x.dv)
        if name == "TAN":
            t = math.tan(x.re)
            return Dual(t, (1.0 + t * t) * x.dv)
        if name == "SQRT":
            if x.re < 0.0:
                raise DomainError("sqrt of a negative value")
            if x.re == 0.0 and x.dv != 0.0:
                raise DomainError("sqrt is not differentiable at zero")
            return Dual(math.sqrt(x.re),
                        0.0 if x.dv == 0.0 else x.dv / (2.0 * math.sqrt(x.re)))
        if name == "ABS":
            return Dual(abs(x.re), -x.dv if x.re < 0.0 else x.dv)
        raise DomainError(f"unknown intrinsic {name}")
    if name == "EXP":
        return _safe_exp(x)
    if name == "LOG":
        if x <= 0.0:
            raise DomainError("log of a non-positive value")
        return math.log(x)
    if name == "SIN":
        return math.sin(x)
    if name == "COS":
        return math.cos(x)
    if name == "TAN":
        return math.tan(x)
    if name == "SQRT":
        if x < 0.0:
            raise DomainError("sqrt of a negative value")
        return math.sqrt(x)
    if name == "ABS":
        return abs(x)
    raise DomainError(f"unknown intrinsic {name}")


def eval_expr(expr: ir.Expression, env: dict, relational_ok: bool = False):
    """Evaluate an expression tree over float/Dual bindings."""
    if isinstance(expr, ir.Num):
        return float(expr.value)
    if isinstance(expr, ir.Var):
        return env[expr.name]
    if isinstance(expr, ir.Unary):
        child = eval_expr(expr.child, env, relational_ok)
        if expr.op == "NEG":
            return -child
        _require_smooth((child,), relational_ok)
        return not bool(child)
    if isinstance(expr, ir.Binary):
        left = eval_expr(expr.left, env, relational_ok)
        right = eval_expr(expr.right, env, relational_ok)
        op = expr.op
        if op == "ADD":
            return left + right
        if op == "SUB":
            return left - right
        if op == "MUL":
            return left * right
        if op == "DIV":
            if _primal(right) == 0.0:
                raise DomainError("division by zero")
            return left / right
        if op == "POW":
            return _pow(left, right)
        _require_smooth((left, right), relational_ok)
        l, r = _primal(left), _primal(right)
        if op == "GT":
            return l > r
        if op == "GE":
            return l >= r
        if op == "LT":
            return l < r
        if op == "LE":
            return l <= r
        if op == "EQ":
            return l == r
        if op == "NE":
            return l != r
        if op == "AND":
            return bool(left) and bool(right)
        if op == "OR":
            return bool(left) or bool(right)
        raise ValidationError(f"unknown operator {op}")
    if isinstance(expr, ir.Call):
        args = [eval_expr(a, env, relational_ok) for a in expr.args]
        return _intrinsic(expr.name, args)
    raise ValidationError(f"cannot evaluate {type(expr).__name__}")


def _require_smooth(operands, relational_ok: bool) -> None:
    if relational_ok:
        return
    if any(isinstance(v, Dual) for v in operands):
        raise NonDifferentiableError(
            "a boolean expression feeds arithmetic outside a decision node")


def _split_id(var_id: str) -> tuple[str, str, int]:
    scope, name, version = var_id.split("::")
    return scope, name, int(version)


def execute(grfn: Grfn, inputs: dict) -> dict:
    """Evaluate the network; returns {output name: value}.

    `inputs` must bind every name in grfn.inputs (extra bindings for
    non-input names are ignored). Values may be floats or Duals.
    """
    for name in grfn.inputs:
        if name not in inputs:
            raise UnboundInputError(name)

    values: dict[str, object] = {}
    for name, val in inputs.items():
        vid = grfn.var_id(name, 0)
        if vid in grfn.variable_ids:
            values[vid] = val if isinstance(val, Dual) else float(val)

    producers = {f.output: f for f in grfn.functions}
    loop_results: dict[int, dict] = {}

    def compute(vid: str):
        if vid in values:
            return values[vid]
        f = producers.get(vid)
        if f is None:
            _, name, _ = _split_id(vid)
            raise UnboundInputError(name)
        args_env = {}
        for iid in f.inputs:
            value = compute(iid)
            _, name, _ = _split_id(iid)
            args_env[name] = value
        try:
            _apply(f, args_env)
        except DomainError as err:
            if err.node_id is None:
                raise DomainError(err.message, f.id) from None
            raise
        return values[vid]

    def _apply(f, env) -> None:
        if f.kind == ASSIGN:
            values[f.output] = eval_expr(f.expression, env)
        elif f.kind == CONDITION:
            primal_env = {k: _primal(v) for k, v in env.items()}
            result = eval_expr(f.expression, primal_env, relational_ok=True)
            values[f.output] = 1.0 if result else 0.0
        elif f.kind == DECISION:
            d = f.decision
            taken = d.then if values[d.condition] != 0.0 else d.orelse
            values[f.output] = values[taken]
        elif f.kind == LOOPBODY:
            spec = f.loop
            if spec.loop_id not in loop_results:
                loop_results[spec.loop_id] = _run_loop(spec, env)
            _, name, _ = _split_id(f.output)
            values[f.output] = loop_results[spec.loop_id][name]
        else:
            raise ValidationError(f"unknown function kind {f.kind}")

    out: dict[str, object] = {}
    for name, version in grfn.outputs:
        out[name] = compute(grfn.var_id(name, version))
    return out


def _run_loop(spec: LoopSpec, env: dict) -> dict:
    primal_env = {k: _primal(v) for k, v in env.items()}
    lo = eval_expr(spec.lo, primal_env)
    hi = eval_expr(spec.hi, primal_env)
    stride = eval_expr(spec.stride, primal_env) if spec.stride is not None else 1.0
    if stride == 0.0:
        raise DomainError("DO loop with zero stride")
    trips = max(0, int((hi - lo + stride) / stride))

    state = {n: env[n] for n in spec.carried}
    for t in range(trips):
        bind = {n: env[n] for n in spec.body.inputs if n != spec.var}
        bind.update({n: state[n] for n in spec.carried if n in bind})
        bind[spec.var] = lo + t * stride
        result = execute(spec.body, bind)
        for n in spec.carried:
            state[n] = result[n]
    state[spec.var] = lo + trips * stride
    return state


def gradient(grfn: Grfn, inputs: dict, output: str) -> dict:
    """∂output/∂x for every network input x, by forward-mode AD."""
    if grfn.final_version(output) is None:
        raise ValidationError(f"{output!r} is not an output of this network")
    partials: dict[str, float] = {}
    for seed_name in grfn.inputs:
        duals = {
            n: Dual(float(v), 1.0 if n == seed_name else 0.0)
            for n, v in inputs.items()
        }
        value = execute(grfn, duals)[output]
        partials[seed_name] = value.dv if isinstance(value, Dual) else 0.0
    return partials
