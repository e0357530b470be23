"""Expression trees for smooth scalar fields on the (x, y) plane.

Fields are immutable trees built from arithmetic, a handful of elementary
functions and a C-infinity cutoff primitive.  Differentiation is exact,
memoized per (node, variable) and closed over the node set.  Evaluation
compiles a tree (or a bundle of trees sharing subexpressions) to one plain
Python function; common subexpressions are emitted once, keyed by node
identity, so fields built with shared subtrees stay cheap at runtime.

Fields round-trip through a prefix serialization, e.g.::

    (* 2.0 (/ 1.0 (+ (* x x) (* y y))))

which is also the chart-file syntax accepted by the command line tools.
"""

from __future__ import annotations

import itertools
import math

__all__ = [
    "ScalarField", "Const", "Var", "X", "Y",
    "ExpressionError", "EvaluationError",
    "const", "var", "sin", "cos", "sinh", "cosh", "exp", "log", "arcsin",
    "sqrt", "cbrt", "absval", "sign", "floor_of", "expinv", "smoothstep",
    "mod_field", "periodic", "pow23",
    "differentiate", "evaluate", "substitute",
    "compile_fields", "to_prefix", "parse_prefix",
]


class ExpressionError(ValueError):
    """Raised for malformed expression constructions or parses."""


class EvaluationError(ArithmeticError):
    """Raised when a field cannot be evaluated to a finite float at a point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


# Below this argument the bump factor exp(-1/u) underflows double precision
# anyway (exp(-1000) ~ 1e-435); returning 0.0 outright avoids 0*inf = nan
# from the polynomial prefactor.
_EIP_CUTOFF = 1e-3


def _eip(u, coeffs):
    """exp(-1/u) * P(1/u) for u > 0, identically 0.0 for u <= cutoff."""
    if u <= _EIP_CUTOFF:
        return 0.0
    s = 1.0 / u
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * s + c
    return math.exp(-s) * acc


def _cbrt(v):
    # math.cbrt arrived in 3.11; this works for either sign of v.
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


def _signum(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


class ScalarField:
    """Base node.  Subclasses are immutable; never mutate fields in place."""

    __slots__ = ("_diffs", "_fn")

    def __init__(self):
        self._diffs = {}
        self._fn = None

    # -- arithmetic sugar ---------------------------------------------------

    def __add__(self, other):
        return _add(self, _wrap(other))

    def __radd__(self, other):
        return _add(_wrap(other), self)

    def __sub__(self, other):
        return _sub(self, _wrap(other))

    def __rsub__(self, other):
        return _sub(_wrap(other), self)

    def __mul__(self, other):
        return _mul(self, _wrap(other))

    def __rmul__(self, other):
        return _mul(_wrap(other), self)

    def __truediv__(self, other):
        return _div(self, _wrap(other))

    def __rtruediv__(self, other):
        return _div(_wrap(other), self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, p):
        if isinstance(p, (int, float)):
            return _pow(self, float(p))
        return NotImplemented

    # -- core API -------------------------------------------------------------

    def diff(self, name):
        if name not in ("x", "y"):
            raise ExpressionError("can only differentiate in 'x' or 'y', got %r" % (name,))
        d = self._diffs.get(name)
        if d is None:
            d = self._diff(name)
            self._diffs[name] = d
        return d

    def __call__(self, x, y):
        fn = self._fn
        if fn is None:
            fn = compile_fields([self])
            self._fn = fn
        return fn(x, y)[0]

    def eval_tree(self, x, y):
        """Reference tree-walking evaluator, used to cross-check the compiler."""
        raise NotImplementedError

    def children(self):
        return ()

    def _diff(self, name):
        raise NotImplementedError

    def _emit(self, names):
        """Return a Python expression string over already-emitted child names."""
        raise NotImplementedError

    def __repr__(self):
        return "<field %s>" % to_prefix(self)


class Const(ScalarField):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = float(value)

    def eval_tree(self, x, y):
        return self.value

    def _diff(self, name):
        return _ZERO

    def _emit(self, names):
        return repr(self.value)


class Var(ScalarField):
    __slots__ = ("name",)

    def __init__(self, name):
        if name not in ("x", "y"):
            raise ExpressionError("variable must be 'x' or 'y', got %r" % (name,))
        super().__init__()
        self.name = name

    def eval_tree(self, x, y):
        return x if self.name == "x" else y

    def _diff(self, name):
        return _ONE if name == self.name else _ZERO

    def _emit(self, names):
        return self.name


class _Binary(ScalarField):
    __slots__ = ("a", "b")
    op = "?"

    def __init__(self, a, b):
        super().__init__()
        self.a = a
        self.b = b

    def children(self):
        return (self.a, self.b)


class Add(_Binary):
    __slots__ = ()
    op = "+"

    def eval_tree(self, x, y):
        return self.a.eval_tree(x, y) + self.b.eval_tree(x, y)

    def _diff(self, name):
        return _add(self.a.diff(name), self.b.diff(name))

    def _emit(self, names):
        return "(%s + %s)" % (names[id(self.a)], names[id(self.b)])


class Sub(_Binary):
    __slots__ = ()
    op = "-"

    def eval_tree(self, x, y):
        return self.a.eval_tree(x, y) - self.b.eval_tree(x, y)

    def _diff(self, name):
        return _sub(self.a.diff(name), self.b.diff(name))

    def _emit(self, names):
        return "(%s - %s)" % (names[id(self.a)], names[id(self.b)])


class Mul(_Binary):
    __slots__ = ()
    op = "*"

    def eval_tree(self, x, y):
        return self.a.eval_tree(x, y) * self.b.eval_tree(x, y)

    def _diff(self, name):
        return _add(_mul(self.a.diff(name), self.b), _mul(self.a, self.b.diff(name)))

    def _emit(self, names):
        return "(%s * %s)" % (names[id(self.a)], names[id(self.b)])


class Div(_Binary):
    __slots__ = ()
    op = "/"

    def eval_tree(self, x, y):
        return self.a.eval_tree(x, y) / self.b.eval_tree(x, y)

    def _diff(self, name):
        da, db = self.a.diff(name), self.b.diff(name)
        return _div(_sub(_mul(da, self.b), _mul(self.a, db)), _mul(self.b, self.b))

    def _emit(self, names):
        return "(%s / %s)" % (names[id(self.a)], names[id(self.b)])


class Neg(ScalarField):
    __slots__ = ("a",)

    def __init__(self, a):
        super().__init__()
        self.a = a

    def children(self):
        return (self.a,)

    def eval_tree(self, x, y):
        return -self.a.eval_tree(x, y)

    def _diff(self, name):
        return _neg(self.a.diff(name))

    def _emit(self, names):
        return "(-%s)" % (names[id(self.a)],)


class Pow(ScalarField):
    """base ** p with a real constant exponent p."""

    __slots__ = ("a", "p")

    def __init__(self, a, p):
        super().__init__()
        self.a = a
        self.p = float(p)

    def children(self):
        return (self.a,)

    def eval_tree(self, x, y):
        base = self.a.eval_tree(x, y)
        if self.p == int(self.p):
            return base ** int(self.p)
        return math.pow(base, self.p)

    def _diff(self, name):
        da = self.a.diff(name)
        return _mul(_mul(Const(self.p), _pow(self.a, self.p - 1.0)), da)

    def _emit(self, names):
        an = names[id(self.a)]
        if self.p == int(self.p):
            return "(%s ** %d)" % (an, int(self.p))
        return "_pow(%s, %r)" % (an, self.p)


class Unary(ScalarField):
    __slots__ = ("kind", "a")

    def __init__(self, kind, a):
        if kind not in _UNARY_EVAL:
            raise ExpressionError("unknown unary kind %r" % (kind,))
        super().__init__()
        self.kind = kind
        self.a = a

    def children(self):
        return (self.a,)

    def eval_tree(self, x, y):
        return _UNARY_EVAL[self.kind](self.a.eval_tree(x, y))

    def _diff(self, name):
        return _UNARY_DIFF[self.kind](self, self.a.diff(name))

    def _emit(self, names):
        return "%s(%s)" % (_UNARY_FN[self.kind], names[id(self.a)])


class ExpInvPoly(ScalarField):
    """exp(-1/u) * sum_i coeffs[i] * (1/u)**i for u > 0, smoothly 0 for u <= 0.

    The family is closed under differentiation: with P the coefficient
    polynomial in s = 1/u, the derivative is exp(-1/u) * s**2 * (P(s) - P'(s))
    times u'.  That keeps smooth-step constructions exactly differentiable.
    """

    __slots__ = ("a", "coeffs")

    def __init__(self, a, coeffs):
        coeffs = tuple(float(c) for c in coeffs)
        if not coeffs:
            raise ExpressionError("ExpInvPoly needs at least one coefficient")
        super().__init__()
        self.a = a
        self.coeffs = coeffs

    def children(self):
        return (self.a,)

    def eval_tree(self, x, y):
        return _eip(self.a.eval_tree(x, y), self.coeffs)

    def _diff(self, name):
        # d/du [exp(-1/u) P(1/u)] = exp(-1/u) * (1/u)**2 * (P - P')(1/u)
        q = [0.0] * (len(self.coeffs) + 2)
        for i, c in enumerate(self.coeffs):
            q[i + 2] += c
            if i >= 1:
                q[i + 1] -= i * c
        while len(q) > 1 and q[-1] == 0.0:
            q.pop()
        inner = ExpInvPoly(self.a, q)
        return _mul(inner, self.a.diff(name))

    def _emit(self, names):
        return "_eip(%s, %r)" % (names[id(self.a)], self.coeffs)


_UNARY_EVAL = {
    "sin": math.sin, "cos": math.cos, "sinh": math.sinh, "cosh": math.cosh,
    "exp": math.exp, "log": math.log, "arcsin": math.asin, "sqrt": math.sqrt,
    "cbrt": _cbrt, "abs": abs, "sign": _signum, "floor": lambda v: float(math.floor(v)),
}

_UNARY_FN = {
    "sin": "sin", "cos": "cos", "sinh": "sinh", "cosh": "cosh",
    "exp": "exp", "log": "log", "arcsin": "asin", "sqrt": "sqrt",
    "cbrt": "_cbrt", "abs": "abs", "sign": "_signum", "floor": "_floorf",
}

_UNARY_DIFF = {
    "sin": lambda self, da: _mul(Unary("cos", self.a), da),
    "cos": lambda self, da: _neg(_mul(Unary("sin", self.a), da)),
    "sinh": lambda self, da: _mul(Unary("cosh", self.a), da),
    "cosh": lambda self, da: _mul(Unary("sinh", self.a), da),
    "exp": lambda self, da: _mul(self, da),
    "log": lambda self, da: _div(da, self.a),
    "arcsin": lambda self, da: _div(da, Unary("sqrt", _sub(_ONE, _mul(self.a, self.a)))),
    "sqrt": lambda self, da: _div(da, _mul(Const(2.0), self)),
    "cbrt": lambda self, da: _div(da, _mul(Const(3.0), _mul(self, self))),
    "abs": lambda self, da: _mul(Unary("sign", self.a), da),
    "sign": lambda self, da: _ZERO,
    "floor": lambda self, da: _ZERO,
}


# -- folding constructors -----------------------------------------------------

def _wrap(v):
    if isinstance(v, ScalarField):
        return v
    if isinstance(v, (int, float)):
        return Const(v)
    raise ExpressionError("cannot use %r in a field expression" % (v,))


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _sub(a, b):
    if a is b:
        return _ZERO
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a):
        if a.value == 0.0:
            return _ZERO
        if a.value == 1.0:
            return b
        if a.value == -1.0:
            return _neg(b)
    if _is_const(b):
        if b.value == 0.0:
            return _ZERO
        if b.value == 1.0:
            return a
        if b.value == -1.0:
            return _neg(a)
    return Mul(a, b)


def _div(a, b):
    if a is b:
        return _ONE
    if _is_const(b):
        if b.value == 0.0:
            raise ExpressionError("division by constant zero")
        if b.value == 1.0:
            return a
        if _is_const(a):
            return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return _ZERO
    return Div(a, b)


def _neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def _pow(a, p):
    p = float(p)
    if p == 0.0:
        return _ONE
    if p == 1.0:
        return a
    if _is_const(a):
        return Const(a.value ** p if p == int(p) else math.pow(a.value, p))
    return Pow(a, p)


_ZERO = Const(0.0)
_ONE = Const(1.0)

X = Var("x")
Y = Var("y")


def const(v):
    return Const(v)


def var(name):
    return Var(name)


def _unary_ctor(kind):
    def ctor(a):
        a = _wrap(a)
        if _is_const(a):
            return Const(_UNARY_EVAL[kind](a.value))
        return Unary(kind, a)
    ctor.__name__ = kind
    return ctor


sin = _unary_ctor("sin")
cos = _unary_ctor("cos")
sinh = _unary_ctor("sinh")
cosh = _unary_ctor("cosh")
exp = _unary_ctor("exp")
log = _unary_ctor("log")
arcsin = _unary_ctor("arcsin")
sqrt = _unary_ctor("sqrt")
cbrt = _unary_ctor("cbrt")
absval = _unary_ctor("abs")
sign = _unary_ctor("sign")
floor_of = _unary_ctor("floor")


def expinv(a, coeffs=(1.0,)):
    """The cutoff factor exp(-1/a) * P(1/a), zero for a <= 0."""
    return ExpInvPoly(_wrap(a), coeffs)


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, strictly increasing between."""
    t = _wrap(t)
    rising = expinv(t)
    falling = expinv(_sub(_ONE, t))
    return _div(rising, _add(rising, falling))


def mod_field(u, period):
    """u reduced modulo a positive constant period, valued in [0, period)."""
    period = float(period)
    if period <= 0.0:
        raise ExpressionError("period must be positive")
    u = _wrap(u)
    return _sub(u, _mul(Const(period), floor_of(_mul(Const(1.0 / period), u))))


def periodic(field, period_x=None, period_y=None):
    """Precompose a field with coordinate reductions modulo the given periods."""
    ex = mod_field(X, period_x) if period_x else X
    ey = mod_field(Y, period_y) if period_y else Y
    return substitute(field, ex, ey)


def pow23(u):
    """u ** (2/3) through the real cube root, so defined for either sign of u."""
    c = cbrt(u)
    return _mul(c, c)


def differentiate(field, name):
    return field.diff(name)


def evaluate(field, point):
    """Evaluate at point = (x, y); raise EvaluationError off the field's domain."""
    x, y = point
    try:
        v = field(x, y)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvaluationError(str(exc), point=(x, y)) from exc
    if not math.isfinite(v):
        raise EvaluationError("field evaluated to %r" % (v,), point=(x, y))
    return v


def substitute(field, ex, ey):
    """Replace x by ex and y by ey throughout, returning a new tree."""
    ex = _wrap(ex)
    ey = _wrap(ey)
    memo = {}

    def walk(node):
        got = memo.get(id(node))
        if got is not None:
            return got
        if isinstance(node, Var):
            out = ex if node.name == "x" else ey
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Add):
            out = _add(walk(node.a), walk(node.b))
        elif isinstance(node, Sub):
            out = _sub(walk(node.a), walk(node.b))
        elif isinstance(node, Mul):
            out = _mul(walk(node.a), walk(node.b))
        elif isinstance(node, Div):
            out = _div(walk(node.a), walk(node.b))
        elif isinstance(node, Neg):
            out = _neg(walk(node.a))
        elif isinstance(node, Pow):
            out = _pow(walk(node.a), node.p)
        elif isinstance(node, Unary):
            child = walk(node.a)
            out = Const(_UNARY_EVAL[node.kind](child.value)) if _is_const(child) \
                else Unary(node.kind, child)
        elif isinstance(node, ExpInvPoly):
            out = ExpInvPoly(walk(node.a), node.coeffs)
        else:
            raise ExpressionError("cannot substitute into %r" % (node,))
        memo[id(node)] = out
        return out

    return walk(field)


# -- compilation --------------------------------------------------------------

_COMPILE_NS = {
    "sin": math.sin, "cos": math.cos, "sinh": math.sinh, "cosh": math.cosh,
    "exp": math.exp, "log": math.log, "asin": math.asin, "sqrt": math.sqrt,
    "abs": abs, "_cbrt": _cbrt, "_signum": _signum, "_eip": _eip,
    "_pow": math.pow, "_floorf": lambda v: float(math.floor(v)),
    "__builtins__": {},
}


def compile_fields(fields):
    """Compile several fields into one function (x, y) -> tuple of values.

    Subexpressions shared between the trees (by object identity) are computed
    once.  Use this for metric coefficient bundles rather than compiling each
    coefficient separately.
    """
    lines = []
    names = {}
    counter = itertools.count()

    def emit(node):
        key = id(node)
        if key in names:
            return names[key]
        for child in node.children():
            emit(child)
        if isinstance(node, (Const, Var)):
            name = node._emit(names)
        else:
            name = "v%d" % next(counter)
            lines.append("    %s = %s" % (name, node._emit(names)))
        names[key] = name
        return name

    outs = [emit(f) for f in fields]
    src = "def _compiled(x, y):\n%s\n    return (%s,)" % (
        "\n".join(lines) if lines else "    pass",
        ", ".join(outs),
    )
    ns = dict(_COMPILE_NS)
    exec(compile(src, "<geoproj.expr>", "exec"), ns)
    return ns["_compiled"]


# -- prefix serialization ------------------------------------------------------

def to_prefix(field):
    out = []

    def walk(node):
        if isinstance(node, Const):
            out.append(repr(node.value))
        elif isinstance(node, Var):
            out.append(node.name)
        elif isinstance(node, _Binary):
            out.append("(" + node.op)
            walk(node.a)
            walk(node.b)
            out.append(")")
        elif isinstance(node, Neg):
            out.append("(neg")
            walk(node.a)
            out.append(")")
        elif isinstance(node, Pow):
            out.append("(pow")
            walk(node.a)
            out.append(repr(node.p))
            out.append(")")
        elif isinstance(node, Unary):
            out.append("(" + node.kind)
            walk(node.a)
            out.append(")")
        elif isinstance(node, ExpInvPoly):
            out.append("(eip")
            walk(node.a)
            out.extend(repr(c) for c in node.coeffs)
            out.append(")")
        else:
            raise ExpressionError("cannot serialize %r" % (node,))

    walk(field)
    text = " ".join(out)
    return text.replace("( ", "(").replace(" )", ")")


_ATOMS = {"x": X, "y": Y, "pi": Const(math.pi), "e": Const(math.e)}

_PARSE_UNARY = {"sin", "cos", "sinh", "cosh", "exp", "log", "arcsin", "sqrt",
                "cbrt", "abs", "sign", "floor", "neg"}


def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse_prefix(text):
    """Parse the prefix mini-language into a field.

    Core forms: numbers, x, y, pi, e, (+ a b), (- a b), (* a b ...),
    (/ a b), (neg a), (pow a p), the unary functions, and (eip a c0 c1 ...).
    Convenience macros: (smoothstep a), (mod a period), (sq a).
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ExpressionError("empty expression")
    pos = 0

    def peek():
        if pos >= len(tokens):
            raise ExpressionError("unexpected end of expression")
        return tokens[pos]

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def atom(tok):
        if tok in _ATOMS:
            return _ATOMS[tok]
        try:
            return Const(float(tok))
        except ValueError:
            raise ExpressionError("unknown token %r" % (tok,)) from None

    def parse_one():
        tok = take()
        if tok == ")":
            raise ExpressionError("unexpected ')'")
        if tok != "(":
            return atom(tok)
        head = take()
        args = []
        while peek() != ")":
            args.append(parse_one())
        take()

        def need(n):
            if len(args) != n:
                raise ExpressionError("'%s' takes %d argument(s), got %d" % (head, n, len(args)))

        if head == "+":
            if len(args) < 2:
                raise ExpressionError("'+' needs at least two arguments")
            out = args[0]
            for a in args[1:]:
                out = _add(out, a)
            return out
        if head == "*":
            if len(args) < 2:
                raise ExpressionError("'*' needs at least two arguments")
            out = args[0]
            for a in args[1:]:
                out = _mul(out, a)
            return out
        if head == "-":
            need(2)
            return _sub(args[0], args[1])
        if head == "/":
            need(2)
            return _div(args[0], args[1])
        if head == "pow":
            need(2)
            if not isinstance(args[1], Const):
                raise ExpressionError("'pow' exponent must be a constant")
            return _pow(args[0], args[1].value)
        if head == "eip":
            if len(args) < 2:
                raise ExpressionError("'eip' needs an argument and coefficients")
            coeffs = []
            for c in args[1:]:
                if not isinstance(c, Const):
                    raise ExpressionError("'eip' coefficients must be constants")
                coeffs.append(c.value)
            return ExpInvPoly(args[0], coeffs)
        if head == "smoothstep":
            need(1)
            return smoothstep(args[0])
        if head == "mod":
            need(2)
            if not isinstance(args[1], Const):
                raise ExpressionError("'mod' period must be a constant")
            return mod_field(args[0], args[1].value)
        if head == "sq":
            need(1)
            return _mul(args[0], args[0])
        if head in _PARSE_UNARY:
            need(1)
            if head == "neg":
                return _neg(args[0])
            ctor = {"arcsin": arcsin, "abs": absval, "floor": floor_of}.get(head)
            if ctor is None:
                ctor = globals()[head]
            return ctor(args[0])
        raise ExpressionError("unknown operator %r" % (head,))

    result = parse_one()
    if pos != len(tokens):
        raise ExpressionError("trailing tokens after expression: %r" % (tokens[pos:],))
    return result
