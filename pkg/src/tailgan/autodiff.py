"""Reverse-mode automatic differentiation on a flat tape.

Every value is a dense float64 matrix; scalars are 1x1. The op set is
exactly what the training objectives need (affine maps, leaky ReLU, row
softmax, reductions, elementwise arithmetic, scalar powers, explicit
row/column broadcasts) and every vector-Jacobian rule is itself built
from these ops, so a gradient computation can be recorded on the tape
and differentiated again (``create_graph=True``).

There is no general tensor broadcasting: shapes must conform exactly,
and the two broadcast ops (``bcast_rows``, ``bcast_cols``) are explicit
nodes with their own adjoints.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError

__all__ = [
    "Tape",
    "Node",
    "forward",
    "backward",
    "mean_all",
    "l2_norm",
    "row_l2_norms",
]

_OP_NAMES = (
    "leaf",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "add_rowvec",
    "leaky_relu",
    "softmax_rows",
    "sum_all",
    "sum_axis0",
    "sum_axis1",
    "bcast_rows",
    "bcast_cols",
    "mul_scalar",
    "add_scalar",
    "pow_scalar",
)


class Node:
    """One record on a tape: cached value plus how it was produced."""

    __slots__ = ("tape", "index", "op", "parents", "aux", "value", "requires_grad", "grad")

    def __init__(self, tape, index, op, parents, aux, value, requires_grad):
        self.tape = tape
        self.index = index
        self.op = op
        self.parents = parents
        self.aux = aux
        self.value = value
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(index={self.index}, op={self.op!r}, shape={self.value.shape})"


def _as_matrix(x):
    """Coerce to a float64 matrix; scalars become 1x1."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ShapeError(
            f"values must be scalars or 2-d matrices, got ndim={a.ndim} shape={a.shape}"
        )
    return a


def _forward_value(op, pv, aux):
    """Compute the value of ``op`` from parent values. Shared by record and replay."""
    if op == "add":
        return pv[0] + pv[1]
    if op == "sub":
        return pv[0] - pv[1]
    if op == "mul":
        return pv[0] * pv[1]
    if op == "neg":
        return -pv[0]
    if op == "matmul":
        return pv[0] @ pv[1]
    if op == "transpose":
        return pv[0].T.copy()
    if op == "add_rowvec":
        return pv[0] + pv[1]
    if op == "leaky_relu":
        a = pv[0]
        # Subgradient convention at 0: slope 1 (the >= 0 branch).
        return np.where(a >= 0.0, a, aux["alpha"] * a)
    if op == "softmax_rows":
        a = pv[0]
        shifted = a - a.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    if op == "sum_all":
        return np.array([[pv[0].sum()]])
    if op == "sum_axis0":
        return pv[0].sum(axis=0, keepdims=True)
    if op == "sum_axis1":
        return pv[0].sum(axis=1, keepdims=True)
    if op == "bcast_rows":
        return np.repeat(pv[0], aux["m"], axis=0)
    if op == "bcast_cols":
        return np.repeat(pv[0], aux["n"], axis=1)
    if op == "mul_scalar":
        return pv[0] * aux["c"]
    if op == "add_scalar":
        return pv[0] + aux["c"]
    if op == "pow_scalar":
        with np.errstate(divide="ignore"):
            return np.power(pv[0], aux["p"])
    raise ValidationError(f"unknown op {op!r}")


def _validate(op, shapes, aux):
    """Shape/domain checks for ``op``; raises ShapeError naming op and shapes."""

    def fail(msg):
        raise ShapeError(f"op {op!r}: {msg} (operand shapes {shapes})")

    if op in ("add", "sub", "mul"):
        if shapes[0] != shapes[1]:
            fail("operands must have identical shapes")
    elif op == "matmul":
        if shapes[0][1] != shapes[1][0]:
            fail("inner dimensions must agree")
    elif op == "add_rowvec":
        if shapes[1][0] != 1 or shapes[0][1] != shapes[1][1]:
            fail("second operand must be a 1xn row vector matching the columns")
    elif op == "bcast_rows":
        if shapes[0][0] != 1:
            fail("operand must be a 1xn row vector")
        if aux["m"] < 1:
            fail("target row count must be positive")
    elif op == "bcast_cols":
        if shapes[0][1] != 1:
            fail("operand must be an mx1 column vector")
        if aux["n"] < 1:
            fail("target column count must be positive")


class Tape:
    """Append-only list of Nodes in topological order.

    Single-threaded by contract; distinct tapes are independent.
    """

    def __init__(self):
        self.nodes = []

    # -- recording -----------------------------------------------------

    def _record(self, op, parents, aux, value, requires_grad=False):
        node = Node(self, len(self.nodes), op, tuple(parents), aux, value, requires_grad)
        self.nodes.append(node)
        return node

    def _check_operands(self, op, parents):
        for p in parents:
            if not isinstance(p, Node):
                raise ValidationError(
                    f"op {op!r} received a {type(p).__name__} instead of a Node; "
                    "gradients returned by backward(create_graph=False) are detached "
                    "arrays and cannot be differentiated again. Re-run the first "
                    "backward pass with create_graph=True."
                )
            if p.tape is not self:
                raise ValidationError(f"op {op!r}: operand belongs to a different tape")

    def _apply(self, op, parents, **aux):
        self._check_operands(op, parents)
        shapes = [p.value.shape for p in parents]
        _validate(op, shapes, aux)
        value = _forward_value(op, [p.value for p in parents], aux)
        return self._record(op, parents, aux, value)

    # -- leaves ----------------------------------------------------------

    def leaf(self, value, requires_grad=False):
        """Enter an input matrix on the tape."""
        return self._record("leaf", (), {}, _as_matrix(value), requires_grad)

    def const(self, value):
        """Leaf that never receives a gradient."""
        return self.leaf(value, requires_grad=False)

    # -- ops -------------------------------------------------------------

    def add(self, a, b):
        return self._apply("add", (a, b))

    def sub(self, a, b):
        return self._apply("sub", (a, b))

    def mul(self, a, b):
        return self._apply("mul", (a, b))

    def neg(self, a):
        return self._apply("neg", (a,))

    def matmul(self, a, b):
        return self._apply("matmul", (a, b))

    def transpose(self, a):
        return self._apply("transpose", (a,))

    def add_rowvec(self, a, v):
        """a + v with v a 1xn bias row broadcast over the rows of a."""
        return self._apply("add_rowvec", (a, v))

    def leaky_relu(self, a, alpha=0.01):
        return self._apply("leaky_relu", (a,), alpha=float(alpha))

    def softmax_rows(self, a):
        """Row-wise softmax, computed with max subtraction."""
        return self._apply("softmax_rows", (a,))

    def sum_all(self, a):
        return self._apply("sum_all", (a,))

    def sum_axis0(self, a):
        return self._apply("sum_axis0", (a,))

    def sum_axis1(self, a):
        return self._apply("sum_axis1", (a,))

    def bcast_rows(self, v, m):
        """Tile a 1xn row m times."""
        return self._apply("bcast_rows", (v,), m=int(m))

    def bcast_cols(self, u, n):
        """Tile an mx1 column n times."""
        return self._apply("bcast_cols", (u,), n=int(n))

    def mul_scalar(self, a, c):
        return self._apply("mul_scalar", (a,), c=float(c))

    def add_scalar(self, a, c):
        return self._apply("add_scalar", (a,), c=float(c))

    def pow_scalar(self, a, p):
        p = float(p)
        if p != int(p) and (a.value < 0.0).any():
            raise ValidationError(
                f"op 'pow_scalar': non-integer exponent {p} on negative entries"
            )
        return self._apply("pow_scalar", (a,), p=p)

    # -- replay ------------------------------------------------------------

    def replay(self):
        """Recompute all forward values from the leaves.

        Returns True when every recomputed value matches the cached one
        bit-for-bit. Cached values are left untouched.
        """
        fresh = {}
        ok = True
        for node in self.nodes:
            if node.op == "leaf":
                fresh[node.index] = node.value
                continue
            pv = [fresh[p.index] for p in node.parents]
            v = _forward_value(node.op, pv, node.aux)
            fresh[node.index] = v
            if v.tobytes() != node.value.tobytes() or v.shape != node.value.shape:
                ok = False
        return ok


def forward(tape, op, parents, **aux):
    """Record one op on the tape; spec-level functional entry point."""
    if op == "leaf":
        raise ValidationError("use Tape.leaf to enter inputs")
    if op not in _OP_NAMES:
        raise ValidationError(f"unknown op {op!r}; supported: {_OP_NAMES}")
    return tape._apply(op, tuple(parents), **aux)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------


class _NumpyOps:
    """Adjoint arithmetic on raw arrays (create_graph=False)."""

    @staticmethod
    def operand(node):
        return node.value

    @staticmethod
    def lift(arr):
        return arr

    add = staticmethod(lambda a, b: a + b)
    sub = staticmethod(lambda a, b: a - b)
    mul = staticmethod(lambda a, b: a * b)
    neg = staticmethod(lambda a: -a)
    matmul = staticmethod(lambda a, b: a @ b)
    transpose = staticmethod(lambda a: a.T.copy())
    sum_axis0 = staticmethod(lambda a: a.sum(axis=0, keepdims=True))
    sum_axis1 = staticmethod(lambda a: a.sum(axis=1, keepdims=True))

    @staticmethod
    def bcast_rows(v, m):
        return np.repeat(v, m, axis=0)

    @staticmethod
    def bcast_cols(u, n):
        return np.repeat(u, n, axis=1)

    @staticmethod
    def mul_scalar(a, c):
        return a * c

    @staticmethod
    def pow_scalar(a, p):
        with np.errstate(divide="ignore"):
            return np.power(a, p)


class _TapeOps:
    """Adjoint arithmetic recorded as new tape nodes (create_graph=True)."""

    def __init__(self, tape):
        self.t = tape

    def operand(self, node):
        return node

    def lift(self, arr):
        return self.t.const(arr)

    def add(self, a, b):
        return self.t.add(a, b)

    def sub(self, a, b):
        return self.t.sub(a, b)

    def mul(self, a, b):
        return self.t.mul(a, b)

    def neg(self, a):
        return self.t.neg(a)

    def matmul(self, a, b):
        return self.t.matmul(a, b)

    def transpose(self, a):
        return self.t.transpose(a)

    def sum_axis0(self, a):
        return self.t.sum_axis0(a)

    def sum_axis1(self, a):
        return self.t.sum_axis1(a)

    def bcast_rows(self, v, m):
        return self.t.bcast_rows(v, m)

    def bcast_cols(self, u, n):
        return self.t.bcast_cols(u, n)

    def mul_scalar(self, a, c):
        return self.t.mul_scalar(a, c)

    def pow_scalar(self, a, p):
        return self.t.pow_scalar(a, p)


def _vjp(node, g, ops):
    """Cotangent contributions of ``node`` to each of its parents.

    ``g`` is the cotangent at ``node`` (same shape as node.value), as an
    array or a Node depending on the adapter. The rules only reference
    parent/output *operands* plus detached constants, so under the tape
    adapter the returned expressions are themselves differentiable.
    """
    op = node.op
    P = node.parents
    if op == "add":
        return (g, g)
    if op == "sub":
        return (g, ops.neg(g))
    if op == "mul":
        return (ops.mul(g, ops.operand(P[1])), ops.mul(g, ops.operand(P[0])))
    if op == "neg":
        return (ops.neg(g),)
    if op == "matmul":
        a, b = ops.operand(P[0]), ops.operand(P[1])
        return (ops.matmul(g, ops.transpose(b)), ops.matmul(ops.transpose(a), g))
    if op == "transpose":
        return (ops.transpose(g),)
    if op == "add_rowvec":
        return (g, ops.sum_axis0(g))
    if op == "leaky_relu":
        # Activation mask is a detached constant: second derivative is 0 a.e.
        a = P[0].value
        m = np.where(a >= 0.0, 1.0, node.aux["alpha"])
        return (ops.mul(g, ops.lift(m)),)
    if op == "softmax_rows":
        y = ops.operand(node)
        s = ops.sum_axis1(ops.mul(g, y))
        n = node.value.shape[1]
        return (ops.mul(y, ops.sub(g, ops.bcast_cols(s, n))),)
    if op == "sum_all":
        m, n = P[0].value.shape
        return (ops.bcast_rows(ops.bcast_cols(g, n), m),)
    if op == "sum_axis0":
        return (ops.bcast_rows(g, P[0].value.shape[0]),)
    if op == "sum_axis1":
        return (ops.bcast_cols(g, P[0].value.shape[1]),)
    if op == "bcast_rows":
        return (ops.sum_axis0(g),)
    if op == "bcast_cols":
        return (ops.sum_axis1(g),)
    if op == "mul_scalar":
        return (ops.mul_scalar(g, node.aux["c"]),)
    if op == "add_scalar":
        return (g,)
    if op == "pow_scalar":
        p = node.aux["p"]
        a = ops.operand(P[0])
        return (ops.mul(g, ops.mul_scalar(ops.pow_scalar(a, p - 1.0), p)),)
    raise ValidationError(f"op {op!r} has no adjoint")


def backward(tape, output, wrt=None, create_graph=False):
    """Accumulate d(output)/d(node) for every node in ``wrt``.

    ``output`` must be scalar (a 1x1 node). Returns a list of gradients
    aligned with ``wrt`` (default: all requires_grad leaves in tape
    order): Nodes when ``create_graph`` is set, plain float64 arrays
    otherwise. In the latter case each wrt node's ``grad`` field is also
    set. With ``create_graph=True`` the adjoint computation is recorded
    on the same tape, so the returned Nodes support a further backward.
    """
    if not isinstance(output, Node) or output.tape is not tape:
        raise ValidationError("output must be a Node on the given tape")
    if output.value.size != 1:
        raise ValidationError(
            f"backward requires a scalar output, got shape {output.value.shape}"
        )
    if wrt is None:
        wrt = [n for n in tape.nodes if n.op == "leaf" and n.requires_grad]
    for w in wrt:
        if not isinstance(w, Node) or w.tape is not tape:
            raise ValidationError("wrt entries must be Nodes on the given tape")

    # Keep only ancestors of some wrt target: cotangents elsewhere are dead.
    keep = np.zeros(len(tape.nodes), dtype=bool)
    wrt_idx = {w.index for w in wrt}
    for node in tape.nodes:
        if node.index in wrt_idx or any(keep[p.index] for p in node.parents):
            keep[node.index] = True

    ops = _TapeOps(tape) if create_graph else _NumpyOps()
    cot = {}
    results = {}
    if keep[output.index]:
        cot[output.index] = ops.lift(np.ones((1, 1)))

    for idx in range(output.index, -1, -1):
        node = tape.nodes[idx]
        g = cot.pop(idx, None)
        if g is None:
            continue
        if idx in wrt_idx:
            results[idx] = g
        if node.op == "leaf":
            continue
        contributions = _vjp(node, g, ops)
        for parent, contrib in zip(node.parents, contributions):
            if not keep[parent.index]:
                continue
            prev = cot.get(parent.index)
            cot[parent.index] = contrib if prev is None else ops.add(prev, contrib)

    grads = []
    for w in wrt:
        g = results.get(w.index)
        if g is None:
            g = ops.lift(np.zeros_like(w.value))
        grads.append(g)
        if not create_graph:
            w.grad = g
    return grads


# ---------------------------------------------------------------------------
# Composite helpers (closed over the primitive op set)
# ---------------------------------------------------------------------------


def mean_all(tape, x):
    """Mean of all entries, as a 1x1 node."""
    return tape.mul_scalar(tape.sum_all(x), 1.0 / x.value.size)


def l2_norm(tape, x):
    """Euclidean norm of all entries (Frobenius for matrices), 1x1 node."""
    return tape.pow_scalar(tape.sum_all(tape.mul(x, x)), 0.5)


def row_l2_norms(tape, x):
    """Per-row Euclidean norms of an mxn node, as an mx1 node."""
    return tape.pow_scalar(tape.sum_axis1(tape.mul(x, x)), 0.5)
