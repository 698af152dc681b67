"""Reverse-mode autodiff over numpy arrays.

A Tape is an append-only list of nodes; each node stores its value, the
indices of its parents (always earlier in the list, so the tape is
topologically ordered by construction) and a vector-Jacobian closure.
Named leaves form the parameter registry used by the trainer to route
gradients into per-block optimizer state and to zero frozen blocks.

All training math runs in float64. Clamp-style nodes use subgradient 0 at
the kink.
"""
from __future__ import annotations

import numpy as np

# op name -> sample-input factory, used by the exhaustive registry test to
# prove every primitive has a working derivative rule
OP_RULES: dict[str, dict] = {}


def _register(name, n_inputs=1, diff_inputs=None):
    OP_RULES[name] = {
        "n_inputs": n_inputs,
        "diff_inputs": tuple(range(n_inputs)) if diff_inputs is None else tuple(diff_inputs),
    }


class Node:
    __slots__ = ("tape", "idx", "value", "parents", "vjp", "name")

    def __init__(self, tape, idx, value, parents, vjp, name=None):
        self.tape = tape
        self.idx = idx
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" '{self.name}'" if self.name else ""
        return f"<Node{tag} #{self.idx} shape={self.value.shape}>"


class Tape:
    """Append-only operation record for one forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, int] = {}
        self._backward_done = False

    def _push(self, value, parents=(), vjp=None, name=None):
        value = np.asarray(value, dtype=np.float64)
        node = Node(self, len(self.nodes), value, tuple(p.idx for p in parents), vjp, name)
        self.nodes.append(node)
        return node

    def leaf(self, name, value):
        """Register a named parameter block as a differentiable leaf."""
        if name in self.params:
            raise ValueError(f"parameter {name!r} registered twice")
        node = self._push(np.array(value, dtype=np.float64), name=name)
        self.params[name] = node.idx
        return node

    def constant(self, value):
        """Non-differentiable input (stop-gradient)."""
        return self._push(value)


def _as_node(tape, x):
    return x if isinstance(x, Node) else tape.constant(x)


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b):
    t = a.tape if isinstance(a, Node) else b.tape
    a, b = _as_node(t, a), _as_node(t, b)
    av, bv = a.value, b.value
    return t._push(av + bv, (a, b),
                   lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


_register("add", 2)


def sub(a, b):
    t = a.tape if isinstance(a, Node) else b.tape
    a, b = _as_node(t, a), _as_node(t, b)
    av, bv = a.value, b.value
    return t._push(av - bv, (a, b),
                   lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


_register("sub", 2)


def mul(a, b):
    t = a.tape if isinstance(a, Node) else b.tape
    a, b = _as_node(t, a), _as_node(t, b)
    av, bv = a.value, b.value
    return t._push(av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


_register("mul", 2)


def div(a, b):
    t = a.tape if isinstance(a, Node) else b.tape
    a, b = _as_node(t, a), _as_node(t, b)
    av, bv = a.value, b.value
    return t._push(av / bv, (a, b),
                   lambda g: (_unbroadcast(g / bv, av.shape),
                              _unbroadcast(-g * av / (bv * bv), bv.shape)))


_register("div", 2)


def neg(a):
    return a.tape._push(-a.value, (a,), lambda g: (-g,))


_register("neg")


def exp(a):
    out = np.exp(a.value)
    return a.tape._push(out, (a,), lambda g: (g * out,))


_register("exp")


def log(a):
    av = a.value
    return a.tape._push(np.log(av), (a,), lambda g: (g / av,))


_register("log")


def sqrt(a):
    out = np.sqrt(a.value)
    return a.tape._push(out, (a,), lambda g: (g * (0.5 / out),))


_register("sqrt")


def sin(a):
    av = a.value
    return a.tape._push(np.sin(av), (a,), lambda g: (g * np.cos(av),))


_register("sin")


def cos(a):
    av = a.value
    return a.tape._push(np.cos(av), (a,), lambda g: (-g * np.sin(av),))


_register("cos")


def powc(a, p):
    """a ** p for a constant exponent."""
    av = a.value
    return a.tape._push(av ** p, (a,), lambda g: (g * p * av ** (p - 1),))


_register("powc")


def sigmoid(a):
    # exp(-|x|) never overflows; both branches share it
    z = np.exp(-np.abs(a.value))
    out = np.where(a.value >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    return a.tape._push(out, (a,), lambda g: (g * out * (1.0 - out),))


_register("sigmoid")


def relu(a):
    av = a.value
    return a.tape._push(np.maximum(av, 0.0), (a,), lambda g: (g * (av > 0.0),))


_register("relu")


def absval(a):
    av = a.value
    return a.tape._push(np.abs(av), (a,), lambda g: (g * np.sign(av),))


_register("absval")


def maximum_c(a, c):
    av = a.value
    return a.tape._push(np.maximum(av, c), (a,), lambda g: (g * (av > c),))


_register("maximum_c")


def minimum_c(a, c):
    av = a.value
    return a.tape._push(np.minimum(av, c), (a,), lambda g: (g * (av < c),))


_register("minimum_c")


def where(cond, a, b):
    """Select by a constant boolean mask; gradients flow through the taken branch."""
    t = a.tape if isinstance(a, Node) else b.tape
    a, b = _as_node(t, a), _as_node(t, b)
    cond = np.asarray(cond, dtype=bool)
    av, bv = a.value, b.value
    out = np.where(cond, av, bv)
    return t._push(out, (a, b),
                   lambda g: (_unbroadcast(np.where(cond, g, 0.0), av.shape),
                              _unbroadcast(np.where(cond, 0.0, g), bv.shape)))


_register("where", 2)


def reduce_sum(a, axis=None, keepdims=False):
    av = a.value

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, av.shape).copy(),)

    return a.tape._push(np.sum(av, axis=axis, keepdims=keepdims), (a,), vjp)


_register("reduce_sum")


def reduce_mean(a, axis=None, keepdims=False):
    av = a.value
    n = av.size if axis is None else av.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / n, av.shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2 / n, av.shape).copy(),)

    return a.tape._push(np.mean(av, axis=axis, keepdims=keepdims), (a,), vjp)


_register("reduce_mean")


def matmul(a, b):
    t = a.tape if isinstance(a, Node) else b.tape
    a, b = _as_node(t, a), _as_node(t, b)
    av, bv = a.value, b.value

    def vjp(g):
        if av.ndim == 1 and bv.ndim == 1:
            ga, gb = g * bv, g * av
        elif bv.ndim == 1:
            # (..., m, k) @ (k,): ga = g outer b per row, gb = a^T g
            ga = g[..., None] * bv
            gb = np.swapaxes(av, -1, -2) @ g
        elif av.ndim == 1:
            # (k,) @ (..., k, n)
            ga = g @ np.swapaxes(bv, -1, -2)
            gb = av[..., None] * g[..., None, :]
        else:
            ga = g @ np.swapaxes(bv, -1, -2)
            gb = np.swapaxes(av, -1, -2) @ g
        # sum out broadcast batch dims
        ga = _unbroadcast(np.asarray(ga), av.shape)
        gb = _unbroadcast(np.asarray(gb), bv.shape)
        return (ga, gb)

    return t._push(av @ bv, (a, b), vjp)


_register("matmul", 2)


def transpose_last2(a):
    av = a.value
    return a.tape._push(np.swapaxes(av, -1, -2).copy(), (a,),
                        lambda g: (np.swapaxes(g, -1, -2),))


_register("transpose_last2")


def reshape(a, shape):
    av = a.value
    return a.tape._push(av.reshape(shape), (a,), lambda g: (g.reshape(av.shape),))


_register("reshape")


def concat(nodes, axis=-1):
    t = nodes[0].tape
    vals = [n.value for n in nodes]
    sizes = [v.shape[axis] for v in vals]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return t._push(np.concatenate(vals, axis=axis), tuple(nodes), vjp)


_register("concat", 2)


def stack(nodes, axis=0):
    t = nodes[0].tape
    vals = [n.value for n in nodes]

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(vals)))

    return t._push(np.stack(vals, axis=axis), tuple(nodes), vjp)


_register("stack", 2)


def getitem(a, index):
    av = a.value

    def vjp(g):
        out = np.zeros_like(av)
        np.add.at(out, index, g)
        return (out,)

    return a.tape._push(av[index], (a,), vjp)


_register("getitem")


def detach(a):
    """Stop-gradient: re-enter the value as a constant."""
    return a.tape.constant(a.value.copy())


# ---------------------------------------------------------------------------
# composite helpers (no new derivative rules)
# ---------------------------------------------------------------------------

def dot(a, b, axis=-1, keepdims=False):
    return reduce_sum(mul(a, b), axis=axis, keepdims=keepdims)


def norm(a, axis=-1, keepdims=False, eps=0.0):
    s = reduce_sum(mul(a, a), axis=axis, keepdims=keepdims)
    if eps:
        s = maximum_c(s, eps)
    return sqrt(s)


def normalize(a, axis=-1, eps=1e-12):
    return div(a, norm(a, axis=axis, keepdims=True, eps=eps))


def clamp(a, lo, hi):
    return minimum_c(maximum_c(a, lo), hi)


def custom_op(tape, value, parents, vjp, name=None):
    """Fused primitive with a hand-written backward (used by the rasterizer)."""
    return tape._push(value, parents, vjp, name=name)


_register("custom_op", 1)


# ---------------------------------------------------------------------------
# backward pass and gradient checking
# ---------------------------------------------------------------------------

def backward(tape, output, frozen=(), seed=None):
    """Accumulate gradients of `output` w.r.t. every registered leaf.

    Leaves whose name starts with any prefix in `frozen` get exact-zero
    gradients. One backward per tape: a second call is a contract violation.
    """
    if tape._backward_done:
        raise RuntimeError("backward already ran on this tape")
    tape._backward_done = True
    if output.tape is not tape:
        raise ValueError("output node belongs to a different tape")

    grads: list = [None] * len(tape.nodes)
    if seed is None:
        if output.value.size != 1:
            raise ValueError("scalar output required when no seed is given")
        seed = np.ones_like(output.value)
    grads[output.idx] = np.asarray(seed, dtype=np.float64)

    for node in reversed(tape.nodes[: output.idx + 1]):
        g = grads[node.idx]
        if g is None or node.vjp is None:
            continue
        parent_grads = node.vjp(g)
        for pidx, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            if grads[pidx] is None:
                grads[pidx] = np.zeros_like(tape.nodes[pidx].value)
            grads[pidx] += pg

    out = {}
    frozen = tuple(frozen)
    for name, idx in tape.params.items():
        g = grads[idx]
        if g is None or any(name == p or name.startswith(p + ".") for p in frozen):
            g = np.zeros_like(tape.nodes[idx].value)
        out[name] = g
    return out


def grad_check(f, params, eps=1e-5, frozen=(), max_per_block=None, rng=None):
    """Max relative error of backward() against central finite differences.

    `f(tape, leaves) -> scalar Node` must be pure in the given params.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def run(p):
        t = Tape()
        leaves = {k: t.leaf(k, v) for k, v in p.items()}
        out = f(t, leaves)
        return t, leaves, out

    tape, _, out = run(params)
    grads = backward(tape, out, frozen=frozen)

    worst = 0.0
    for name, base in params.items():
        if any(name == p or name.startswith(p + ".") for p in frozen):
            continue
        idx_all = np.arange(base.size)
        if max_per_block is not None and base.size > max_per_block:
            r = rng or np.random.default_rng(0)
            idx_all = r.choice(base.size, size=max_per_block, replace=False)
        for flat in idx_all:
            for sgn, store in ((1.0, "hi"), (-1.0, "lo")):
                p2 = {k: v.copy() for k, v in params.items()}
                p2[name].flat[flat] += sgn * eps
                _, _, o = run(p2)
                if sgn > 0:
                    hi = float(o.value)
                else:
                    lo = float(o.value)
            fd = (hi - lo) / (2.0 * eps)
            ad = float(grads[name].flat[flat])
            rel = abs(ad - fd) / max(abs(ad), abs(fd), 1e-6)
            worst = max(worst, rel)
    return worst
