"""Second-order spatial jets with reverse-mode parameter gradients.

A jet carries, for a batch of N points in dim D, the channel arrays

    val  : (N, W)        function values
    grad : (N, D, W)     first spatial derivatives d/dx_i
    hess : (N, D, W)     pure second spatial derivatives d2/dx_i2

where W is the width of the vector quantity (neurons of a layer, or 1 for
scalars). Mixed second derivatives are not carried: the Helmholtz operator
and normal derivatives need only the Hessian diagonal.

All jet arithmetic is recorded on a Tape. The reverse pass propagates
adjoints through every channel, so losses built from Laplacians get exact
parameter gradients (reverse-over-forward).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DomainError, UsageError


class Tape:
    """Ordered, acyclic record of jet/array operations.

    Creation order is a topological order; backward() walks it in reverse.
    """

    def __init__(self):
        self.nodes = []
        self.params = []

    def _register(self, node):
        node.idx = len(self.nodes)
        self.nodes.append(node)
        return node

    def param(self, value, name=None):
        """Register a trainable parameter array and return its node."""
        node = Param(self, np.asarray(value, dtype=float), name)
        self.params.append(node)
        return node

    def backward(self, root):
        """Return {Param: gradient array} of a scalar root w.r.t. all params.

        Adjoints flow through value, grad and hess channels alike.
        """
        if not isinstance(root, Scalar):
            raise UsageError("backward root must be a Scalar node")
        if root.tape is not self:
            raise UsageError("root was recorded on a different tape")
        adj = {root.idx: 1.0}
        grads = {}
        for node in reversed(self.nodes[: root.idx + 1]):
            a = adj.pop(node.idx, None)
            if a is None:
                continue
            if isinstance(node, Param):
                grads[node] = grads.get(node, 0.0) + a
                continue
            for parent, contrib in node.vjp(a):
                if parent.idx in adj:
                    _accumulate(adj, parent, contrib)
                else:
                    adj[parent.idx] = contrib
        out = {}
        for p in self.params:
            g = grads.get(p)
            out[p] = np.zeros_like(p.value) if g is None else np.asarray(g)
        return out


def _accumulate(adj, parent, contrib):
    cur = adj[parent.idx]
    if isinstance(cur, tuple):
        adj[parent.idx] = tuple(c + d for c, d in zip(cur, contrib))
    else:
        adj[parent.idx] = cur + contrib


class Node:
    __slots__ = ("tape", "idx")


class Param(Node):
    __slots__ = ("value", "name")

    def __init__(self, tape, value, name=None):
        self.tape = tape
        self.value = value
        self.name = name
        tape._register(self)

    def __repr__(self):
        return f"Param({self.name or self.idx}, shape={self.value.shape})"


class Jet(Node):
    """Batched second-order jet; see module docstring for channel layout."""

    __slots__ = ("val", "grad", "hess", "_vjp_parents", "_vjp_fn")

    def __init__(self, tape, val, grad, hess, parents=(), vjp_fn=None):
        self.tape = tape
        self.val = val
        self.grad = grad
        self.hess = hess
        self._vjp_parents = parents
        self._vjp_fn = vjp_fn
        tape._register(self)

    @property
    def n(self):
        return self.val.shape[0]

    @property
    def dim(self):
        return self.grad.shape[1]

    @property
    def width(self):
        return self.val.shape[1]

    # convenience accessors for single-point, width-1 jets
    @property
    def value(self):
        return self.val[..., 0] if self.width == 1 else self.val

    @property
    def gradient(self):
        return self.grad[..., 0] if self.width == 1 else self.grad

    @property
    def hess_diag(self):
        return self.hess[..., 0] if self.width == 1 else self.hess

    def vjp(self, adj):
        if self._vjp_fn is None:
            return ()
        return self._vjp_fn(adj)

    def zero_adj(self):
        return (np.zeros_like(self.val), np.zeros_like(self.grad), np.zeros_like(self.hess))

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


class Arr(Node):
    """Plain batch array (N,) derived from jet channels."""

    __slots__ = ("val", "_vjp_parents", "_vjp_fn")

    def __init__(self, tape, val, parents=(), vjp_fn=None):
        self.tape = tape
        self.val = val
        self._vjp_parents = parents
        self._vjp_fn = vjp_fn
        tape._register(self)

    def vjp(self, adj):
        if self._vjp_fn is None:
            return ()
        return self._vjp_fn(adj)

    def __add__(self, other):
        return arr_add(self, other)

    def __sub__(self, other):
        return arr_sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Arr):
            return arr_mul(self, other)
        return arr_scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return arr_scale(self, -1.0)


class Scalar(Node):
    __slots__ = ("val", "_vjp_parents", "_vjp_fn")

    def __init__(self, tape, val, parents=(), vjp_fn=None):
        self.tape = tape
        self.val = float(val)
        self._vjp_parents = parents
        self._vjp_fn = vjp_fn
        tape._register(self)

    def vjp(self, adj):
        if self._vjp_fn is None:
            return ()
        return self._vjp_fn(adj)


# ---------------------------------------------------------------------------
# jet constructors

def lift_points(tape, x):
    """Lift coordinates x (N, D) into a width-D jet seeded with unit gradients."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, dim = x.shape
    if dim not in (1, 2, 3):
        raise ConfigurationError(f"spatial dim must be 1, 2 or 3, got {dim}")
    grad = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy()
    hess = np.zeros((n, dim, dim))
    return Jet(tape, x.copy(), grad, hess)


def lift_point(tape, x):
    """Lift one coordinate vector; returns a list of width-1 jets, one per axis."""
    jets = lift_points(tape, np.asarray(x, dtype=float).reshape(1, -1))
    return [narrow(jets, i, 1) for i in range(jets.dim)]


def const_jet(tape, val, dim):
    """Constant jet: zero spatial derivatives, no adjoint flow."""
    val = np.asarray(val, dtype=float)
    if val.ndim == 0:
        val = val.reshape(1, 1)
    elif val.ndim == 1:
        val = val[:, None]
    n, w = val.shape
    return Jet(tape, val, np.zeros((n, dim, w)), np.zeros((n, dim, w)))


# ---------------------------------------------------------------------------
# linear ops

def add(u, v):
    def vjp(adj):
        return ((u, adj), (v, adj))

    return Jet(u.tape, u.val + v.val, u.grad + v.grad, u.hess + v.hess, (u, v), vjp)


def sub(u, v):
    def vjp(adj):
        bv, bg, bh = adj
        return ((u, adj), (v, (-bv, -bg, -bh)))

    return Jet(u.tape, u.val - v.val, u.grad - v.grad, u.hess - v.hess, (u, v), vjp)


def scale(u, c):
    c = float(c)

    def vjp(adj):
        bv, bg, bh = adj
        return ((u, (c * bv, c * bg, c * bh)),)

    return Jet(u.tape, c * u.val, c * u.grad, c * u.hess, (u,), vjp)


def add_const(u, c):
    def vjp(adj):
        return ((u, adj),)

    return Jet(u.tape, u.val + c, u.grad, u.hess, (u,), vjp)


def mul(u, v):
    """Elementwise product with the diagonal-Hessian product rule."""
    uv, ug, uh = u.val, u.grad, u.hess
    vv, vg, vh = v.val, v.grad, v.hess
    uvb = uv[:, None, :]
    vvb = vv[:, None, :]
    val = uv * vv
    grad = ug * vvb + uvb * vg
    hess = uh * vvb + 2.0 * ug * vg + uvb * vh

    def vjp(adj):
        bv, bg, bh = adj
        bu_val = bv * vv + (bg * vg).sum(axis=1) + (bh * vh).sum(axis=1)
        bu_grad = bg * vvb + 2.0 * bh * vg
        bu_hess = bh * vvb
        bv_val = bv * uv + (bg * ug).sum(axis=1) + (bh * uh).sum(axis=1)
        bv_grad = bg * uvb + 2.0 * bh * ug
        bv_hess = bh * uvb
        return ((u, (bu_val, bu_grad, bu_hess)), (v, (bv_val, bv_grad, bv_hess)))

    return Jet(u.tape, val, grad, hess, (u, v), vjp)


def _matmul_nd(a, m):
    # (N, D, W) @ (W, O) as one flat gemm instead of N tiny ones
    n, d, w = a.shape
    return (a.reshape(n * d, w) @ m).reshape(n, d, -1)


def linear(u, weight, bias=None):
    """Affine layer with trainable Param weight (out, in) and bias (out,)."""
    W = weight.value
    val = u.val @ W.T
    if bias is not None:
        val = val + bias.value
    grad = _matmul_nd(u.grad, W.T)
    hess = _matmul_nd(u.hess, W.T)

    def vjp(adj):
        bv, bg, bh = adj
        bu = (bv @ W, _matmul_nd(bg, W), _matmul_nd(bh, W))
        n, d, o = bg.shape
        w = u.width
        bW = bv.T @ u.val
        bW += bg.reshape(n * d, o).T @ u.grad.reshape(n * d, w)
        bW += bh.reshape(n * d, o).T @ u.hess.reshape(n * d, w)
        out = [(u, bu), (weight, bW)]
        if bias is not None:
            out.append((bias, bv.sum(axis=0)))
        return out

    parents = (u, weight) if bias is None else (u, weight, bias)
    return Jet(u.tape, val, grad, hess, parents, vjp)


def affine_const(u, matrix, offset=None):
    """Affine map with constant coefficients (no parameter adjoints)."""
    A = np.asarray(matrix, dtype=float)
    val = u.val @ A.T
    if offset is not None:
        val = val + np.asarray(offset, dtype=float)
    grad = _matmul_nd(u.grad, A.T)
    hess = _matmul_nd(u.hess, A.T)

    def vjp(adj):
        bv, bg, bh = adj
        return ((u, (bv @ A, _matmul_nd(bg, A), _matmul_nd(bh, A))),)

    return Jet(u.tape, val, grad, hess, (u,), vjp)


def concat(jets):
    val = np.concatenate([j.val for j in jets], axis=-1)
    grad = np.concatenate([j.grad for j in jets], axis=-1)
    hess = np.concatenate([j.hess for j in jets], axis=-1)
    widths = [j.width for j in jets]

    def vjp(adj):
        bv, bg, bh = adj
        out = []
        o = 0
        for j, w in zip(jets, widths):
            out.append((j, (bv[..., o : o + w], bg[..., o : o + w], bh[..., o : o + w])))
            o += w
        return out

    return Jet(jets[0].tape, val, grad, hess, tuple(jets), vjp)


def narrow(u, start, width):
    """Slice columns [start, start+width) of a jet."""
    sl = slice(start, start + width)

    def vjp(adj):
        bv, bg, bh = adj
        zv, zg, zh = u.zero_adj()
        zv[..., sl] = bv
        zg[..., sl] = bg
        zh[..., sl] = bh
        return ((u, (zv, zg, zh)),)

    return Jet(u.tape, u.val[..., sl], u.grad[..., sl], u.hess[..., sl], (u,), vjp)


def sum_width(u):
    """Sum over the width axis, producing a width-1 jet."""

    def vjp(adj):
        bv, bg, bh = adj
        w = u.width
        return ((u, (np.repeat(bv, w, -1), np.repeat(bg, w, -1), np.repeat(bh, w, -1))),)

    return Jet(
        u.tape,
        u.val.sum(-1, keepdims=True),
        u.grad.sum(-1, keepdims=True),
        u.hess.sum(-1, keepdims=True),
        (u,),
        vjp,
    )


# ---------------------------------------------------------------------------
# elementwise nonlinear ops
#
# For unary f: val f(u); grad_i f'(u) u_i; hess_i f''(u) u_i^2 + f'(u) u_ii.
# The reverse pass additionally needs f'''.


def _unary(u, f, f1, f2, f3):
    v = u.val
    d1, d2 = f1(v), f2(v)
    g, h = u.grad, u.hess
    d1b, d2b = d1[:, None, :], d2[:, None, :]
    val = f(v)
    grad = d1b * g
    hess = d2b * g * g + d1b * h

    def vjp(adj):
        bv, bg, bh = adj
        d3 = f3(v)[:, None, :]
        t1 = bg * g
        t1 *= d2b
        t2 = g * g
        t2 *= d3
        t2 += d2b * h
        t2 *= bh
        bu_val = bv * d1 + t1.sum(axis=1) + t2.sum(axis=1)
        bu_grad = bh * d2b
        bu_grad *= 2.0 * g
        bu_grad += bg * d1b
        bu_hess = bh * d1b
        return ((u, (bu_val, bu_grad, bu_hess)),)

    return Jet(u.tape, val, grad, hess, (u,), vjp)


def sin(u):
    return _unary(u, np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))


def cos(u):
    return _unary(u, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin)


def exp(u):
    return _unary(u, np.exp, np.exp, np.exp, np.exp)


def recip(u):
    if np.any(u.val == 0.0):
        raise DomainError("recip at zero")
    return _unary(
        u,
        lambda x: 1.0 / x,
        lambda x: -1.0 / x**2,
        lambda x: 2.0 / x**3,
        lambda x: -6.0 / x**4,
    )


def sqrt(u):
    if np.any(u.val <= 0.0):
        raise DomainError("sqrt at or below zero")
    return _unary(
        u,
        np.sqrt,
        lambda x: 0.5 / np.sqrt(x),
        lambda x: -0.25 * x**-1.5,
        lambda x: 0.375 * x**-2.5,
    )


def _sigma(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(u):
    def f1(x):
        s = _sigma(x)
        return s * (1.0 - s)

    def f2(x):
        s = _sigma(x)
        return s * (1.0 - s) * (1.0 - 2.0 * s)

    def f3(x):
        s = _sigma(x)
        return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)

    return _unary(u, _sigma, f1, f2, f3)


ELEMENTARY = {
    "add": add,
    "mul": mul,
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "recip": recip,
    "sqrt": sqrt,
    "sigmoid": sigmoid,
    "affine": affine_const,
}


def jet_apply(fid, *operands, **kwargs):
    """Apply a registered elementary function to jets by id."""
    if fid not in ELEMENTARY:
        raise UsageError(f"unknown elementary function {fid!r}")
    if len(operands) > 1:
        dims = {op.dim for op in operands if isinstance(op, Jet)}
        if len(dims) > 1:
            raise UsageError("operand jets must share the spatial dimension")
    return ELEMENTARY[fid](*operands, **kwargs)


# ---------------------------------------------------------------------------
# array nodes (batch scalars derived from jets)


def _w1(u):
    if u.width != 1:
        raise UsageError("expected a width-1 jet")
    return u


def jet_value(u):
    _w1(u)

    def vjp(adj):
        zv, zg, zh = u.zero_adj()
        zv[:, 0] = adj
        return ((u, (zv, zg, zh)),)

    return Arr(u.tape, u.val[:, 0].copy(), (u,), vjp)


def laplacian(u):
    """Sum of pure second derivatives of a width-1 jet."""
    _w1(u)

    def vjp(adj):
        zv, zg, zh = u.zero_adj()
        zh[:, :, 0] = adj[:, None]
        return ((u, (zv, zg, zh)),)

    return Arr(u.tape, u.hess[:, :, 0].sum(axis=1), (u,), vjp)


def normal_derivative(u, normals):
    """grad . n for a width-1 jet against constant unit normals (N, D)."""
    _w1(u)
    normals = np.asarray(normals, dtype=float)

    def vjp(adj):
        zv, zg, zh = u.zero_adj()
        zg[:, :, 0] = adj[:, None] * normals
        return ((u, (zv, zg, zh)),)

    return Arr(u.tape, (u.grad[:, :, 0] * normals).sum(axis=1), (u,), vjp)


def _as_arr(tape, x):
    if isinstance(x, Arr):
        return x
    return Arr(tape, np.asarray(x, dtype=float))


def arr_add(a, b):
    b = _as_arr(a.tape, b)

    def vjp(adj):
        return ((a, adj), (b, adj))

    return Arr(a.tape, a.val + b.val, (a, b), vjp)


def arr_sub(a, b):
    b = _as_arr(a.tape, b)

    def vjp(adj):
        return ((a, adj), (b, -adj))

    return Arr(a.tape, a.val - b.val, (a, b), vjp)


def arr_mul(a, b):
    def vjp(adj):
        return ((a, adj * b.val), (b, adj * a.val))

    return Arr(a.tape, a.val * b.val, (a, b), vjp)


def arr_scale(a, c):
    c = float(c)

    def vjp(adj):
        return ((a, c * adj),)

    return Arr(a.tape, c * a.val, (a,), vjp)


def arr_square(a):
    def vjp(adj):
        return ((a, 2.0 * adj * a.val),)

    return Arr(a.tape, a.val * a.val, (a,), vjp)


def mean(a):
    n = a.val.shape[0]

    def vjp(adj):
        return ((a, np.full(n, adj / n)),)

    return Scalar(a.tape, a.val.mean(), (a,), vjp)


def scalar_combine(scalars, weights):
    """Weighted sum of scalar nodes (constant weights)."""
    weights = [float(w) for w in weights]

    def vjp(adj):
        return tuple((s, adj * w) for s, w in zip(scalars, weights))

    return Scalar(
        scalars[0].tape,
        sum(w * s.val for s, w in zip(scalars, weights)),
        tuple(scalars),
        vjp,
    )


def backward_params(root):
    """Alias for Tape.backward: parameter gradients of a scalar loss node."""
    return root.tape.backward(root)
