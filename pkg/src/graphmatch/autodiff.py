"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Everything is float64 numpy under the hood. A Tensor is a node of a dynamic
computation graph: ops record their parents and a backward closure, and
``backward`` replays the graph in reverse topological order. The op set is
exactly what the matching models need; no broadcasting rules beyond numpy's.
"""

import numpy as np

EPS = 1e-8


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    """Dense float64 array plus an optional gradient slot.

    Tensors created by ops keep references to their parents and a closure
    computing parent gradients from the output gradient, forming the tape.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; all arithmetic goes through the module-level ops
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return sum_all(self)

    def mean(self):
        return mean_all(self)

    def reshape(self, *shape):
        return reshape(self, shape)

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _fail_scalar(self)


def _fail_scalar(t):
    raise ShapeError(f"item() needs a scalar, got shape {t.shape}")


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents, backward):
    rg = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=rg,
                  _parents=parents if rg else (),
                  _backward=backward if rg else None)


# ---------------------------------------------------------------------------
# primitive ops

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), bw)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(out, (a, b), bw)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def bw(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), bw)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), bw)


def relu(x):
    x = _as_tensor(x)
    out = np.maximum(x.data, 0.0)

    def bw(g):
        return (g * (x.data > 0.0),)

    return _make(out, (x,), bw)


def _sigmoid(z):
    # tanh form: stable at both tails, one ufunc pass
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x):
    x = _as_tensor(x)
    s = _sigmoid(x.data)

    def bw(g):
        return (g * s * (1.0 - s),)

    return _make(s, (x,), bw)


def tanh(x):
    x = _as_tensor(x)
    t = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - t * t),)

    return _make(t, (x,), bw)


def sum_all(x):
    x = _as_tensor(x)
    out = x.data.sum()

    def bw(g):
        return (np.full_like(x.data, float(g)),)

    return _make(out, (x,), bw)


def mean_all(x):
    x = _as_tensor(x)
    n = x.data.size
    out = x.data.mean()

    def bw(g):
        return (np.full_like(x.data, float(g) / n),)

    return _make(out, (x,), bw)


def reshape(x, shape):
    x = _as_tensor(x)
    out = x.data.reshape(shape)

    def bw(g):
        return (g.reshape(x.data.shape),)

    return _make(out, (x,), bw)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), bw)


def gather_rows(x, indices):
    """Select rows x[indices]; backward scatter-adds into the source."""
    x = _as_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    out = x.data[idx]

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _make(out, (x,), bw)


def max_rows(x):
    """Columnwise maximum of a 2-D tensor; gradient flows to the first argmax."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"max_rows needs a 2-D tensor, got {x.shape}")
    arg = np.argmax(x.data, axis=0)
    cols = np.arange(x.data.shape[1])
    out = x.data[arg, cols]

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[arg, cols] = g
        return (gx,)

    return _make(out.reshape(1, -1), (x,), lambda g: bw(g.reshape(-1)))


def cosine(a, b):
    """Cosine similarity along the last axis, numpy-broadcast over the rest.

    Norm denominators are clamped at EPS; if either vector is (near) zero the
    result is ~0 and the gradient is defined as exactly 0 there.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    na = np.sqrt(np.sum(a.data * a.data, axis=-1))
    nb = np.sqrt(np.sum(b.data * b.data, axis=-1))
    dot = np.sum(a.data * b.data, axis=-1)
    cna = np.maximum(na, EPS)
    cnb = np.maximum(nb, EPS)
    out = dot / (cna * cnb)

    def bw(g):
        valid = (na >= EPS) & (nb >= EPS)
        gv = np.where(valid, g, 0.0)[..., None]
        inv = 1.0 / (cna * cnb)[..., None]
        c = out[..., None]
        ga = gv * (b.data * inv - c * a.data / (cna * cna)[..., None])
        gb = gv * (a.data * inv - c * b.data / (cnb * cnb)[..., None])
        return (_unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape))

    return _make(out, (a, b), bw)


def dropout(x, rate, rng, training):
    """Inverted dropout: scale survivors by 1/(1-rate) at train time."""
    x = _as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = x.data * keep

    def bw(g):
        return (g * keep,)

    return _make(out, (x,), bw)


# ---------------------------------------------------------------------------
# tape and backward pass

class Tape:
    """Topologically ordered list of graph nodes reachable from one output."""

    def __init__(self, root):
        order = []
        seen = set()
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.nodes = order  # parents always precede children


def backward(loss):
    """Populate .grad for every requires_grad tensor reachable from loss.

    Gradients accumulate additively, both across multiple uses inside one
    graph and across repeated backward calls (zero_grad to reset).
    """
    loss = _as_tensor(loss)
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = Tape(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg


def finite_difference_grad(f, params, h=1e-5):
    """Central finite differences of scalar f() w.r.t. each tensor in params.

    f must be deterministic and must read current .data of the params.
    Returns a list of arrays matching the parameter shapes.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def transpose(x):
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {x.shape}")
    return _make(x.data.T.copy(), (x,), lambda g: (g.T,))


def exp(x):
    x = _as_tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data

    def bw(g):
        return (_unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(out, (a, b), bw)


def sum_axis(x, axis, keepdims=True):
    x = _as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return _make(out, (x,), bw)


def bilstm_last(x, wx_f, wh_f, b_f, wx_b, wh_b, b_b):
    """Concatenated last hidden states of a forward and a backward LSTM pass
    over the rows of x; (1, 2*hidden).

    One fused node for the whole bidirectional recurrence: both directions
    share a single python loop over block-combined weights, the forward math
    is plain numpy, and the backward pass is hand-written BPTT. This avoids
    the per-timestep tape overhead of composing the recurrence out of
    primitives. Per-direction gate layout in the fused weight matrices is
    [input, forget, cell, output]; the cell gate is tanh, the rest sigmoid.
    """
    x = _as_tensor(x)
    params = tuple(_as_tensor(p) for p in (wx_f, wh_f, b_f, wx_b, wh_b, b_b))
    wx_f, wh_f, b_f, wx_b, wh_b, b_b = params
    if x.data.ndim != 2:
        raise ShapeError(f"bilstm_last needs a 2-D sequence, got {x.shape}")
    h = wh_f.data.shape[0]
    k = x.data.shape[1]
    for wx, wh, b in ((wx_f, wh_f, b_f), (wx_b, wh_b, b_b)):
        if wx.data.shape != (k, 4 * h) or wh.data.shape != (h, 4 * h) \
                or b.data.shape != (1, 4 * h):
            raise ShapeError(
                f"bilstm_last weight shapes disagree: x {x.shape}, wx {wx.shape}, "
                f"wh {wh.shape}, b {b.shape}")
    steps = x.data.shape[0]

    # combined layout groups the two directions gate by gate so every
    # activation below works on one contiguous block:
    #   [i_f i_b | f_f f_b | o_f o_b | c_f c_b], each block h wide
    # column indices of each direction's [i f c o] gates in that layout:
    idx_f = np.concatenate([np.arange(0, h), np.arange(2 * h, 3 * h),
                            np.arange(6 * h, 7 * h), np.arange(4 * h, 5 * h)])
    idx_b = idx_f + h

    wh_c = np.zeros((2 * h, 8 * h))
    wh_c[np.ix_(np.arange(h), idx_f)] = wh_f.data
    wh_c[np.ix_(np.arange(h, 2 * h), idx_b)] = wh_b.data
    xproj = np.empty((steps, 8 * h))
    xproj[:, idx_f] = x.data @ wx_f.data + b_f.data
    xproj[:, idx_b] = x.data[::-1] @ wx_b.data + b_b.data

    sig = np.empty((steps, 6 * h))   # [i | f | o] blocks, both directions
    gc = np.empty((steps, 2 * h))    # cell candidate
    cs = np.empty((steps, 2 * h))    # cell state after each step
    ss = np.empty((steps, 2 * h))    # hidden state entering each step
    s = np.zeros(2 * h)
    c = np.zeros(2 * h)
    for t in range(steps):
        ss[t] = s
        z = s @ wh_c
        z += xproj[t]
        sg = sig[t]
        sg[:] = _sigmoid(z[:6 * h])
        g = gc[t]
        g[:] = np.tanh(z[6 * h:])
        c = sg[2 * h:4 * h] * c + sg[:2 * h] * g
        cs[t] = c
        s = sg[4 * h:6 * h] * np.tanh(c)

    def bw(grad):
        ds = grad.reshape(2 * h).copy()
        dc = np.zeros(2 * h)
        dz_all = np.empty((steps, 8 * h))
        for t in range(steps - 1, -1, -1):
            gi = sig[t, :2 * h]
            gf = sig[t, 2 * h:4 * h]
            go = sig[t, 4 * h:]
            tc = np.tanh(cs[t])
            dc = dc + ds * go * (1.0 - tc * tc)
            c_prev = cs[t - 1] if t > 0 else 0.0
            dz = dz_all[t]
            dz[:2 * h] = dc * gc[t] * gi * (1.0 - gi)
            dz[2 * h:4 * h] = dc * c_prev * gf * (1.0 - gf)
            dz[4 * h:6 * h] = ds * tc * go * (1.0 - go)
            dz[6 * h:] = dc * gi * (1.0 - gc[t] * gc[t])
            ds = dz @ wh_c.T
            dc = dc * gf
        gwh_c = ss.T @ dz_all
        dz_f = dz_all[:, idx_f]
        dz_b = dz_all[:, idx_b]
        gx = dz_f @ wx_f.data.T + (dz_b @ wx_b.data.T)[::-1]
        return (gx,
                x.data.T @ dz_f, gwh_c[np.ix_(np.arange(h), idx_f)],
                dz_f.sum(axis=0, keepdims=True),
                x.data[::-1].T @ dz_b, gwh_c[np.ix_(np.arange(h, 2 * h), idx_b)],
                dz_b.sum(axis=0, keepdims=True))

    return _make(s.reshape(1, 2 * h), (x,) + params, bw)


def weighted_cosine(x1, x2, w):
    """Cosine of x1 and x2 rows under each squared reweighting row of w.

    x1, x2: (N, d); w: (P, d). out[n, k] = cos(x1[n] * w[k], x2[n] * w[k]),
    computed with three (N, d) x (d, P) products instead of materializing
    (N, P, d) intermediates. Same EPS clamping and zero-vector gradient
    convention as ``cosine``.
    """
    x1, x2, w = _as_tensor(x1), _as_tensor(x2), _as_tensor(w)
    if x1.data.ndim != 2 or x1.data.shape != x2.data.shape or w.data.ndim != 2 \
            or w.data.shape[1] != x1.data.shape[1]:
        raise ShapeError(
            f"weighted_cosine shapes disagree: {x1.shape}, {x2.shape}, w {w.shape}")
    w2 = w.data * w.data
    p12 = x1.data * x2.data
    p11 = x1.data * x1.data
    p22 = x2.data * x2.data
    dot = p12 @ w2.T
    n1 = np.sqrt(p11 @ w2.T)
    n2 = np.sqrt(p22 @ w2.T)
    cn1 = np.maximum(n1, EPS)
    cn2 = np.maximum(n2, EPS)
    out = dot / (cn1 * cn2)

    def bw(g):
        valid = (n1 >= EPS) & (n2 >= EPS)
        gv = np.where(valid, g, 0.0)
        ginv = gv / (cn1 * cn2)
        g11 = gv * out / (cn1 * cn1)
        g22 = gv * out / (cn2 * cn2)
        gx1 = (ginv @ w2) * x2.data - (g11 @ w2) * x1.data
        gx2 = (ginv @ w2) * x1.data - (g22 @ w2) * x2.data
        gw2 = ginv.T @ p12 - 0.5 * (g11.T @ p11 + g22.T @ p22)
        return gx1, gx2, 2.0 * w.data * gw2

    return _make(out, (x1, x2, w), bw)


def slice_cols(x, start, stop):
    """Contiguous column slice of a 2-D tensor."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"slice_cols needs a 2-D tensor, got {x.shape}")
    out = x.data[:, start:stop].copy()

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _make(out, (x,), bw)
