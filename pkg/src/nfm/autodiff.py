"""Minimal reverse-mode automatic differentiation over real numpy arrays.

One :class:`Tensor` wraps one ndarray.  Ops build a DAG; ``backward()`` on a
scalar walks it once in reverse topological order and accumulates gradients.
Complex values are represented as real arrays with a trailing (re, im) axis
of size 2, so a single real-valued engine suffices; the spectral ops
(``rfft_pair``, ``irfft_pair``, ``spectral_extend``) and ``complex_mul``
carry hand-written backward rules for that pairing.

The engine is single-threaded per graph and fully deterministic: identical
seeds give bit-identical forwards, backwards, and optimizer trajectories.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape construction (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar; scalars become constants
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _node(data, parents, backward_fn) -> Tensor:
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(parent: Tensor, g: np.ndarray):
    if not parent.requires_grad:
        return
    if parent.grad is None:
        # copy, not adopt: g may alias a consumer's grad buffer
        parent.grad = np.array(g, dtype=parent.data.dtype)
    else:
        parent.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, -_unbroadcast(g, b.shape))

    return _node(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    def backward(g):
        _accum(a, g * s)

    return _node(a.data * s, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a`` [..., m, k] times a 2-D weight ``b`` [k, n]."""
    if b.ndim != 2 or a.ndim < 2 or a.shape[-1] != b.shape[0]:
        raise ValueError(f"shape mismatch in matmul: {a.shape} @ {b.shape}")

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1]))

    return _node(a.data @ b.data, (a, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused x @ w + b for x [..., k], w [k, n], b [n]."""
    if w.ndim != 2 or x.ndim < 2 or x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ValueError(f"shape mismatch in affine: {x.shape} @ {w.shape} + {b.shape}")

    def backward(g):
        _accum(x, g @ w.data.T)
        g2 = g.reshape(-1, w.shape[1])
        _accum(w, x.data.reshape(-1, x.shape[-1]).T @ g2)
        _accum(b, g2.sum(axis=0))

    return _node(x.data @ w.data + b.data, (x, w, b), backward)


def complex_affine(u: Tensor, wr: Tensor, wi: Tensor, br: Tensor, bi: Tensor) -> Tensor:
    """Per-bin complex affine map of a pair array u [..., k, 2] -> [..., n, 2]."""
    k = wr.shape[0]
    if u.shape[-1] != 2 or u.shape[-2] != k:
        raise ValueError(f"shape mismatch in complex_affine: {u.shape} with {wr.shape}")
    ur, ui = u.data[..., 0], u.data[..., 1]
    out = np.empty(u.shape[:-2] + (wr.shape[1], 2), dtype=u.data.dtype)
    out[..., 0] = ur @ wr.data - ui @ wi.data + br.data
    out[..., 1] = ur @ wi.data + ui @ wr.data + bi.data

    def backward(g):
        gr, gi = np.ascontiguousarray(g[..., 0]), np.ascontiguousarray(g[..., 1])
        gu = np.empty_like(u.data)
        gu[..., 0] = gr @ wr.data.T + gi @ wi.data.T
        gu[..., 1] = gi @ wr.data.T - gr @ wi.data.T
        _accum(u, gu)
        ur2 = np.ascontiguousarray(ur).reshape(-1, k)
        ui2 = np.ascontiguousarray(ui).reshape(-1, k)
        gr2 = gr.reshape(-1, wr.shape[1])
        gi2 = gi.reshape(-1, wr.shape[1])
        _accum(wr, ur2.T @ gr2 + ui2.T @ gi2)
        _accum(wi, ur2.T @ gi2 - ui2.T @ gr2)
        _accum(br, gr2.sum(axis=0))
        _accum(bi, gi2.sum(axis=0))

    return _node(out, (u, wr, wi, br, bi), backward)


def sin(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, g * np.cos(a.data))

    return _node(np.sin(a.data), (a,), backward)


def cos(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, -g * np.sin(a.data))

    return _node(np.cos(a.data), (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        _accum(a, g * mask)

    return _node(np.where(mask, a.data, 0.0), (a,), backward)


def powc(a: Tensor, exponent: float) -> Tensor:
    """Elementwise a**exponent for a constant exponent (a > 0 where used)."""
    out_data = a.data**exponent

    def backward(g):
        _accum(a, g * exponent * a.data ** (exponent - 1.0))

    return _node(out_data, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward(g):
        # floor the denominator so exact zeros do not poison the whole grad
        _accum(a, g * 0.5 / np.maximum(out_data, 1e-12))

    return _node(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# reductions


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.shape).copy())
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gg, a.shape).copy())

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        count = a.shape[axis] if isinstance(axis, int) else int(np.prod([a.shape[i] for i in axis]))

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / count, a.shape).copy())
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gg / count, a.shape).copy())

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def variance(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Population variance, composed from primitive ops."""
    mu = mean(a, axis=axis, keepdims=True)
    dev = sub(a, mu)
    return mean(mul(dev, dev), axis=axis, keepdims=keepdims)


def normalize(a: Tensor, axis: int, eps: float) -> Tensor:
    """Fused (a - mean) / sqrt(var + eps) along one axis, no affine.

    Backward: with y the output and s = sqrt(var + eps),
    dL/da = (g - mean(g) - y * mean(g * y)) / s.
    """
    mu = a.data.mean(axis=axis, keepdims=True)
    var = a.data.var(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = (a.data - mu) * inv

    def backward(g):
        g_mean = g.mean(axis=axis, keepdims=True)
        gy_mean = (g * out).mean(axis=axis, keepdims=True)
        _accum(a, (g - g_mean - out * gy_mean) * inv)

    return _node(out, (a,), backward)


# ---------------------------------------------------------------------------
# structure


def concat(parts, axis: int) -> Tensor:
    parts = list(parts)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            key = [slice(None)] * g.ndim
            key[axis] = slice(lo, hi)
            _accum(part, g[tuple(key)])

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward)


def slice_(a: Tensor, key) -> Tensor:
    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[key] += g
            _accum(a, buf)

    return _node(a.data[key], (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def stack_last(re: Tensor, im: Tensor) -> Tensor:
    """Pack two equal-shape real tensors into a (re, im) pair array."""
    if re.shape != im.shape:
        raise ValueError(f"shape mismatch: {re.shape} vs {im.shape}")

    def backward(g):
        _accum(re, g[..., 0])
        _accum(im, g[..., 1])

    return _node(np.stack([re.data, im.data], axis=-1), (re, im), backward)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when p == 0.  Disabled at inference by the caller."""
    if p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    mask = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)

    def backward(g):
        _accum(a, g * mask)

    return _node(a.data * mask, (a,), backward)


# ---------------------------------------------------------------------------
# losses


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross entropy of integer ``labels`` under row-wise softmax."""
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError(f"shape mismatch: logits {logits.shape} vs labels {labels.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    n = logits.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()

    def backward(g):
        p = np.exp(log_probs)
        p[np.arange(n), labels] -= 1.0
        _accum(logits, g * p / n)

    return _node(np.asarray(loss, dtype=logits.data.dtype), (logits,), backward)


# ---------------------------------------------------------------------------
# complex pairs and spectral ops


def complex_mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise complex product of (re, im) pair arrays [..., 2]."""
    if a.shape[-1] != 2 or b.shape[-1] != 2:
        raise ValueError(f"pair arrays must end in axis 2: {a.shape}, {b.shape}")
    _check_broadcast(a, b)
    ar, ai = a.data[..., 0], a.data[..., 1]
    br, bi = b.data[..., 0], b.data[..., 1]
    out = np.stack([ar * br - ai * bi, ar * bi + ai * br], axis=-1)

    def backward(g):
        gr, gi = g[..., 0], g[..., 1]
        ga = np.stack([gr * br + gi * bi, -gr * bi + gi * br], axis=-1)
        gb = np.stack([gr * ar + gi * ai, -gr * ai + gi * ar], axis=-1)
        _accum(a, _unbroadcast(ga, a.shape))
        _accum(b, _unbroadcast(gb, b.shape))

    return _node(out, (a, b), backward)


def rfft_pair(a: Tensor, axis: int) -> Tensor:
    """Real FFT along ``axis``; output gains a trailing (re, im) axis."""
    if axis < 0:
        axis += a.ndim
    n = a.shape[axis]
    freq = np.fft.rfft(a.data, axis=axis)
    out = np.stack([freq.real, freq.imag], axis=-1)

    def backward(g):
        gc = g[..., 0] + 1j * g[..., 1]
        shape = list(gc.shape)
        shape[axis] = n
        full = np.zeros(shape, dtype=complex)
        key = [slice(None)] * len(shape)
        key[axis] = slice(0, gc.shape[axis])
        full[tuple(key)] = gc
        _accum(a, (n * np.fft.ifft(full, axis=axis).real).astype(a.data.dtype))

    return _node(out, (a,), backward)


def irfft_pair(a: Tensor, n: int, axis: int) -> Tensor:
    """Inverse real FFT of a (re, im) pair array back to ``n`` time points.

    The imaginary components of the DC bin (and Nyquist bin, for even n)
    have no effect on the output and correspondingly receive zero gradient.
    """
    if axis < 0:
        axis += a.ndim - 1
    spec = a.data[..., 0] + 1j * a.data[..., 1]
    out = np.fft.irfft(spec, n=n, axis=axis).astype(a.data.dtype)
    k = spec.shape[axis]

    def backward(g):
        gf = np.fft.rfft(g, axis=axis)
        weights = np.full(k, 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
        shape = [1] * gf.ndim
        shape[axis] = k
        gf = gf * (weights.reshape(shape) / n)
        _accum(a, np.stack([gf.real, gf.imag], axis=-1).astype(a.data.dtype))

    return _node(out, (a,), backward)


def spectral_extend(a: Tensor, idx: np.ndarray, scale_factor: float, k_out: int, axis: int) -> Tensor:
    """Scatter bins of a pair array onto a larger spectral grid.

    ``out[idx[k]] = scale_factor * a[k]`` along ``axis``, other slots zero.
    Writes happen in ascending k (last write wins on collisions).
    """
    if axis < 0:
        axis += a.ndim
    src = np.moveaxis(a.data, axis, 0)
    k_in = src.shape[0]
    out = np.zeros((k_out,) + src.shape[1:], dtype=a.data.dtype)
    out[idx] = scale_factor * src
    winner = np.full(k_out, -1, dtype=np.int64)
    winner[idx] = np.arange(k_in)
    surviving = winner[idx] == np.arange(k_in)

    def backward(g):
        gm = np.moveaxis(g, axis, 0)
        gs = scale_factor * gm[idx]
        gs[~surviving] = 0.0
        _accum(a, np.moveaxis(gs, 0, axis))

    return _node(np.moveaxis(out, 0, axis), (a,), backward)


# ---------------------------------------------------------------------------
# verification


def grad_check(build_loss, params, h: float = 1e-5) -> float:
    """Compare backprop gradients against central differences.

    ``build_loss`` must rebuild the scalar loss graph from the current data
    of ``params`` on every call (seeding any internal randomness itself, so
    repeated calls are deterministic).  Returns the max over all parameter
    elements of ``|g_ad - g_fd| / max(1, |g_fd|)``.
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-6, 1e-4]")
    for p in params:
        p.zero_grad()
    loss = build_loss()
    if loss.data.size != 1 or not np.isfinite(loss.data):
        raise ValueError("loss must evaluate to a finite scalar")
    loss.backward()
    grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, g_ad in zip(params, grads):
        flat = p.data.reshape(-1)
        g_flat = g_ad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            f_plus = float(build_loss().data)
            flat[i] = saved - h
            f_minus = float(build_loss().data)
            flat[i] = saved
            g_fd = (f_plus - f_minus) / (2.0 * h)
            err = abs(g_flat[i] - g_fd) / max(1.0, abs(g_fd))
            worst = max(worst, err)
    return worst
