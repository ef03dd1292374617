"""Stacked oblique-split ReLU network with activation-pattern capture.

Every splitting layer sees the raw covariates again: layer 1 takes x, each
deeper layer takes concat[x; a^(l-1)]. The layer's binary activation pattern
(z >= 0) is what the composite head consumes, so the network's prediction is
constant on each activation region. Training uses a smooth pattern
relaxation sigmoid(beta * z); evaluation and tree extraction use hard
patterns. Gradients are computed by hand (reverse accumulation), no autograd.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericalError(RuntimeError):
    """Non-finite value encountered in a forward/backward pass or update."""


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


@dataclass
class CompositeHead:
    """Map from concatenated patterns (length P) to the prediction.

    kind "linear": out = O @ W.T + b.
    kind "mlp": one ReLU hidden layer, then linear.
    """

    kind: str
    in_dim: int
    out_dim: int
    params: dict

    def copy(self):
        return CompositeHead(self.kind, self.in_dim, self.out_dim,
                             {k: v.copy() for k, v in self.params.items()})


class ReluNetwork:
    """Parameters of the splitting layers plus the composite head.

    W[l] has widths[l] rows; its column count is d for layer 0 and
    d + widths[l-1] for deeper layers (input concatenation).
    """

    def __init__(self, d, widths, W, b, head):
        self.d = int(d)
        self.widths = [int(m) for m in widths]
        self.W = W
        self.b = b
        self.head = head
        self._check_shapes()

    def _check_shapes(self):
        if self.L < 1:
            raise ValueError("need at least one splitting layer")
        for l, m in enumerate(self.widths):
            in_dim = self.d if l == 0 else self.d + self.widths[l - 1]
            if self.W[l].shape != (m, in_dim):
                raise ValueError(
                    "layer %d weight shape %s, expected %s"
                    % (l + 1, self.W[l].shape, (m, in_dim))
                )
            if self.b[l].shape != (m,):
                raise ValueError("layer %d bias shape mismatch" % (l + 1))
        if self.head.in_dim != self.P:
            raise ValueError("head input dim %d != pattern count %d" % (self.head.in_dim, self.P))

    @property
    def L(self):
        return len(self.widths)

    @property
    def P(self):
        return int(sum(self.widths))

    def copy(self):
        return ReluNetwork(self.d, list(self.widths),
                           [w.copy() for w in self.W],
                           [v.copy() for v in self.b],
                           self.head.copy())


def _uniform_init(rng, rows, cols):
    bound = 1.0 / np.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_network(d, n_layers, widths=None, head_kind="linear", out_dim=1,
                 head_hidden=16, seed=0) -> ReluNetwork:
    """Fresh network: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1 (use the linear baseline for a depth-0 model)")
    if d < 1 or out_dim < 1:
        raise ValueError("dimensions must be positive")
    if widths is None:
        widths = [1] * n_layers
    widths = [int(m) for m in widths]
    if len(widths) != n_layers or any(m < 1 for m in widths):
        raise ValueError("widths must be %d positive integers" % n_layers)

    rng = np.random.default_rng(seed)
    W, b = [], []
    for l, m in enumerate(widths):
        in_dim = d if l == 0 else d + widths[l - 1]
        W.append(_uniform_init(rng, m, in_dim))
        b.append(np.zeros(m))
    P = sum(widths)
    if head_kind == "linear":
        params = {"W": _uniform_init(rng, out_dim, P), "b": np.zeros(out_dim)}
    elif head_kind == "mlp":
        params = {
            "W1": _uniform_init(rng, head_hidden, P),
            "b1": np.zeros(head_hidden),
            "W2": _uniform_init(rng, out_dim, head_hidden),
            "b2": np.zeros(out_dim),
        }
    else:
        raise ValueError("head_kind must be 'linear' or 'mlp'")
    return ReluNetwork(d, widths, W, b, CompositeHead(head_kind, P, out_dim, params))


@dataclass
class ForwardTrace:
    """Intermediates from one batched pass, kept for the backward sweep."""

    mode: str  # "soft" or "hard"
    beta: float | None
    inputs: list  # per-layer input matrices (x or concat[x; a])
    z: list
    a: list
    o: list
    head_in: np.ndarray  # concatenated patterns after any masking
    head_out: np.ndarray
    head_hidden: tuple | None  # (pre, act) for the mlp head


def _head_forward(head: CompositeHead, O):
    if head.kind == "linear":
        return O @ head.params["W"].T + head.params["b"], None
    pre = O @ head.params["W1"].T + head.params["b1"]
    act = np.maximum(pre, 0.0)
    return act @ head.params["W2"].T + head.params["b2"], (pre, act)


def forward(net: ReluNetwork, X, mode="soft", beta=None, mask=None) -> ForwardTrace:
    """Run the network on a batch X of shape (N, d).

    Hard mode records binary patterns 1[z >= 0]; soft mode records
    sigmoid(beta * z) and requires beta > 0. A prune mask may only be
    applied in hard mode; it zeroes the pattern coordinates of every
    subject whose pattern prefix matches a pruned node, before the head.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.d:
        raise ValueError("input has %d features, network expects %d" % (X.shape[1], net.d))
    if mode == "soft":
        if beta is None or beta <= 0:
            raise ValueError("soft mode requires beta > 0")
        if mask is not None:
            raise ValueError("prune masks apply to hard patterns only")
    elif mode == "ste":
        # straight-through training: hard patterns forward, identity backward
        if mask is not None:
            raise ValueError("prune masks apply to hard evaluation, not training passes")
    elif mode != "hard":
        raise ValueError("mode must be 'soft', 'hard' or 'ste'")

    inputs, zs, acts, pats = [], [], [], []
    a_prev = None
    for l in range(net.L):
        layer_in = X if l == 0 else np.hstack([X, a_prev])
        z = layer_in @ net.W[l].T + net.b[l]
        if not np.all(np.isfinite(z)):
            raise NumericalError("non-finite pre-activation at layer %d" % (l + 1))
        a_prev = np.maximum(z, 0.0)
        o = sigmoid(beta * z) if mode == "soft" else (z >= 0).astype(float)
        inputs.append(layer_in)
        zs.append(z)
        acts.append(a_prev)
        pats.append(o)

    head_in = np.hstack(pats)
    if mask is not None:
        head_in = mask.apply_rows(head_in)
    head_out, hidden = _head_forward(net.head, head_in)
    if not np.all(np.isfinite(head_out)):
        raise NumericalError("non-finite head output")
    return ForwardTrace(mode, beta, inputs, zs, acts, pats, head_in, head_out, hidden)


@dataclass
class Gradients:
    """Per-parameter partials of a scalar loss, summed over the batch."""

    dW: list
    db: list
    dhead: dict

    def iter_arrays(self):
        yield from self.dW
        yield from self.db
        yield from self.dhead.values()


def _head_backward(head: CompositeHead, trace: ForwardTrace, g_out):
    if head.kind == "linear":
        dhead = {"W": g_out.T @ trace.head_in, "b": g_out.sum(axis=0)}
        return g_out @ head.params["W"], dhead
    pre, act = trace.head_hidden
    g_act = g_out @ head.params["W2"]
    g_pre = g_act * (pre > 0)
    dhead = {
        "W1": g_pre.T @ trace.head_in,
        "b1": g_pre.sum(axis=0),
        "W2": g_out.T @ act,
        "b2": g_out.sum(axis=0),
    }
    return g_pre @ head.params["W1"], dhead


def backward(net: ReluNetwork, trace: ForwardTrace, grad_head_out) -> Gradients:
    """Reverse accumulation of dLoss/dparams from dLoss/d(head output).

    The pattern path differentiates through sigmoid(beta z) in soft mode,
    or passes the gradient straight through the indicator in ste mode; the
    inter-layer path goes through the ReLU activations (subgradient 0 at
    z = 0). Hard traces are rejected: their patterns are flat.
    """
    if trace.mode not in ("soft", "ste"):
        raise ValueError("gradients require a soft or ste trace; hard patterns are flat")
    g_out = np.asarray(grad_head_out, dtype=float)
    if g_out.shape != trace.head_out.shape:
        raise ValueError("loss gradient shape %s != head output shape %s"
                         % (g_out.shape, trace.head_out.shape))

    g_patterns, dhead = _head_backward(net.head, trace, g_out)

    # split the concatenated pattern gradient back into per-layer blocks
    splits = np.cumsum(net.widths)[:-1]
    g_o = np.split(g_patterns, splits, axis=1)

    beta = trace.beta
    dW = [None] * net.L
    db = [None] * net.L
    g_a = None  # gradient flowing into a^(l) from layer l+1
    for l in reversed(range(net.L)):
        if trace.mode == "soft":
            o = trace.o[l]
            g_z = g_o[l] * (beta * o * (1.0 - o))
        else:
            g_z = g_o[l].copy()
        if g_a is not None:
            g_z = g_z + g_a * (trace.z[l] > 0)
        dW[l] = g_z.T @ trace.inputs[l]
        db[l] = g_z.sum(axis=0)
        if l > 0:
            g_a = (g_z @ net.W[l])[:, net.d :]
    grads = Gradients(dW, db, dhead)
    for arr in grads.iter_arrays():
        if not np.all(np.isfinite(arr)):
            raise NumericalError("non-finite gradient")
    return grads


class MomentumSgd:
    """Classical momentum SGD: v <- momentum*v + g; theta <- theta - lr*v."""

    def __init__(self, lr, momentum=0.0):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.lr = lr
        self.momentum = momentum
        self._v = None

    def _velocity_like(self, net: ReluNetwork):
        return {
            "W": [np.zeros_like(w) for w in net.W],
            "b": [np.zeros_like(v) for v in net.b],
            "head": {k: np.zeros_like(v) for k, v in net.head.params.items()},
        }

    def step(self, net: ReluNetwork, grads: Gradients) -> ReluNetwork:
        for arr in grads.iter_arrays():
            if not np.all(np.isfinite(arr)):
                raise NumericalError("non-finite gradients passed to the optimizer")
        if self._v is None:
            self._v = self._velocity_like(net)
        v = self._v
        for l in range(net.L):
            v["W"][l] = self.momentum * v["W"][l] + grads.dW[l]
            net.W[l] -= self.lr * v["W"][l]
            v["b"][l] = self.momentum * v["b"][l] + grads.db[l]
            net.b[l] -= self.lr * v["b"][l]
        for k in net.head.params:
            v["head"][k] = self.momentum * v["head"][k] + grads.dhead[k]
            net.head.params[k] -= self.lr * v["head"][k]
        return net


def soft_threshold_prox(net: ReluNetwork, lam) -> ReluNetwork:
    """L1 proximal step on the splitting-layer weights only.

    w <- sign(w) * max(|w| - lam, 0); biases and the head are untouched.
    """
    if lam < 0:
        raise ValueError("threshold strength must be non-negative")
    if lam == 0:
        return net
    for l in range(net.L):
        w = net.W[l]
        np.copyto(w, np.sign(w) * np.maximum(np.abs(w) - lam, 0.0))
    return net


def sparsity(net: ReluNetwork) -> float:
    """Fraction of exactly-zero entries among splitting-layer weights."""
    total = sum(w.size for w in net.W)
    zeros = sum(int(np.sum(w == 0.0)) for w in net.W)
    return zeros / total if total else 0.0


def network_to_dict(net: ReluNetwork, beta=None, prune_mask=None) -> dict:
    """JSON-ready checkpoint dict; floats round-trip exactly via repr."""
    head = net.head
    return {
        "d": net.d,
        "L": net.L,
        "widths": list(net.widths),
        "head": {
            "kind": head.kind,
            "dims": [head.in_dim, head.out_dim],
            "params": {k: v.tolist() for k, v in head.params.items()},
        },
        "W": [w.tolist() for w in net.W],
        "b": [v.tolist() for v in net.b],
        "beta": beta,
        "prune_mask": [list(p) for p in sorted(prune_mask.prefixes)] if prune_mask else [],
    }


def network_from_dict(d: dict) -> ReluNetwork:
    head = CompositeHead(
        d["head"]["kind"],
        int(d["head"]["dims"][0]),
        int(d["head"]["dims"][1]),
        {k: np.asarray(v, dtype=float) for k, v in d["head"]["params"].items()},
    )
    return ReluNetwork(
        d["d"],
        d["widths"],
        [np.asarray(w, dtype=float) for w in d["W"]],
        [np.asarray(v, dtype=float) for v in d["b"]],
        head,
    )
