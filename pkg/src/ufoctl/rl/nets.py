"""Small fully connected tanh networks with hand-written vjp/jvp."""
from __future__ import annotations

import numpy as np

HIDDEN = (64, 32, 32)


class MLP:
    """x -> tanh(W1 x + b1) -> ... -> W_out h + b_out.

    Parameters live in one flat float64 vector; ``layers()`` returns views
    into it, so in-place updates of ``params`` are seen everywhere.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, out_scale: float = 1.0):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.shapes = [(self.sizes[i + 1], self.sizes[i]) for i in range(len(self.sizes) - 1)]
        self.n_params = sum(o * i + o for o, i in self.shapes)
        self.params = np.zeros(self.n_params)
        if rng is not None:
            self.init(rng, out_scale)

    def init(self, rng: np.random.Generator, out_scale: float = 1.0) -> None:
        chunks = []
        for li, (o, i) in enumerate(self.shapes):
            w = rng.standard_normal((o, i)) / np.sqrt(i)
            if li == len(self.shapes) - 1:
                w *= out_scale
            chunks += [w.ravel(), np.zeros(o)]
        self.params = np.concatenate(chunks)

    def layers(self, params: np.ndarray | None = None):
        p = self.params if params is None else params
        out, pos = [], 0
        for o, i in self.shapes:
            W = p[pos:pos + o * i].reshape(o, i)
            pos += o * i
            b = p[pos:pos + o]
            pos += o
            out.append((W, b))
        return out

    def forward(self, x: np.ndarray, params: np.ndarray | None = None, cache: bool = False):
        x = np.asarray(x, dtype=float)
        acts = [x]
        h = x
        layers = self.layers(params)
        for li, (W, b) in enumerate(layers):
            z = h @ W.T + b
            h = z if li == len(layers) - 1 else np.tanh(z)
            acts.append(h)
        return (h, acts) if cache else h

    __call__ = forward

    def vjp(self, acts: list, grad_out: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        """Gradient of sum(grad_out * output) w.r.t. the flat parameters."""
        layers = self.layers(params)
        grads = []
        delta = np.asarray(grad_out, dtype=float)
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            h_in = acts[li]
            grads.append((delta.T @ h_in, delta.sum(axis=0)))
            if li > 0:
                delta = (delta @ W) * (1.0 - acts[li] ** 2)
        flat = []
        for gW, gb in reversed(grads):
            flat += [gW.ravel(), gb]
        return np.concatenate(flat)

    def jvp(self, x: np.ndarray, dparams: np.ndarray, params: np.ndarray | None = None):
        """Directional derivative of the output along ``dparams``."""
        layers = self.layers(params)
        dlayers = self.layers(dparams)
        h = np.asarray(x, dtype=float)
        dh = np.zeros_like(h)
        for li, ((W, b), (dW, db)) in enumerate(zip(layers, dlayers)):
            z = h @ W.T + b
            dz = dh @ W.T + h @ dW.T + db
            if li == len(layers) - 1:
                h, dh = z, dz
            else:
                h = np.tanh(z)
                dh = (1.0 - h ** 2) * dz
        return dh

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes),
                "layers": [{"shape": list(W.shape), "weight": W.tolist(), "bias": b.tolist()}
                           for W, b in self.layers()]}

    @classmethod
    def from_dict(cls, data: dict) -> "MLP":
        net = cls(data["sizes"])
        chunks = []
        for layer, (o, i) in zip(data["layers"], net.shapes):
            W = np.asarray(layer["weight"], dtype=float)
            if W.shape != (o, i):
                raise ValueError(f"layer shape {W.shape} does not match {(o, i)}")
            chunks += [W.ravel(), np.asarray(layer["bias"], dtype=float)]
        net.params = np.concatenate(chunks)
        return net
