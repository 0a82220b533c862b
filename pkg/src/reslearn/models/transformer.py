"""Encoder-only transformer for one-step forecasting.

Scalar inputs are projected to d_model, tagged with sinusoidal position
codes, run through post-norm encoder blocks (multi-head self-attention +
position-wise FFN), mean-pooled over positions, and mapped to one output.
All gradients are derived by hand and verified against finite differences.
"""

from __future__ import annotations

import numpy as np

from ..errors import BadConfig
from .base import Predictor, PredictorConfig, uniform_init

LN_EPS = 1e-5


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(d_model)[None, :].astype(np.float64)
    angle = pos / np.power(10000.0, (2.0 * (i // 2)) / d_model)
    pe = np.empty((length, d_model))
    pe[:, 0::2] = np.sin(angle[:, 0::2])
    pe[:, 1::2] = np.cos(angle[:, 1::2])
    return pe


def _layernorm_forward(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return gain * xhat + bias, (xhat, inv)


def _layernorm_backward(d_out, gain, cache):
    xhat, inv = cache
    d_gain = (d_out * xhat).sum(axis=(0, 1))
    d_bias = d_out.sum(axis=(0, 1))
    d_xhat = d_out * gain
    d_x = inv * (
        d_xhat
        - d_xhat.mean(axis=-1, keepdims=True)
        - xhat * (d_xhat * xhat).mean(axis=-1, keepdims=True)
    )
    return d_x, d_gain, d_bias


def _softmax(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class TransformerPredictor(Predictor):
    def __init__(self, config: PredictorConfig):
        if config.kind != "transformer":
            raise BadConfig(f"TransformerPredictor got kind {config.kind!r}")
        self.head_dim = config.d_model // config.n_heads
        self.pe = positional_encoding(config.lookback, config.d_model)
        super().__init__(config)

    def init_params(self, rng):
        d = self.config.d_model
        f = self.config.ffn_width
        params = {
            "in_W": uniform_init(rng, (1, d), 1),
            "in_b": np.zeros(d),
        }
        for layer in range(self.config.n_layers):
            p = f"l{layer}_"
            for name in ("Wq", "Wk", "Wv", "Wo"):
                params[p + name] = uniform_init(rng, (d, d), d)
            for name in ("bq", "bk", "bv", "bo"):
                params[p + name] = np.zeros(d)
            params[p + "ln1_g"] = np.ones(d)
            params[p + "ln1_b"] = np.zeros(d)
            params[p + "ffn_W1"] = uniform_init(rng, (d, f), d)
            params[p + "ffn_b1"] = np.zeros(f)
            params[p + "ffn_W2"] = uniform_init(rng, (f, d), f)
            params[p + "ffn_b2"] = np.zeros(d)
            params[p + "ln2_g"] = np.ones(d)
            params[p + "ln2_b"] = np.zeros(d)
        params["head_W"] = uniform_init(rng, (d, 1), d)
        params["head_b"] = np.zeros(1)
        return params

    def _split_heads(self, x):
        n, w, d = x.shape
        h = self.config.n_heads
        return x.reshape(n, w, h, self.head_dim).transpose(0, 2, 1, 3)

    def _merge_heads(self, x):
        n, h, w, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(n, w, h * dh)

    def _forward(self, params, inputs):
        cfg = self.config
        x_in = inputs[:, :, None]
        h = x_in @ params["in_W"] + params["in_b"] + self.pe
        layer_caches = []
        for layer in range(cfg.n_layers):
            p = f"l{layer}_"
            q = self._split_heads(h @ params[p + "Wq"] + params[p + "bq"])
            k = self._split_heads(h @ params[p + "Wk"] + params[p + "bk"])
            v = self._split_heads(h @ params[p + "Wv"] + params[p + "bv"])
            scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(self.head_dim)
            attn = _softmax(scores)
            ctx = self._merge_heads(attn @ v)
            attn_out = ctx @ params[p + "Wo"] + params[p + "bo"]
            res1 = h + attn_out
            h1, ln1_cache = _layernorm_forward(res1, params[p + "ln1_g"], params[p + "ln1_b"])
            z1 = h1 @ params[p + "ffn_W1"] + params[p + "ffn_b1"]
            a1 = np.maximum(z1, 0.0)
            ffn_out = a1 @ params[p + "ffn_W2"] + params[p + "ffn_b2"]
            res2 = h1 + ffn_out
            h_next, ln2_cache = _layernorm_forward(res2, params[p + "ln2_g"], params[p + "ln2_b"])
            layer_caches.append((h, q, k, v, attn, ctx, ln1_cache, h1, z1, a1, ln2_cache))
            h = h_next
        pooled = h.mean(axis=1)
        pred = (pooled @ params["head_W"] + params["head_b"])[:, 0]
        return pred, (x_in, layer_caches, pooled)

    def _backward(self, params, cache, d_pred):
        cfg = self.config
        x_in, layer_caches, pooled = cache
        grads = {}
        d_out = d_pred[:, None]
        grads["head_W"] = pooled.T @ d_out
        grads["head_b"] = d_out.sum(axis=0)
        d_pooled = d_out @ params["head_W"].T
        w = cfg.lookback
        d_h = np.repeat(d_pooled[:, None, :], w, axis=1) / w

        for layer in range(cfg.n_layers - 1, -1, -1):
            p = f"l{layer}_"
            h_in, q, k, v, attn, ctx, ln1_cache, h1, z1, a1, ln2_cache = layer_caches[layer]

            d_res2, grads[p + "ln2_g"], grads[p + "ln2_b"] = _layernorm_backward(
                d_h, params[p + "ln2_g"], ln2_cache
            )
            # FFN branch
            d_ffn = d_res2
            grads[p + "ffn_W2"] = _flat(a1).T @ _flat(d_ffn)
            grads[p + "ffn_b2"] = d_ffn.sum(axis=(0, 1))
            d_a1 = d_ffn @ params[p + "ffn_W2"].T
            d_z1 = d_a1 * (z1 > 0)
            grads[p + "ffn_W1"] = _flat(h1).T @ _flat(d_z1)
            grads[p + "ffn_b1"] = d_z1.sum(axis=(0, 1))
            d_h1 = d_res2 + d_z1 @ params[p + "ffn_W1"].T

            d_res1, grads[p + "ln1_g"], grads[p + "ln1_b"] = _layernorm_backward(
                d_h1, params[p + "ln1_g"], ln1_cache
            )
            # attention branch
            d_attn_out = d_res1
            grads[p + "Wo"] = _flat(ctx).T @ _flat(d_attn_out)
            grads[p + "bo"] = d_attn_out.sum(axis=(0, 1))
            d_ctx = self._split_heads(d_attn_out @ params[p + "Wo"].T)
            d_attn = d_ctx @ v.transpose(0, 1, 3, 2)
            d_v = attn.transpose(0, 1, 3, 2) @ d_ctx
            d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
            d_scores /= np.sqrt(self.head_dim)
            d_q = d_scores @ k
            d_k = d_scores.transpose(0, 1, 3, 2) @ q
            d_q = self._merge_heads(d_q)
            d_k = self._merge_heads(d_k)
            d_v = self._merge_heads(d_v)
            grads[p + "Wq"] = _flat(h_in).T @ _flat(d_q)
            grads[p + "bq"] = d_q.sum(axis=(0, 1))
            grads[p + "Wk"] = _flat(h_in).T @ _flat(d_k)
            grads[p + "bk"] = d_k.sum(axis=(0, 1))
            grads[p + "Wv"] = _flat(h_in).T @ _flat(d_v)
            grads[p + "bv"] = d_v.sum(axis=(0, 1))
            d_h = (
                d_res1
                + d_q @ params[p + "Wq"].T
                + d_k @ params[p + "Wk"].T
                + d_v @ params[p + "Wv"].T
            )

        grads["in_W"] = _flat(x_in).T @ _flat(d_h)
        grads["in_b"] = d_h.sum(axis=(0, 1))
        return grads


def _flat(x):
    return x.reshape(-1, x.shape[-1])
