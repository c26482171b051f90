"""Single-query attention over grid features, modulated by a global token.

The token queries every grid point's key; the softmax-normalised scores
average the pointwise values into one context vector, which the readout
fuses back into each grid point.  Scores are temperature-scaled by
1/sqrt(d_a) and the softmax subtracts its max before exponentiating.
"""

import dataclasses

import numpy as np
from scipy.special import erf

from . import autodiff as ad


@dataclasses.dataclass
class GmlParams:
    q: np.ndarray  # (token_dim, d_a)
    k: np.ndarray  # (feat_dim, d_a)
    v: np.ndarray  # (feat_dim, d_a)
    r1_w: np.ndarray  # (feat_dim + d_a, hidden)
    r1_b: np.ndarray
    r2_w: np.ndarray  # (hidden, out_dim)
    r2_b: np.ndarray
    p_out_w: np.ndarray  # (feat_dim, out_dim)
    p_out_b: np.ndarray
    p_ctx_w: np.ndarray  # (out_dim, out_dim)
    p_ctx_b: np.ndarray


def init_gml(rng, token_dim, feat_dim, attn_dim, out_dim, hidden=None):
    if hidden is None:
        hidden = feat_dim
    u = lambda shape, fan: rng.uniform(-1, 1, shape) / np.sqrt(fan)
    return GmlParams(
        q=u((token_dim, attn_dim), token_dim),
        k=u((feat_dim, attn_dim), feat_dim),
        v=u((feat_dim, attn_dim), feat_dim),
        r1_w=u((feat_dim + attn_dim, hidden), feat_dim + attn_dim),
        r1_b=np.zeros(hidden),
        r2_w=u((hidden, out_dim), hidden),
        r2_b=np.zeros(out_dim),
        p_out_w=u((feat_dim, out_dim), feat_dim),
        p_out_b=np.zeros(out_dim),
        p_ctx_w=u((out_dim, out_dim), out_dim),
        p_ctx_b=np.zeros(out_dim),
    )


def attention_scores(token, feats, p):
    """s_j = <Q token, K f_j> / sqrt(d_a) over row-major grid points.

    token: Tensor (1, token_dim); feats: Tensor (N, feat_dim) -> Tensor (N,).
    """
    d_a = (p.q.data if isinstance(p.q, ad.Tensor) else p.q).shape[1]
    q = ad.matmul(token, p.q)  # (1, d_a)
    keys = ad.matmul(feats, p.k)  # (N, d_a)
    s = ad.matmul(keys, ad.transpose(q, (1, 0)))  # (N, 1)
    n = s.data.shape[0]
    return ad.scale(ad.reshape(s, (n,)), 1.0 / np.sqrt(d_a))


def discrete_attention(scores, values):
    """Softmax the scores and average the values: (alpha, context).

    scores: Tensor (N,); values: Tensor (N, d_a).  alpha sums to one; the
    context is the alpha-weighted value average, shape (1, d_a).
    """
    alpha = ad.softmax(scores)
    n = alpha.data.shape[0]
    context = ad.matmul(ad.reshape(alpha, (1, n)), values)
    return alpha, context


def gml_fuse(feats, context, p):
    """Pointwise readout: P_out(f) + P_ctx(R(f, context)) per grid point.

    Fused into one taped op (broadcast, concat, two-layer GELU readout and
    both projections) with the reverse chain written out by hand.
    """
    tensors = [feats, context, p.r1_w, p.r1_b, p.r2_w, p.r2_b,
               p.p_out_w, p.p_out_b, p.p_ctx_w, p.p_ctx_b]
    tensors = [t if isinstance(t, ad.Tensor) else ad.Tensor(t) for t in tensors]
    (feats, context, r1_w, r1_b, r2_w, r2_b,
     p_out_w, p_out_b, p_ctx_w, p_ctx_b) = tensors
    n, df = feats.data.shape
    h = np.concatenate(
        [feats.data, np.broadcast_to(context.data, (n, context.data.shape[1]))],
        axis=1,
    )
    a1 = h @ r1_w.data + r1_b.data
    phi = 0.5 * (1.0 + erf(a1 / np.sqrt(2.0)))
    act = a1 * phi
    r = act @ r2_w.data + r2_b.data
    out = (feats.data @ p_out_w.data + p_out_b.data) + (r @ p_ctx_w.data + p_ctx_b.data)

    def vjp(g):
        gr = g @ p_ctx_w.data.T
        gact = gr @ r2_w.data.T
        pdf = np.exp(-0.5 * a1**2) / np.sqrt(2.0 * np.pi)
        ga1 = gact * (phi + a1 * pdf)
        gh = ga1 @ r1_w.data.T
        gsum = g.sum(axis=0)
        return (
            gh[:, :df] + g @ p_out_w.data.T,         # feats
            gh[:, df:].sum(axis=0, keepdims=True),   # context
            h.T @ ga1,                               # r1_w
            ga1.sum(axis=0),                         # r1_b
            act.T @ gr,                              # r2_w
            gr.sum(axis=0),                          # r2_b
            feats.data.T @ g,                        # p_out_w
            gsum,                                    # p_out_b
            r.T @ g,                                 # p_ctx_w
            gsum,                                    # p_ctx_b
        )

    return ad.custom("gml_fuse", out, tensors, vjp)


def continuous_attention_reference(weight_fn, value_fn, n=512):
    """High-resolution Riemann oracle for A = int w v / int w on [0, 1]^2.

    Midpoint sampling at n x n; callables take (y1, y2) meshes and return
    (n, n) weights and (n, n, d) values.
    """
    c = (np.arange(n) + 0.5) / n
    y1, y2 = np.meshgrid(c, c, indexing="ij")
    w = np.asarray(weight_fn(y1, y2), dtype=np.float64)
    if (w <= 0).any():
        raise ValueError("reference weight function must be positive")
    v = np.asarray(value_fn(y1, y2), dtype=np.float64)
    num = (w[..., None] * v).sum(axis=(0, 1))
    return num / w.sum()
