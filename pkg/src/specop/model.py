"""Full operator: spectral trunk + spline token encoder + attention fusion.

A forward step maps a short history of fields (L, X, Y, C_in) to the next
field (X, Y, C_out).  The trunk sees the history frames stacked along
channels (plus optional coordinate channels); the token path pools the raw
history to a vector, normalises it, and encodes it with the spline network;
the attention block turns token and trunk features into a context vector
that the readout fuses back per grid point.

Translation equivariance of the trunk survives the full composition only
when coordinate channels are disabled (the pooled token and the attention
context are both shift-invariant, the readout is pointwise).
"""

import dataclasses

import numpy as np

from . import attention, autodiff as ad, kan, spectral
from .util import derive_seed, tensorize


@dataclasses.dataclass
class ModelConfig:
    in_channels: int
    out_channels: int
    history_len: int = 2
    width: int = 32
    depth: int = 3
    modes: int = 8
    downsample: int = 2
    coarse_depth: int = 0  # 0 means same as depth
    se_reduction: int = 4
    kan_grid: int = 8
    kan_order: int = 3
    token_dim: int = 32
    attn_dim: int = 64
    coords: bool = False
    grid: str = "corner"  # coordinate convention: "corner" or "center"
    pool: str = "mean"
    use_context: bool = True

    def trunk_in_channels(self):
        return self.history_len * self.in_channels + (2 if self.coords else 0)

    def token_in_dim(self):
        return self.history_len * self.in_channels

    def validate(self):
        if self.history_len < 1:
            raise ValueError("history_len must be at least 1")
        if self.grid not in ("corner", "center"):
            raise ValueError(f"unknown grid convention {self.grid!r}")
        if self.pool not in ("mean", "center"):
            raise ValueError(f"unknown pool mode {self.pool!r}")
        if self.width % self.se_reduction:
            raise ValueError("se_reduction must divide width")


@dataclasses.dataclass
class ModelParams:
    trunk: spectral.AmfnoParams
    kan: kan.KanParams
    gml: attention.GmlParams


class Model:
    """Parameter container plus the forward pass.

    The token normalizer is running state, not a trainable parameter; it
    lives outside ModelParams so gradient walks never see it.
    """

    def __init__(self, cfg, params, normalizer):
        cfg.validate()
        self.cfg = cfg
        self.params = params
        self.normalizer = normalizer

    @classmethod
    def init(cls, cfg, seed):
        cfg.validate()
        d0 = cfg.token_in_dim()
        trunk = spectral.init_amfno(
            np.random.default_rng(derive_seed(seed, "trunk")),
            c_in=cfg.trunk_in_channels(),
            d=cfg.width,
            depth=cfg.depth,
            modes=cfg.modes,
            reduction=cfg.se_reduction,
            downsample=cfg.downsample,
            coarse_depth=cfg.coarse_depth or None,
        )
        kan_params = kan.init_kan(
            np.random.default_rng(derive_seed(seed, "kan")),
            dims=[d0, 2 * d0, cfg.token_dim],
            grid_size=cfg.kan_grid,
            order=cfg.kan_order,
        )
        gml = attention.init_gml(
            np.random.default_rng(derive_seed(seed, "gml")),
            token_dim=cfg.token_dim,
            feat_dim=cfg.width,
            attn_dim=cfg.attn_dim,
            out_dim=cfg.out_channels,
        )
        return cls(cfg, ModelParams(trunk, kan_params, gml),
                   kan.TokenNormalizer(d0))

    def trunk_input(self, history):
        """Stack history frames along channels, then coordinate channels."""
        length, x, y, _ = history.shape
        chans = [history[i] for i in range(length)]
        if self.cfg.coords:
            fn = spectral.corner_coords if self.cfg.grid == "corner" else spectral.center_coords
            xs, ys = fn(x), fn(y)
            chans.append(np.broadcast_to(xs[:, None, None], (x, y, 1)))
            chans.append(np.broadcast_to(ys[None, :, None], (x, y, 1)))
        return np.ascontiguousarray(np.concatenate(chans, axis=-1))

    def forward(self, history, tape=None, update_normalizer=False):
        """One-step prediction: (L, X, Y, C_in) history -> (X, Y, C_out) Tensor."""
        history = np.asarray(history, dtype=np.float64)
        expect = (self.cfg.history_len, history.shape[1], history.shape[2],
                  self.cfg.in_channels)
        if history.ndim != 4 or history.shape != expect:
            raise ad.ShapeError("model_forward", {"history": history.shape,
                                                  "expected": expect})
        p = tensorize(self.params, tape, "")
        x, y = history.shape[1], history.shape[2]

        feats = spectral.amfno_forward(p.trunk, self.trunk_input(history))
        flat = ad.reshape(feats, (x * y, self.cfg.width))

        if not self.cfg.use_context:
            out = ad.add(ad.matmul(flat, p.gml.p_out_w), p.gml.p_out_b)
            return ad.reshape(out, (x, y, self.cfg.out_channels))

        z = kan.pool_history(history, self.cfg.pool)
        if update_normalizer:
            self.normalizer.update(z)
        token = kan.kan_forward(p.kan, self.normalizer.apply(z))
        token = ad.reshape(token, (1, self.cfg.token_dim))

        scores = attention.attention_scores(token, flat, p.gml)
        values = ad.matmul(flat, p.gml.v)
        _, context = attention.discrete_attention(scores, values)
        out = attention.gml_fuse(flat, context, p.gml)
        return ad.reshape(out, (x, y, self.cfg.out_channels))


def mse(pred, target):
    """Mean squared error between a Tensor and a numpy target, as a scalar Tensor."""
    target = np.asarray(target, dtype=np.float64)
    diff = ad.sub(pred, ad.Tensor(target))
    return ad.scale(ad.sum(ad.mul(diff, diff)), 1.0 / target.size)


def persistence_forecast(history):
    """Baseline: predict the most recent frame unchanged."""
    return np.array(history[-1], dtype=np.float64)
