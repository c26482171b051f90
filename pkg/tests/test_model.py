"""Full-model composition: wiring, symmetry, ablation, gradients."""

import numpy as np
import pytest

from specop import autodiff as ad
from specop.model import Model, ModelConfig, mse, persistence_forecast
from specop.util import named_arrays


def tiny_cfg(**over):
    base = dict(in_channels=1, out_channels=1, history_len=2, width=4,
                depth=1, modes=2, downsample=2, coarse_depth=0,
                se_reduction=2, kan_grid=4, kan_order=3, token_dim=3,
                attn_dim=4, coords=False)
    base.update(over)
    return ModelConfig(**base)


def test_forward_shape_and_determinism():
    cfg = tiny_cfg()
    m1 = Model.init(cfg, seed=7)
    m2 = Model.init(cfg, seed=7)
    for (n1, a1), (n2, a2) in zip(named_arrays(m1.params), named_arrays(m2.params)):
        assert n1 == n2
        assert np.array_equal(a1, a2), n1
    rng = np.random.default_rng(0)
    h = rng.uniform(-0.5, 0.5, size=(2, 8, 8, 1))
    o1 = m1.forward(h).data
    o2 = m2.forward(h).data
    assert o1.shape == (8, 8, 1)
    assert np.array_equal(o1, o2)
    m3 = Model.init(cfg, seed=8)
    assert not np.array_equal(o1, m3.forward(h).data)


def test_history_shape_validation():
    m = Model.init(tiny_cfg(), seed=0)
    rng = np.random.default_rng(1)
    with pytest.raises(ad.ShapeError):
        m.forward(rng.normal(size=(3, 8, 8, 1)))  # wrong history length
    with pytest.raises(ad.ShapeError):
        m.forward(rng.normal(size=(2, 8, 8, 2)))  # wrong channel count


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_cfg(pool="median").validate()
    with pytest.raises(ValueError):
        tiny_cfg(grid="staggered").validate()
    with pytest.raises(ValueError):
        tiny_cfg(width=4, se_reduction=3).validate()
    with pytest.raises(ValueError):
        tiny_cfg(history_len=0).validate()


def test_trunk_input_layout():
    cfg = tiny_cfg(in_channels=2, coords=True, grid="center")
    m = Model.init(cfg, seed=0)
    rng = np.random.default_rng(2)
    h = rng.normal(size=(2, 4, 6, 2))
    inp = m.trunk_input(h)
    assert inp.shape == (4, 6, 6)  # 2 frames * 2 channels + x + y
    assert np.array_equal(inp[..., 0:2], h[0])
    assert np.array_equal(inp[..., 2:4], h[1])
    assert np.allclose(inp[:, 0, 4], (np.arange(4) + 0.5) / 4)
    assert np.allclose(inp[0, :, 5], (np.arange(6) + 0.5) / 6)

    corner = Model.init(tiny_cfg(coords=True), seed=0)
    inp = corner.trunk_input(rng.normal(size=(2, 4, 4, 1)))
    assert np.allclose(inp[:, 0, 2], np.arange(4) / 4)


def test_context_flag_matches_zeroed_value_path():
    cfg = tiny_cfg()
    m = Model.init(cfg, seed=3)
    rng = np.random.default_rng(3)
    h = rng.uniform(-0.5, 0.5, size=(2, 8, 8, 1))

    m.params.gml.v = np.zeros_like(m.params.gml.v)
    m.params.gml.p_ctx_w = np.zeros_like(m.params.gml.p_ctx_w)
    m.params.gml.p_ctx_b = np.zeros_like(m.params.gml.p_ctx_b)
    full = m.forward(h).data

    m.cfg.use_context = False
    direct = m.forward(h).data
    assert np.abs(full - direct).max() < 1e-14


def test_full_model_shift_equivariance_without_coords():
    cfg = tiny_cfg(width=4, depth=2, modes=4)
    for seed in (0, 1, 2):
        m = Model.init(cfg, seed=seed)
        rng = np.random.default_rng(100 + seed)
        h = rng.uniform(-0.5, 0.5, size=(2, 16, 16, 1))
        base = m.forward(h).data
        for dx, dy in ((2, 0), (0, 4), (6, 2)):
            rolled = np.roll(h, (dx, dy), axis=(1, 2))
            out = m.forward(rolled).data
            expect = np.roll(base, (dx, dy), axis=(0, 1))
            assert np.abs(out - expect).max() < 1e-8, (seed, dx, dy)


def test_coords_break_equivariance():
    m = Model.init(tiny_cfg(coords=True), seed=0)
    rng = np.random.default_rng(4)
    h = rng.uniform(-0.5, 0.5, size=(2, 8, 8, 1))
    base = m.forward(h).data
    out = m.forward(np.roll(h, 2, axis=1)).data
    assert np.abs(out - np.roll(base, 2, axis=0)).max() > 1e-6


def test_normalizer_update_flag():
    m = Model.init(tiny_cfg(), seed=5)
    rng = np.random.default_rng(5)
    h = rng.uniform(-3.0, 3.0, size=(2, 8, 8, 1))
    lo0, hi0 = m.normalizer.state()
    m.forward(h, update_normalizer=False)
    lo1, hi1 = m.normalizer.state()
    assert np.array_equal(lo0, lo1) and np.array_equal(hi0, hi1)
    m.forward(np.full((2, 8, 8, 1), 3.0), update_normalizer=True)
    _, hi2 = m.normalizer.state()
    assert (hi2 >= 3.0).all()


def test_runs_across_resolutions():
    m = Model.init(tiny_cfg(), seed=6)
    rng = np.random.default_rng(6)
    for n in (8, 16, 32):
        out = m.forward(rng.uniform(-0.5, 0.5, size=(2, n, n, 1))).data
        assert out.shape == (n, n, 1)
        assert np.isfinite(out).all()


def test_runs_on_1d_fields():
    # 1d problems come through as (L, X, 1, C); the y axis mixes are skipped
    m = Model.init(tiny_cfg(), seed=7)
    rng = np.random.default_rng(7)
    out = m.forward(rng.uniform(-0.5, 0.5, size=(2, 16, 1, 1))).data
    assert out.shape == (16, 1, 1)
    assert np.isfinite(out).all()


def test_gradient_spot_checks_against_finite_differences():
    cfg = tiny_cfg()
    m = Model.init(cfg, seed=8)
    rng = np.random.default_rng(8)
    h = rng.uniform(-0.4, 0.4, size=(2, 4, 4, 1))
    probe = rng.normal(size=(4, 4, 1))

    def loss_value():
        out = m.forward(h)
        return float((out.data * probe).sum())

    tape = ad.Tape()
    out = m.forward(h, tape=tape)
    loss = ad.sum(ad.mul(out, ad.Tensor(probe)))
    grads = ad.backward(tape, loss)

    flat = dict(named_arrays(m.params))
    picked = ["trunk.fine.layers.0.w_x", "trunk.fine.layers.0.g_y",
              "trunk.fine.lift_w", "trunk.coarse.layers.0.se.w1",
              "kan.layers.0.coeffs", "kan.layers.1.w_b", "gml.q",
              "gml.r1_w", "gml.p_out_b"]
    step = 1e-6
    for name in picked:
        arr = flat[name]
        g = grads[name].data
        idx = tuple(rng.integers(0, s) for s in arr.shape)
        if np.iscomplexobj(arr):
            keep = arr[idx]
            arr[idx] = keep + step
            fp = loss_value()
            arr[idx] = keep - step
            fm = loss_value()
            re = (fp - fm) / (2 * step)
            arr[idx] = keep + 1j * step
            fp = loss_value()
            arr[idx] = keep - 1j * step
            fm = loss_value()
            im = (fp - fm) / (2 * step)
            arr[idx] = keep
            num = re + 1j * im
        else:
            keep = arr[idx]
            arr[idx] = keep + step
            fp = loss_value()
            arr[idx] = keep - step
            fm = loss_value()
            arr[idx] = keep
            num = (fp - fm) / (2 * step)
        denom = max(abs(num), abs(g[idx]), 1e-6)
        assert abs(g[idx] - num) / denom < 1e-5, name


def test_every_parameter_receives_gradient():
    # accumulated over a few inputs so a single dead relu region in the
    # tiny squeeze-excite block cannot mask a wiring break
    m = Model.init(tiny_cfg(), seed=0)
    acc = {}
    for trial in range(3):
        rng = np.random.default_rng(trial)
        h = rng.uniform(-0.4, 0.4, size=(2, 8, 8, 1))
        tape = ad.Tape()
        out = m.forward(h, tape=tape)
        grads = ad.backward(tape, mse(out, rng.normal(size=(8, 8, 1))))
        assert "kan.layers.0.knots" not in grads  # constants stay off the tape
        for name, _ in named_arrays(m.params, trainable_only=True):
            assert name in grads, name
            acc[name] = acc.get(name, 0.0) + np.abs(grads[name].data).max()
    for name, total in acc.items():
        assert total > 0, name


def test_mse_and_persistence():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(3, 3, 2))
    b = rng.normal(size=(3, 3, 2))
    got = mse(ad.Tensor(a), b).data.item()
    assert abs(got - ((a - b) ** 2).mean()) < 1e-14

    h = rng.normal(size=(2, 4, 4, 1))
    assert np.array_equal(persistence_forecast(h), h[1])
