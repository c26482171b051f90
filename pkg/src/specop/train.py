"""One-step teacher-forced training, evaluation, and rollout.

The optimizer is Adam with cosine-decayed learning rate and global
gradient-norm clipping.  Complex parameters are updated through their
interleaved float views, so a complex pair behaves exactly like two real
parameters with the same gradients.  A non-finite loss ends the run and
restores the last parameters that were known good.
"""

import copy
import dataclasses

import numpy as np

from . import autodiff as ad, metrics, model as model_mod
from .util import derive_seed, named_arrays, set_by_path


@dataclasses.dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 8
    steps_per_epoch: int = 0  # 0 = one pass over all pairs per epoch
    clip_norm: float = 1.0
    patience: int = 0  # 0 = never stop early
    seed: int = 0
    normalizer_epochs: int = 1  # epochs during which the token normalizer expands


@dataclasses.dataclass
class TrainResult:
    model: object
    history: list
    status: str
    steps: int


def _float_view(arr):
    """In-place-updatable float64 view (complex arrays interleave re/im)."""
    if np.iscomplexobj(arr):
        return arr.view(np.float64)
    return arr


def _grad_view(g):
    if np.iscomplexobj(g):
        return np.ascontiguousarray(g).view(np.float64)
    return g


def global_grad_norm(grads):
    """sqrt of the summed squared entries over every gradient array."""
    total = 0.0
    with np.errstate(over="ignore"):
        for g in grads.values():
            v = _grad_view(g)
            total += float((v * v).sum())
    return np.sqrt(total)


class Adam:
    """Adam over the trainable float views of a parameter tree.

    Moments live in one flat buffer keyed by per-parameter slices, so a
    step is a handful of long vector passes instead of a few hundred
    small-array operations.
    """

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.views = {name: _float_view(arr)
                      for name, arr in named_arrays(params, trainable_only=True)}
        self.slices = {}
        offset = 0
        for name, view in self.views.items():
            self.slices[name] = slice(offset, offset + view.size)
            offset += view.size
        self.size = offset
        self.m = np.zeros(offset)
        self.v = np.zeros(offset)
        self._scratch = np.zeros(offset)
        self._update = np.zeros(offset)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def grad_buffer(self):
        """Zeroed flat buffer laid out to match `slices`."""
        return np.zeros(self.size)

    def pack(self, grads, out=None):
        """Flatten a {name: array} gradient map into the step layout."""
        flat = self.grad_buffer() if out is None else out
        for name, sl in self.slices.items():
            flat[sl] = _grad_view(grads[name]).ravel()
        return flat

    def step_flat(self, gflat, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        m, v = self.m, self.v
        scratch, update = self._scratch, self._update
        m *= b1
        m += (1 - b1) * gflat
        v *= b2
        np.multiply(gflat, gflat, out=scratch)
        v += (1 - b2) * scratch
        np.multiply(m, lr / (1 - b1 ** self.t), out=update)
        np.sqrt(v, out=scratch)
        scratch *= 1.0 / np.sqrt(1 - b2 ** self.t)
        scratch += self.eps
        update /= scratch
        for name, view in self.views.items():
            flat_view = view.reshape(-1)
            flat_view -= update[self.slices[name]]

    def step(self, grads, lr):
        self.step_flat(self.pack(grads, out=self._scratch), lr)


def cosine_lr(base, step, total_steps):
    if total_steps <= 1:
        return base
    frac = min(step, total_steps - 1) / (total_steps - 1)
    return base * 0.5 * (1.0 + np.cos(np.pi * frac))


def one_step_pairs(ts, history_len):
    """(sample, start) index pairs with a full window and a target frame."""
    span = ts.n_frames - history_len
    if span < 1:
        raise ValueError(f"trajectories have {ts.n_frames} frames, too few "
                         f"for history length {history_len}")
    return [(s, t0) for s in range(ts.n_samples) for t0 in range(span)]


def _window_target(ts, pair, history_len):
    s, t0 = pair
    return ts.data[s, t0:t0 + history_len], ts.data[s, t0 + history_len]


def _snapshot(m):
    return copy.deepcopy(m.params), m.normalizer.state().copy()


def _restore(m, snap):
    params, norm_state = snap
    for name, arr in named_arrays(params):
        set_by_path(m.params, name, arr.copy())
    m.normalizer.lo, m.normalizer.hi = norm_state[0].copy(), norm_state[1].copy()


def mean_one_step_loss(m, ts):
    """Teacher-forced mse averaged over every pair, without updates."""
    pairs = one_step_pairs(ts, m.cfg.history_len)
    total = 0.0
    for pair in pairs:
        window, target = _window_target(ts, pair, m.cfg.history_len)
        out = m.forward(window)
        total += float(((out.data - target) ** 2).mean())
    return total / len(pairs)


def train(m, train_ts, val_ts, cfg):
    """Returns a TrainResult; m is updated in place.

    When a validation set is given the returned model carries the weights
    of the best validation epoch; a non-finite loss restores the last
    finite state and reports where it happened.
    """
    pairs = one_step_pairs(train_ts, m.cfg.history_len)
    opt = Adam(m.params)

    n_batches = (len(pairs) + cfg.batch_size - 1) // cfg.batch_size
    if cfg.steps_per_epoch:
        n_batches = min(n_batches, cfg.steps_per_epoch)
    total_steps = cfg.epochs * n_batches

    history = []
    status = "completed"
    step = 0
    best_val = np.inf
    best_snap = _snapshot(m)
    bad_epochs = 0

    for epoch in range(cfg.epochs):
        rng = np.random.default_rng(derive_seed(cfg.seed, f"epoch.{epoch}"))
        order = rng.permutation(len(pairs))
        update_norm = epoch < cfg.normalizer_epochs
        epoch_loss = 0.0
        lr = cfg.lr

        for b in range(n_batches):
            ids = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            if ids.size == 0:
                break
            lr = cosine_lr(cfg.lr, step, total_steps)
            acc = opt.grad_buffer()
            batch_loss = 0.0
            try:
                for i in ids:
                    window, target = _window_target(train_ts, pairs[i],
                                                    m.cfg.history_len)
                    tape = ad.Tape()
                    out = m.forward(window, tape=tape,
                                    update_normalizer=update_norm)
                    loss = model_mod.mse(out, target)
                    value = loss.data.item()
                    if not np.isfinite(value):
                        raise ad.NumericError("loss", f"loss became {value}")
                    grads = ad.backward(tape, loss)
                    batch_loss += value / ids.size
                    for n, sl in opt.slices.items():
                        acc[sl] += _grad_view(grads[n].data).ravel()
                acc *= 1.0 / ids.size
                with np.errstate(over="ignore"):
                    norm = float(np.sqrt(acc @ acc))
                if not np.isfinite(norm):
                    raise ad.NumericError("grad_norm",
                                          f"gradient norm became {norm}")
            except ad.NumericError as exc:
                _restore(m, best_snap)
                status = (f"non-finite loss at epoch {epoch} step {step}: "
                          f"{exc}; restored last good parameters")
                return TrainResult(m, history, status, step)

            if cfg.clip_norm > 0 and norm > cfg.clip_norm:
                acc *= cfg.clip_norm / norm
            opt.step_flat(acc, lr)
            epoch_loss += batch_loss / n_batches
            step += 1

        row = {"epoch": epoch, "train_loss": epoch_loss, "lr": lr}
        stop = False
        if val_ts is not None:
            val_loss = mean_one_step_loss(m, val_ts)
            row["val_loss"] = val_loss
            if val_loss < best_val:
                best_val = val_loss
                best_snap = _snapshot(m)
                bad_epochs = 0
            else:
                bad_epochs += 1
                if cfg.patience and bad_epochs >= cfg.patience:
                    status = f"early stop at epoch {epoch} (patience {cfg.patience})"
                    stop = True
        else:
            best_snap = _snapshot(m)
        history.append(row)
        if stop:
            break

    if val_ts is not None and np.isfinite(best_val):
        _restore(m, best_snap)
    return TrainResult(m, history, status, step)


def predict_one_step(m, ts):
    """Teacher-forced predictions and targets as rank-5 metric inputs.

    Returns (pred, truth), both (samples, n_frames - L, X, Y, C).
    """
    length = m.cfg.history_len
    span = ts.n_frames - length
    if span < 1:
        raise ValueError("not enough frames for one-step evaluation")
    shape = (ts.n_samples, span) + ts.data.shape[2:]
    pred = np.empty(shape)
    for s in range(ts.n_samples):
        for t0 in range(span):
            pred[s, t0] = m.forward(ts.data[s, t0:t0 + length]).data
    return pred, ts.data[:, length:]


def persistence_one_step(ts, history_len):
    """Matching (pred, truth) pair for the copy-last-frame baseline."""
    span = ts.n_frames - history_len
    return ts.data[:, history_len - 1:-1], ts.data[:, history_len:]


def rollout(m, history0, n_steps):
    """Autoregressive forecast from an initial window.

    Returns (frames (k, X, Y, C), status) with k <= n_steps; a non-finite
    prediction truncates the rollout and reports the step.
    """
    window = np.array(history0, dtype=np.float64)
    frames = []

    def stack(done):
        if not done:
            return np.zeros((0,) + window.shape[1:])
        return np.array(done)

    for k in range(n_steps):
        try:
            pred = m.forward(window).data
        except ad.NumericError as exc:
            return stack(frames), f"non-finite at step {k}: {exc}"
        if not np.isfinite(pred).all():
            return stack(frames), f"non-finite at step {k}"
        frames.append(pred)
        window = np.concatenate([window[1:], pred[None]], axis=0)
    return stack(frames), "ok"


def rollout_rmse_curve(m, ts, n_steps):
    """Median-over-samples rmse at each rollout step against the stored frames."""
    length = m.cfg.history_len
    if ts.n_frames < length + n_steps:
        raise ValueError("trajectories too short for the requested rollout")
    errs = np.full((ts.n_samples, n_steps), np.nan)
    for s in range(ts.n_samples):
        frames, _ = rollout(m, ts.data[s, :length], n_steps)
        for k in range(frames.shape[0]):
            truth = ts.data[s, length + k]
            errs[s, k] = np.sqrt(((frames[k] - truth) ** 2).mean())
    return np.nanmedian(errs, axis=0)
