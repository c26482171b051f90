"""Synthetic trajectory generators: 1d diffusion-reaction, 2d shallow water.

Diffusion-reaction runs a Fourier-spectral RK4 on the periodic interval
(corner-aligned grid j/n); shallow water runs a flux-form finite-volume
scheme with a global Rusanov dissipation rate on cell centers (i + 1/2)/n
and reflective walls.  Both draw per-sample parameters from seeds derived
via (root seed, sample index), so a sample's initial condition is the same
function regardless of resolution.
"""

import dataclasses

import numpy as np

from . import fourier
from .util import derive_seed


@dataclasses.dataclass
class TrajectorySet:
    """Trajectories (samples, frames, X, Y, C) plus generation provenance."""

    data: np.ndarray
    kind: str
    seed: int
    meta: dict

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 5:
            raise ValueError(f"expected 5d trajectory array, got {self.data.shape}")

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]


def split_dataset(ts, train_frac, val_frac, seed):
    """Disjoint sample-level split into (train, val, test) TrajectorySets.

    The permutation depends only on (seed, n_samples), so the same call is
    reproducible and the three parts never overlap.
    """
    if not (0.0 < train_frac and 0.0 <= val_frac and train_frac + val_frac <= 1.0):
        raise ValueError("fractions must satisfy 0 < train, 0 <= val, sum <= 1")
    n = ts.n_samples
    perm = np.random.default_rng(derive_seed(seed, "split")).permutation(n)
    n_train = int(round(train_frac * n))
    n_val = int(round(val_frac * n))
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    out = []
    for name, idx in zip(("train", "val", "test"), parts):
        meta = dict(ts.meta, split=name)
        out.append(TrajectorySet(ts.data[np.sort(idx)], ts.kind, ts.seed, meta))
    return tuple(out)


# ---------------------------------------------------------------------------
# 1d diffusion-reaction: du/dt = nu u_xx + rho u (1 - u), periodic on [0, 1)


@dataclasses.dataclass
class DiffusionReactionConfig:
    resolution: int = 64
    n_frames: int = 50
    nu: float = 0.005
    rho: float = 1.0
    dt: float = 0.02
    ic_modes: int = 3


def diffusion_reaction_rhs(u, nu, rho):
    """Spectral evaluation of nu u_xx + rho u (1 - u) on the periodic grid."""
    n = u.shape[-1]
    k = fourier.fft_freqs(n).astype(np.float64)
    spec = fourier.fft_along(u.astype(np.complex128), axis=-1)
    uxx = fourier.ifft_along(-((2.0 * np.pi * k) ** 2) * spec, axis=-1).real
    return nu * uxx + rho * u * (1.0 - u)


def _rk4_step(u, dt, nu, rho):
    k1 = diffusion_reaction_rhs(u, nu, rho)
    k2 = diffusion_reaction_rhs(u + 0.5 * dt * k1, nu, rho)
    k3 = diffusion_reaction_rhs(u + 0.5 * dt * k2, nu, rho)
    k4 = diffusion_reaction_rhs(u + dt * k3, nu, rho)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_diffusion_reaction(u0, nu, rho, dt, n_frames):
    """Frames (n_frames, ..., X) at t = 0, dt, 2 dt, ...; frame 0 is u0.

    Leading axes of u0 are batch dimensions stepped together.  Each frame
    interval is internally substepped so the stiff top mode stays inside
    the RK4 stability region.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    n = u0.shape[-1]
    lam = nu * (2.0 * np.pi * (n // 2)) ** 2
    n_sub = max(1, int(np.ceil(dt * lam / 2.0)))
    h = dt / n_sub
    frames = np.empty((n_frames,) + u0.shape)
    frames[0] = u0
    u = u0.copy()
    for f in range(1, n_frames):
        for _ in range(n_sub):
            u = _rk4_step(u, h, nu, rho)
        if not np.isfinite(u).all():
            raise ArithmeticError(f"diffusion-reaction blew up at frame {f}")
        frames[f] = u
    return frames


def diffusion_reaction_ic(rng, x, n_modes):
    """Random low-order Fourier profile squashed into (0, 1) by a logistic."""
    g = rng.normal(0.0, 0.5) * np.ones_like(x)
    for k in range(1, n_modes + 1):
        a, b = rng.normal(0.0, 1.0 / k, size=2)
        g = g + a * np.cos(2.0 * np.pi * k * x) + b * np.sin(2.0 * np.pi * k * x)
    return 1.0 / (1.0 + np.exp(-g))


def generate_diffusion_reaction(cfg, n_samples, seed):
    x = np.arange(cfg.resolution) / cfg.resolution
    ics = np.stack([
        diffusion_reaction_ic(
            np.random.default_rng(derive_seed(seed, f"dr.sample.{i}")),
            x, cfg.ic_modes)
        for i in range(n_samples)
    ])
    frames = integrate_diffusion_reaction(ics, cfg.nu, cfg.rho, cfg.dt,
                                          cfg.n_frames)
    data = frames.transpose(1, 0, 2)[:, :, :, None, None]
    meta = {"nu": cfg.nu, "rho": cfg.rho, "dt": cfg.dt,
            "resolution": cfg.resolution, "ic_modes": cfg.ic_modes,
            "grid": "corner"}
    return TrajectorySet(data, "diffusion_reaction", seed, meta)


# ---------------------------------------------------------------------------
# 2d shallow water: conserved (rho, rho v1, rho v2), reflective walls


@dataclasses.dataclass
class ShallowWaterConfig:
    resolution: int = 32
    n_frames: int = 50
    g: float = 1.0
    dt: float = 0.002
    height_range: tuple = (1.5, 2.5)
    width_range: tuple = (0.002, 0.008)
    center_range: tuple = (0.4, 0.6)


def shallow_water_flux_x(u, g):
    rho, mx, my = u[..., 0], u[..., 1], u[..., 2]
    v = mx / rho
    return np.stack([mx, mx * v + 0.5 * g * rho ** 2, my * v], axis=-1)


def shallow_water_flux_y(u, g):
    rho, mx, my = u[..., 0], u[..., 1], u[..., 2]
    v = my / rho
    return np.stack([my, mx * v, my * v + 0.5 * g * rho ** 2], axis=-1)


def wave_speed_bound(u, g):
    """Global Rusanov rate: max over cells and axes of |v_d| + sqrt(g rho)."""
    rho = u[..., 0]
    if (rho <= 0).any():
        raise ArithmeticError("shallow water depth became non-positive")
    c = np.sqrt(g * rho)
    s1 = np.abs(u[..., 1] / rho) + c
    s2 = np.abs(u[..., 2] / rho) + c
    return float(max(s1.max(), s2.max()))


def _reflect_pad(u, axis):
    """One ghost cell per side: mirror the state, negate normal momentum."""
    lo = np.take(u, [0], axis=axis).copy()
    hi = np.take(u, [-1], axis=axis).copy()
    mom = 1 + axis  # channel holding the normal momentum
    lo[..., mom] = -lo[..., mom]
    hi[..., mom] = -hi[..., mom]
    return np.concatenate([lo, u, hi], axis=axis)


def shallow_water_step(u, g, dt):
    """One forward-Euler flux-form update with global LxF face fluxes.

    Raises on a CFL violation (face speed * dt / cell size above one).
    """
    nx, ny, _ = u.shape
    alpha = wave_speed_bound(u, g)
    for n_cells in (nx, ny):
        if alpha * dt * n_cells > 1.0:
            raise ArithmeticError(
                f"CFL violation: wave speed {alpha:.3g}, dt {dt:.3g}, "
                f"grid {nx}x{ny} gives ratio {alpha * dt * n_cells:.3g} > 1")

    out = u.copy()
    # x faces
    p = _reflect_pad(u, axis=0)
    f = shallow_water_flux_x(p, g)
    face = 0.5 * (f[:-1] + f[1:]) - 0.5 * alpha * (p[1:] - p[:-1])
    out -= (dt * nx) * (face[1:] - face[:-1])
    # y faces
    p = _reflect_pad(u, axis=1)
    f = shallow_water_flux_y(p, g)
    face = 0.5 * (f[:, :-1] + f[:, 1:]) - 0.5 * alpha * (p[:, 1:] - p[:, :-1])
    out -= (dt * ny) * (face[:, 1:] - face[:, :-1])
    return out


def integrate_shallow_water(u0, g, dt, n_frames):
    """Frames (n_frames, X, Y, 3); frame k is the state at t = (k + 1) dt.

    The raw initial spike is not stored: the first update projects it onto
    the scheme's smoothed states, and prediction pairs should not straddle
    that transient.
    """
    u = np.asarray(u0, dtype=np.float64).copy()
    frames = np.empty((n_frames,) + u.shape)
    for f in range(n_frames):
        u = shallow_water_step(u, g, dt)
        if not np.isfinite(u).all():
            raise ArithmeticError(f"shallow water blew up at frame {f}")
        frames[f] = u
    return frames


def droplet_state(n, height, width, cx, cy):
    """Still water of unit depth plus a Gaussian bump, zero momentum."""
    c = (np.arange(n) + 0.5) / n
    x, y = np.meshgrid(c, c, indexing="ij")
    rho = 1.0 + height * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width)
    u = np.zeros((n, n, 3))
    u[..., 0] = rho
    return u


def sample_droplet_params(rng, cfg):
    return {
        "height": rng.uniform(*cfg.height_range),
        "width": rng.uniform(*cfg.width_range),
        "cx": rng.uniform(*cfg.center_range),
        "cy": rng.uniform(*cfg.center_range),
    }


def generate_shallow_water(cfg, n_samples, seed):
    data = np.empty((n_samples, cfg.n_frames, cfg.resolution, cfg.resolution, 3))
    for i in range(n_samples):
        rng = np.random.default_rng(derive_seed(seed, f"sw.sample.{i}"))
        p = sample_droplet_params(rng, cfg)
        u0 = droplet_state(cfg.resolution, **p)
        data[i] = integrate_shallow_water(u0, cfg.g, cfg.dt, cfg.n_frames)
    meta = {"g": cfg.g, "dt": cfg.dt, "resolution": cfg.resolution,
            "grid": "center"}
    return TrajectorySet(data, "shallow_water", seed, meta)


# ---------------------------------------------------------------------------
# resolution helpers


def subsample_grid(data, factor):
    """Stride-subsample the X and Y axes of (..., X, Y, C) data.

    Exact on corner-aligned grids: point j of the coarse grid is point
    j * factor of the fine one.  Length-1 axes pass through.
    """
    out = data
    if data.shape[-3] > 1:
        out = out[..., ::factor, :, :]
    if data.shape[-2] > 1:
        out = out[..., :, ::factor, :]
    return np.ascontiguousarray(out)


def block_coarsen(data, factor):
    """Average factor x factor cell blocks of (..., X, Y, C) data.

    Matches cell-center grids: the mean of a block of fine cells is the
    coarse cell value's volume average.  Length-1 axes pass through.
    """
    out = np.asarray(data, dtype=np.float64)
    if out.shape[-3] > 1:
        if out.shape[-3] % factor:
            raise ValueError("factor must divide the X extent")
        s = out.shape
        out = out.reshape(s[:-3] + (s[-3] // factor, factor) + s[-2:]).mean(axis=-3)
    if out.shape[-2] > 1:
        if out.shape[-2] % factor:
            raise ValueError("factor must divide the Y extent")
        s = out.shape
        out = out.reshape(s[:-2] + (s[-2] // factor, factor, s[-1])).mean(axis=-2)
    return out
