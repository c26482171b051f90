"""INI run configuration: parsing, validation, overrides, emission.

Sections mirror the runtime config dataclasses: [run] seeds and thread
caps, [model] architecture, [data] generator choice and physics numbers,
[train] optimiser settings, [eval] evaluation choices, [verify] check
sizes.  Unknown sections or keys are rejected, values are coerced by the
declared field type, and `format_config` emits text that parses back to
the same object.

This module must not import numpy at module level: the CLI applies
[run] threads to the BLAS thread-count environment variables before the
numeric stack loads, so the builder helpers import the heavy modules
lazily.
"""

import configparser
import dataclasses
import io


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class RunSection:
    seed: int = 0
    threads: int = 0  # 0 leaves the BLAS thread count alone


@dataclasses.dataclass
class ModelSection:
    history_len: int = 2
    width: int = 32
    depth: int = 3
    modes: int = 8
    downsample: int = 2
    coarse_depth: int = 0
    se_reduction: int = 4
    kan_grid: int = 8
    kan_order: int = 3
    token_dim: int = 32
    attn_dim: int = 64
    coords: bool = False
    grid: str = ""  # "" infers corner/center from the data kind
    pool: str = "mean"
    use_context: bool = True


@dataclasses.dataclass
class DataSection:
    kind: str = "diffusion"  # diffusion | shallow-water
    samples: int = 200
    resolution: int = 0  # 0 uses the generator default
    frames: int = 50
    dt: float = 0.0  # 0 uses the generator default
    nu: float = 0.005
    rho: float = 1.0
    gravity: float = 1.0
    train_frac: float = 0.8
    val_frac: float = 0.1


@dataclasses.dataclass
class TrainSection:
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 8
    steps_per_epoch: int = 0
    clip_norm: float = 1.0
    patience: int = 0
    normalizer_epochs: int = 1


@dataclasses.dataclass
class EvalSection:
    split: str = "test"  # train | val | test
    rollout_steps: int = 20


@dataclasses.dataclass
class VerifySection:
    edge_trials: int = 100
    pairs: int = 200
    probe: int = 1000


@dataclasses.dataclass
class Config:
    run: RunSection = dataclasses.field(default_factory=RunSection)
    model: ModelSection = dataclasses.field(default_factory=ModelSection)
    data: DataSection = dataclasses.field(default_factory=DataSection)
    train: TrainSection = dataclasses.field(default_factory=TrainSection)
    eval: EvalSection = dataclasses.field(default_factory=EvalSection)
    verify: VerifySection = dataclasses.field(default_factory=VerifySection)


def default_config():
    return Config()


_KIND_CHANNELS = {"diffusion": 1, "shallow-water": 3}
_KIND_GRIDS = {"diffusion": "corner", "shallow-water": "center"}


def _coerce(section, key, text, typ):
    text = text.strip()
    if typ is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"invalid value for {section}.{key}: {text!r} "
                          "(expected a boolean)")
    try:
        return typ(text)
    except ValueError:
        raise ConfigError(f"invalid value for {section}.{key}: {text!r} "
                          f"(expected {typ.__name__})") from None


def _section_fields(obj):
    return {f.name: f.type for f in dataclasses.fields(obj)}


def parse_config(text, source="<config>", base=None):
    """Parse INI text on top of `base` (defaults when omitted)."""
    cfg = base if base is not None else default_config()
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        errors = getattr(exc, "errors", None)
        lineno = errors[0][0] if errors else getattr(exc, "lineno", "?")
        raise ConfigError(f"{source}: malformed line {lineno}") from exc
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        at = f" at line {lineno}" if lineno is not None else ""
        raise ConfigError(f"{source}: {exc.__class__.__name__}{at}") from exc

    for section in parser.sections():
        if not hasattr(cfg, section) or section.startswith("_"):
            raise ConfigError(f"{source}: unknown section [{section}]")
        target = getattr(cfg, section)
        fields = _section_fields(target)
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            setattr(target, key, _coerce(section, key, raw, fields[key]))
    return cfg


def load_config(path, base=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path), base=base)


def apply_overrides(cfg, overrides):
    """Apply `section.key=value` strings in order; later ones win."""
    for item in overrides:
        head, sep, value = item.partition("=")
        section, dot, key = head.partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override must look like section.key=value, "
                              f"got {item!r}")
        if not hasattr(cfg, section):
            raise ConfigError(f"unknown section [{section}] in override {item!r}")
        target = getattr(cfg, section)
        fields = _section_fields(target)
        if key not in fields:
            raise ConfigError(f"unknown key {section}.{key} in override {item!r}")
        setattr(target, key, _coerce(section, key, value, fields[key]))
    return cfg


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg):
    """INI text that parses back to an equal Config."""
    out = io.StringIO()
    for f in dataclasses.fields(cfg):
        section = getattr(cfg, f.name)
        out.write(f"[{f.name}]\n")
        for sub in dataclasses.fields(section):
            out.write(f"{sub.name} = {_format_value(getattr(section, sub.name))}\n")
        out.write("\n")
    return out.getvalue()


def write_config(path, cfg):
    with open(path, "w") as fh:
        fh.write(format_config(cfg))


def validate(cfg):
    d = cfg.data
    if d.kind not in _KIND_CHANNELS:
        raise ConfigError(f"data.kind must be one of "
                          f"{sorted(_KIND_CHANNELS)}, got {d.kind!r}")
    if not (0.0 < d.train_frac <= 1.0) or not (0.0 <= d.val_frac < 1.0):
        raise ConfigError("data.train_frac must lie in (0, 1] and "
                          "data.val_frac in [0, 1)")
    if d.train_frac + d.val_frac > 1.0:
        raise ConfigError("data.train_frac + data.val_frac exceeds 1")
    if d.samples < 1 or d.frames < 2:
        raise ConfigError("need data.samples >= 1 and data.frames >= 2")
    if cfg.model.grid not in ("", "corner", "center"):
        raise ConfigError(f"model.grid must be corner, center or empty, "
                          f"got {cfg.model.grid!r}")
    if cfg.eval.split not in ("train", "val", "test"):
        raise ConfigError(f"eval.split must be train, val or test, "
                          f"got {cfg.eval.split!r}")
    if cfg.run.threads < 0:
        raise ConfigError("run.threads must be >= 0")
    return cfg


# -- builders ---------------------------------------------------------------


def generator_config(cfg):
    """Generator dataclass for the configured data kind."""
    from . import pde

    d = cfg.data
    if d.kind == "diffusion":
        gen = pde.DiffusionReactionConfig(nu=d.nu, rho=d.rho)
    elif d.kind == "shallow-water":
        gen = pde.ShallowWaterConfig(g=d.gravity)
    else:
        raise ConfigError(f"unknown data.kind {d.kind!r}")
    if d.resolution:
        gen.resolution = d.resolution
    if d.frames:
        gen.n_frames = d.frames
    if d.dt:
        gen.dt = d.dt
    return gen


def model_config(cfg):
    from . import model

    m = cfg.model
    channels = _KIND_CHANNELS[cfg.data.kind]
    return model.ModelConfig(
        in_channels=channels,
        out_channels=channels,
        history_len=m.history_len,
        width=m.width,
        depth=m.depth,
        modes=m.modes,
        downsample=m.downsample,
        coarse_depth=m.coarse_depth,
        se_reduction=m.se_reduction,
        kan_grid=m.kan_grid,
        kan_order=m.kan_order,
        token_dim=m.token_dim,
        attn_dim=m.attn_dim,
        coords=m.coords,
        grid=m.grid or _KIND_GRIDS[cfg.data.kind],
        pool=m.pool,
        use_context=m.use_context,
    )


def train_config(cfg):
    from . import train
    from .util import derive_seed

    t = cfg.train
    return train.TrainConfig(
        epochs=t.epochs,
        lr=t.lr,
        batch_size=t.batch_size,
        steps_per_epoch=t.steps_per_epoch,
        clip_norm=t.clip_norm,
        patience=t.patience,
        seed=derive_seed(cfg.run.seed, "train"),
        normalizer_epochs=t.normalizer_epochs,
    )
