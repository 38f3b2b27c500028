"""Flat ``key=value`` run configuration for the command-line front end."""

from .gamma_opt import EnhanceConfig
from .quality import QualityConfig
from .refgen import RefGenConfig

__all__ = ["ConfigError", "DEFAULTS", "parse_config_text", "parse_value", "resolve", "build_enhance_config", "dump"]

SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    def __init__(self, key, detail):
        self.key = key
        super().__init__(f"config key {key!r}: {detail}")


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _pair(text):
    parts = [p for p in text.replace(" ", "").strip("()").split(",") if p]
    if len(parts) != 2:
        raise ValueError(f"expected 'lo,hi', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _seed(text):
    v = int(text, 0)
    if v < 0:
        raise ValueError("seed must be nonnegative")
    return v & SEED_MASK


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


_TYPES = {
    "seed": _seed,
    "alpha": float,
    "epochs": int,
    "steps": int,
    "lr": float,
    "optimizer": _choice("adam", "sgd"),
    "beta1": float,
    "beta2": float,
    "adam_eps": float,
    "theta_init": float,
    "n_refs": int,
    "under_range": _pair,
    "over_range": _pair,
    "patch_k": int,
    "mu": float,
    "eps_e": float,
    "eps_s": float,
    "intensity": _choice("mean", "rec709"),
    "work_size": int,
    "jobs": int,
    "emit_gamma": _bool,
    "baseline_weighted_fusion": _bool,
}

DEFAULTS = {
    "seed": 0,
    "alpha": 0.05,
    "epochs": 20,
    "steps": 100,
    "lr": 0.05,
    "optimizer": "adam",
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "theta_init": 0.0,
    "n_refs": 1,
    "under_range": (0.0, 3.0),
    "over_range": (-2.0, 0.0),
    "patch_k": 25,
    "mu": 0.5,
    "eps_e": 1e-3,
    "eps_s": 1e-6,
    "intensity": "mean",
    "work_size": 256,
    "jobs": 0,
    "emit_gamma": False,
    "baseline_weighted_fusion": False,
}


def parse_value(key, text):
    key = key.strip().replace("-", "_")
    if key not in _TYPES:
        raise ConfigError(key, "unknown key")
    try:
        return key, _TYPES[key](str(text))
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def parse_config_text(text):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno} is not key=value")
        key, value = line.split("=", 1)
        key, val = parse_value(key, value.strip())
        out[key] = val
    return out


def resolve(*layers):
    """Merge defaults with successive override dicts, later ones winning."""
    cfg = dict(DEFAULTS)
    for layer in layers:
        cfg.update(layer)
    build_enhance_config(cfg)
    if cfg["jobs"] < 0:
        raise ConfigError("jobs", "must be >= 0 (0 means all cores)")
    return cfg


_FIELD_TO_KEY = {
    "n_each_side": "n_refs",
    "inner_steps": "steps",
    "mu_target": "mu",
    "invalid": "beta1",
}


def build_enhance_config(cfg, seed=None):
    """Turn a resolved flat config into an :class:`EnhanceConfig`."""
    try:
        return EnhanceConfig(
            refgen=RefGenConfig(
                cfg["n_refs"], cfg["under_range"], cfg["over_range"],
                cfg["seed"] if seed is None else seed,
            ),
            quality=QualityConfig(cfg["patch_k"], cfg["mu"], cfg["eps_e"], cfg["eps_s"], cfg["intensity"]),
            alpha=cfg["alpha"],
            epochs=cfg["epochs"],
            inner_steps=cfg["steps"],
            lr=cfg["lr"],
            optimizer=cfg["optimizer"],
            beta1=cfg["beta1"],
            beta2=cfg["beta2"],
            adam_eps=cfg["adam_eps"],
            theta_init=cfg["theta_init"],
            work_size=cfg["work_size"],
            fusion="weighted" if cfg["baseline_weighted_fusion"] else "argmax",
        )
    except ValueError as exc:
        # Validation messages start with the offending field name.
        field = str(exc).split()[0].strip("|")
        key = _FIELD_TO_KEY.get(field, field)
        raise ConfigError(key, str(exc)) from None


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump(cfg):
    """Serialize a resolved config, one sorted ``key=value`` per line."""
    return "".join(f"{k}={_fmt(cfg[k])}\n" for k in sorted(cfg))
