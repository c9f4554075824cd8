"""Pipeline configuration: flat ``key=value`` files, overrides and seeding."""

import dataclasses
import hashlib
import os
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class PipelineConfig:
    seed: int = 0
    data: str = "synth"
    out: str = "out"

    # synthetic data
    synth_prototypes: int = 20
    synth_side: int = 8
    synth_noise: float = 0.05
    synth_shift: int = 1

    # UBC subsets (train on one, test on the other)
    train_dir: str = ""
    test_dir: str = ""
    train_matches: str = "m50_100000_100000_0.txt"
    test_matches: str = "m50_100000_100000_0.txt"
    patch_side: int = 64
    grid: int = 16

    n_train_pairs: int = 2000
    n_test_pairs: int = 500
    n_dict_samples: int = 480
    dict_disjoint: bool = False
    standardize: bool = False

    # dictionary
    k: int = 96
    alpha: float = 0.1
    p: int = 5
    t: str = "auto"
    squared_distance: bool = False
    eigen_mode: str = "smallest"
    drop_trivial: bool = True
    unit_norm_atoms: bool = False
    require_overcomplete: bool = False

    # coding
    beta: float = 0.1

    # matcher network
    arch: str = "2"
    hidden: str = ""
    activation: str = "relu"
    batch_size: int = 64
    epochs: int = 50
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_split: float = 0.2

    def validate(self):
        if self.data not in ("synth", "ubc"):
            raise ConfigError(f"data must be 'synth' or 'ubc', got {self.data!r}")
        if self.data == "ubc" and not (self.train_dir and self.test_dir):
            raise ConfigError("data=ubc needs train_dir and test_dir")
        if self.eigen_mode not in ("smallest", "largest"):
            raise ConfigError(f"eigen_mode must be smallest or largest, got "
                              f"{self.eigen_mode!r}")
        if self.arch not in ("1", "2"):
            raise ConfigError(f"arch must be 1 or 2, got {self.arch!r}")
        for name in ("k", "n_dict_samples", "n_train_pairs", "n_test_pairs",
                     "p", "epochs", "batch_size"):
            if getattr(self, name) < (0 if name == "epochs" else 1):
                raise ConfigError(f"{name} must be positive")
        if not self.beta > 0:
            raise ConfigError("beta must be > 0")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.n_dict_samples <= self.k:
            raise ConfigError(
                f"n_dict_samples={self.n_dict_samples} must exceed k={self.k}: "
                "the embedding needs n > k data points")
        if self.t != "auto":
            try:
                if not float(self.t) > 0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"t must be 'auto' or a positive number, "
                                  f"got {self.t!r}") from None
        return self

    @property
    def bandwidth(self):
        return "auto" if self.t == "auto" else float(self.t)

    @property
    def hidden_sizes(self):
        if not self.hidden.strip():
            return None
        try:
            return tuple(int(v) for v in self.hidden.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"hidden must list integers, got {self.hidden!r}") from None

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def to_text(self):
        return "".join(f"{k}={_format(v)}\n" for k, v in self.items())

    def hash(self):
        """Digest of every setting except the output directory."""
        text = "".join(f"{k}={_format(v)}\n" for k, v in self.items()
                       if k != "out")
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def stage_seed(self, stage):
        return stage_seed(self.seed, stage)

    def path(self, name):
        return os.path.join(self.out, name)


def stage_seed(seed, stage):
    """Per-stage seed: first 4 bytes of sha256(f"{seed}:{stage}"), little-endian."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(name, kind, raw):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected {kind.__name__}, got {raw!r}") from None


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def parse_overrides(pairs, source="override"):
    """Turn ``key=value`` strings into a typed dict, rejecting unknown keys."""
    out = {}
    for lineno, line in enumerate(pairs, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, _TYPES[key], raw)
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (highest)."""
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_overrides(fh.read().splitlines(), path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values.update(overrides or {})
    cfg = dataclasses.replace(PipelineConfig(), **values)
    if cfg.data == "ubc":
        cfg.train_dir = os.path.abspath(cfg.train_dir) if cfg.train_dir else ""
        cfg.test_dir = os.path.abspath(cfg.test_dir) if cfg.test_dir else ""
    return cfg.validate()
