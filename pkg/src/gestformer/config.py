"""Flat ``key=value`` run configuration with typed keys and CLI overrides."""

from .errors import ConfigError
from .model import BASELINES, TOGGLES, ModelConfig

# key -> (type, default); order is the echo order
RUN_KEYS = {
    "train_manifest": (str, ""),
    "test_manifest": (str, ""),
    "modality": (str, ""),
    "baseline": (str, ""),
    "m": (int, 40),
    "d_in": (int, 16),
    "n": (int, 3),
    "k": (int, 32),
    "stages": (int, 6),
    "expansion": (int, 2),
    "msp": (bool, True),
    "wcp": (bool, True),
    "gdfn": (bool, True),
    "embedding": (bool, True),
    "epochs": (int, 100),
    "batch_size": (int, 8),
    "lr": (float, 1e-4),
    "seed": (int, 0),
}

GRADCHECK_DEFAULTS = {"m": 4, "d_in": 5, "k": 8, "stages": 2, "n": 3}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, raw):
    kind = RUN_KEYS[key][0]
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {kind.__name__})") from None


def parse_assignments(lines, source):
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in RUN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


class RunConfig:
    """Effective configuration: defaults < config file < ``--set`` < ``--seed``.

    ``explicit`` records which keys were given by the user rather than defaulted.
    """

    def __init__(self, values, explicit):
        self.values = values
        self.explicit = set(explicit)

    @classmethod
    def build(cls, path=None, overrides=(), seed=None, defaults=None):
        values = {key: default for key, (_, default) in RUN_KEYS.items()}
        values.update(defaults or {})
        given = {}
        if path:
            with open(path) as fh:
                given.update(parse_assignments(fh.read().splitlines(), path))
        given.update(parse_assignments(overrides, "--set"))
        if seed is not None:
            given["seed"] = seed
        values.update(given)
        cfg = cls(values, given)
        cfg._apply_baseline()
        return cfg

    def _apply_baseline(self):
        name = self.values["baseline"]
        if not name:
            return
        if name.upper() not in BASELINES:
            raise ConfigError(f"unknown baseline {name!r}; expected one of {sorted(BASELINES)}")
        for key, on in BASELINES[name.upper()].items():
            # an explicitly given toggle wins over the baseline preset
            if key not in self.explicit:
                self.values[key] = on

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, value):
        self.values[key] = value

    def model_config(self):
        v = self.values
        return ModelConfig(
            m=v["m"], d_in=v["d_in"], k=v["k"], stages=v["stages"], n=v["n"],
            expansion=v["expansion"], **{t: v[t] for t in TOGGLES},
        )

    def to_text(self):
        lines = []
        for key in RUN_KEYS:
            value = self.values[key]
            if isinstance(value, bool):
                value = int(value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"
