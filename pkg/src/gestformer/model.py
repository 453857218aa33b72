"""The full classifier: embedding, positional table, MWPT stages, pooled linear head."""

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import ops
from .blocks import (
    FfnWeights, GdfnWeights, SeparableConvWeights, WcpWeights, _Weights,
    ffn_forward, gdfn_forward, mwpa_forward, SUBBANDS,
)
from .errors import ConfigError, InputError
from .tensor import Tensor, as_tensor

TOGGLES = ("msp", "wcp", "gdfn", "embedding")

# Ablation ladder: BL1 is the plain pooling transformer, BL8 the full model.
BASELINES = {
    "BL1": dict(msp=False, wcp=False, gdfn=False, embedding=False),
    "BL2": dict(msp=True, wcp=False, gdfn=False, embedding=False),
    "BL3": dict(msp=False, wcp=False, gdfn=False, embedding=True),
    "BL4": dict(msp=False, wcp=True, gdfn=False, embedding=False),
    "BL5": dict(msp=False, wcp=False, gdfn=True, embedding=False),
    "BL6": dict(msp=False, wcp=True, gdfn=False, embedding=True),
    "BL7": dict(msp=True, wcp=True, gdfn=False, embedding=True),
    "BL8": dict(msp=True, wcp=True, gdfn=True, embedding=True),
}


@dataclass
class ModelConfig:
    m: int = 40          # frames per sequence
    d_in: int = 16       # input feature width
    k: int = 32          # embedding width
    stages: int = 6
    n: int = 3           # classes
    expansion: int = 2   # FFN expansion ratio
    msp: bool = True
    wcp: bool = True
    gdfn: bool = True
    embedding: bool = True

    def __post_init__(self):
        if self.stages < 1:
            raise ConfigError(f"stages must be >= 1, got {self.stages}")
        for name in ("m", "k", "n"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2, got {getattr(self, name)}")
        if self.d_in < 1 or self.expansion < 1:
            raise ConfigError("d_in and expansion must be >= 1")

    @classmethod
    def baseline(cls, name, **kwargs):
        try:
            toggles = BASELINES[name.upper()]
        except KeyError:
            raise ConfigError(f"unknown baseline {name!r}; expected one of {sorted(BASELINES)}") from None
        return cls(**{**kwargs, **toggles})

    def replace(self, **changes):
        return ModelConfig(**{**asdict(self), **changes})

    def to_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}={int(value) if isinstance(value, bool) else value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        known = {f.name: f.type for f in fields(cls)}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, raw = line.partition("=")
            if key not in known:
                raise ConfigError(f"unknown model config key {key!r}")
            values[key] = bool(int(raw)) if key in TOGGLES else int(raw)
        return cls(**values)


@dataclass
class EmbedWeights(_Weights):
    proj_weight: Tensor          # (d_in, k)
    proj_bias: Tensor            # (k,)
    dw_weight: Tensor = None     # (1, 3, 3), embedding toggle only
    dw_bias: Tensor = None


@dataclass
class StageWeights(_Weights):
    norm1_scale: Tensor
    norm1_shift: Tensor
    norm2_scale: Tensor
    norm2_shift: Tensor
    wcp: WcpWeights = None
    gdfn: GdfnWeights = None
    ffn: FfnWeights = None


def positional_encoding(m, k):
    """Fixed sinusoidal table: sin on even columns, cos on odd, wavelength 10000^(2i/k)."""
    pe = np.zeros((m, k))
    t = np.arange(m, dtype=np.float64)[:, None]
    pair = np.arange(0, k, 2, dtype=np.float64)
    angle = t / np.power(10000.0, pair / k)[None, :]
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : k // 2])
    return pe


def spatial_embed(features, w):
    """Project d_in -> k per frame, then (if present) a depthwise 3x3 over the (m, k) grid."""
    x = ops.linear(features, w.proj_weight, w.proj_bias)
    if w.dw_weight is not None:
        x4 = ops.reshape(x, x.shape[:-2] + (1,) + x.shape[-2:])
        x = ops.reshape(ops.depthwise_conv2d(x4, w.dw_weight, w.dw_bias), x.shape)
    return x


def mwpt_stage(x, w, msp=True, wcp=True):
    """Pre-norm residual stage: ``y = x + MWPA(LN1 x)``, ``out = y + FFN(LN2 y)``.

    The FFN is the gated block when ``w.gdfn`` is set, else the plain MLP.
    Whether WCP runs is decided by ``wcp`` and the presence of ``w.wcp``.
    """
    mixed = mwpa_forward(ops.layer_norm(x, w.norm1_scale, w.norm1_shift), w.wcp,
                         msp=msp, wcp=wcp and w.wcp is not None)
    y = ops.add(x, mixed)
    z = ops.layer_norm(y, w.norm2_scale, w.norm2_shift)
    f = gdfn_forward(z, w.gdfn) if w.gdfn is not None else ffn_forward(z, w.ffn)
    return ops.add(y, f)


@dataclass
class GestFormerModel(_Weights):
    config: ModelConfig
    embed: EmbedWeights
    stages: list
    head_weight: Tensor   # (k, n)
    head_bias: Tensor     # (n,)
    pe: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.pe is None:
            self.pe = positional_encoding(self.config.m, self.config.k)

    def named(self, prefix=""):
        yield from self.embed.named(prefix + "embed.")
        for i, stage in enumerate(self.stages):
            yield from stage.named(f"{prefix}stages.{i}.")
        yield prefix + "head_weight", self.head_weight
        yield prefix + "head_bias", self.head_bias

    def parameters(self):
        """Ordered ``{name: Tensor}`` inventory of every learnable tensor."""
        return dict(self.named())

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    def _check_input(self, features):
        x = as_tensor(features)
        cfg = self.config
        if x.ndim not in (2, 3) or x.shape[-2:] != (cfg.m, cfg.d_in):
            raise InputError(
                f"expected features of shape (m={cfg.m}, d_in={cfg.d_in}) with optional batch axis, got {x.shape}"
            )
        return x

    def encode(self, features):
        """Stage-stack output (..., m, k) before sequence pooling."""
        x = spatial_embed(self._check_input(features), self.embed)
        x = ops.add(x, self.pe)
        for stage in self.stages:
            x = mwpt_stage(x, stage, msp=self.config.msp, wcp=self.config.wcp)
        return x

    def logits(self, features):
        pooled = ops.mean_axis(self.encode(features), -2)
        return ops.add(ops.matmul(ops.reshape(pooled, (-1, self.config.k)), self.head_weight),
                       self.head_bias)

    def forward(self, features):
        """Class posterior; (n,) for a single sequence, (B, n) for a batch."""
        x = as_tensor(features)
        p = ops.softmax(self.logits(x))
        return ops.reshape(p, (self.config.n,)) if x.ndim == 2 else p

    __call__ = forward


def model_forward(features, model):
    return model.forward(features)


def init_weights(config, seed=0):
    """Deterministic initialisation.

    Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and LN shifts 0; LN scales 1.
    """
    rng = np.random.default_rng(seed)

    def uniform(fan_in, *shape):
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape), requires_grad=True)

    def sep_conv():
        return SeparableConvWeights(uniform(9, 1, 3, 3), zeros(1), uniform(1, 1, 1), zeros(1))

    cfg = config
    k, rk = cfg.k, cfg.expansion * cfg.k
    embed = EmbedWeights(uniform(cfg.d_in, cfg.d_in, k), zeros(k))
    if cfg.embedding:
        embed.dw_weight, embed.dw_bias = uniform(9, 1, 3, 3), zeros(1)
    stages = []
    for _ in range(cfg.stages):
        st = StageWeights(ones(k), zeros(k), ones(k), zeros(k))
        if cfg.wcp:
            st.wcp = WcpWeights(*(sep_conv() for _ in SUBBANDS))
        if cfg.gdfn:
            st.gdfn = GdfnWeights(
                uniform(k, k, rk), zeros(rk), uniform(9, 1, 3, 3), zeros(1),
                uniform(k, k, rk), zeros(rk), uniform(9, 1, 3, 3), zeros(1),
                uniform(rk, rk, k), zeros(k),
            )
        else:
            st.ffn = FfnWeights(uniform(k, k, rk), zeros(rk), uniform(rk, rk, k), zeros(k))
        stages.append(st)
    head = uniform(k, k, cfg.n)
    return GestFormerModel(cfg, embed, stages, head, zeros(cfg.n))
