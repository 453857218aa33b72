"""Central finite-difference gradient checks for every op and block.

Each case builds a scalar loss ``sum(out * R)`` with a fixed random ``R`` so
every output element contributes. The analytic gradient comes from the tape;
the numeric one perturbs each input scalar by +-h.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .blocks import (
    FfnWeights, GdfnWeights, SeparableConvWeights, WcpWeights, ffn_forward,
    gdfn_forward, msp_forward, mwpa_forward, wcp_forward,
)
from .model import EmbedWeights, ModelConfig, StageWeights, init_weights, mwpt_stage, spatial_embed
from .optim import cross_entropy
from .tensor import Tensor, no_grad
from .wavelet import SubbandSet, dwt2, idwt2

STEP = 1e-5
TOLERANCE = 1e-6
DENOM_FLOOR = 1e-8


def max_relative_error(analytic, numeric, floor=DENOM_FLOOR):
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def numeric_gradients(loss_fn, tensors, h=STEP):
    """Central differences of ``loss_fn()`` w.r.t. every element of ``tensors``."""
    out = []
    with no_grad():
        for t in tensors:
            g = np.zeros(t.shape)
            flat, gflat = t.data.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * h)
            out.append(g)
    return out


def five_point_gradients(loss_fn, tensors, h=1e-3):
    """Fourth-order central differences; a diagnostic reference, not the acceptance check.

    Truncation is O(h^4), so a larger step keeps rounding noise well below the
    central-difference floor.
    """
    out = []
    with no_grad():
        for t in tensors:
            g = np.zeros(t.shape)
            flat, gflat = t.data.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                vals = []
                for step in (2.0, 1.0, -1.0, -2.0):
                    flat[i] = orig + step * h
                    vals.append(loss_fn().item())
                flat[i] = orig
                gflat[i] = (-vals[0] + 8.0 * vals[1] - 8.0 * vals[2] + vals[3]) / (12.0 * h)
            out.append(g)
    return out


def analytic_gradients(loss_fn, tensors):
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    return [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in tensors]


def compare(loss_fn, tensors, h=STEP):
    """(max relative error, max absolute error) between tape and finite differences."""
    analytic = analytic_gradients(loss_fn, tensors)
    numeric = numeric_gradients(loss_fn, tensors, h)
    rel = max(max_relative_error(a, n) for a, n in zip(analytic, numeric))
    absolute = max(float(np.max(np.abs(a - n))) for a, n in zip(analytic, numeric))
    return rel, absolute


def check(loss_fn, tensors, h=STEP):
    """Max relative error between tape and finite-difference gradients."""
    return compare(loss_fn, tensors, h)[0]


@dataclass
class CaseResult:
    name: str
    error: float
    abs_error: float = 0.0

    @property
    def passed(self):
        return self.error < TOLERANCE


def _param(rng, *shape, scale=1.0):
    return Tensor(rng.normal(scale=scale, size=shape), requires_grad=True)


def _projected(out_fn, rng):
    # fixed random projection turns any output into a scalar loss
    probe = {}

    def loss():
        out = out_fn()
        if "r" not in probe:
            probe["r"] = rng.normal(size=out.shape)
        return ops.sum(ops.mul(out, probe["r"]))

    return loss


def _sep(rng):
    return SeparableConvWeights(_param(rng, 1, 3, 3), _param(rng, 1), _param(rng, 1, 1), _param(rng, 1))


def _wcp(rng):
    return WcpWeights(_sep(rng), _sep(rng), _sep(rng), _sep(rng))


def _gdfn(rng, k, r=2):
    s = 1.0 / np.sqrt(k)
    return GdfnWeights(
        _param(rng, k, r * k, scale=s), _param(rng, r * k), _param(rng, 1, 3, 3, scale=0.3), _param(rng, 1),
        _param(rng, k, r * k, scale=s), _param(rng, r * k), _param(rng, 1, 3, 3, scale=0.3), _param(rng, 1),
        _param(rng, r * k, k, scale=s), _param(rng, k),
    )


def _tensors(w):
    return [t for _, t in w.named()]


def _band_mix(bands, weights):
    # independent weights per subband, so no input (padded rows included) has a structurally zero gradient
    terms = [ops.mul(plane, w) for plane, w in zip(bands.planes(), weights)]
    return ops.add(ops.add(terms[0], terms[1]), ops.add(terms[2], terms[3]))


def primitive_cases(rng):
    """(name, loss_fn, tensors) for every differentiable primitive on ~4x4 inputs."""
    a, b = _param(rng, 4, 4), _param(rng, 4, 4)
    v = _param(rng, 4)
    m1, m2 = _param(rng, 3, 4), _param(rng, 4, 5)
    x3 = _param(rng, 2, 4, 4)
    kern, kb = _param(rng, 2, 3, 3), _param(rng, 2)
    pw, pb = _param(rng, 3, 2), _param(rng, 3)
    sc, sh = _param(rng, 4), _param(rng, 4)
    odd = _param(rng, 5, 7)
    logits, labels = _param(rng, 4, 3), np.array([0, 2, 1, 2])
    bands = [_param(rng, 2, 3) for _ in range(4)]
    mix_even = rng.normal(size=(4, 2, 2))
    mix_odd = rng.normal(size=(4, 3, 4))
    P = lambda f: _projected(f, rng)
    cases = [
        ("add", P(lambda: ops.add(a, v)), [a, v]),
        ("sub", P(lambda: ops.sub(a, b)), [a, b]),
        ("mul", P(lambda: ops.mul(a, b)), [a, b]),
        ("scale", P(lambda: ops.scale(a, -2.5)), [a]),
        ("gelu", P(lambda: ops.gelu(a)), [a]),
        ("sum", lambda: ops.sum(ops.mul(a, a)), [a]),
        ("mean_axis", P(lambda: ops.mean_axis(x3, 1)), [x3]),
        ("reshape", P(lambda: ops.reshape(a, (2, 8))), [a]),
        ("take", P(lambda: ops.take(x3, 1)), [x3]),
        ("matmul", P(lambda: ops.matmul(m1, m2)), [m1, m2]),
        ("linear", P(lambda: ops.linear(a, b, v)), [a, b, v]),
        ("layer_norm", P(lambda: ops.layer_norm(a, sc, sh)), [a, sc, sh]),
        ("softmax", P(lambda: ops.softmax(a)), [a]),
        ("log_softmax", P(lambda: ops.log_softmax(a)), [a]),
        ("cross_entropy", lambda: cross_entropy(logits, labels), [logits]),
        ("depthwise_conv2d", P(lambda: ops.depthwise_conv2d(x3, kern, kb)), [x3, kern, kb]),
        ("pointwise_conv2d", P(lambda: ops.pointwise_conv2d(x3, pw, pb)), [x3, pw, pb]),
    ]
    for k in (3, 5, 7):
        cases.append((f"avg_pool2d_{k}", P(lambda k=k: ops.avg_pool2d(odd, k)), [odd]))
    cases += [
        ("dwt2_even", P(lambda: _band_mix(dwt2(a), mix_even)), [a]),
        ("dwt2_odd", P(lambda: _band_mix(dwt2(odd), mix_odd)), [odd]),
        ("idwt2_even", P(lambda: idwt2(SubbandSet(*bands))), bands),
        ("idwt2_odd", P(lambda: idwt2(SubbandSet(*bands, pad_rows=True, pad_cols=True))), bands),
    ]
    return cases


def block_cases(rng, m=4, k=8):
    """Composite blocks on (m, k) inputs, with their weights checked too."""
    P = lambda f: _projected(f, rng)
    x = _param(rng, m, k)
    wcp = _wcp(rng)
    gd = _gdfn(rng, k)
    ffn = FfnWeights(_param(rng, k, 2 * k), _param(rng, 2 * k), _param(rng, 2 * k, k), _param(rng, k))
    emb = EmbedWeights(_param(rng, 5, k), _param(rng, k), _param(rng, 1, 3, 3), _param(rng, 1))
    feats = _param(rng, m, 5)
    stage = StageWeights(
        Tensor(1.0 + 0.1 * rng.normal(size=k), requires_grad=True), _param(rng, k, scale=0.1),
        Tensor(1.0 + 0.1 * rng.normal(size=k), requires_grad=True), _param(rng, k, scale=0.1),
        wcp=_wcp(rng), gdfn=_gdfn(rng, k),
    )
    cases = [
        ("wcp", P(lambda: wcp_forward(x, wcp)), [x] + _tensors(wcp)),
        ("msp", P(lambda: msp_forward(x)), [x]),
    ]
    for msp in (True, False):
        for use_wcp in (True, False):
            cases.append((
                f"mwpa[msp={int(msp)},wcp={int(use_wcp)}]",
                P(lambda msp=msp, use_wcp=use_wcp: mwpa_forward(x, wcp, msp=msp, wcp=use_wcp)),
                [x] + (_tensors(wcp) if use_wcp else []),
            ))
    cases += [
        ("gdfn", P(lambda: gdfn_forward(x, gd)), [x] + _tensors(gd)),
        ("ffn", P(lambda: ffn_forward(x, ffn)), [x] + _tensors(ffn)),
        ("spatial_embed", P(lambda: spatial_embed(feats, emb)), [feats] + _tensors(emb)),
        ("mwpt_stage", P(lambda: mwpt_stage(x, stage)), [x] + _tensors(stage)),
    ]
    return cases


def model_case(config=None, seed=0):
    cfg = config or ModelConfig(m=4, d_in=5, k=8, stages=2, n=3)
    rng = np.random.default_rng(seed + 1)
    model = init_weights(cfg, seed)
    feats = rng.normal(size=(3, cfg.m, cfg.d_in))
    labels = np.arange(3) % cfg.n
    params = list(model.parameters().values())
    return "model", (lambda: cross_entropy(model.logits(feats), labels)), params


def run_suite(seed=0, model_config=None):
    """Run every case; returns a list of :class:`CaseResult`."""
    rng = np.random.default_rng(seed)
    results = []
    for name, loss_fn, tensors in primitive_cases(rng) + block_cases(rng) + [model_case(model_config, seed)]:
        results.append(CaseResult(name, *compare(loss_fn, tensors)))
    return results
