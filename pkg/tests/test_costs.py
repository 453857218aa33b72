import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gestformer.costs import conv_macs, count_macs, count_params
from gestformer.model import TOGGLES, ModelConfig, init_weights
from gestformer.optim import Adam
from gestformer.tensor import Tensor


def closed_form_params(cfg):
    """Parameter count written out from the layer formulas."""
    k, r, d = cfg.k, cfg.expansion, cfg.d_in
    linear = lambda a, b: a * b + b  # noqa: E731
    sep = 9 + 1 + 1 + 1              # depthwise 3x3 + bias, pointwise 1->1 + bias
    total = linear(d, k) + (10 if cfg.embedding else 0)
    per_stage = 4 * k                # two LayerNorms
    if cfg.wcp:
        per_stage += 4 * sep
    if cfg.gdfn:
        per_stage += 2 * (linear(k, r * k) + 10) + linear(r * k, k)
    else:
        per_stage += linear(k, r * k) + linear(r * k, k)
    return total + cfg.stages * per_stage + linear(k, cfg.n)


def test_classifier_example():
    report = count_params(init_weights(ModelConfig(m=4, d_in=2, k=8, stages=1, n=3), 0))
    assert report.entries["head"] == 27


def test_one_wcp_block_is_48():
    report = count_params(init_weights(ModelConfig(m=4, d_in=2, k=8, stages=1, n=3), 0))
    wcp = sum(c for key, c in report.entries.items() if key.startswith("stages.0.wcp."))
    assert wcp == 48
    assert report.entries["stages.0.wcp.hh.dw"] == 10
    assert report.entries["stages.0.wcp.hh.pw"] == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(1, 9), st.integers(2, 16), st.integers(1, 3), st.integers(2, 7),
       st.integers(1, 3), st.tuples(*[st.booleans()] * 4))
def test_closed_form(m, d_in, k, stages, n, r, toggles):
    cfg = ModelConfig(m=m, d_in=d_in, k=k, stages=stages, n=n, expansion=r, **dict(zip(TOGGLES, toggles)))
    assert count_params(init_weights(cfg, 0)).total == closed_form_params(cfg)


def test_params_equal_scalars_updated_by_one_step():
    cfg = ModelConfig(m=4, d_in=3, k=4, stages=1, n=3)
    model = init_weights(cfg, 0)
    params = list(model.parameters().values())
    before = [p.data.copy() for p in params]
    for p in params:
        p.grad = np.ones(p.shape)
    Adam(params, lr=1e-3).step()
    changed = sum(int(np.sum(p.data != b)) for p, b in zip(params, before))
    assert changed == count_params(model).total


def test_pointwise_example():
    assert conv_macs(40 * 64, 1, 1) == 2560


def test_pool_and_norm_are_free():
    report = count_macs(ModelConfig(m=40, d_in=16, k=64, stages=2))
    for key, count in report.entries.items():
        if key.endswith((".pool", ".norm1", ".norm2", ".dwt", ".idwt", "posenc")):
            assert count == 0, key


def test_totals_are_sum_of_parts():
    for name in ("BL1", "BL5", "BL8"):
        report = count_macs(ModelConfig.baseline(name, stages=3))
        assert report.total == sum(report.entries.values())
        assert report.total == report.subtotal("conv") + report.subtotal("dense")
        assert sum(report.by_module().values()) == report.total


def test_text_table():
    text = count_macs(ModelConfig(m=4, d_in=2, k=4, stages=1, n=3)).to_text()
    lines = text.strip().splitlines()
    assert lines[0] == f"embed.proj = {4 * 4 * 2}"
    assert lines[-1].startswith("total = ")
    assert all(" = " in line for line in lines)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 20), st.integers(2, 40), st.integers(1, 4), st.integers(1, 3),
       st.tuples(*[st.booleans()] * 4))
def test_conv_macs_linear_in_m(half_m, d_in, k, stages, r, toggles):
    cfg = ModelConfig(m=2 * half_m, d_in=d_in, k=k, stages=stages, expansion=r, **dict(zip(TOGGLES, toggles)))
    doubled = count_macs(cfg.replace(m=2 * cfg.m))
    assert doubled.subtotal("conv") == 2 * count_macs(cfg).subtotal("conv")
    assert doubled.subtotal("dense") == count_macs(cfg).subtotal("dense")


def test_wcp_subbands_ceil_for_odd_extents():
    report = count_macs(ModelConfig(m=5, d_in=2, k=7, stages=1))
    assert report.entries["stages.0.wcp.ll.pw"] == 3 * 4


def test_count_params_ignores_non_parameters():
    model = init_weights(ModelConfig(m=4, d_in=2, k=4, stages=1), 0)
    assert isinstance(model.pe, np.ndarray) and not isinstance(model.pe, Tensor)
    assert count_params(model).total == sum(p.size for p in model.parameters().values())


@pytest.mark.parametrize("kind", ["conv", "dense"])
def test_kinds_tagged(kind):
    report = count_macs(ModelConfig(m=4, d_in=2, k=4, stages=1))
    assert report.subtotal(kind) > 0
