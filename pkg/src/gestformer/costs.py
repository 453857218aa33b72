"""Parameter and multiply-accumulate accounting.

MAC conventions (one forward pass of one sequence):

* convolution: output elements x kernel area x input channels per group
* matmul / linear: M x N x K
* bias adds, pooling, normalisation, activations, softmax, elementwise
  products and the Haar transform count 0
"""

import math
from dataclasses import dataclass, field

from .blocks import SUBBANDS

_PARAM_SUFFIXES = ("_weight", "_bias", "_scale", "_shift")


@dataclass
class CostReport:
    unit: str
    entries: dict = field(default_factory=dict)
    kinds: dict = field(default_factory=dict)

    def add(self, key, count, kind=None):
        self.entries[key] = self.entries.get(key, 0) + int(count)
        if kind is not None:
            self.kinds[key] = kind

    def subtotal(self, kind):
        return sum(c for key, c in self.entries.items() if self.kinds.get(key) == kind)

    @property
    def total(self):
        return sum(self.entries.values())

    def by_module(self):
        """Totals per top-level module (``embed``, ``stages.0``, ``head`` ...)."""
        out = {}
        for key, count in self.entries.items():
            parts = key.split(".")
            module = ".".join(parts[:2]) if parts[0] == "stages" else parts[0]
            out[module] = out.get(module, 0) + count
        return out

    def to_text(self):
        lines = [f"{key} = {count}" for key, count in self.entries.items()]
        lines.append(f"total = {self.total}")
        return "\n".join(lines) + "\n"


def _layer_of(param_name):
    for suffix in _PARAM_SUFFIXES:
        if param_name.endswith(suffix):
            return param_name[: -len(suffix)]
    return param_name


def count_params(model):
    report = CostReport("params")
    for name, tensor in model.named():
        report.add(_layer_of(name), tensor.size)
    return report


def conv_macs(out_elements, kernel_area, in_per_group=1):
    return out_elements * kernel_area * in_per_group


def matmul_macs(rows, cols, inner):
    return rows * cols * inner


def count_macs(config):
    cfg = config
    m, k, rk = cfg.m, cfg.k, cfg.expansion * cfg.k
    report = CostReport("macs")
    report.add("embed.proj", matmul_macs(m, k, cfg.d_in), "conv")
    if cfg.embedding:
        report.add("embed.dw", conv_macs(m * k, 9), "conv")
    report.add("embed.posenc", 0)
    hb, wb = math.ceil(m / 2), math.ceil(k / 2)
    for i in range(cfg.stages):
        s = f"stages.{i}"
        report.add(f"{s}.norm1", 0)
        if cfg.wcp:
            report.add(f"{s}.wcp.dwt", 0)
            for band in SUBBANDS:
                report.add(f"{s}.wcp.{band}.dw", conv_macs(hb * wb, 9), "conv")
                report.add(f"{s}.wcp.{band}.pw", conv_macs(hb * wb, 1, 1), "conv")
            report.add(f"{s}.wcp.idwt", 0)
        report.add(f"{s}.pool", 0)
        report.add(f"{s}.norm2", 0)
        if cfg.gdfn:
            report.add(f"{s}.gdfn.pw1", matmul_macs(m, rk, k), "conv")
            report.add(f"{s}.gdfn.dw1", conv_macs(m * rk, 9), "conv")
            report.add(f"{s}.gdfn.pw2", matmul_macs(m, rk, k), "conv")
            report.add(f"{s}.gdfn.dw2", conv_macs(m * rk, 9), "conv")
            report.add(f"{s}.gdfn.pw0", matmul_macs(m, k, rk), "conv")
        else:
            report.add(f"{s}.ffn.fc1", matmul_macs(m, rk, k), "conv")
            report.add(f"{s}.ffn.fc2", matmul_macs(m, k, rk), "conv")
    report.add("head", matmul_macs(1, cfg.n, k), "dense")
    return report
