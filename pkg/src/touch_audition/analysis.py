"""Static resource analysis: receptive fields, minimum input length,
parameter and MAC/FLOP counts, and the deployment budget check.

All functions work from the architecture description alone (no weights), so
results can be cross-checked against live forward passes in tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

from .errors import InputTooShortError
from .model import ModelConfig

# Deployment budget for the go/no-go check, in units of 1e9 floating ops
# (2 ops per MAC) for one full 10 s clip.
BUDGET_G = 11.46
# Commonly quoted full-clip compute figure for this architecture; the FLOPs
# grid flags any (convention, length) cell within 10% of it as a
# reconciliation candidate rather than asserting it as our own count.
REFERENCE_COST_G = 0.708


class LayerSpec(NamedTuple):
    kind: str          # "conv" | "pool"
    kernel: int        # kernel extent along this axis
    stride: int
    dilation: int


def branch_time_specs(config: ModelConfig, kernel_size: int, pooled: bool = True) -> list[LayerSpec]:
    """Time-axis layer chain for one branch."""
    specs: list[LayerSpec] = []
    for (rt, _rf) in config.dilations:
        specs.append(LayerSpec("conv", kernel_size, 1, rt))
        if pooled:
            specs.append(LayerSpec("pool", 2, 2, 1))
    return specs


def effective_kernel(k: int, r: int) -> int:
    return (k - 1) * r + 1


def receptive_field(specs: list[LayerSpec], convention: str = "reference") -> list[int]:
    """Cumulative receptive field after each layer.

    convention="exact": jump-product accounting, R += (k_eff - 1) * J with
    J the product of strides so far. Matches the impulse-dependency
    footprint of a real forward pass.

    convention="reference": identical except the first dilated layer
    (dilation > 1) counts its full effective kernel, k_eff * J, without the
    one-tap overlap correction. This reproduces the figures usually quoted
    for this architecture — [7, 20, 38] for the unpooled k=7 branch —
    which run one sample wider than the true footprint from that layer on.
    """
    if convention not in ("reference", "exact"):
        raise ValueError(f"unknown receptive-field convention {convention!r}")
    r_field = 1
    jump = 1
    seen_dilated = False
    out: list[int] = []
    for spec in specs:
        k_eff = effective_kernel(spec.kernel, spec.dilation)
        grow = k_eff - 1
        if convention == "reference" and spec.dilation > 1 and not seen_dilated:
            grow = k_eff
            seen_dilated = True
        r_field += grow * jump
        jump *= spec.stride
        out.append(r_field)
    return out


def min_frames_for_specs(specs: list[LayerSpec]) -> int:
    """Smallest input extent that leaves every layer a legal input.

    Walks the chain backwards: a conv (stride s, effective kernel k) needs
    s*(n_out - 1) + k inputs; floor-pooling likewise, with n_out >= 1 so no
    pooling layer ever sees a single-element axis.
    """
    n = 1
    for spec in reversed(specs):
        k_eff = effective_kernel(spec.kernel, spec.dilation)
        n = spec.stride * (n - 1) + k_eff
    return n


def min_input_frames(config: ModelConfig) -> int:
    """Minimum input frame count for the full model (binding branch wins)."""
    return max(
        min_frames_for_specs(branch_time_specs(config, k)) for k in config.kernel_sizes
    )


def count_params(config: ModelConfig) -> dict[str, int]:
    """Parameter counts by module, plus a "total" entry."""
    out: dict[str, int] = {}
    chans = (1,) + tuple(config.filters)
    for k in config.kernel_sizes:
        conv = sum(
            chans[i + 1] * chans[i] * k * k + chans[i + 1]
            for i in range(len(config.filters))
        )
        bn = sum(2 * c for c in config.filters)
        embed = config.filters[-1] * config.embed_dim + config.embed_dim
        out[f"branch{k}.convs"] = conv
        out[f"branch{k}.bns"] = bn
        out[f"branch{k}.embed"] = embed
    fan_in = config.embed_dim * len(config.kernel_sizes)
    out["fusion"] = fan_in * config.embed_dim + config.embed_dim
    out["head"] = config.embed_dim * config.n_classes + config.n_classes
    out["total"] = sum(out.values())
    return out


def _branch_shape_walk(config: ModelConfig, kernel_size: int, n_frames: int, n_mels: int):
    """Yield (c_in, c_out, t_out, f_out) per conv block, applying pooling."""
    t, f = n_frames, n_mels
    chans = (1,) + tuple(config.filters)
    for i, (rt, rf) in enumerate(config.dilations):
        kt_eff = effective_kernel(kernel_size, rt)
        kf_eff = effective_kernel(kernel_size, rf)
        t_out, f_out = t - kt_eff + 1, f - kf_eff + 1
        if t_out < 1 or f_out < 1:
            raise InputTooShortError(
                f"branch k={kernel_size}: conv {i + 1} input {t}x{f} smaller than "
                f"effective kernel {kt_eff}x{kf_eff}"
            )
        yield chans[i], chans[i + 1], t_out, f_out
        if t_out < 2 or f_out < 2:
            raise InputTooShortError(
                f"branch k={kernel_size}: pool {i + 1} needs a 2x2 input, got {t_out}x{f_out}"
            )
        t, f = t_out // 2, f_out // 2


def count_flops(
    config: ModelConfig,
    n_frames: int,
    n_mels: int | None = None,
    convention: str = "mac",
) -> dict[str, int]:
    """Multiply-accumulate counts per branch and for the dense tail.

    Counts conv and dense multiply-accumulates only (bias adds, batch norm,
    pooling, and activations are excluded). convention="mac" counts one per
    multiply-accumulate; "two_mac" counts two (multiply + add).
    """
    if convention not in ("mac", "two_mac"):
        raise ValueError(f"unknown FLOPs convention {convention!r}")
    scale = 1 if convention == "mac" else 2
    f_bins = config.n_mels if n_mels is None else n_mels
    out: dict[str, int] = {}
    for k in config.kernel_sizes:
        macs = 0
        for c_in, c_out, t_out, f_out in _branch_shape_walk(config, k, n_frames, f_bins):
            macs += t_out * f_out * c_out * c_in * k * k
        macs += config.filters[-1] * config.embed_dim  # branch embedding
        out[f"branch{k}"] = macs * scale
    fan_in = config.embed_dim * len(config.kernel_sizes)
    out["fusion"] = fan_in * config.embed_dim * scale
    out["head"] = config.embed_dim * config.n_classes * scale
    out["total"] = sum(out.values())
    return out


@dataclass
class FlopsCell:
    length_s: float
    frames: int
    mac: int
    two_mac: int
    reconciles: str  # "", "mac", "two_mac", or "mac,two_mac"


@dataclass
class ResourceReport:
    task: str
    n_classes: int
    params: dict[str, int]
    model_bytes: int
    min_frames: int
    min_seconds: float
    rf_reference: dict[int, list[int]]
    rf_exact: dict[int, list[int]]
    flops_grid: list[FlopsCell]
    budget_g: float
    cost_convention: str
    cost_at_full_clip_g: float
    within_budget: bool

    def format_text(self) -> str:
        lines = [
            f"task: {self.task} ({self.n_classes} classes)",
            f"parameters: {self.params['total']:,} "
            f"({self.params['total'] / 1e6:.2f} M, {self.model_bytes / 1e6:.2f} MB float32)",
        ]
        for key, val in self.params.items():
            if key != "total":
                lines.append(f"  {key}: {val:,}")
        lines.append(
            f"minimum input: {self.min_frames} frames = {self.min_seconds:.2f} s at 10 ms hop"
        )
        for k in sorted(self.rf_reference):
            lines.append(
                f"receptive field k={k} (no pooling): reference {self.rf_reference[k]}, "
                f"exact {self.rf_exact[k]}"
            )
        lines.append("compute grid (conv + dense multiply-accumulates):")
        lines.append("  length_s  frames        mac    two_mac  reconciles")
        for cell in self.flops_grid:
            lines.append(
                f"  {cell.length_s:8.1f}  {cell.frames:6d}  {cell.mac / 1e9:9.3f}G"
                f"  {cell.two_mac / 1e9:9.3f}G  {cell.reconciles or '-'}"
            )
        verdict = "within" if self.within_budget else "OVER"
        lines.append(
            f"budget check: {self.cost_at_full_clip_g:.3f} G ops "
            f"({self.cost_convention} convention, 10 s clip) "
            f"vs {self.budget_g:.2f} G budget -> {verdict}"
        )
        return "\n".join(lines)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["section", "key", "value"])
            writer.writerow(["meta", "task", self.task])
            writer.writerow(["meta", "n_classes", self.n_classes])
            for key, val in self.params.items():
                writer.writerow(["params", key, val])
            writer.writerow(["meta", "model_bytes", self.model_bytes])
            writer.writerow(["meta", "min_frames", self.min_frames])
            writer.writerow(["meta", "min_seconds", f"{self.min_seconds:.2f}"])
            for k in sorted(self.rf_reference):
                writer.writerow(["rf_reference", f"k{k}", " ".join(map(str, self.rf_reference[k]))])
                writer.writerow(["rf_exact", f"k{k}", " ".join(map(str, self.rf_exact[k]))])
            for cell in self.flops_grid:
                writer.writerow(
                    ["flops", f"{cell.length_s:g}s",
                     f"frames={cell.frames} mac={cell.mac} two_mac={cell.two_mac} "
                     f"reconciles={cell.reconciles or '-'}"]
                )
            writer.writerow(["budget", "budget_g", self.budget_g])
            writer.writerow(["budget", "cost_at_full_clip_g", f"{self.cost_at_full_clip_g:.4f}"])
            writer.writerow(["budget", "within_budget", self.within_budget])


def frames_for_seconds(seconds: float) -> int:
    """Frame count for a clip of the given duration (16 kHz, 512/160 framing)."""
    from .dsp import num_frames

    return num_frames(int(round(seconds * 16000)))


def build_report(
    config: ModelConfig,
    lengths_s: tuple[float, ...] = tuple(range(1, 11)),
    convention: str = "two_mac",
) -> ResourceReport:
    params = count_params(config)
    min_frames = min_input_frames(config)
    rf_ref = {
        k: receptive_field(branch_time_specs(config, k, pooled=False), "reference")
        for k in config.kernel_sizes
    }
    rf_exact = {
        k: receptive_field(branch_time_specs(config, k, pooled=False), "exact")
        for k in config.kernel_sizes
    }
    grid: list[FlopsCell] = []
    for length in lengths_s:
        frames = frames_for_seconds(length)
        if frames < min_frames:
            continue
        mac = count_flops(config, frames, convention="mac")["total"]
        two = count_flops(config, frames, convention="two_mac")["total"]
        tags = [
            name
            for name, val in (("mac", mac), ("two_mac", two))
            if abs(val / 1e9 - REFERENCE_COST_G) <= 0.10 * REFERENCE_COST_G
        ]
        grid.append(FlopsCell(length, frames, mac, two, ",".join(tags)))
    full_frames = frames_for_seconds(10.0)
    cost_g = count_flops(config, full_frames, convention=convention)["total"] / 1e9
    return ResourceReport(
        task=config.task,
        n_classes=config.n_classes,
        params=params,
        model_bytes=4 * params["total"],
        min_frames=min_frames,
        min_seconds=min_frames / 100.0,
        rf_reference=rf_ref,
        rf_exact=rf_exact,
        flops_grid=grid,
        budget_g=BUDGET_G,
        cost_convention=convention,
        cost_at_full_clip_g=cost_g,
        within_budget=cost_g <= BUDGET_G,
    )
