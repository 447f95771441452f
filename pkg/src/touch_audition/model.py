"""Three-branch multi-temporal-resolution CNN (MTRCNN) and checkpoint I/O.

Each branch runs three dilated conv blocks (conv -> batch norm -> ReLU ->
2x2 average pool) at a fixed kernel size (3, 5, or 7) with time-axis
dilations 1, 2, 3, then global average pooling and a 64-d embedding. Branch
embeddings are concatenated (192-d), fused to 64-d, dropped out, and
classified by a linear head.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, concat, no_grad, softmax
from .errors import CheckpointFormatError, InputTooShortError
from .layers import BatchNorm2d, Conv2d, Dense

CHECKPOINT_MAGIC = b"MTRC"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    task: str = "gesture"
    n_classes: int = 6
    n_mels: int = 64
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    filters: tuple[int, ...] = (16, 32, 64)
    dilations: tuple[tuple[int, int], ...] = ((1, 1), (2, 1), (3, 1))
    embed_dim: int = 64
    dropout: float = 0.2

    def to_blob(self) -> bytes:
        lines = [
            f"task={self.task}",
            f"n_classes={self.n_classes}",
            f"n_mels={self.n_mels}",
            "kernel_sizes=" + ",".join(str(k) for k in self.kernel_sizes),
            "filters=" + ",".join(str(f) for f in self.filters),
            "dilations=" + ";".join(f"{a},{b}" for a, b in self.dilations),
            f"embed_dim={self.embed_dim}",
            f"dropout={self.dropout!r}",
        ]
        return "\n".join(lines).encode("utf-8")

    @staticmethod
    def from_blob(blob: bytes) -> "ModelConfig":
        kv = {}
        for line in blob.decode("utf-8").splitlines():
            key, _, value = line.partition("=")
            kv[key] = value
        try:
            return ModelConfig(
                task=kv["task"],
                n_classes=int(kv["n_classes"]),
                n_mels=int(kv["n_mels"]),
                kernel_sizes=tuple(int(s) for s in kv["kernel_sizes"].split(",")),
                filters=tuple(int(s) for s in kv["filters"].split(",")),
                dilations=tuple(
                    tuple(int(x) for x in pair.split(","))  # type: ignore[misc]
                    for pair in kv["dilations"].split(";")
                ),
                embed_dim=int(kv["embed_dim"]),
                dropout=float(kv["dropout"]),
            )
        except (KeyError, ValueError) as e:
            raise CheckpointFormatError(f"bad config blob: {e}") from e


class Branch:
    """One temporal-resolution branch: 3 conv blocks + GAP + embedding."""

    def __init__(self, config: ModelConfig, kernel_size: int, rng: np.random.Generator):
        self.kernel_size = kernel_size
        chans = (1,) + tuple(config.filters)
        self.convs = [
            Conv2d(chans[i], chans[i + 1], kernel_size, config.dilations[i], rng)
            for i in range(len(config.filters))
        ]
        self.bns = [BatchNorm2d(c) for c in config.filters]
        self.embed = Dense(config.filters[-1], config.embed_dim, rng)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        h = x
        for conv, bn in zip(self.convs, self.bns):
            h = conv(h)
            h = bn(h, training)
            h = h.relu()
            h = h.avg_pool2d()
        h = h.mean_pool()
        return self.embed(h).relu()


class Mtrcnn:
    """The full multi-branch model. Input: (n, 1, T, n_mels) float32."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        from .analysis import min_input_frames  # local import; analysis imports this module

        if rng is None:
            rng = np.random.default_rng(0)
        self.config = config
        self.branches = [Branch(config, k, rng) for k in config.kernel_sizes]
        self.fusion = Dense(config.embed_dim * len(config.kernel_sizes), config.embed_dim, rng)
        self.head = Dense(config.embed_dim, config.n_classes, rng)
        self.min_frames = min_input_frames(config)
        # Per-bin standardization of the log-mel input, fit on the training
        # split and shipped inside the checkpoint.
        self.feature_mean = np.zeros(config.n_mels, dtype=np.float32)
        self.feature_std = np.ones(config.n_mels, dtype=np.float32)

    def forward(
        self,
        x: np.ndarray | Tensor,
        training: bool = False,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=np.float32))
        n, c, t, f = x.data.shape
        if t < self.min_frames:
            raise InputTooShortError(
                f"input has {t} frames but this architecture needs at least "
                f"{self.min_frames} ({self.min_frames / 100:.2f} s at 10 ms hop)"
            )
        if f != self.config.n_mels:
            raise ValueError(f"expected {self.config.n_mels} mel bins, got {f}")
        if training and self.config.dropout > 0.0 and dropout_rng is None:
            raise ValueError("training forward pass needs an explicit dropout_rng")
        embs = [branch(x, training) for branch in self.branches]
        h = self.fusion(concat(embs, axis=1)).relu()
        if training:
            h = h.dropout(self.config.dropout, dropout_rng, training)
        return self.head(h)

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Class indices and softmax probabilities, no graph construction."""
        with no_grad():
            logits = self.forward(x, training=False).data
        probs = softmax(logits)
        return probs.argmax(axis=1), probs

    def normalize(self, features: np.ndarray) -> np.ndarray:
        """Apply the stored per-bin feature standardization."""
        return ((features - self.feature_mean) / self.feature_std).astype(np.float32)

    # -- parameter / buffer registry ----------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for branch in self.branches:
            prefix = f"branch{branch.kernel_size}"
            for i, (conv, bn) in enumerate(zip(branch.convs, branch.bns), start=1):
                for name, p in conv.parameters().items():
                    out[f"{prefix}.conv{i}.{name}"] = p
                for name, p in bn.parameters().items():
                    out[f"{prefix}.bn{i}.{name}"] = p
            for name, p in branch.embed.parameters().items():
                out[f"{prefix}.embed.{name}"] = p
        for name, p in self.fusion.parameters().items():
            out[f"fusion.{name}"] = p
        for name, p in self.head.parameters().items():
            out[f"head.{name}"] = p
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for branch in self.branches:
            prefix = f"branch{branch.kernel_size}"
            for i, bn in enumerate(branch.bns, start=1):
                for name, b in bn.buffers().items():
                    out[f"{prefix}.bn{i}.{name}"] = b
        out["feature_mean"] = self.feature_mean
        out["feature_std"] = self.feature_std
        return out

    def num_params(self) -> int:
        return sum(p.data.size for p in self.parameters().values())


def save_checkpoint(path: str, model: Mtrcnn) -> None:
    """Serialize config + parameters + buffers.

    Layout: magic "MTRC", u32 version, u32 blob length, config blob (UTF-8
    key=value lines), u32 tensor count, then per tensor: u16 name length,
    name bytes, u8 ndim, u32 dims..., float32 little-endian data.
    """
    blob = model.config.to_blob()
    entries: list[tuple[str, np.ndarray]] = []
    for name, p in model.parameters().items():
        entries.append((name, p.data))
    for name, b in model.buffers().items():
        entries.append((name, b))
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            nb = name.encode("utf-8")
            a = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
            fh.write(a.tobytes())


def load_checkpoint(path: str) -> Mtrcnn:
    """Rebuild a model from checkpoint bytes, validating names and shapes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {data[:4]!r}")
    off = 4
    version, blob_len = struct.unpack_from("<II", data, off)
    off += 8
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    config = ModelConfig.from_blob(data[off : off + blob_len])
    off += blob_len
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    loaded: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off : off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", data, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", data, off)
            off += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=off).reshape(shape)
            off += 4 * size
            loaded[name] = arr.copy()
    except (struct.error, ValueError) as e:
        raise CheckpointFormatError(f"{path}: truncated or corrupt tensor records ({e})") from e

    model = Mtrcnn(config, rng=np.random.default_rng(0))
    params = model.parameters()
    buffers = model.buffers()
    expected = set(params) | set(buffers)
    if set(loaded) != expected:
        missing = sorted(expected - set(loaded))
        extra = sorted(set(loaded) - expected)
        raise CheckpointFormatError(f"{path}: tensor name mismatch (missing {missing}, extra {extra})")
    for name, arr in loaded.items():
        target = params[name].data if name in params else buffers[name]
        if target.shape != arr.shape:
            raise CheckpointFormatError(
                f"{path}: shape mismatch for {name}: checkpoint {arr.shape}, model {target.shape}"
            )
        target[...] = arr
    return model
