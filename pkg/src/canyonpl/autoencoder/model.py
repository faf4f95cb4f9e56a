"""Convolutional autoencoder for facade patches: architecture, Adam training, encoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .layers import (Conv1D, Dense, Flatten, Layer, MaxPool1D, ParallelAdd, Reshape,
                     Sequential, ShapeError, UpSample1D, flatten_grads, layer_from_descriptor)
from .loss import masked_logcosh_loss

log = logging.getLogger(__name__)

VARIANTS = ("grouped", "single", "serial")


@dataclass(frozen=True)
class Architecture:
    """Layer sizes of the encoder/decoder pair.

    Defaults give (500, 40) -> 12 -> (500, 40):
    encoder Conv(32,7) Pool(2) [Conv(32,5) Pool(5)] Conv(16,3) Pool(5) Flatten Dense(64) Dense(12),
    decoder Dense(64) Dense(160) Reshape(10,16) Up(5) Conv(32,3) Up(5) Conv(32,5) Up(2) Conv(40,3,relu).
    The bracketed block is two parallel summed branches ("grouped"), one
    branch ("single"), or the two branches chained ("serial").
    """

    length: int = 500
    channels: int = 40
    latent: int = 12
    filters: tuple[int, int, int] = (32, 32, 16)
    kernels: tuple[int, int, int] = (7, 5, 3)
    pools: tuple[int, int, int] = (2, 5, 5)
    decoder_kernels: tuple[int, int, int] = (3, 5, 3)
    dense: int = 64
    variant: str = "grouped"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    def encoder(self) -> Sequential:
        f0, f1, f2 = self.filters
        k0, k1, k2 = self.kernels
        p0, p1, p2 = self.pools

        def convnet():
            return [Conv1D(f1, k1, "tanh"), MaxPool1D(p1)]

        if self.variant == "grouped":
            block = [ParallelAdd(convnet(), convnet())]
        elif self.variant == "single":
            block = convnet()
        else:
            block = convnet() + convnet()
        return Sequential([
            Conv1D(f0, k0, "tanh"), MaxPool1D(p0), *block,
            Conv1D(f2, k2, "tanh"), MaxPool1D(p2), Flatten(),
            Dense(self.dense, "tanh"), Dense(self.latent, "tanh"),
        ])

    def decoder(self) -> Sequential:
        f0, f1, f2 = self.filters
        p0, p1, p2 = self.pools
        d0, d1, d2 = self.decoder_kernels
        if self.length % (p0 * p1 * p2):
            raise ShapeError(f"length {self.length} not divisible by pooling {p0 * p1 * p2}")
        bottleneck = self.length // (p0 * p1 * p2)
        return Sequential([
            Dense(self.dense, "tanh"), Dense(bottleneck * f2, "tanh"), Reshape((bottleneck, f2)),
            UpSample1D(p2), Conv1D(f1, d0, "tanh"),
            UpSample1D(p1), Conv1D(f0, d1, "tanh"),
            UpSample1D(p0), Conv1D(self.channels, d2, "relu"),
        ])

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


MINI_ARCHITECTURE = Architecture(length=20, channels=4, latent=3, filters=(4, 4, 2),
                                 kernels=(3, 3, 3), pools=(2, 5, 2), decoder_kernels=(3, 3, 3), dense=6)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0012
    batch_size: int = 16
    epochs: int = 100
    val_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    """Adam with bias correction over a fixed, named parameter set."""

    def __init__(self, params: dict[str, np.ndarray], lr=0.0012, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in sorted(self.params):
            g = grads.get(k)
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            self.params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class TrainingError(RuntimeError):
    pass


@dataclass
class AutoencoderModel:
    arch: Architecture
    encoder: Sequential
    decoder: Sequential
    seed: int = 0
    config: TrainConfig = field(default_factory=TrainConfig)
    scaler: object = None  # buildings.GridScaler
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)

    @classmethod
    def initialize(cls, arch: Architecture = Architecture(), seed: int = 0,
                   config: TrainConfig = TrainConfig(), scaler=None) -> "AutoencoderModel":
        rng = np.random.default_rng(seed)
        enc, dec = arch.encoder(), arch.decoder()
        latent_shape = enc.build((arch.length, arch.channels), rng)
        if latent_shape != (arch.latent,):
            raise ShapeError(f"encoder produces {latent_shape}, expected ({arch.latent},)")
        out_shape = dec.build(latent_shape, rng)
        if out_shape != (arch.length, arch.channels):
            raise ShapeError(f"decoder produces {out_shape}, expected {(arch.length, arch.channels)}")
        return cls(arch, enc, dec, seed, config, scaler)

    # parameters ------------------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        out = {f"enc.{k}": v for k, v in self.encoder.param_items()}
        out.update({f"dec.{k}": v for k, v in self.decoder.param_items()})
        return out

    def descriptor(self) -> dict:
        return {"arch": self.arch.to_dict(), "encoder": self.encoder.descriptor(),
                "decoder": self.decoder.descriptor(), "seed": self.seed,
                "config": self.config.__dict__}

    # passes ----------------------------------------------------------------

    def _check_input(self, patches):
        x = np.asarray(patches, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1:] != (self.arch.length, self.arch.channels):
            raise ShapeError(f"expected patches of shape {(self.arch.length, self.arch.channels)}, got {x.shape[1:]}")
        return x

    def forward_loss(self, batch):
        """Loss and parameter gradients for one batch of normalized patches."""
        z, enc_cache = self.encoder.forward(batch)
        y, dec_cache = self.decoder.forward(z)
        loss, dy = masked_logcosh_loss(y, batch)
        dz, dec_grads = self.decoder.backward(dec_cache, dy)
        _, enc_grads = self.encoder.backward(enc_cache, dz)
        grads = {f"enc.{k}": v for k, v in flatten_grads(self.encoder, enc_grads).items()}
        grads.update({f"dec.{k}": v for k, v in flatten_grads(self.decoder, dec_grads).items()})
        return loss, grads

    def loss(self, patches, batch_size=64) -> float:
        x = self._check_input(patches)
        total = 0.0
        for s in range(0, len(x), batch_size):
            b = x[s:s + batch_size]
            y = self.decode(self.encoder.forward(b)[0])
            total += masked_logcosh_loss(y, b)[0] * len(b)
        return total / len(x)

    def encode(self, patches, batch_size=64) -> np.ndarray:
        """Latent vectors for normalized patches; rejects values outside [0, 1]."""
        x = self._check_input(patches)
        if x.size and (x.min() < -1e-9 or x.max() > 1 + 1e-9):
            raise ValueError("encode expects patches normalized to [0, 1]")
        out = [self.encoder.forward(x[s:s + batch_size])[0] for s in range(0, len(x), batch_size)]
        return np.concatenate(out, axis=0) if out else np.empty((0, self.arch.latent))

    def decode(self, latent) -> np.ndarray:
        z = np.asarray(latent, dtype=np.float64)
        if z.ndim == 1:
            z = z[None]
        return self.decoder.forward(z)[0]

    def reconstruct(self, patches) -> np.ndarray:
        return self.decode(self.encode(patches))


def train_autoencoder(patches, config: TrainConfig = TrainConfig(), seed: int = 0,
                      arch: Architecture = Architecture(), scaler=None) -> AutoencoderModel:
    """Train on normalized patches with Adam and the masked log-cosh loss.

    The last ``val_fraction`` of the patches (in the given order) is held out
    for the validation curve. Training batches are reshuffled every epoch
    from the seeded generator; a short final batch is kept.
    """
    x = np.asarray(patches, dtype=np.float64)
    if len(x) < config.batch_size:
        raise ValueError(f"need at least {config.batch_size} patches, got {len(x)}")
    model = AutoencoderModel.initialize(arch, seed, config, scaler)
    x = model._check_input(x)
    n_val = int(len(x) * config.val_fraction)
    train, val = x[:len(x) - n_val], x[len(x) - n_val:]
    rng = np.random.default_rng([seed, 1])
    params = model.parameters()
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)
    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        for bi, s in enumerate(range(0, len(train), config.batch_size)):
            batch = train[order[s:s + config.batch_size]]
            loss, grads = model.forward_loss(batch)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            opt.step(grads)
        model.train_loss.append(model.loss(train))
        if len(val):
            model.val_loss.append(model.loss(val))
        log.debug("epoch %d train %.6g val %s", epoch, model.train_loss[-1],
                  model.val_loss[-1] if model.val_loss else "-")
    return model


def rebuild(descriptor: dict, params: dict[str, np.ndarray], scaler=None) -> AutoencoderModel:
    arch = Architecture.from_dict(descriptor["arch"])
    model = AutoencoderModel.initialize(arch, descriptor.get("seed", 0),
                                        TrainConfig(**descriptor.get("config", {})), scaler)
    if model.encoder.descriptor() != layer_from_descriptor(descriptor["encoder"]).descriptor():
        raise ValueError("stored encoder descriptor does not match architecture")
    current = model.parameters()
    if set(current) != set(params):
        raise ValueError("parameter set mismatch")
    for k, v in current.items():
        if v.shape != params[k].shape:
            raise ValueError(f"parameter {k}: shape {params[k].shape} != {v.shape}")
        v[...] = params[k]
    return model


def save_autoencoder(path, model: AutoencoderModel) -> None:
    from ..persist import write_container
    arrays = dict(model.parameters())
    if model.scaler is not None:
        arrays["scaler.min"] = model.scaler.cell_min
        arrays["scaler.max"] = model.scaler.cell_max
    desc = model.descriptor()
    desc["train_loss"] = [float(v) for v in model.train_loss]
    desc["val_loss"] = [float(v) for v in model.val_loss]
    write_container(path, "autoencoder", desc, arrays)


def load_autoencoder(path) -> AutoencoderModel:
    from ..buildings import GridScaler
    from ..persist import read_container
    _, desc, arrays = read_container(path, expect_kind="autoencoder")
    scaler = None
    if "scaler.min" in arrays:
        scaler = GridScaler(arrays.pop("scaler.min"), arrays.pop("scaler.max"))
    model = rebuild(desc, arrays, scaler)
    model.train_loss = list(desc.get("train_loss", []))
    model.val_loss = list(desc.get("val_loss", []))
    return model
