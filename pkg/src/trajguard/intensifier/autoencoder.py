"""
Bidirectional LSTM autoencoder for trajectory noise suppression.

The encoder is a 2-layer biLSTM; the embedding is a linear projection of the
last layer's final forward and backward hidden states. The decoder repeats the
embedding over time and reconstructs the standardized trajectory. Only the
encoder is used online; the decoder is kept in the saved model.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import orjson
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from trajguard.constants import (
    AUTOENCODER_DESCRIPTOR,
    DEFAULT_AE_DROPOUT,
    DEFAULT_AE_EPOCHS,
    DEFAULT_AE_HIDDEN,
    DEFAULT_BOTTLENECK,
)
from trajguard.exceptions import CheckpointError, IntensifierError, NonFiniteError
from trajguard.intensifier.standardize import Standardizer
from trajguard.storage.container import read_container, write_container

logger = logging.getLogger(__name__)

MIN_TRAINING_TRAJECTORIES = 32


class AutoencoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    bottleneck: int = Field(default=DEFAULT_BOTTLENECK, ge=2)
    hidden: int = Field(default=DEFAULT_AE_HIDDEN, ge=1)
    dropout: float = Field(default=DEFAULT_AE_DROPOUT, ge=0, lt=1)
    epochs: int = Field(default=DEFAULT_AE_EPOCHS, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 42


class LstmAutoencoder(nn.Module):
    """2-layer biLSTM encoder/decoder over ``(N, L, C)`` sequences."""

    def __init__(self, channels: int, length: int, hidden: int, bottleneck: int, dropout: float):
        super().__init__()
        self.channels = channels
        self.length = length
        self.encoder = nn.LSTM(
            channels, hidden, num_layers=2, bidirectional=True, dropout=dropout, batch_first=True
        )
        self.bottleneck = nn.Linear(2 * hidden, bottleneck)
        self.decoder = nn.LSTM(
            bottleneck, hidden, num_layers=2, bidirectional=True, dropout=dropout, batch_first=True
        )
        self.output = nn.Linear(2 * hidden, channels)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        _, (h_n, _) = self.encoder(x)
        last = torch.cat([h_n[-2], h_n[-1]], dim=-1)
        return self.bottleneck(last)

    def encode_sequence(self, x: torch.Tensor) -> torch.Tensor:
        """Per-timestep bottleneck projections ``(N, L, m)``."""
        outputs, _ = self.encoder(x)
        return self.bottleneck(outputs)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.encode(x)
        repeated = z.unsqueeze(1).expand(-1, x.shape[1], -1)
        decoded, _ = self.decoder(repeated)
        return self.output(decoded)


@dataclass
class AutoencoderModel:
    """Trained autoencoder plus the benign standardization statistics"""

    network: LstmAutoencoder
    standardizer: Standardizer
    config: AutoencoderConfig
    length: int
    channels: int
    loss_history: List[float] = field(default_factory=list)

    @property
    def bottleneck(self) -> int:
        return self.config.bottleneck


def _as_sequences(data: np.ndarray) -> np.ndarray:
    """(n, L) -> (n, L, 1); (n, L, C) unchanged."""
    data = np.asarray(data, dtype=np.float64)
    return data[..., None] if data.ndim == 2 else data


def _build(config: AutoencoderConfig, length: int, channels: int) -> LstmAutoencoder:
    return LstmAutoencoder(channels, length, config.hidden, config.bottleneck, config.dropout)


def reconstruction_loss(model: AutoencoderModel, standardized: np.ndarray) -> float:
    """Mean squared reconstruction error with dropout disabled."""
    x = torch.from_numpy(_as_sequences(standardized).astype(np.float32))
    model.network.eval()
    with torch.no_grad():
        return float(nn.functional.mse_loss(model.network(x), x).item())


def fit_autoencoder(
    trajectories: np.ndarray,
    config: AutoencoderConfig,
    standardizer: Optional[Standardizer] = None,
) -> AutoencoderModel:
    """
    Train on benign trajectories by mean-squared reconstruction.

    Args:
        trajectories: Raw ``(n, L)`` trajectories or ``(n, L, C)`` imprints
        config: Architecture and training settings
        standardizer: Benign statistics; fitted on ``trajectories`` when omitted

    Returns:
        AutoencoderModel (epochs=0 returns the seeded initialization)

    Raises:
        IntensifierError: fewer than 32 trajectories
        NonFiniteError: training loss diverged (location names the epoch)
    """
    trajectories = np.asarray(trajectories, dtype=np.float64)
    if trajectories.ndim not in (2, 3) or trajectories.shape[0] < MIN_TRAINING_TRAJECTORIES:
        raise IntensifierError(
            f"autoencoder needs >= {MIN_TRAINING_TRAJECTORIES} trajectories, got shape {trajectories.shape}"
        )
    standardizer = standardizer or Standardizer.fit(trajectories)
    data = _as_sequences(standardizer.apply(trajectories)).astype(np.float32)
    n, length, channels = data.shape
    x = torch.from_numpy(data)

    history: List[float] = []
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        network = _build(config, length, channels)
        optimizer = torch.optim.Adam(network.parameters(), lr=config.lr)
        shuffle = torch.Generator().manual_seed(config.seed)
        for epoch in range(1, config.epochs + 1):
            network.train()
            order = torch.randperm(n, generator=shuffle)
            total = 0.0
            for start in range(0, n, config.batch_size):
                batch = x[order[start:start + config.batch_size]]
                optimizer.zero_grad()
                loss = nn.functional.mse_loss(network(batch), batch)
                if not bool(torch.isfinite(loss)):
                    raise NonFiniteError("reconstruction loss diverged", location=f"epoch {epoch}")
                loss.backward()
                optimizer.step()
                total += float(loss.item()) * batch.shape[0]
            history.append(total / n)
            if epoch == 1 or epoch % 50 == 0 or epoch == config.epochs:
                logger.debug("autoencoder epoch %d/%d loss %.6f", epoch, config.epochs, history[-1])
    network.eval()

    model = AutoencoderModel(
        network=network,
        standardizer=standardizer,
        config=config,
        length=length,
        channels=channels,
        loss_history=history,
    )
    logger.info(
        "Fitted autoencoder on %d trajectories (L=%d, C=%d, m=%d)", n, length, channels, config.bottleneck
    )
    return model


def _check_shape(model: AutoencoderModel, standardized: np.ndarray) -> np.ndarray:
    data = np.asarray(standardized, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :, None]
    data = _as_sequences(data)
    if data.shape[1:] != (model.length, model.channels):
        raise IntensifierError(
            f"trajectory shape {data.shape[1:]} does not match autoencoder ({model.length}, {model.channels})"
        )
    return data


def encode_standardized(model: AutoencoderModel, standardized: np.ndarray, sequence: bool = False) -> np.ndarray:
    """
    Embeddings of already standardized trajectories.

    Args:
        model: Trained autoencoder
        standardized: ``(L,)``, ``(n, L)`` or ``(n, L, C)`` standardized input
        sequence: Return per-timestep projections ``(n, L, m)`` instead of ``(n, m)``

    Returns:
        ``(n, m)`` or ``(n, L, m)``; a single ``(L,)`` trajectory drops the
        leading axis
    """
    single = np.ndim(standardized) == 1
    data = _check_shape(model, standardized)
    x = torch.from_numpy(np.ascontiguousarray(data, dtype=np.float32))
    model.network.eval()
    with torch.no_grad():
        out = model.network.encode_sequence(x) if sequence else model.network.encode(x)
    out = out.numpy().astype(np.float64)
    return out[0] if single else out


def embed(model: AutoencoderModel, trajectory: np.ndarray, sequence: bool = False) -> np.ndarray:
    """
    Standardize with the stored statistics and encode.

    A single trajectory gives an ``(m,)`` embedding; a batch gives ``(n, m)``.

    Raises:
        IntensifierError: length differs from the trained L
    """
    trajectory = np.asarray(trajectory, dtype=np.float64)
    single = trajectory.shape == model.standardizer.shape
    try:
        standardized = model.standardizer.apply(trajectory)
    except IntensifierError as e:
        raise IntensifierError(f"cannot embed: {e}") from e
    out = encode_standardized(model, standardized[None] if single else standardized, sequence)
    return out[0] if single else out


def _descriptor(model: AutoencoderModel) -> str:
    meta = {
        "config": model.config.model_dump(mode="json"),
        "length": model.length,
        "channels": model.channels,
        "loss_history": model.loss_history,
        "standardizer": model.standardizer.to_dict(),
    }
    return AUTOENCODER_DESCRIPTOR + "\n" + orjson.dumps(meta, option=orjson.OPT_SORT_KEYS).decode("utf-8")


def save_autoencoder(model: AutoencoderModel, path: Union[str, Path]) -> Path:
    """
    Persist into a TRCK container with descriptor ``trait-ae-v1``.

    Network tensors and the standardization statistics are stored as named
    tensors; the descriptor also carries the exact float64 statistics.
    """
    tensors = {name: tensor for name, tensor in model.network.state_dict().items()}
    tensors["standardizer.mean"] = torch.from_numpy(model.standardizer.mean.astype(np.float32))
    tensors["standardizer.std"] = torch.from_numpy(model.standardizer.std.astype(np.float32))
    return write_container(path, _descriptor(model), 0, tensors)


def load_autoencoder(path: Union[str, Path]) -> AutoencoderModel:
    """
    Raises:
        CheckpointError: wrong descriptor or tensors not matching the architecture
    """
    container = read_container(path)
    kind, _, payload = container.descriptor.partition("\n")
    if kind != AUTOENCODER_DESCRIPTOR:
        raise CheckpointError(f"{path}: descriptor {kind!r} is not {AUTOENCODER_DESCRIPTOR!r}")
    meta = orjson.loads(payload)
    config = AutoencoderConfig(**meta["config"])
    network = _build(config, meta["length"], meta["channels"])
    state = {k: v for k, v in container.tensors.items() if not k.startswith("standardizer.")}
    try:
        network.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise CheckpointError(f"{path}: {e}") from e
    network.eval()
    return AutoencoderModel(
        network=network,
        standardizer=Standardizer.from_dict(meta["standardizer"]),
        config=config,
        length=meta["length"],
        channels=meta["channels"],
        loss_history=list(meta["loss_history"]),
    )
