"""FFT magnitude spectra of embeddings (numpy.fft: mixed radix, Bluestein for prime lengths)."""

import numpy as np

from trajguard.exceptions import IntensifierError


def fft_real(values: np.ndarray) -> np.ndarray:
    """
    Complex DFT ``X_j = sum_t v_t exp(-2 pi i j t / n)`` of a real vector.

    Raises:
        IntensifierError: empty or non-finite input
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise IntensifierError(f"fft_real needs a non-empty vector, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise IntensifierError("fft_real input is not finite")
    return np.fft.fft(values)


def spectrum(embedding: np.ndarray) -> np.ndarray:
    """One-sided magnitudes ``|X_0| .. |X_{m//2}|``; phase is discarded."""
    embedding = np.asarray(embedding, dtype=np.float64)
    return np.abs(fft_real(embedding))[: embedding.shape[0] // 2 + 1]


def sequence_spectrum(sequence: np.ndarray) -> np.ndarray:
    """
    FFT along time of an ``(L, m)`` per-timestep embedding sequence.

    Returns:
        Flattened ``(L//2 + 1) * m`` one-sided magnitudes
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2 or sequence.shape[0] == 0:
        raise IntensifierError(f"sequence spectrum needs an (L, m) array, got {sequence.shape}")
    columns = [np.abs(fft_real(sequence[:, j]))[: sequence.shape[0] // 2 + 1] for j in range(sequence.shape[1])]
    return np.stack(columns, axis=1).reshape(-1)


def spectra(embeddings: np.ndarray) -> np.ndarray:
    """Row-wise ``spectrum`` (``(n, m)``) or ``sequence_spectrum`` (``(n, L, m)``)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim in (2, 3) and embeddings.shape[0] == 0:
        width = embeddings.shape[-1] // 2 + 1
        if embeddings.ndim == 3:
            width = (embeddings.shape[1] // 2 + 1) * embeddings.shape[2]
        return np.zeros((0, width))
    if embeddings.ndim == 3:
        return np.stack([sequence_spectrum(item) for item in embeddings])
    if embeddings.ndim != 2:
        raise IntensifierError(f"expected a batch of embeddings, got shape {embeddings.shape}")
    return np.stack([spectrum(row) for row in embeddings])
