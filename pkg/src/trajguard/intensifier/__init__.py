"""Discriminability intensifier: standardization, autoencoder embedding, FFT spectra"""

from trajguard.intensifier.autoencoder import (
    AutoencoderConfig,
    AutoencoderModel,
    LstmAutoencoder,
    embed,
    encode_standardized,
    fit_autoencoder,
    load_autoencoder,
    reconstruction_loss,
    save_autoencoder,
)
from trajguard.intensifier.spectrum import fft_real, sequence_spectrum, spectra, spectrum
from trajguard.intensifier.standardize import Standardizer, standardize

__all__ = [
    "AutoencoderConfig",
    "AutoencoderModel",
    "LstmAutoencoder",
    "Standardizer",
    "embed",
    "encode_standardized",
    "fft_real",
    "fit_autoencoder",
    "load_autoencoder",
    "reconstruction_loss",
    "save_autoencoder",
    "sequence_spectrum",
    "spectra",
    "spectrum",
    "standardize",
]
