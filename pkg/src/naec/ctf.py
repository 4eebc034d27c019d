"""Convolutive-transfer-function observation stacking and constrained demixing.

Per time-frequency point (k, n) the observation vector has dimension
``P*L + 1`` and layout::

    [Y(k,n),
     X_1(k,n), X_1(k,n-1), ..., X_1(k,n-L+1),     # basis 1, lags 0..L-1
     ...,
     X_P(k,n), ..., X_P(k,n-L+1)]                 # basis P

where Y is the microphone spectrum and X_i the spectrum of the i-th
odd-power reference channel. Lags before the start of the signal are zero.

Only one demixing row ever adapts; its first element is pinned to 1 so the
row rewrites the microphone entry and leaves every reference entry alone.
Rows use the Hermitian convention: the near-end estimate is ``w^H y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .stft import Spectrogram


@dataclass(frozen=True)
class CtfConfig:
    """Number of cross-frame taps L and expansion order P; L=1 is the MTF model."""

    frames_l: int = 3
    order_p: int = 3

    def __post_init__(self):
        if self.frames_l < 1:
            raise ValueError(f"frames_l must be >= 1, got {self.frames_l}")
        if self.order_p < 1:
            raise ValueError(f"order_p must be >= 1, got {self.order_p}")

    @property
    def dim(self) -> int:
        """Observation dimension P*L + 1."""
        return self.order_p * self.frames_l + 1


def passthrough_row(dim: int) -> np.ndarray:
    """Demixing row that leaves the microphone untouched (w_tail = 0)."""
    row = np.zeros(dim, dtype=np.complex128)
    row[0] = 1.0
    return row


class DemixingRow:
    """View over one demixing row of dimension P*L + 1, first element 1."""

    __slots__ = ("w_full",)

    def __init__(self, w_full: np.ndarray):
        w_full = np.asarray(w_full, dtype=np.complex128)
        if w_full.ndim != 1:
            raise ValueError(f"expected a 1-D row, got shape {w_full.shape}")
        if w_full[0] != 1.0:
            raise ValueError(f"first row element must be exactly 1, got {w_full[0]}")
        self.w_full = w_full

    @property
    def w_tail(self) -> np.ndarray:
        """The P*L adaptive coefficients (a view, not a copy)."""
        return self.w_full[1:]

    @property
    def dim(self) -> int:
        return self.w_full.shape[0]


def _check_shapes(mic: Spectrogram, refs: Sequence[Spectrogram], config: CtfConfig):
    if len(refs) != config.order_p:
        raise ValueError(f"expected {config.order_p} reference spectrograms, got {len(refs)}")
    for r in refs:
        if r.data.shape != mic.data.shape:
            raise ValueError(
                f"reference shape {r.data.shape} does not match microphone {mic.data.shape}"
            )


def build_observation(
    mic: Spectrogram,
    refs: Sequence[Spectrogram],
    k: int,
    n: int,
    config: CtfConfig,
) -> np.ndarray:
    """Stacked observation vector y(k, n) of dimension P*L + 1."""
    _check_shapes(mic, refs, config)
    y = np.zeros(config.dim, dtype=np.complex128)
    y[0] = mic.data[k, n]
    pos = 1
    for ref in refs:
        for lag in range(config.frames_l):
            if n - lag >= 0:
                y[pos] = ref.data[k, n - lag]
            pos += 1
    return y


def frame_observations(
    mic: Spectrogram,
    refs: Sequence[Spectrogram],
    n: int,
    config: CtfConfig,
) -> np.ndarray:
    """Observation vectors for every bin of frame n, shape (K, P*L + 1)."""
    _check_shapes(mic, refs, config)
    n_bins = mic.n_bins
    obs = np.zeros((n_bins, config.dim), dtype=np.complex128)
    obs[:, 0] = mic.data[:, n]
    pos = 1
    for ref in refs:
        for lag in range(config.frames_l):
            if n - lag >= 0:
                obs[:, pos] = ref.data[:, n - lag]
            pos += 1
    return obs


def batch_observations(
    mic: Spectrogram,
    refs: Sequence[Spectrogram],
    config: CtfConfig,
) -> np.ndarray:
    """Observations for every frame, shape (N, K, P*L + 1)."""
    return np.stack(
        [frame_observations(mic, refs, n, config) for n in range(mic.n_frames)]
    )


def demix_frame(rows: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Near-end estimates E(k, n) = rows(k)^H obs(k) for every bin.

    ``rows`` and ``obs`` are both (K, P*L + 1).
    """
    return np.einsum("kd,kd->k", rows.conj(), obs)


def apply_demixing(row: DemixingRow, y: np.ndarray) -> complex:
    """Single-point demixing E = w^H y; with w_tail = 0 this returns Y(k, n)."""
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (row.dim,):
        raise ValueError(f"observation shape {y.shape} does not match row dim {row.dim}")
    return complex(demix_frame(row.w_full[np.newaxis, :], y[np.newaxis, :])[0])


def constrained_matrix(row: DemixingRow) -> np.ndarray:
    """Full (P*L+1)-square demixing matrix: first row w^H, rest [0 | I]."""
    d = row.dim
    mat = np.eye(d, dtype=np.complex128)
    mat[0, :] = row.w_full.conj()
    return mat
