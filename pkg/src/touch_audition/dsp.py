"""Log-mel spectrogram front-end.

16 kHz mono audio -> framed Hamming-windowed power spectra -> 64-band
triangular mel filterbank -> log. Frame geometry: 512-sample (32 ms) window,
160-sample (10 ms) hop, so a clip of n samples yields
T = 1 + (n - 512) // 160 frames and 10 s of audio yields 997 frames.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import AudioFormatError, InputTooShortError

SAMPLE_RATE = 16000
WIN_LENGTH = 512          # 32 ms at 16 kHz
HOP_LENGTH = 160          # 10 ms at 16 kHz
N_FFT = 512
N_MELS = 64
FMIN_HZ = 0.0
FMAX_HZ = 8000.0
LOG_FLOOR = 1e-10

MELF_MAGIC = b"MELF"
MELF_VERSION = 1


def load_wav(path: str) -> np.ndarray:
    """Read a 16-bit PCM mono 16 kHz WAV into float32 in [-1, 1)."""
    import wave

    try:
        with wave.open(path, "rb") as w:
            nchan = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as e:
        raise AudioFormatError(f"{path}: not a readable WAV file ({e})") from e
    if width != 2:
        raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if nchan != 1:
        raise AudioFormatError(f"{path}: expected mono, got {nchan} channels")
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    return np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0


def save_wav(path: str, signal: np.ndarray) -> None:
    """Write float audio in [-1, 1] as 16-bit PCM mono at 16 kHz."""
    import wave

    pcm = np.clip(np.round(np.asarray(signal, dtype=np.float64) * 32768.0), -32768, 32767)
    pcm = pcm.astype("<i2")
    with wave.open(path, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(pcm.tobytes())


def num_frames(n_samples: int) -> int:
    """Frame count for a signal of n_samples (0 if shorter than one window)."""
    if n_samples < WIN_LENGTH:
        return 0
    return 1 + (n_samples - WIN_LENGTH) // HOP_LENGTH


def frame_signal(signal: np.ndarray) -> np.ndarray:
    """Slice a 1-D signal into overlapping frames of shape (T, WIN_LENGTH)."""
    signal = np.asarray(signal)
    t = num_frames(signal.shape[0])
    if t == 0:
        raise InputTooShortError(
            f"signal of {signal.shape[0]} samples is shorter than one "
            f"{WIN_LENGTH}-sample analysis window"
        )
    idx = np.arange(WIN_LENGTH)[None, :] + HOP_LENGTH * np.arange(t)[:, None]
    return signal[idx]


def hz_to_mel(f: np.ndarray | float) -> np.ndarray | float:
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray | float:
    """Inverse HTK mel scale."""
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sample_rate: int = SAMPLE_RATE,
    fmin: float = FMIN_HZ,
    fmax: float = FMAX_HZ,
) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft // 2 + 1), peak 1."""
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = np.asarray(mel_to_hz(mel_pts))
    bin_hz = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    lo = hz_pts[:-2, None]
    center = hz_pts[1:-1, None]
    hi = hz_pts[2:, None]
    rising = (bin_hz[None, :] - lo) / (center - lo)
    falling = (hi - bin_hz[None, :]) / (hi - center)
    return np.maximum(0.0, np.minimum(rising, falling)).astype(np.float64)


def power_spectrogram(signal: np.ndarray) -> np.ndarray:
    """Hamming-windowed power spectrum per frame, shape (T, n_fft//2 + 1)."""
    frames = frame_signal(signal).astype(np.float64)
    window = np.hamming(WIN_LENGTH)
    spec = np.fft.rfft(frames * window, n=N_FFT, axis=1)
    return (spec.real ** 2 + spec.imag ** 2)


def log_mel_spectrogram(signal: np.ndarray) -> np.ndarray:
    """Log-mel features, shape (T, N_MELS), float32."""
    power = power_spectrogram(signal)
    mel = power @ mel_filterbank().T
    return np.log(mel + LOG_FLOOR).astype(np.float32)


def feature_stats(features: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-mel-bin mean and std over a list of (T, F) feature arrays.

    Std is floored at 1e-6 so constant bins do not blow up normalization.
    """
    stacked = np.concatenate([np.asarray(f, dtype=np.float64) for f in features], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), 1e-6)
    return mean.astype(np.float32), std.astype(np.float32)


def standardize(features: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Apply per-bin (x - mean) / std."""
    return ((features - mean) / std).astype(np.float32)


def save_melf(path: str, features: np.ndarray) -> None:
    """Write a (T, F) float feature array in the MELF container.

    Layout: magic "MELF", u32 version, u32 T, u32 F, then T*F float32
    little-endian values in row-major order.
    """
    feat = np.ascontiguousarray(np.asarray(features, dtype="<f4"))
    if feat.ndim != 2:
        raise ValueError(f"MELF stores 2-D (T, F) arrays, got shape {feat.shape}")
    with open(path, "wb") as fh:
        fh.write(MELF_MAGIC)
        fh.write(struct.pack("<III", MELF_VERSION, feat.shape[0], feat.shape[1]))
        fh.write(feat.tobytes())


def load_melf(path: str) -> np.ndarray:
    """Read a MELF file back into a (T, F) float32 array."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MELF_MAGIC:
            raise AudioFormatError(f"{path}: bad MELF magic {magic!r}")
        version, t, f = struct.unpack("<III", fh.read(12))
        if version != MELF_VERSION:
            raise AudioFormatError(f"{path}: unsupported MELF version {version}")
        data = fh.read(4 * t * f)
        if len(data) != 4 * t * f:
            raise AudioFormatError(f"{path}: truncated MELF payload")
    return np.frombuffer(data, dtype="<f4").reshape(t, f).copy()
