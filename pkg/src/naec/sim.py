"""Synthetic scene generation: room impulse responses, loudspeaker
nonlinearity, and SER/SNR-controlled mixing.

Echo paths come from the classic rectangular-room image method with a
uniform wall reflection coefficient derived from the requested T60 via
Sabine's relation. Scenes are fully determined by their spec (including the
seed): identical specs yield bit-identical components.

A scene can be described as a flat ``key = value`` text config with dotted
sections (``room.t60 = 0.3`` and so on); see ``scene_from_mapping`` and the
README for the schema.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .audio_io import SAMPLE_RATE, AudioSignal, read_wav

SPEED_OF_SOUND = 343.0

DEFAULT_DIMENSIONS = (6.0, 5.0, 3.0)
DEFAULT_SOURCE_POS = (2.0, 3.0, 1.2)
DEFAULT_MIC_POS = (4.0, 2.0, 1.2)

_MIN_SOURCE_MIC_DIST = 0.1


@dataclass(frozen=True)
class RoomSpec:
    """Rectangular room geometry, target T60 and RIR length in samples."""

    dimensions: tuple = DEFAULT_DIMENSIONS
    source_pos: tuple = DEFAULT_SOURCE_POS
    mic_pos: tuple = DEFAULT_MIC_POS
    t60: float = 0.3
    rir_length: int = 4096

    def __post_init__(self):
        dims = np.asarray(self.dimensions, dtype=np.float64)
        src = np.asarray(self.source_pos, dtype=np.float64)
        mic = np.asarray(self.mic_pos, dtype=np.float64)
        if dims.shape != (3,) or src.shape != (3,) or mic.shape != (3,):
            raise ValueError("dimensions and positions must be 3-vectors")
        if np.any(dims <= 0):
            raise ValueError(f"room dimensions must be positive, got {self.dimensions}")
        for name, pos in (("source", src), ("mic", mic)):
            if np.any(pos <= 0) or np.any(pos >= dims):
                raise ValueError(f"{name} position {tuple(pos)} not strictly inside room")
        if np.linalg.norm(src - mic) < _MIN_SOURCE_MIC_DIST:
            raise ValueError(
                f"source and mic must be at least {_MIN_SOURCE_MIC_DIST} m apart"
            )
        if not 0.1 <= self.t60 <= 2.0:
            raise ValueError(f"t60 must be in [0.1, 2.0] s, got {self.t60}")
        if self.rir_length < 1:
            raise ValueError(f"rir_length must be positive, got {self.rir_length}")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Loudspeaker model: hard clipping, an odd power series, or none."""

    kind: str = "hard_clip"
    clip_ratio: float = 0.2
    coeffs: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in ("hard_clip", "power_series", "none"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not 0.0 < self.clip_ratio <= 1.0:
            raise ValueError(f"clip_ratio must be in (0, 1], got {self.clip_ratio}")
        if self.kind == "power_series" and len(self.coeffs) == 0:
            raise ValueError("power_series requires at least one coefficient")


@dataclass
class SceneSpec:
    """Declarative synthetic scene; ``ser_db`` only applies with a near end."""

    far_end: AudioSignal
    room: RoomSpec = field(default_factory=RoomSpec)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    near_end: AudioSignal | None = None
    ser_db: float = 0.0
    snr_db: float | None = 60.0
    seed: int = 0


@dataclass
class SceneComponents:
    """Ground-truth decomposition y = d + s + noise of the microphone signal."""

    microphone: AudioSignal
    echo: AudioSignal
    near: AudioSignal
    noise: AudioSignal


def sabine_reflection(room: RoomSpec) -> float:
    """Uniform wall reflection coefficient realizing the room's T60.

    Sabine: T60 = 0.161 V / (A * absorption). Raises when the requested T60
    would need absorption >= 1 (room too small / too dead).
    """
    lx, ly, lz = room.dimensions
    volume = lx * ly * lz
    area = 2.0 * (lx * ly + lx * lz + ly * lz)
    absorption = 0.161 * volume / (area * room.t60)
    if absorption >= 1.0:
        raise ValueError(
            f"t60={room.t60} s unreachable for this room "
            f"(needs absorption {absorption:.2f} >= 1)"
        )
    return float(np.sqrt(1.0 - absorption))


def image_method_rir(
    room: RoomSpec,
    seed: int = 0,
    *,
    reflection: float | None = None,
    fractional_delay: bool = False,
) -> AudioSignal:
    """Rectangular-room impulse response via the mirror-image source method.

    Nearest-sample delay rounding by default; ``fractional_delay=True``
    spreads each image over a windowed-sinc low-pass kernel instead.
    ``reflection`` overrides the Sabine-derived wall coefficient (mainly for
    diagnostics such as the anechoic single-impulse case). ``seed`` is
    accepted for interface uniformity with the other scene generators; the
    standard image method itself is deterministic.
    """
    del seed
    beta = sabine_reflection(room) if reflection is None else float(reflection)
    dims = np.asarray(room.dimensions)
    src = np.asarray(room.source_pos)
    mic = np.asarray(room.mic_pos)
    n_samp = room.rir_length
    max_dist = n_samp / SAMPLE_RATE * SPEED_OF_SOUND
    order = np.ceil(max_dist / (2.0 * dims)).astype(int)
    grids = [np.arange(-order[a], order[a] + 1) for a in range(3)]
    h = np.zeros(n_samp)
    for p in itertools.product((0, 1), (0, 1), (0, 1)):
        diffs, amps = [], []
        for a in range(3):
            img = (1 - 2 * p[a]) * (src[a] + 2.0 * grids[a] * dims[a])
            diffs.append(img - mic[a])
            amps.append(beta ** (np.abs(grids[a] + p[a]) + np.abs(grids[a])))
        dist = np.sqrt(
            diffs[0][:, None, None] ** 2
            + diffs[1][None, :, None] ** 2
            + diffs[2][None, None, :] ** 2
        ).ravel()
        refl = (
            amps[0][:, None, None] * amps[1][None, :, None] * amps[2][None, None, :]
        ).ravel()
        keep = dist > 1e-9
        dist, refl = dist[keep], refl[keep]
        gain = refl / (4.0 * np.pi * dist)
        delay = dist / SPEED_OF_SOUND * SAMPLE_RATE
        if fractional_delay:
            _add_fractional(h, delay, gain)
        else:
            idx = np.rint(delay).astype(np.intp)
            inside = idx < n_samp
            np.add.at(h, idx[inside], gain[inside])
    return AudioSignal(h)


def _add_fractional(
    h: np.ndarray,
    delay: np.ndarray,
    gain: np.ndarray,
    taps: int = 40,
    chunk: int = 50_000,
) -> None:
    # Peterson-style windowed-sinc interpolation of non-integer delays.
    n_samp = len(h)
    tw = taps / SAMPLE_RATE
    fc = 0.9 * SAMPLE_RATE / 2.0
    offsets = np.arange(taps + 1)
    for start in range(0, len(delay), chunk):
        d = delay[start : start + chunk]
        g = gain[start : start + chunk]
        n0 = np.ceil(d - taps / 2.0).astype(np.intp)
        idx = n0[:, None] + offsets[None, :]
        t = idx / SAMPLE_RATE - (d / SAMPLE_RATE)[:, None]
        valid = (np.abs(t) <= tw / 2.0) & (idx >= 0) & (idx < n_samp)
        kernel = 0.5 * (1.0 + np.cos(2.0 * np.pi * t / tw)) * np.sinc(2.0 * fc * t)
        np.add.at(h, idx[valid], (kernel * g[:, None])[valid])


def hard_clip(signal: AudioSignal, clip_ratio: float = 0.2) -> AudioSignal:
    """Memoryless saturation at x_max = clip_ratio * max|x|.

    An all-zero signal is returned unchanged (the threshold degenerates
    to 0).
    """
    x = signal.samples
    x_max = clip_ratio * np.max(np.abs(x)) if len(x) else 0.0
    if x_max == 0.0:
        return AudioSignal(x.copy(), signal.sample_rate)
    return AudioSignal(np.clip(x, -x_max, x_max), signal.sample_rate)


def power_series_nonlinearity(signal: AudioSignal, coeffs) -> AudioSignal:
    """sum_i coeffs[i] * x**(2i+1), an explicit odd power series loudspeaker."""
    coeffs = list(coeffs)
    if not coeffs:
        raise ValueError("coeffs must be nonempty")
    x = signal.samples
    acc = np.zeros_like(x)
    term = x.copy()
    x2 = x * x
    for i, a in enumerate(coeffs):
        if i > 0:
            term = term * x2
        acc += a * term
    return AudioSignal(acc, signal.sample_rate)


def apply_nonlinearity(signal: AudioSignal, spec: NonlinearitySpec) -> AudioSignal:
    if spec.kind == "hard_clip":
        return hard_clip(signal, spec.clip_ratio)
    if spec.kind == "power_series":
        return power_series_nonlinearity(signal, spec.coeffs)
    return AudioSignal(signal.samples.copy(), signal.sample_rate)


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    if len(x) >= n:
        return x[:n]
    return np.concatenate([x, np.zeros(n - len(x))])


def synthesize_scene(spec: SceneSpec) -> SceneComponents:
    """Generate microphone, echo, near-end and noise components of a scene.

    The near end is scaled so the signal-to-echo ratio matches ``ser_db``
    exactly; noise is white Gaussian scaled against the noise-free mixture
    d + s to match ``snr_db`` (``None`` means noiseless).
    """
    x = spec.far_end
    if x.sample_rate != SAMPLE_RATE:
        raise ValueError(f"far-end sample rate {x.sample_rate}, expected {SAMPLE_RATE}")
    n = len(x)
    driven = apply_nonlinearity(x, spec.nonlinearity)
    rir = image_method_rir(spec.room, spec.seed)
    d = fftconvolve(driven.samples, rir.samples)[:n]
    if spec.near_end is not None:
        e_d = np.mean(d**2)
        if e_d <= 0.0:
            raise ValueError("echo has zero energy; cannot realize the requested SER")
        s_raw = _fit_length(spec.near_end.samples, n)
        e_s = np.mean(s_raw**2)
        if e_s <= 0.0:
            raise ValueError("near end has zero energy; cannot realize the requested SER")
        s = s_raw * np.sqrt(e_d * 10.0 ** (spec.ser_db / 10.0) / e_s)
    else:
        s = np.zeros(n)
    if spec.snr_db is None or np.isinf(spec.snr_db):
        noise = np.zeros(n)
    else:
        rng = np.random.default_rng(spec.seed)
        noise = rng.standard_normal(n)
        e_mix = np.mean((d + s) ** 2)
        noise *= np.sqrt(e_mix * 10.0 ** (-spec.snr_db / 10.0) / np.mean(noise**2))
    y = d + s + noise
    return SceneComponents(
        microphone=AudioSignal(y),
        echo=AudioSignal(d),
        near=AudioSignal(s),
        noise=AudioSignal(noise),
    )


# ---------------------------------------------------------------------------
# Deterministic test signals


def white_noise(duration_s: float, seed: int, level: float = 0.1) -> AudioSignal:
    """Gaussian noise with RMS ``level``."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    x = rng.standard_normal(n)
    return AudioSignal(x * (level / np.sqrt(np.mean(x**2))))


def _resonator(x: np.ndarray, fc: float, bandwidth: float) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / SAMPLE_RATE)
    theta = 2.0 * np.pi * fc / SAMPLE_RATE
    return lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def _normalize(x: np.ndarray, level: float) -> np.ndarray:
    rms = np.sqrt(np.mean(x**2))
    x = x * (level / rms)
    peak = np.max(np.abs(x))
    if peak > 0.95:
        x *= 0.95 / peak
    return x


def speech_like(
    duration_s: float, seed: int, level: float = 0.1, pause_weight: float = 0.2
) -> AudioSignal:
    """Speech-shaped test signal: voiced/unvoiced segments with pauses.

    Voiced segments are glottal-style pulse trains shaped by random formant
    resonators; unvoiced segments are band-shaped noise bursts. A faint
    broadband floor keeps every frequency bin weakly excited. ``pause_weight``
    sets the fraction of silent segments; 0 gives uninterrupted speech.
    """
    if not 0.0 <= pause_weight < 1.0:
        raise ValueError("pause_weight must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    out = np.zeros(n + SAMPLE_RATE)
    active = 1.0 - pause_weight
    probs = [0.625 * active, 0.375 * active, pause_weight]
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.08, 0.35) * SAMPLE_RATE)
        kind = rng.choice(3, p=probs)
        if kind == 0:
            f0 = rng.uniform(110.0, 240.0)
            exc = np.zeros(seg)
            pulses = np.arange(0.0, seg, SAMPLE_RATE / f0)
            exc[np.floor(pulses).astype(int)] = 1.0
            x = exc
            for fc, bw in (
                (rng.uniform(300.0, 900.0), rng.uniform(60.0, 150.0)),
                (rng.uniform(900.0, 2200.0), rng.uniform(80.0, 200.0)),
                (rng.uniform(2200.0, 3600.0), rng.uniform(120.0, 300.0)),
            ):
                x = x + 0.8 * _resonator(x, fc, bw)
        elif kind == 1:
            x = _resonator(rng.standard_normal(seg), rng.uniform(2500.0, 6500.0), 1500.0)
        else:
            pos += seg
            continue
        edge = min(160, seg // 4)
        env = np.ones(seg)
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(edge) / edge))
        env[:edge] = ramp
        env[seg - edge :] = ramp[::-1]
        out[pos : pos + seg] += x * env * rng.uniform(0.4, 1.0)
        pos += seg
    x = out[:n]
    x = x + rng.standard_normal(n) * (np.sqrt(np.mean(x**2)) * 10 ** (-45.0 / 20.0))
    return AudioSignal(_normalize(x, level))


def music_like(duration_s: float, seed: int, level: float = 0.1) -> AudioSignal:
    """Sustained-chord test signal with a strongly low-rank spectrogram."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    out = np.zeros(n + SAMPLE_RATE)
    midi_scale = np.array([48, 50, 52, 55, 57, 60, 62, 64, 67, 69, 72])
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.4, 0.9) * SAMPLE_RATE)
        t = np.arange(seg) / SAMPLE_RATE
        x = np.zeros(seg)
        for note in rng.choice(midi_scale, size=3, replace=False):
            f = 440.0 * 2.0 ** ((note - 69) / 12.0)
            for harm in range(1, 6):
                x += (0.6**harm) * np.cos(
                    2.0 * np.pi * f * harm * t + rng.uniform(0.0, 2.0 * np.pi)
                )
        edge = min(320, seg // 4)
        env = np.ones(seg)
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(edge) / edge))
        env[:edge] = ramp
        env[seg - edge :] = ramp[::-1]
        out[pos : pos + seg] += x * env * rng.uniform(0.5, 1.0)
        pos += seg
    x = out[:n]
    x = x + rng.standard_normal(n) * (np.sqrt(np.mean(x**2)) * 10 ** (-45.0 / 20.0))
    return AudioSignal(_normalize(x, level))


# ---------------------------------------------------------------------------
# Flat dotted-key config format

_SCENE_PREFIXES = ("scene", "room", "nonlinearity", "far_end", "near_end")


def parse_flat_config(text: str) -> dict:
    """Parse ``key = value`` lines with dotted keys; '#' starts a comment."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        mapping[key] = value.strip()
    return mapping


def _floats(value: str) -> tuple:
    return tuple(float(v) for v in value.split())


def _signal_from_mapping(
    m: Mapping, prefix: str, duration_s: float, default_kind: str,
    default_seed: int, base_dir: Path | None,
) -> AudioSignal | None:
    kind = m.get(f"{prefix}.kind", default_kind)
    path = m.get(f"{prefix}.path")
    seed = int(m.get(f"{prefix}.seed", default_seed))
    level = float(m.get(f"{prefix}.level", 0.1))
    if kind == "none":
        return None
    if kind == "wav":
        if path is None:
            raise ValueError(f"{prefix}.kind = wav requires {prefix}.path")
        p = Path(path)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return read_wav(p)
    if kind == "speech_like":
        pause = float(m.get(f"{prefix}.pause_weight", 0.2))
        return speech_like(duration_s, seed, level, pause)
    if kind == "music_like":
        return music_like(duration_s, seed, level)
    if kind == "noise":
        return white_noise(duration_s, seed, level)
    raise ValueError(f"unknown {prefix}.kind {kind!r}")


def scene_from_mapping(
    mapping: Mapping,
    base_dir: Path | None = None,
    seed_override: int | None = None,
) -> SceneSpec:
    """Build a SceneSpec from a flat dotted-key mapping.

    Unknown keys under the scene-related prefixes raise, so typos do not
    silently fall back to defaults. Signal seeds default to scene.seed + 1
    (far end) and scene.seed + 2 (near end).
    """
    m = {k: v for k, v in mapping.items() if k.split(".", 1)[0] in _SCENE_PREFIXES}
    known = {
        "scene.duration_s", "scene.seed", "scene.ser_db", "scene.snr_db",
        "room.dimensions", "room.source_pos", "room.mic_pos", "room.t60",
        "room.rir_length",
        "nonlinearity.kind", "nonlinearity.clip_ratio", "nonlinearity.coeffs",
    }
    for prefix in ("far_end", "near_end"):
        known |= {
            f"{prefix}.{k}"
            for k in ("kind", "path", "seed", "level", "pause_weight")
        }
    unknown = set(m) - known
    if unknown:
        raise ValueError(f"unknown scene config keys: {sorted(unknown)}")

    seed = int(m.get("scene.seed", 0))
    if seed_override is not None:
        seed = seed_override
    duration_s = float(m.get("scene.duration_s", 10.0))
    snr_raw = m.get("scene.snr_db", "60")
    snr_db = None if snr_raw.lower() in ("none", "inf") else float(snr_raw)

    room = RoomSpec(
        dimensions=_floats(m.get("room.dimensions", "6 5 3")),
        source_pos=_floats(m.get("room.source_pos", "2 3 1.2")),
        mic_pos=_floats(m.get("room.mic_pos", "4 2 1.2")),
        t60=float(m.get("room.t60", 0.3)),
        rir_length=int(m.get("room.rir_length", 4096)),
    )
    nonlin = NonlinearitySpec(
        kind=m.get("nonlinearity.kind", "hard_clip"),
        clip_ratio=float(m.get("nonlinearity.clip_ratio", 0.2)),
        coeffs=_floats(m.get("nonlinearity.coeffs", "1")),
    )
    far = _signal_from_mapping(m, "far_end", duration_s, "speech_like", seed + 1, base_dir)
    if far is None:
        raise ValueError("far_end.kind must not be 'none'")
    near = _signal_from_mapping(m, "near_end", duration_s, "none", seed + 2, base_dir)
    return SceneSpec(
        far_end=far,
        room=room,
        nonlinearity=nonlin,
        near_end=near,
        ser_db=float(m.get("scene.ser_db", 0.0)),
        snr_db=snr_db,
        seed=seed,
    )
