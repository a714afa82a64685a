"""Semi-synthetic multichannel window generation from anechoic speech.

The propagation model is delay-only: each microphone channel is the source
window circularly delayed by its fractional arrival delay (a DFT phase ramp)
and scaled by an independent random gain. Before the per-channel delays, the
source window is contaminated with a random low-frequency tone plus white
gaussian noise so the synthetic data mimics the target room's recordings.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayGeometry, SourceBox, as_position, sample_delays


@dataclass
class AnechoicClip:
    """Mono close-talk recording used as source material."""

    samples: np.ndarray
    sample_rate: float
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("clip samples must be 1-D")

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class MultichannelWindow:
    """One analysis window across all microphones: channels (M, N)."""

    channels: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels))
        if self.channels.ndim != 2:
            raise ValueError("channels must be a (M, N) array")

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Contamination parameters: additive tone plus white gaussian noise.

    The noise scale is set either directly (``noise_gain``, the k_eta
    factor) or through ``snr_db``, in which case k_eta is derived from the
    window's own power so the realized SNR hits the target. Set both to
    None (and tone_gain to 0) for clean output.
    """

    tone_gain: float = 0.1
    tone_freq_range: tuple = (20.0, 30.0)
    tone_phase_range: tuple = (0.0, math.pi)
    snr_db: float | None = None
    noise_gain: float | None = None
    gain_range: tuple = (0.01, 0.03)

    def __post_init__(self):
        if self.tone_gain < 0:
            raise ValueError("tone_gain must be >= 0")
        for name in ("tone_freq_range", "tone_phase_range", "gain_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0 or lo > hi:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got ({lo}, {hi})")
        if self.snr_db is not None and self.noise_gain is not None:
            raise ValueError("set snr_db or noise_gain, not both")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.noise_gain is not None and self.noise_gain < 0:
            raise ValueError("noise_gain must be >= 0")

    @staticmethod
    def clean() -> "NoiseSpec":
        return NoiseSpec(tone_gain=0.0, noise_gain=0.0)


@dataclass(frozen=True)
class ContaminationDraw:
    """Realized random values of one contamination application."""

    tone_freq_hz: float
    tone_phase_rad: float
    noise_gain: float
    realized_snr_db: float | None  # None when no noise was added


@dataclass
class LabeledExample:
    """Network training pair: a multichannel window and its source position."""

    window: MultichannelWindow
    target: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.target = as_position(self.target)


def fractional_delay(x, delay: float, gain: float = 1.0) -> np.ndarray:
    """Circularly delay a window by a fractional number of samples.

    Implemented as a linear phase ramp exp(-2j*pi*k*delay/N) on the DFT of
    the window, realized through the real-input FFT so the output is exactly
    real. Integer delays reduce to exact circular shifts. For even N the
    Nyquist bin cannot carry a fractional phase and keep the signal real; it
    is scaled by cos(pi*delay), the usual Fourier-shift convention.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("input must be a 1-D sequence of at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite samples")
    if not np.isfinite(delay) or not np.isfinite(gain):
        raise ValueError("delay and gain must be finite")
    n = x.size
    spectrum = np.fft.rfft(x)
    k = np.arange(spectrum.size)
    spectrum *= np.exp(-2j * np.pi * k * delay / n)
    return gain * np.fft.irfft(spectrum, n=n)


def contaminate(x, spec: NoiseSpec, sample_rate: float, rng: np.random.Generator):
    """Add the random tone and white noise of `spec` to a window.

    Returns (contaminated, ContaminationDraw). The tone frequency is uniform
    over spec.tone_freq_range, the phase uniform over spec.tone_phase_range,
    and the noise i.i.d. standard normal scaled by the resolved k_eta.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    out = x.copy()

    f0 = float(rng.uniform(*spec.tone_freq_range))
    phi0 = float(rng.uniform(*spec.tone_phase_range))
    if spec.tone_gain > 0:
        t = np.arange(n) / sample_rate
        out += spec.tone_gain * np.sin(2.0 * np.pi * f0 * t + phi0)

    if spec.snr_db is not None:
        power = float(np.mean(x**2))
        if power <= 0.0:
            raise ValueError("cannot target an SNR on a zero-power window")
        k_eta = math.sqrt(power) * 10.0 ** (-spec.snr_db / 20.0)
    else:
        k_eta = float(spec.noise_gain or 0.0)

    realized_snr = None
    if k_eta > 0:
        noise = k_eta * rng.standard_normal(n)
        out += noise
        noise_power = float(np.mean(noise**2))
        signal_power = float(np.mean(x**2))
        if signal_power > 0 and noise_power > 0:
            realized_snr = 10.0 * math.log10(signal_power / noise_power)

    return out, ContaminationDraw(f0, phi0, k_eta, realized_snr)


def sample_source_position(box: SourceBox, rng: np.random.Generator) -> np.ndarray:
    """Draw a position componentwise uniform over the box."""
    return rng.uniform(box.lo, box.hi)


def synthesize_example(
    clip: AnechoicClip,
    offset: int,
    n_samples: int,
    target,
    geom: ArrayGeometry,
    noise: NoiseSpec,
    rng: np.random.Generator,
    box: SourceBox | None = None,
    guard_band: bool = False,
) -> LabeledExample:
    """Simulate the array capture of one source window at `target`.

    Channel i carries the window contaminated per `noise`, delayed by its
    fractional arrival delay and scaled by an independent gain drawn from
    noise.gain_range. With ``guard_band`` the window is extracted with
    headroom of ceil(max delay) extra samples so the circular delay wrap
    never reaches the emitted samples (needs that much more clip material).
    """
    target = as_position(target)
    if clip.sample_rate != geom.sample_rate:
        raise ValueError(
            f"clip rate {clip.sample_rate} does not match geometry rate {geom.sample_rate}"
        )
    if box is not None and not box.contains(target):
        raise ValueError(f"target {target} outside the source box")
    if not geom.room_box().contains(target):
        raise ValueError(f"target {target} outside the room bounds")

    delays = sample_delays(target, geom)
    guard = int(math.ceil(delays.max())) if guard_band else 0
    n_extract = n_samples + guard
    if offset < 0 or offset + n_extract > len(clip):
        raise ValueError(
            f"window [{offset}, {offset + n_extract}) exceeds clip of {len(clip)} samples"
        )

    source = clip.samples[offset : offset + n_extract]
    contaminated, draw = contaminate(source, noise, geom.sample_rate, rng)
    gains = rng.uniform(*noise.gain_range, size=geom.num_mics)

    channels = np.empty((geom.num_mics, n_samples))
    for i in range(geom.num_mics):
        delayed = fractional_delay(contaminated, delays[i], gains[i])
        channels[i] = delayed[guard : guard + n_samples]

    window = MultichannelWindow(channels=channels, sample_rate=geom.sample_rate)
    meta = {
        "source_id": clip.source_id,
        "offset": int(offset),
        "delays": delays,
        "gains": gains,
        "tone_freq_hz": draw.tone_freq_hz,
        "tone_phase_rad": draw.tone_phase_rad,
        "noise_gain": draw.noise_gain,
        "realized_snr_db": draw.realized_snr_db,
    }
    return LabeledExample(window=window, target=target, meta=meta)


@dataclass(frozen=True)
class EpochSpec:
    """How many clips, windows and examples make up one generated epoch.

    Defaults reproduce the training recipe: 200 clips x 40 windows, paired
    with 200 positions x 40 windows, split 7200 train / 800 validation.
    """

    clips: int = 200
    windows_per_clip: int = 40
    train_examples: int = 7200
    val_examples: int = 800
    window_samples: int = 1280
    min_rms: float = 1e-4
    max_redraws: int = 100
    guard_band: bool = False

    def __post_init__(self):
        if self.clips < 1 or self.windows_per_clip < 1:
            raise ValueError("clips and windows_per_clip must be >= 1")
        total = self.clips * self.windows_per_clip
        if total != self.train_examples + self.val_examples:
            raise ValueError(
                f"clips*windows_per_clip = {total} must equal "
                f"train+val = {self.train_examples + self.val_examples}"
            )
        if self.window_samples < 2:
            raise ValueError("window_samples must be >= 2")

    @property
    def total_examples(self) -> int:
        return self.train_examples + self.val_examples

    def scaled(self, factor: float) -> "EpochSpec":
        """Proportionally smaller (or larger) epoch, keeping windows_per_clip."""
        clips = max(1, round(self.clips * factor))
        total = clips * self.windows_per_clip
        val = round(total * self.val_examples / max(1, self.total_examples))
        return EpochSpec(
            clips=clips,
            windows_per_clip=self.windows_per_clip,
            train_examples=total - val,
            val_examples=val,
            window_samples=self.window_samples,
            min_rms=self.min_rms,
            max_redraws=self.max_redraws,
            guard_band=self.guard_band,
        )


def _draw_window_offset(clip, n_extract, min_rms, max_redraws, rng):
    """Uniform window offset, redrawn while the window is below the RMS floor."""
    limit = len(clip) - n_extract
    if limit < 0:
        raise ValueError(
            f"clip {clip.source_id!r} has {len(clip)} samples, too short for {n_extract}"
        )
    for _ in range(max(1, max_redraws)):
        offset = int(rng.integers(0, limit + 1))
        window = clip.samples[offset : offset + n_extract]
        if min_rms <= 0 or math.sqrt(float(np.mean(window**2))) >= min_rms:
            return offset
    raise ValueError(
        f"no window of clip {clip.source_id!r} reached RMS {min_rms} "
        f"after {max_redraws} draws"
    )


def generate_epoch(
    corpus,
    geom: ArrayGeometry,
    noise: NoiseSpec,
    box: SourceBox,
    epoch_spec: EpochSpec,
    seed,
):
    """Yield one epoch of labeled examples, deterministically from `seed`.

    `corpus` is a sequence-like of AnechoicClip (anything with __len__ and
    integer indexing, so lazily loading corpora work too). Each of the
    epoch's clip draws is paired with one random source position, and
    windows_per_clip windows are synthesized from that pairing. Every
    example consumes its own seed-derived random substream, so the stream
    is reproducible regardless of evaluation order or parallelism.

    Yields (example, split) with split in {"train", "val"}. If the corpus
    is smaller than epoch_spec.clips, clips are drawn with replacement and
    a warning is issued.
    """
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_total = epoch_spec.total_examples
    children = seed_seq.spawn(n_total + 1)
    epoch_rng = np.random.default_rng(children[0])

    n_corpus = len(corpus)
    if n_corpus == 0:
        raise ValueError("empty corpus")
    replace = n_corpus < epoch_spec.clips
    if replace:
        warnings.warn(
            f"corpus has {n_corpus} clips, fewer than the {epoch_spec.clips} requested; "
            "sampling with replacement",
            stacklevel=2,
        )
    clip_indices = epoch_rng.choice(n_corpus, size=epoch_spec.clips, replace=replace)
    positions = [sample_source_position(box, epoch_rng) for _ in range(epoch_spec.clips)]

    # Shuffled assignment of the flat example index to train/val.
    order = epoch_rng.permutation(n_total)
    split = np.array(["val"] * n_total, dtype=object)
    split[order[: epoch_spec.train_examples]] = "train"

    flat = 0
    for pair, clip_idx in enumerate(clip_indices):
        clip = corpus[int(clip_idx)]
        q = positions[pair]
        for _ in range(epoch_spec.windows_per_clip):
            rng = np.random.default_rng(children[1 + flat])
            guard = 0
            if epoch_spec.guard_band:
                guard = int(math.ceil(sample_delays(q, geom).max()))
            offset = _draw_window_offset(
                clip, epoch_spec.window_samples + guard, epoch_spec.min_rms,
                epoch_spec.max_redraws, rng,
            )
            example = synthesize_example(
                clip, offset, epoch_spec.window_samples, q, geom, noise, rng,
                box=box, guard_band=epoch_spec.guard_band,
            )
            yield example, str(split[flat])
            flat += 1
