"""Per-second invocation schedules from per-minute logs and named patterns.

Provider logs report invocations per minute; load generation needs
per-second rates.  The upscaler fills in sub-minute structure with
fractional Gaussian noise (Hurst 0.8 by default, so bursts cluster) while
conserving every per-minute total exactly.  The pattern synthesizer emits
the archetypal load shapes used for benchmarking: steady, fluctuating,
spikes, jump, constant, and on_off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._accel import USE_NUMBA, njit

SECONDS_PER_MINUTE = 60
MAX_FGN_SAMPLES = 1 << 23

PATTERN_KINDS = ("steady", "fluctuating", "spikes", "jump", "constant", "on_off")


class PatternError(ValueError):
    """A pattern spec cannot produce a usable series."""


@dataclass(frozen=True)
class MinuteSeries:
    """Invocation counts per minute."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("minute counts must be non-negative")

    def __len__(self) -> int:
        return len(self.counts)

    @classmethod
    def of(cls, counts: Iterable[int]) -> "MinuteSeries":
        return cls(tuple(int(c) for c in counts))


@dataclass(frozen=True)
class SecondSeries:
    """Invocation rates per second."""

    rates: tuple[int, ...]
    origin: str  # "upscaled" | "synthetic"

    def __post_init__(self):
        if any(r < 0 for r in self.rates):
            raise ValueError("second rates must be non-negative")

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def mean(self) -> float:
        return sum(self.rates) / len(self.rates) if self.rates else 0.0


@dataclass(frozen=True)
class UpscaleConfig:
    """Noise parameters for minute-to-second upscaling."""

    hurst: float = 0.8
    amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must be in (0, 1), got {self.hurst}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")


# Per-kind defaults for the shape knobs left open by PatternSpec.
_BASE_FRACTION = {"fluctuating": 0.7, "spikes": 0.5, "jump": 0.6}
_NOISE_AMPLITUDE = {"steady": 0.25, "fluctuating": 1.0}


@dataclass(frozen=True)
class PatternSpec:
    """One named invocation pattern at a target average rate.

    Shape knobs default per kind (base fraction, noise amplitude, spike
    height/width, jump level/hold) and may be overridden individually.
    """

    kind: str
    average_rate: float
    duration_s: int = 1200
    seed: int = 0
    base_fraction: float | None = None
    amplitude: float | None = None
    spike_height: float = 8.0
    spike_width_s: tuple[int, int] = (2, 5)
    jump_level: float = 2.2
    jump_hold_s: tuple[int, int] = (180, 480)

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.average_rate <= 0:
            raise ValueError("average_rate must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.base_fraction is not None and not 0.0 < self.base_fraction <= 1.0:
            raise ValueError("base_fraction must be in (0, 1]")
        if self.amplitude is not None and self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        for name in ("spike_width_s", "jump_hold_s"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be a positive (low, high) range")

    @property
    def base(self) -> float:
        fraction = self.base_fraction
        if fraction is None:
            fraction = _BASE_FRACTION.get(self.kind, 1.0)
        return fraction * self.average_rate

    @property
    def noise(self) -> float:
        if self.amplitude is not None:
            return self.amplitude
        return _NOISE_AMPLITUDE.get(self.kind, 1.0)


def _fgn_autocovariance(hurst: float, n: int) -> np.ndarray:
    lags = np.arange(n, dtype=np.float64)
    h2 = 2.0 * hurst
    return 0.5 * (
        np.abs(lags + 1.0) ** h2
        + np.abs(lags - 1.0) ** h2
        - 2.0 * np.abs(lags) ** h2
    )


@njit(cache=True)
def _hosking_fill(gamma, noise, phi, prev, out):  # pragma: no cover - jitted
    n = noise.shape[0]
    out[0] = noise[0] * math.sqrt(gamma[0])
    sigma2 = gamma[0]
    for step in range(1, n):
        acc = gamma[step]
        for j in range(1, step):
            acc -= phi[j - 1] * gamma[step - j]
        coeff = acc / sigma2
        for j in range(step - 1):
            prev[j] = phi[j] - coeff * phi[step - 2 - j]
        for j in range(step - 1):
            phi[j] = prev[j]
        phi[step - 1] = coeff
        sigma2 *= 1.0 - coeff * coeff
        mean = 0.0
        for j in range(step):
            mean += phi[j] * out[step - 1 - j]
        out[step] = mean + math.sqrt(sigma2) * noise[step]
    return out


def _hosking_numpy(gamma: np.ndarray, noise: np.ndarray) -> np.ndarray:
    n = noise.shape[0]
    out = np.empty(n)
    phi = np.zeros(n)
    out[0] = noise[0] * math.sqrt(gamma[0])
    sigma2 = gamma[0]
    for step in range(1, n):
        coeff = (gamma[step] - phi[: step - 1] @ gamma[step - 1 : 0 : -1]) / sigma2
        phi[: step - 1] -= coeff * phi[step - 2 :: -1].copy()[: step - 1]
        phi[step - 1] = coeff
        sigma2 *= 1.0 - coeff * coeff
        out[step] = phi[:step] @ out[step - 1 :: -1][:step] + math.sqrt(sigma2) * noise[step]
    return out


def _hosking(gamma: np.ndarray, noise: np.ndarray) -> np.ndarray:
    if USE_NUMBA:
        n = noise.shape[0]
        return _hosking_fill(
            gamma, noise, np.zeros(n), np.zeros(n), np.empty(n)
        )
    return _hosking_numpy(gamma, noise)


def generate_fgn(
    n: int, hurst: float, seed: int = 0, method: str = "auto"
) -> np.ndarray:
    """n samples of zero-mean, unit-variance fractional Gaussian noise.

    Uses circulant embedding (Davies-Harte): the autocovariance sequence
    is embedded in a circulant matrix whose FFT gives the eigenvalues;
    non-negative eigenvalues let colored noise be synthesized with two
    FFTs.  Falls back to Hosking's O(n^2) recursion when the embedding is
    not positive semi-definite (short series with hurst near 1).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > MAX_FGN_SAMPLES:
        raise ValueError(
            f"n={n} exceeds the {MAX_FGN_SAMPLES}-sample budget for the FFT embedding"
        )
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must be in (0, 1), got {hurst}")
    if method not in ("auto", "davies-harte", "hosking"):
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)

    if method in ("auto", "davies-harte"):
        rho = _fgn_autocovariance(hurst, n)
        first_row = np.concatenate([rho, [0.0], rho[:0:-1]])
        eigenvalues = np.fft.fft(first_row).real
        if np.all(eigenvalues >= 0):
            # Hermitian-symmetric complex normals make the inverse FFT real.
            z = np.zeros(2 * n, dtype=complex)
            z[0] = rng.standard_normal()
            z[n] = rng.standard_normal()
            v = rng.standard_normal((n - 1, 2)) if n > 1 else np.empty((0, 2))
            z[1:n] = (v[:, 0] + 1j * v[:, 1]) / math.sqrt(2.0)
            z[n + 1 :] = np.conj(z[1:n][::-1])
            coeffs = np.sqrt(eigenvalues.astype(complex)) * z
            return np.sqrt(2 * n) * np.fft.ifft(coeffs).real[:n]
        if method == "davies-harte":
            raise ValueError(
                "circulant embedding has negative eigenvalues for "
                f"n={n}, hurst={hurst}; use method='hosking'"
            )

    gamma = _fgn_autocovariance(hurst, n)
    noise = rng.standard_normal(n)
    return _hosking(gamma, noise)


def estimate_hurst(
    series: Sequence[float] | np.ndarray,
    min_window: int = 16,
    max_window: int = 128,
) -> float:
    """Rescaled-range Hurst estimate over dyadic window sizes.

    For each window size the series is cut into non-overlapping chunks;
    each chunk's range of cumulative deviations from the chunk mean is
    divided by the chunk's standard deviation, and the log-log slope of
    the mean rescaled range against window size gives the exponent.

    The classic estimator reads white noise slightly above 0.5 at small
    windows; the default 16..128 range keeps that bias mild while staying
    at the sub-minute scales where per-second burst structure lives.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if x.size < 512:
        raise ValueError(f"series too short for estimation: {x.size} < 512")
    if np.ptp(x) == 0:
        raise ValueError("zero variance series has no rescaled range")
    if not 2 <= min_window < max_window:
        raise ValueError("window bounds must satisfy 2 <= min < max")

    log_sizes: list[float] = []
    log_ratios: list[float] = []
    window = min_window
    while window <= min(max_window, x.size // 2):
        chunks = x.size // window
        block = x[: chunks * window].reshape(chunks, window)
        dev = block - block.mean(axis=1, keepdims=True)
        walk = np.cumsum(dev, axis=1)
        spread = walk.max(axis=1) - walk.min(axis=1)
        scale = block.std(axis=1)
        usable = scale > 0
        if usable.any():
            rs = float((spread[usable] / scale[usable]).mean())
            if rs > 0:
                log_sizes.append(math.log2(window))
                log_ratios.append(math.log2(rs))
        window *= 2
    if len(log_sizes) < 2:
        raise ValueError("not enough usable windows for a rescaled-range fit")
    return float(np.polyfit(log_sizes, log_ratios, 1)[0])


def _largest_remainder(values: np.ndarray, total: int) -> np.ndarray:
    """Round non-negative reals to integers that sum exactly to total."""
    floors = np.floor(values).astype(np.int64)
    leftover = total - int(floors.sum())
    if leftover > 0:
        order = np.argsort(-(values - floors), kind="stable")
        floors[order[:leftover]] += 1
    elif leftover < 0:
        # Scaled values sum to the target, so floors can only undershoot;
        # guard anyway against pathological float drift.
        order = np.argsort(values - floors, kind="stable")
        for idx in order:
            if leftover == 0:
                break
            if floors[idx] > 0:
                floors[idx] -= 1
                leftover += 1
    return floors


def upscale(minutes: MinuteSeries, cfg: UpscaleConfig | None = None) -> SecondSeries:
    """Per-second rates from per-minute counts, conserving each minute.

    Each second starts from the minute's uniform baseline and is
    perturbed by fractional Gaussian noise scaled with the square root of
    the baseline (Poisson-like dispersion).  Negative rates clip to zero;
    the minute is then renormalized multiplicatively and rounded with
    largest-remainder so its total matches the input count exactly.
    """
    if cfg is None:
        cfg = UpscaleConfig()
    if len(minutes) == 0:
        raise ValueError("minute series is empty")
    n = len(minutes) * SECONDS_PER_MINUTE
    noise = generate_fgn(n, cfg.hurst, cfg.seed)
    out = np.zeros(n, dtype=np.int64)
    for m, count in enumerate(minutes.counts):
        if count == 0:
            continue
        lo = m * SECONDS_PER_MINUTE
        hi = lo + SECONDS_PER_MINUTE
        baseline = count / SECONDS_PER_MINUTE
        sigma = cfg.amplitude * math.sqrt(max(baseline, 1.0))
        raw = np.maximum(0.0, baseline + sigma * noise[lo:hi])
        raw_total = float(raw.sum())
        if raw_total <= 0.0:
            raw = np.full(SECONDS_PER_MINUTE, baseline)
            raw_total = float(raw.sum())
        scaled = raw * (count / raw_total)
        out[lo:hi] = _largest_remainder(scaled, count)
    return SecondSeries(rates=tuple(int(v) for v in out), origin="upscaled")


def _renormalize_to_total(values: np.ndarray, total: int) -> np.ndarray:
    raw_total = float(values.sum())
    if raw_total <= 0.0 or total <= 0:
        raise PatternError("pattern collapsed to an all-zero series")
    return _largest_remainder(values * (total / raw_total), total)


def synth_pattern(spec: PatternSpec) -> SecondSeries:
    """Emit one named invocation pattern as a per-second series.

    All shapes target a mean of ``average_rate`` over the duration:
    constant and on_off by exact arithmetic, the noise-driven shapes by
    multiplicative renormalization to the rounded total.
    """
    rng = np.random.default_rng(spec.seed)
    rate = spec.average_rate
    n = spec.duration_s
    total = int(round(rate * n))

    if spec.kind == "constant":
        level = int(round(rate))
        if level == 0:
            raise PatternError(
                f"average_rate {rate} rounds to zero invocations per second"
            )
        return SecondSeries(rates=(level,) * n, origin="synthetic")

    if spec.kind == "on_off":
        burst = int(round(4 * rate))
        if burst == 0:
            raise PatternError(f"average_rate {rate} rounds to an empty burst")
        cycle = (burst, 0, 0, 0)
        rates = tuple(cycle[i % 4] for i in range(n))
        return SecondSeries(rates=rates, origin="synthetic")

    if spec.kind == "steady":
        per_minute = int(round(rate * SECONDS_PER_MINUTE))
        n_minutes = -(-n // SECONDS_PER_MINUTE)
        series = upscale(
            MinuteSeries.of([per_minute] * n_minutes),
            UpscaleConfig(amplitude=spec.noise, seed=spec.seed),
        )
        values = np.asarray(series.rates[:n], dtype=np.float64)
        if n % SECONDS_PER_MINUTE:
            values = _renormalize_to_total(values, total).astype(np.float64)
        rates = values.astype(np.int64)
    elif spec.kind == "fluctuating":
        sigma = spec.noise * math.sqrt(max(spec.base, 1.0))
        bursts = np.maximum(0.0, generate_fgn(n, 0.8, spec.seed)) * sigma
        rates = _renormalize_to_total(spec.base + bursts, total)
    elif spec.kind == "spikes":
        values = np.full(n, spec.base)
        expected_spikes = 3.0 * n / 1200.0
        width_lo, width_hi = spec.spike_width_s
        for position in rng.uniform(0, n, size=rng.poisson(expected_spikes)):
            width = int(rng.integers(width_lo, width_hi + 1))
            start = int(position)
            values[start : start + width] += spec.spike_height * rate
        rates = _renormalize_to_total(values, total)
    elif spec.kind == "jump":
        values = np.full(n, spec.base)
        hold_lo, hold_hi = spec.jump_hold_s
        hold = int(rng.integers(hold_lo, hold_hi + 1))
        start = int(rng.integers(0, max(n - hold, 1)))
        values[start : start + hold] = spec.jump_level * rate
        rates = _renormalize_to_total(values, total)
    else:  # pragma: no cover - guarded by PatternSpec
        raise PatternError(f"unknown pattern kind {spec.kind!r}")

    if not rates.any():
        raise PatternError(
            f"average_rate {rate} rounds to an all-zero {spec.kind} series"
        )
    return SecondSeries(rates=tuple(int(v) for v in rates), origin="synthetic")
