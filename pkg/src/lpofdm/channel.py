"""WSSUS tapped-delay-line channel on the OFDM sample grid.

A delay/power profile is quantized to FFT sample indices, each surviving tap
gets an independent Rayleigh-fading complex gain sequence whose temporal
autocorrelation follows the Jakes model (J0 of the Doppler-lag product), and
the per-subcarrier frequency response is synthesized as the DFT of the tap
gains. Tap powers are normalized so the mean channel power is one, which
makes the closed-form time-frequency autocorrelation equal 1 at lag (0, 0).

Gain sequences are produced by coloring white complex Gaussians: short
blocks use an eigen factorization of the Toeplitz J0 correlation matrix,
long runs use circulant embedding (FFT coloring). Both are exact in
expectation up to clipping of numerically negative eigenvalues.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import j0

from .errors import ConfigurationError

# Block sizes up to this use the dense Toeplitz factorization.
_DENSE_BLOCK_LIMIT = 2048

# DVB-T elementary rate: the only sample rate consistent with a 280 us
# symbol of 2048 + 512 samples in an 8 MHz channel.
DVBT_SAMPLE_RATE_HZ = 64e6 / 7


@dataclass(frozen=True)
class TapProfile:
    """Delay/power profile of a tapped-delay-line channel."""

    delays_us: tuple[float, ...]
    powers_db: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self) -> None:
        if len(self.delays_us) != len(self.powers_db):
            raise ConfigurationError("delay and power lists differ in length")
        if len(self.delays_us) == 0:
            raise ConfigurationError("profile needs at least one tap")
        delays = np.asarray(self.delays_us)
        if delays[0] < 0 or np.any(np.diff(delays) <= 0):
            raise ConfigurationError("delays must be non-negative and strictly increasing")

    @property
    def num_taps(self) -> int:
        return len(self.delays_us)

    @property
    def max_delay_us(self) -> float:
        return self.delays_us[-1]

    @classmethod
    def tu6(cls) -> "TapProfile":
        """COST207 Typical Urban 6-tap profile."""
        return cls(
            delays_us=(0.0, 0.2, 0.5, 1.6, 2.3, 5.0),
            powers_db=(-3.0, 0.0, -5.0, -6.0, -8.0, -10.0),
            name="TU6",
        )

    @classmethod
    def single_tap(cls) -> "TapProfile":
        """One tap at delay zero: a flat (frequency-nonselective) channel."""
        return cls(delays_us=(0.0,), powers_db=(0.0,), name="flat")

    @classmethod
    def from_file(cls, path: str | Path) -> "TapProfile":
        """Parse a profile from the key-value text format.

        Lines are ``name: <text>`` and one ``tap: <delay_us> <power_db>`` per
        tap; ``#`` starts a comment.
        """
        name = "custom"
        delays: list[float] = []
        powers: list[float] = []
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ConfigurationError(f"malformed profile line: {raw!r}")
            key, value = (part.strip() for part in line.split(":", 1))
            if key == "name":
                name = value
            elif key == "tap":
                fields = value.split()
                if len(fields) != 2:
                    raise ConfigurationError(f"tap line needs delay and power: {raw!r}")
                delays.append(float(fields[0]))
                powers.append(float(fields[1]))
            else:
                raise ConfigurationError(f"unknown profile key {key!r}")
        return cls(delays_us=tuple(delays), powers_db=tuple(powers), name=name)

    def to_file(self, path: str | Path) -> None:
        lines = [f"name: {self.name}"]
        lines += [f"tap: {d:g} {p:g}" for d, p in zip(self.delays_us, self.powers_db)]
        Path(path).write_text("\n".join(lines) + "\n")


BUILTIN_PROFILES = {
    "tu6": TapProfile.tu6,
    "flat": TapProfile.single_tap,
}


def get_profile(name_or_path: str) -> TapProfile:
    """Resolve a built-in profile name or load one from a file."""
    key = name_or_path.lower()
    if key in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[key]()
    if Path(name_or_path).exists():
        return TapProfile.from_file(name_or_path)
    raise ConfigurationError(
        f"unknown channel profile {name_or_path!r} "
        f"(built-ins: {sorted(BUILTIN_PROFILES)})"
    )


@dataclass(frozen=True)
class SampledCir:
    """Normalized tap powers on the FFT sample grid (sum of rho is one)."""

    rho: np.ndarray
    sample_period: float

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.rho > 0)

    @property
    def active_powers(self) -> np.ndarray:
        return self.rho[self.active_indices]

    @property
    def num_taps(self) -> int:
        return int(self.active_indices.size)


@dataclass(frozen=True)
class DopplerParams:
    """Maximum Doppler frequency and OFDM symbol duration.

    ``beta`` is the per-symbol normalized Doppler f_d * t_ofdm; pass it
    explicitly to override the derived value (keeps f_d for bookkeeping).
    """

    f_d_hz: float
    t_ofdm_s: float
    beta: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.f_d_hz < 0 or self.t_ofdm_s <= 0:
            raise ConfigurationError("need f_d >= 0 and t_ofdm > 0")
        if self.beta is None:
            object.__setattr__(self, "beta", self.f_d_hz * self.t_ofdm_s)


@dataclass(frozen=True)
class TapGains:
    """Complex gain sequences for the active taps of a sampled CIR.

    ``gains[k, q]`` is the gain of active tap k during OFDM symbol q; the
    tap's FFT sample index is ``indices[k]``.
    """

    indices: np.ndarray
    gains: np.ndarray


@dataclass(frozen=True)
class ChannelRealization:
    """Per-subset channel coefficients H[m, s, n, q] plus provenance."""

    coefficients: np.ndarray  # (frames, subbands, l_f, l_t) complex
    seed: object = None
    meta: dict = field(default_factory=dict)

    def subset_chips(self, m: int, s: int) -> np.ndarray:
        """Coefficients of subset (m, s) in chip-linear order (k = n*l_t + q)."""
        return self.coefficients[m, s].reshape(-1)


def quantize_profile(profile: TapProfile, n_fft: int, sample_rate_hz: float) -> SampledCir:
    """Round tap delays to the nearest sample and normalize the powers.

    Taps colliding on one sample index have their linear powers summed.
    """
    delays_s = np.asarray(profile.delays_us) * 1e-6
    indices = np.rint(delays_s * sample_rate_hz).astype(int)
    if indices.max() >= n_fft:
        raise ConfigurationError(
            f"max delay {profile.max_delay_us} us exceeds the FFT window "
            f"({n_fft} samples at {sample_rate_hz:.4g} Hz)"
        )
    linear = 10.0 ** (np.asarray(profile.powers_db) / 10.0)
    rho = np.zeros(n_fft)
    np.add.at(rho, indices, linear)
    rho /= rho.sum()
    return SampledCir(rho=rho, sample_period=1.0 / sample_rate_hz)


@functools.lru_cache(maxsize=64)
def _coloring_factor(beta: float, block_len: int) -> np.ndarray:
    """Real factor A with A @ A.T equal to the Toeplitz J0 correlation matrix.

    Eigenvalues below zero (floating-point noise) are clipped.
    """
    lags = np.arange(block_len)
    corr = toeplitz(j0(2.0 * np.pi * beta * lags))
    eigvals, eigvecs = np.linalg.eigh(corr)
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


@functools.lru_cache(maxsize=16)
def _circulant_spectrum(beta: float, num_symbols: int) -> np.ndarray:
    """Eigenvalue spectrum of a circulant embedding of the J0 correlation."""
    size = 1 << (int(np.ceil(np.log2(max(2 * num_symbols, 16)))) + 1)
    lags = np.arange(size // 2 + 1)
    r = j0(2.0 * np.pi * beta * lags)
    first_row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(first_row).real
    return np.clip(lam, 0.0, None)


def _colored_sequences(beta: float, num_symbols: int, count: int,
                       rng: np.random.Generator) -> np.ndarray:
    """(count, num_symbols) unit-power complex Gaussian sequences with J0 correlation."""
    if num_symbols <= _DENSE_BLOCK_LIMIT:
        factor = _coloring_factor(beta, num_symbols)
        white = rng.standard_normal((count, num_symbols, 2)).view(np.complex128)[..., 0]
        white *= np.sqrt(0.5)
        return white @ factor.T
    lam = _circulant_spectrum(beta, num_symbols)
    size = lam.size
    white = rng.standard_normal((count, size, 2)).view(np.complex128)[..., 0]
    white *= np.sqrt(0.5)
    return np.fft.fft(white * np.sqrt(lam / size), axis=1)[:, :num_symbols]


def generate_tap_gains(cir: SampledCir, doppler: DopplerParams, num_symbols: int,
                       rng: np.random.Generator) -> TapGains:
    """One continuous fading realization for every active tap.

    Each tap k is an independent zero-mean circularly-symmetric complex
    Gaussian sequence with autocorrelation rho_k * J0(2 pi beta dq); taps
    are mutually independent.
    """
    if num_symbols < 1:
        raise ValueError("num_symbols must be >= 1")
    indices = cir.active_indices
    colored = _colored_sequences(doppler.beta, num_symbols, indices.size, rng)
    colored *= np.sqrt(cir.active_powers)[:, None]
    return TapGains(indices=indices, gains=colored)


def generate_tap_gain_blocks(cir: SampledCir, doppler: DopplerParams, block_len: int,
                             num_blocks: int, rng: np.random.Generator) -> np.ndarray:
    """Independent fading blocks, shape (num_blocks, num_taps, block_len).

    Correlation inside a block is exact; blocks are mutually independent
    (Monte-Carlo over subsets only needs intra-subset correlation).
    """
    factor = _coloring_factor(doppler.beta, block_len)
    n_taps = cir.num_taps
    white = rng.standard_normal((num_blocks, n_taps, block_len, 2)).view(np.complex128)[..., 0]
    white *= np.sqrt(0.5)
    colored = white @ factor.T
    colored *= np.sqrt(cir.active_powers)[None, :, None]
    return colored


def subcarrier_phases(indices: np.ndarray, n_fft: int, subcarrier_offset: int,
                      l_f: int) -> np.ndarray:
    """DFT factors exp(-2j pi (offset+n) k / n_fft), shape (num_taps, l_f)."""
    if subcarrier_offset < 0 or subcarrier_offset + l_f > n_fft:
        raise ValueError("requested subcarriers fall outside the FFT grid")
    n = np.arange(subcarrier_offset, subcarrier_offset + l_f)
    return np.exp(-2j * np.pi * np.outer(indices, n) / n_fft)


def freq_response(gains: TapGains | np.ndarray, n_fft: int, subcarrier_offset: int,
                  l_f: int, indices: np.ndarray | None = None) -> np.ndarray:
    """Per-subcarrier response H[n, q] over l_f subcarriers at the given offset.

    Accepts a :class:`TapGains` or a raw gains array (..., num_taps,
    num_symbols) with explicit tap ``indices``; extra leading axes are
    preserved, so batched blocks work too.
    """
    if isinstance(gains, TapGains):
        arr, indices = gains.gains, gains.indices
    else:
        if indices is None:
            raise ValueError("raw gain arrays need explicit tap indices")
        arr = gains
    phases = subcarrier_phases(np.asarray(indices), n_fft, subcarrier_offset, l_f)
    return np.einsum("kn,...kq->...nq", phases, arr)


def autocorrelation(delta_n, delta_q, cir: SampledCir, doppler: DopplerParams,
                    n_fft: int):
    """Closed-form channel autocorrelation R(dn, dq), with R(0, 0) = 1.

    Separable product of the delay-profile DFT over the frequency lag and
    the Jakes J0 factor over the time lag. Accepts scalars or arrays
    (broadcast against each other).
    """
    delta_n = np.asarray(delta_n)
    delta_q = np.asarray(delta_q)
    k = cir.active_indices
    freq = np.exp(-2j * np.pi * np.multiply.outer(delta_n, k) / n_fft) @ cir.active_powers
    time = j0(2.0 * np.pi * doppler.beta * delta_q)
    result = freq * time
    return complex(result) if result.ndim == 0 else result


def realize_subsets(cir: SampledCir, doppler: DopplerParams, l_f: int, l_t: int,
                    num_frames: int, num_subbands: int, n_fft: int,
                    rng: np.random.Generator, subband_offset: int = 0,
                    seed: object = None) -> ChannelRealization:
    """Channel coefficients for a (frames x subbands) tiling of subsets.

    Fading is continuous across the ``num_frames * l_t`` OFDM symbols; all
    sub-bands are synthesized from the same tap gains, so the frequency
    correlation across sub-bands is physical.
    """
    total_symbols = num_frames * l_t
    gains = generate_tap_gains(cir, doppler, total_symbols, rng)
    width = num_subbands * l_f
    h = freq_response(gains, n_fft, subband_offset, width)  # (width, total_symbols)
    h = h.reshape(num_subbands, l_f, num_frames, l_t).transpose(2, 0, 1, 3)
    return ChannelRealization(coefficients=h, seed=seed,
                              meta={"n_fft": n_fft, "subband_offset": subband_offset})
