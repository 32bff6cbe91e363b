"""Spread-pilot channel estimation and its closed-form error analysis.

The receiver de-spreads each subset with the pilot sequence and divides by
the known pilot symbol, producing one complex coefficient per subset. The
estimate decomposes into the true subset-average channel, a self-interference
(SI) term from data leaking through the channel's variation across the
subset, and a filtered noise term. Both error variances have closed forms
driven by the channel autocorrelation; they are implemented here next to the
estimator so the Monte-Carlo and analytical routes stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DopplerParams, SampledCir, autocorrelation
from .precoding import (
    PrecodeConfig,
    PrecodeMatrix,
    PowerMatrix,
    build_walsh_hadamard,
    mean_data_power,
)


@dataclass(frozen=True)
class SubsetObservation:
    """Received chips of one subset (chip-linear order) and its pilot symbol."""

    z: np.ndarray
    pilot_symbol: complex


@dataclass(frozen=True)
class EstimateRecord:
    """One subset's estimate next to the true subset average."""

    h_hat: complex
    h_true_avg: complex
    subset_id: tuple[int, int] = (0, 0)

    @property
    def error(self) -> complex:
        return self.h_hat - self.h_true_avg


@dataclass(frozen=True)
class MseBreakdown:
    """Estimator MSE split into its self-interference and noise parts."""

    si_variance: float
    noise_variance: float

    @property
    def total(self) -> float:
        return self.si_variance + self.noise_variance


def estimate_subset(obs: SubsetObservation, pilot_code: np.ndarray) -> complex:
    """De-spread with the pilot sequence and divide by the pilot symbol."""
    if obs.pilot_symbol == 0:
        raise ValueError("pilot symbol must be non-zero")
    return complex(np.dot(np.conj(pilot_code), obs.z) / obs.pilot_symbol)


def estimate_subsets(z: np.ndarray, pilot_code: np.ndarray,
                     pilot_symbols: np.ndarray | complex) -> np.ndarray:
    """Vectorized :func:`estimate_subset` over rows of ``z`` (shape (N, L))."""
    return (z @ np.conj(pilot_code)) / pilot_symbols


def true_subset_average(h_diag: np.ndarray) -> complex:
    """Average channel coefficient over one subset: (1/L) tr(H)."""
    h_diag = np.asarray(h_diag)
    return complex(h_diag.mean())


def equalize_despread(z: np.ndarray, h_hat: complex, matrix: PrecodeMatrix,
                      power: PowerMatrix, pilot_index: int, mode: str = "zf",
                      noise_var: float = 0.0) -> np.ndarray:
    """De-spread all data sequences and equalize with one coefficient.

    Returns the L-1 data symbol estimates. ``mode`` selects the gain applied
    to each de-spread output: "zf" uses conj(h)/|h|^2, "mmse" uses
    conj(h)/(|h|^2 + noise_var). A zero estimate under ZF yields all-zero
    soft outputs (an erasure) rather than an error.
    """
    despread = matrix.entries.T @ np.asarray(z)
    data = np.delete(despread, pilot_index)
    amps = np.delete(power.amplitudes, pilot_index)
    h_sq = abs(h_hat) ** 2
    if mode == "zf":
        if h_sq == 0.0:
            return np.zeros_like(data)
        gain = np.conj(h_hat) / h_sq
    elif mode == "mmse":
        gain = np.conj(h_hat) / (h_sq + noise_var)
    else:
        raise ValueError(f"unknown equalizer mode {mode!r}")
    return data * gain / amps


def lag_weighted_sum(table: np.ndarray, l_f: int, l_t: int) -> complex:
    """Reduce the quadruple correlation sum using lag multiplicities.

    ``table[dn + l_f - 1, dq + l_t - 1]`` holds R(dn, dq) for lags
    dn in (-l_f, l_f), dq in (-l_t, l_t). The sum over all index pairs
    (n, q, n', q') equals sum over lags of (l_f-|dn|)(l_t-|dq|) R(dn, dq).
    """
    if table.shape != (2 * l_f - 1, 2 * l_t - 1):
        raise ValueError(f"lag table shape {table.shape} does not match ({l_f}, {l_t})")
    wn = l_f - np.abs(np.arange(-(l_f - 1), l_f))
    wq = l_t - np.abs(np.arange(-(l_t - 1), l_t))
    return complex(wn @ table @ wq)


def autocorrelation_lag_table(cir: SampledCir, doppler: DopplerParams, n_fft: int,
                              l_f: int, l_t: int) -> np.ndarray:
    """R(dn, dq) on the full lag grid needed by :func:`lag_weighted_sum`."""
    dn = np.arange(-(l_f - 1), l_f)
    dq = np.arange(-(l_t - 1), l_t)
    freq = autocorrelation(dn, 0, cir, doppler, n_fft)
    time = autocorrelation(np.zeros(dq.size, dtype=int), dq, cir, doppler, n_fft).real
    return np.outer(freq, time)


def correlation_deficit(config: PrecodeConfig, cir: SampledCir,
                        doppler: DopplerParams, n_fft: int) -> float:
    """1 - (1/L^2) * quadruple sum of R: the orthogonality loss over a subset.

    Zero for a channel that is flat (in both directions) across the subset;
    grows toward one as the subset decorrelates.
    """
    table = autocorrelation_lag_table(cir, doppler, n_fft, config.l_f, config.l_t)
    total = lag_weighted_sum(table, config.l_f, config.l_t)
    if abs(total.imag) > 1e-10 * max(1.0, abs(total.real)):
        raise ArithmeticError(
            f"correlation sum should be real, got imaginary part {total.imag:g}"
        )
    deficit = 1.0 - total.real / config.length**2
    return max(deficit, 0.0)


def si_variance_analytical(config: PrecodeConfig, cir: SampledCir,
                           doppler: DopplerParams, n_fft: int) -> float:
    """Exact self-interference variance of the subset estimate.

    Equals (P_data / P_p) * (1 - (1/L^2) sum R) for the uniform data powers
    produced by :func:`lpofdm.precoding.allocate_powers`; with unit data
    power the prefactor reduces to 1/P_p. For non-uniform data powers the
    mean data power is used, which is the large-L approximation.
    """
    deficit = correlation_deficit(config, cir, doppler, n_fft)
    return mean_data_power(config) / config.pilot_power * deficit


def mse_analytical(config: PrecodeConfig, cir: SampledCir, doppler: DopplerParams,
                   n_fft: int, sigma_w2: float) -> MseBreakdown:
    """Closed-form estimator MSE: SI variance plus sigma_w^2 / P_p."""
    if sigma_w2 < 0:
        raise ValueError("noise variance must be non-negative")
    return MseBreakdown(
        si_variance=si_variance_analytical(config, cir, doppler, n_fft),
        noise_variance=sigma_w2 / config.pilot_power,
    )


def verify_rm_property(length: int, trials: int, rng: np.random.Generator,
                       power_spread: float = 0.0, pilot_index: int = 0) -> float:
    """Deviation of C_u P_u' C_u^H from P_mean (I - c_p c_p^H), Frobenius / L.

    With uniform data powers the two sides agree exactly (orthonormal
    columns), so the deviation is at machine level. ``power_spread`` draws
    data powers uniformly in [1 - spread, 1 + spread] per trial; the mean
    deviation over trials shrinks as the spreading length grows.
    """
    order = length.bit_length() - 1
    if 1 << order != length:
        raise ValueError(f"spreading length {length} is not a power of two")
    matrix = build_walsh_hadamard(order).entries
    c_p = matrix[:, pilot_index]
    c_u = np.delete(matrix, pilot_index, axis=1)
    target_shape = np.eye(length) - np.outer(c_p, c_p)
    deviations = np.empty(trials)
    for t in range(trials):
        if power_spread > 0.0:
            powers = 1.0 + power_spread * rng.uniform(-1.0, 1.0, length - 1)
        else:
            powers = np.ones(length - 1)
        lhs = (c_u * powers) @ c_u.T
        deviations[t] = np.linalg.norm(lhs - powers.mean() * target_shape) / length
    return float(deviations.mean())
