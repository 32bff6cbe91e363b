"""Walsh-Hadamard precoding: spreading matrices, power allocation, 2D chip mapping.

A block of L = l_f * l_t complex symbols is multiplied by an orthonormal
Walsh-Hadamard matrix and laid out on a subset of l_f adjacent subcarriers
over l_t consecutive OFDM symbols. One column of the matrix is reserved for
the pilot symbol.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MAX_ORDER = 12  # L <= 4096


class PowerMode(enum.Enum):
    """How data-symbol powers relate to the pilot power.

    UNIT_DATA: every data symbol gets power 1 regardless of the pilot.
    TOTAL_NORMALIZED: data powers shrink so the subset's total power stays L
    (the pilot energy is taken out of the data budget).
    """

    UNIT_DATA = "unit"
    TOTAL_NORMALIZED = "total"


@dataclass(frozen=True)
class PrecodeConfig:
    """Spreading geometry and power split for one subset of subcarriers."""

    order_n: int
    l_t: int
    l_f: int
    pilot_index: int = 0
    pilot_power: float = 1.0
    power_mode: PowerMode = PowerMode.TOTAL_NORMALIZED

    def __post_init__(self) -> None:
        if not 1 <= self.order_n <= MAX_ORDER:
            raise ConfigurationError(
                f"spreading order {self.order_n} outside [1, {MAX_ORDER}]"
            )
        if self.l_t < 1 or self.l_f < 1:
            raise ConfigurationError("spreading factors must be >= 1")
        if self.l_t * self.l_f != self.length:
            raise ConfigurationError(
                f"l_f*l_t = {self.l_f * self.l_t} does not equal L = {self.length}"
            )
        if not 0 <= self.pilot_index < self.length:
            raise ConfigurationError(
                f"pilot index {self.pilot_index} outside [0, {self.length})"
            )
        if self.pilot_power <= 0:
            raise ConfigurationError("pilot power must be positive")

    @property
    def length(self) -> int:
        """Spreading length L = 2**order_n."""
        return 1 << self.order_n


@dataclass(frozen=True)
class PrecodeMatrix:
    """Orthonormal L x L spreading matrix; column i is the sequence c_i."""

    entries: np.ndarray

    @property
    def length(self) -> int:
        return self.entries.shape[0]

    def column(self, i: int) -> np.ndarray:
        if not 0 <= i < self.length:
            raise ValueError(f"sequence index {i} outside [0, {self.length})")
        return self.entries[:, i]


@dataclass(frozen=True)
class PowerMatrix:
    """Diagonal of per-symbol amplitudes sqrt(P_i)."""

    amplitudes: np.ndarray

    @property
    def powers(self) -> np.ndarray:
        return self.amplitudes**2


def build_walsh_hadamard(order_n: int) -> PrecodeMatrix:
    """Build the Sylvester Walsh-Hadamard matrix of size 2**order_n / sqrt(L).

    Entries are +-1/sqrt(L); columns are exactly orthonormal.
    """
    if not 1 <= order_n <= MAX_ORDER:
        raise ConfigurationError(f"order {order_n} outside [1, {MAX_ORDER}]")
    h = np.ones((1, 1))
    for _ in range(order_n):
        h = np.block([[h, h], [h, -h]])
    length = 1 << order_n
    return PrecodeMatrix(h / np.sqrt(length))


def allocate_powers(config: PrecodeConfig) -> PowerMatrix:
    """Per-symbol amplitude vector for the given power mode.

    UNIT_DATA assigns power 1 to every data symbol; TOTAL_NORMALIZED assigns
    (L - P_p)/(L - 1) so that pilot plus data powers sum to L.
    """
    length = config.length
    p_p = config.pilot_power
    if config.power_mode is PowerMode.TOTAL_NORMALIZED:
        if p_p >= length:
            raise ConfigurationError(
                f"pilot power {p_p} leaves no power for data (L = {length})"
            )
        data_power = (length - p_p) / (length - 1)
    else:
        data_power = 1.0
    powers = np.full(length, data_power)
    powers[config.pilot_index] = p_p
    return PowerMatrix(np.sqrt(powers))


def mean_data_power(config: PrecodeConfig) -> float:
    """Average power of the data (non-pilot) symbols."""
    powers = allocate_powers(config).powers
    mask = np.arange(config.length) != config.pilot_index
    return float(powers[mask].mean())


def chip_map(chips: np.ndarray, config: PrecodeConfig) -> np.ndarray:
    """Lay a length-L chip vector onto the (l_f, l_t) subset grid.

    Chip k lands on subcarrier n = k // l_t, OFDM symbol q = k % l_t: the
    first l_t chips run in the time direction on the first subcarrier, the
    next l_t on the second, and so on (zigzag in time).
    """
    chips = np.asarray(chips)
    if chips.shape != (config.length,):
        raise ValueError(f"expected {config.length} chips, got shape {chips.shape}")
    return chips.reshape(config.l_f, config.l_t)


def chip_demap(grid: np.ndarray, config: PrecodeConfig) -> np.ndarray:
    """Exact inverse of :func:`chip_map`."""
    grid = np.asarray(grid)
    if grid.shape != (config.l_f, config.l_t):
        raise ValueError(
            f"expected grid of shape ({config.l_f}, {config.l_t}), got {grid.shape}"
        )
    return grid.reshape(config.length)


def precode(x: np.ndarray, power: PowerMatrix, matrix: PrecodeMatrix) -> np.ndarray:
    """Spread a symbol vector: returns C @ diag(sqrt(P)) @ x."""
    x = np.asarray(x)
    length = matrix.length
    if x.shape != (length,) or power.amplitudes.shape != (length,):
        raise ValueError("vector/power dimensions do not match the matrix")
    return matrix.entries @ (power.amplitudes * x)


def deprecode(z: np.ndarray, code_index: int, matrix: PrecodeMatrix) -> complex:
    """Inner product c_i^H z for the given sequence index."""
    z = np.asarray(z)
    if z.shape != (matrix.length,):
        raise ValueError(f"expected length {matrix.length}, got shape {z.shape}")
    return complex(np.dot(matrix.column(code_index), z))
