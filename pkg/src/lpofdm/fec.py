"""Bit chain: rate-1/2 convolutional code, interleaving, Gray mapping, LLRs.

The code is the standard constraint-length-7 feedforward pair (133, 171)
octal, terminated with six zero tail bits. Soft decisions use the
"positive LLR means bit 0" convention throughout: the de-mapper emits
max-log LLRs in that convention and the Viterbi decoder maximizes the
correlation between LLRs and the +-1 image of candidate codewords.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class CodeConfig:
    """The fixed (133, 171) octal rate-1/2 convolutional code."""

    generators: tuple[int, int] = (0o133, 0o171)
    constraint_length: int = 7
    rate: float = 0.5
    tail_bits: int = 6


CODE = CodeConfig()
_NUM_STATES = 1 << (CODE.constraint_length - 1)


class Modulation(enum.Enum):
    QPSK = "qpsk"
    QAM16 = "16qam"

    @property
    def bits_per_symbol(self) -> int:
        return 2 if self is Modulation.QPSK else 4

    @property
    def constellation(self) -> np.ndarray:
        """Unit-energy Gray table indexed by the bit-group integer (b0 is MSB)."""
        return _CONSTELLATIONS[self]


def _qpsk_table() -> np.ndarray:
    # index = 2*b0 + b1; I from b0, Q from b1; 00 -> (1+j)/sqrt(2)
    table = np.empty(4, dtype=complex)
    for idx in range(4):
        b0, b1 = (idx >> 1) & 1, idx & 1
        table[idx] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2)
    return table


_QAM16_AXIS_LEVELS = np.array([3.0, 1.0, -1.0, -3.0]) / np.sqrt(10)
# level order above corresponds to (msb, lsb) = (0,0), (0,1), (1,1), (1,0)
_QAM16_AXIS_MSB = np.array([0, 0, 1, 1])
_QAM16_AXIS_LSB = np.array([0, 1, 1, 0])


def _qam16_table() -> np.ndarray:
    # index = 8*b0 + 4*b1 + 2*b2 + b3; I axis from (b0, b2), Q from (b1, b3)
    def axis(msb: int, lsb: int) -> float:
        pos = np.flatnonzero((_QAM16_AXIS_MSB == msb) & (_QAM16_AXIS_LSB == lsb))[0]
        return _QAM16_AXIS_LEVELS[pos]

    table = np.empty(16, dtype=complex)
    for idx in range(16):
        b0, b1, b2, b3 = (idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
        table[idx] = axis(b0, b2) + 1j * axis(b1, b3)
    return table


_CONSTELLATIONS = {Modulation.QPSK: _qpsk_table(), Modulation.QAM16: _qam16_table()}


def _generator_taps(generator: int) -> np.ndarray:
    """MSB-first binary expansion of a 7-bit octal generator."""
    k = CODE.constraint_length
    return np.array([(generator >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Encode and terminate: output has 2 * (len(bits) + 6) coded bits.

    Per input bit the two generator outputs are interleaved in the order of
    ``CODE.generators``.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    padded = np.concatenate([bits, np.zeros(CODE.tail_bits, dtype=np.uint8)])
    n_out = padded.size
    coded = np.empty(2 * n_out, dtype=np.uint8)
    for pos, generator in enumerate(CODE.generators):
        stream = np.convolve(padded, _generator_taps(generator))[:n_out] % 2
        coded[pos::2] = stream
    return coded


def _build_trellis():
    """Destination-indexed transition tables for the 64-state trellis.

    For destination state d the two predecessor states and the +-1 images of
    the coded bit pair on each incoming branch are precomputed; the input
    bit that reaches d is its top bit.
    """
    k = CODE.constraint_length
    g0, g1 = CODE.generators
    pred = np.empty((_NUM_STATES, 2), dtype=np.int64)
    sign0 = np.empty((_NUM_STATES, 2))
    sign1 = np.empty((_NUM_STATES, 2))
    dest_bit = np.empty(_NUM_STATES, dtype=np.uint8)
    for dest in range(_NUM_STATES):
        bit = dest >> (k - 2)
        dest_bit[dest] = bit
        base = (dest & (_NUM_STATES // 2 - 1)) << 1
        for j, src in enumerate((base, base + 1)):
            pred[dest, j] = src
            window = (bit << (k - 1)) | src
            out0 = bin(window & g0).count("1") & 1
            out1 = bin(window & g1).count("1") & 1
            sign0[dest, j] = 1.0 - 2.0 * out0
            sign1[dest, j] = 1.0 - 2.0 * out1
    return pred, sign0, sign1, dest_bit


_TRELLIS = _build_trellis()


def _viterbi_loop(llr0, llr1, pred, sign0, sign1, dest_bit):
    """Scalar add-compare-select recursion plus traceback (numba target)."""
    n = llr0.shape[0]
    n_states = pred.shape[0]
    pm = np.full(n_states, -1e30)
    pm[0] = 0.0
    new_pm = np.empty(n_states)
    choice = np.empty((n, n_states), dtype=np.uint8)
    for t in range(n):
        l0 = llr0[t]
        l1 = llr1[t]
        for d in range(n_states):
            c0 = pm[pred[d, 0]] + sign0[d, 0] * l0 + sign1[d, 0] * l1
            c1 = pm[pred[d, 1]] + sign0[d, 1] * l0 + sign1[d, 1] * l1
            if c0 >= c1:
                new_pm[d] = c0
                choice[t, d] = 0
            else:
                new_pm[d] = c1
                choice[t, d] = 1
        for d in range(n_states):
            pm[d] = new_pm[d]
    bits = np.empty(n, dtype=np.uint8)
    state = 0
    for t in range(n - 1, -1, -1):
        bits[t] = dest_bit[state]
        state = pred[state, choice[t, state]]
    return bits


if _HAVE_NUMBA:
    _viterbi_fast = njit(cache=True, nogil=True)(_viterbi_loop)
else:  # pragma: no cover
    _viterbi_fast = None


def _viterbi_numpy(llr0, llr1, pred, sign0, sign1, dest_bit):
    """Vectorized-over-states recursion; reference path for the numba kernel."""
    n = llr0.shape[0]
    pm = np.full(_NUM_STATES, -1e30)
    pm[0] = 0.0
    choice = np.empty((n, _NUM_STATES), dtype=np.uint8)
    p0, p1 = pred[:, 0], pred[:, 1]
    for t in range(n):
        c0 = pm[p0] + sign0[:, 0] * llr0[t] + sign1[:, 0] * llr1[t]
        c1 = pm[p1] + sign0[:, 1] * llr0[t] + sign1[:, 1] * llr1[t]
        take = c1 > c0
        choice[t] = take
        pm = np.where(take, c1, c0)
    bits = np.empty(n, dtype=np.uint8)
    state = 0
    for t in range(n - 1, -1, -1):
        bits[t] = dest_bit[state]
        state = pred[state, choice[t, state]]
    return bits


def viterbi_decode(llrs: np.ndarray, use_fast: bool = True) -> np.ndarray:
    """Maximum-likelihood decode of soft inputs back to message bits.

    ``llrs`` holds two entries per trellis step (positive favors bit 0) and
    must cover the message plus the six tail bits; the terminating tail is
    stripped from the output.
    """
    llrs = np.ascontiguousarray(llrs, dtype=np.float64)
    if llrs.ndim != 1 or llrs.size % 2 != 0:
        raise ValueError("LLR stream must be 1-D with two entries per coded step")
    n_steps = llrs.size // 2
    if n_steps <= CODE.tail_bits:
        raise ValueError("LLR stream shorter than the termination tail")
    pred, sign0, sign1, dest_bit = _TRELLIS
    runner = _viterbi_fast if (use_fast and _viterbi_fast is not None) else _viterbi_numpy
    bits = runner(llrs[0::2], llrs[1::2], pred, sign0, sign1, dest_bit)
    return bits[: n_steps - CODE.tail_bits]


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n)


def interleave(items: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """Output position j carries input ``permutation[j]``."""
    return np.asarray(items)[permutation]


def deinterleave(items: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`interleave` for the same permutation."""
    items = np.asarray(items)
    out = np.empty_like(items)
    out[permutation] = items
    return out


def block_interleave(items: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Write row-major into a (rows, cols) block, read column-major.

    Adjacent inputs come out ``rows`` positions apart.
    """
    items = np.asarray(items)
    if items.shape[0] != rows * cols:
        raise ValueError(f"length {items.shape[0]} != rows*cols = {rows * cols}")
    return items.reshape(rows, cols).T.reshape(-1)


def block_deinterleave(items: np.ndarray, rows: int, cols: int) -> np.ndarray:
    items = np.asarray(items)
    if items.shape[0] != rows * cols:
        raise ValueError(f"length {items.shape[0]} != rows*cols = {rows * cols}")
    return items.reshape(cols, rows).T.reshape(-1)


def map_symbols(bits: np.ndarray, scheme: Modulation) -> np.ndarray:
    """Gray-map a bit stream onto unit-energy complex symbols."""
    bits = np.asarray(bits, dtype=np.uint8)
    bps = scheme.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    return scheme.constellation[groups @ weights]


def demap_soft(symbols: np.ndarray, scheme: Modulation,
               noise_var: np.ndarray | float) -> np.ndarray:
    """Max-log LLRs for equalized symbols (positive favors bit 0).

    ``noise_var`` is the effective per-symbol noise variance after
    equalization; a scalar or an array broadcastable to the symbol shape.
    """
    symbols = np.asarray(symbols)
    noise_var = np.maximum(np.broadcast_to(np.asarray(noise_var, dtype=float),
                                           symbols.shape), 1e-300)
    if scheme is Modulation.QPSK:
        scale = 2.0 * np.sqrt(2.0) / noise_var
        llrs = np.empty(symbols.shape + (2,))
        llrs[..., 0] = scale * symbols.real
        llrs[..., 1] = scale * symbols.imag
        return llrs.reshape(-1)
    llrs = np.empty(symbols.shape + (4,))
    for axis_pos, axis_vals in ((0, symbols.real), (1, symbols.imag)):
        dist = (axis_vals[..., None] - _QAM16_AXIS_LEVELS) ** 2
        for bit_sel, out_col in ((_QAM16_AXIS_MSB, axis_pos), (_QAM16_AXIS_LSB, axis_pos + 2)):
            d0 = dist[..., bit_sel == 0].min(axis=-1)
            d1 = dist[..., bit_sel == 1].min(axis=-1)
            llrs[..., out_col] = (d1 - d0) / noise_var
    return llrs.reshape(-1)


def hard_bits(llrs: np.ndarray) -> np.ndarray:
    """Hard decisions under the positive-means-zero convention."""
    return (np.asarray(llrs) < 0).astype(np.uint8)


def ebno_to_sigma(ebno_db: float, scheme: Modulation, code_rate: float,
                  config, gi_overhead: float = 1.0) -> float:
    """Noise variance per complex chip for a target Eb/No.

    The energy reference is the average power of one data symbol under the
    active power allocation (the pilot is overhead, not information), so

        sigma_w^2 = P_data * gi_overhead / (code_rate * bits_per_symbol * Eb/No)

    ``gi_overhead`` accounts for transmit energy spent on the guard interval
    ((N_FFT + N_GI) / N_FFT when included, 1.0 when not).
    """
    from .precoding import mean_data_power

    if ebno_db == np.inf:
        return 0.0
    ebno = 10.0 ** (ebno_db / 10.0)
    return mean_data_power(config) * gi_overhead / (code_rate * scheme.bits_per_symbol * ebno)


def dump_constellation(scheme: Modulation, path: str | Path) -> None:
    """Write the bit-group to symbol table as text for audit."""
    bps = scheme.bits_per_symbol
    lines = [f"# {scheme.value}: bits (b0..b{bps - 1}) -> symbol"]
    for idx, sym in enumerate(scheme.constellation):
        bits = format(idx, f"0{bps}b")
        lines.append(f"{bits} {sym.real:+.12f} {sym.imag:+.12f}")
    Path(path).write_text("\n".join(lines) + "\n")


def dump_permutation(permutation: np.ndarray, path: str | Path) -> None:
    """Write an interleaver permutation (one output-to-input index per line)."""
    Path(path).write_text("\n".join(str(int(i)) for i in permutation) + "\n")
