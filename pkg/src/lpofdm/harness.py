"""Seeded experiment orchestration: MSE/BER sweeps, channel probes, tables.

Every experiment is driven by a RunConfig and a master seed. Monte-Carlo
work is split into batches; batch b of sweep point p draws its RNG from
SeedSequence([seed, p, b]), and partial results are reduced in batch order,
so outputs are byte-identical regardless of the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import channel as chan
from . import estimation as est
from .errors import ConfigurationError
from .fec import (
    CODE,
    Modulation,
    block_interleave,
    conv_encode,
    demap_soft,
    ebno_to_sigma,
    map_symbols,
    viterbi_decode,
)
from .precoding import (
    PowerMode,
    PrecodeConfig,
    allocate_powers,
    build_walsh_hadamard,
    mean_data_power,
)

SPEED_OF_LIGHT_M_S = 299_792_458.0

_MSE_BATCH = 10_000
_BER_WAVE = 4
_TARGET_BATCH_MSG_BITS = 24_000

# Spreading geometry used when only L is given.
DEFAULT_GEOMETRY = {2: (2, 1), 4: (2, 2), 8: (4, 2), 16: (4, 4), 32: (8, 4),
                    64: (8, 8), 128: (16, 8), 256: (16, 16)}

EXPERIMENTS = ("mse", "ber", "probe", "bitrate", "rmcheck")


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs, flags and file mirror these fields."""

    experiment: str = "mse"
    spreading_length: int = 64
    l_f: int | None = None
    l_t: int | None = None
    pilot_index: int = 0
    pilot_power: float = 7.0
    power_mode: str = "total"
    modulation: str = "qpsk"
    profile: str = "tu6"
    speed_kmh: float | None = 120.0
    f_d_hz: float | None = None
    carrier_hz: float = 500e6
    n_fft: int = 2048
    guard: int = 512
    sample_rate_hz: float = chan.DVBT_SAMPLE_RATE_HZ
    beta_override: float | None = None
    ebno_grid_db: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    num_subsets: int = 100_000
    target_bit_errors: int = 200
    max_bits: int = 2_000_000
    data_subcarriers: int = 1536
    frames_per_batch: int = 0
    baseline: str | None = None
    include_gi_loss: bool = True
    equalizer: str = "zf"
    rm_trials: int = 100
    seed: int = 1
    workers: int = 1

    def __post_init__(self) -> None:
        if self.l_f is None or self.l_t is None:
            geometry = DEFAULT_GEOMETRY.get(self.spreading_length)
            if geometry is None:
                raise ConfigurationError(
                    f"no default (l_f, l_t) for L = {self.spreading_length}; "
                    "pass both explicitly"
                )
            object.__setattr__(self, "l_f", geometry[0])
            object.__setattr__(self, "l_t", geometry[1])

    # -- derived quantities -------------------------------------------------

    @property
    def t_ofdm_s(self) -> float:
        return (self.n_fft + self.guard) / self.sample_rate_hz

    @property
    def gi_overhead(self) -> float:
        return (self.n_fft + self.guard) / self.n_fft if self.include_gi_loss else 1.0

    @property
    def doppler_freq_hz(self) -> float:
        if self.f_d_hz is not None:
            return self.f_d_hz
        if self.speed_kmh is None:
            raise ConfigurationError("need either a mobile speed or a Doppler frequency")
        return (self.speed_kmh / 3.6) / SPEED_OF_LIGHT_M_S * self.carrier_hz

    def doppler(self) -> chan.DopplerParams:
        return chan.DopplerParams(self.doppler_freq_hz, self.t_ofdm_s,
                                  beta=self.beta_override)

    def precode_config(self) -> PrecodeConfig:
        order = self.spreading_length.bit_length() - 1
        if 1 << order != self.spreading_length:
            raise ConfigurationError(
                f"spreading length {self.spreading_length} is not a power of two"
            )
        return PrecodeConfig(
            order_n=order, l_t=self.l_t, l_f=self.l_f,
            pilot_index=self.pilot_index, pilot_power=self.pilot_power,
            power_mode=PowerMode(self.power_mode),
        )

    def scheme(self) -> Modulation:
        try:
            return Modulation(self.modulation)
        except ValueError as exc:
            raise ConfigurationError(f"unknown modulation {self.modulation!r}") from exc

    def sampled_cir(self) -> chan.SampledCir:
        profile = chan.get_profile(self.profile)
        return chan.quantize_profile(profile, self.n_fft, self.sample_rate_hz)

    def sigma_w2(self, ebno_db: float) -> float:
        return ebno_to_sigma(ebno_db, self.scheme(), CODE.rate,
                             self.precode_config(), self.gi_overhead)

    @property
    def num_subbands(self) -> int:
        return self.data_subcarriers // self.l_f

    def digest(self) -> str:
        """Short stable hash of every field that defines the experiment.

        The worker count only affects scheduling, never results, so it is
        excluded.
        """
        items = []
        for f in dataclasses.fields(self):
            if f.name == "workers":
                continue
            items.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256(";".join(items).encode()).hexdigest()[:12]


def validate(config: RunConfig) -> None:
    """Reject infeasible configurations before any work starts."""
    if config.experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {config.experiment!r}")
    if config.power_mode not in ("total", "unit"):
        raise ConfigurationError(f"unknown power mode {config.power_mode!r}")
    if config.baseline not in (None, "perfect-csi"):
        raise ConfigurationError(f"unknown baseline {config.baseline!r}")
    if config.equalizer not in ("zf", "mmse"):
        raise ConfigurationError(f"unknown equalizer {config.equalizer!r}")
    if config.workers < 1:
        raise ConfigurationError("workers must be >= 1")
    config.scheme()
    pc = config.precode_config()
    cir = config.sampled_cir()
    if config.experiment in ("mse", "ber", "probe"):
        config.doppler()
        if int(cir.active_indices.max()) > config.guard:
            raise ConfigurationError(
                f"guard interval ({config.guard} samples) shorter than the "
                f"channel delay spread ({int(cir.active_indices.max())} samples)"
            )
    if config.experiment in ("mse", "ber") and not config.ebno_grid_db:
        raise ConfigurationError("empty Eb/No grid")
    if config.experiment in ("mse", "probe") and config.num_subsets < 1:
        raise ConfigurationError("num_subsets must be >= 1")
    if config.experiment == "ber":
        if config.target_bit_errors < 1 or config.max_bits < 1:
            raise ConfigurationError("bit-error target and bit budget must be >= 1")
        if config.data_subcarriers % pc.l_f != 0:
            raise ConfigurationError(
                f"data subcarriers ({config.data_subcarriers}) must divide into "
                f"sub-bands of l_f = {pc.l_f}"
            )
        if config.num_subbands * pc.l_f > config.n_fft:
            raise ConfigurationError("data region exceeds the FFT size")


@dataclass(frozen=True)
class SweepRecord:
    """One (Eb/No, metric) row; unused metrics stay None for the other sweep."""

    ebno_db: float
    mse_simulated: float | None = None
    mse_analytical: float | None = None
    si_floor: float | None = None
    ber: float | None = None
    bit_errors: int | None = None
    bits_counted: int | None = None
    csi: str = "estimated"
    config_digest: str = ""
    seed: int = 0


@dataclass(frozen=True)
class ProbeRecord:
    delta_n: int
    delta_q: int
    r_analytical_re: float
    r_analytical_im: float
    r_empirical_re: float
    r_empirical_im: float
    abs_dev: float
    config_digest: str = ""
    seed: int = 0


@dataclass(frozen=True)
class BitrateRecord:
    spreading_length: int
    modulation: str
    useful_rate_mbps: float
    ratio_vs_l16: float
    config_digest: str = ""


@dataclass(frozen=True)
class RmCheckRecord:
    spreading_length: int
    trials: int
    deviation_uniform: float
    deviation_spread: float
    power_spread: float
    config_digest: str = ""
    seed: int = 0


def _rng_for(seed: int, point: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, batch]))


def _map_batches(fn: Callable, tasks: Sequence, workers: int) -> list:
    """Run batch tasks, preserving task order in the returned list."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# MSE sweep
# ---------------------------------------------------------------------------


@dataclass
class _MseContext:
    pc: PrecodeConfig
    matrix_t: np.ndarray
    pilot_col: np.ndarray
    amps: np.ndarray
    table: np.ndarray
    cir: chan.SampledCir
    doppler: chan.DopplerParams
    n_fft: int


def _build_mse_context(config: RunConfig) -> _MseContext:
    pc = config.precode_config()
    matrix = build_walsh_hadamard(pc.order_n)
    return _MseContext(
        pc=pc,
        matrix_t=matrix.entries.T.copy(),
        pilot_col=matrix.entries[:, pc.pilot_index].copy(),
        amps=allocate_powers(pc).amplitudes,
        table=config.scheme().constellation,
        cir=config.sampled_cir(),
        doppler=config.doppler(),
        n_fft=config.n_fft,
    )


def _mse_batch(ctx: _MseContext, sigma_w2: float, size: int,
               rng: np.random.Generator) -> float:
    """Sum of squared estimation errors over ``size`` independent subsets."""
    pc = ctx.pc
    blocks = chan.generate_tap_gain_blocks(ctx.cir, ctx.doppler, pc.l_t, size, rng)
    h = chan.freq_response(blocks, ctx.n_fft, 0, pc.l_f,
                           indices=ctx.cir.active_indices)
    chips = h.reshape(size, pc.length)
    x = ctx.table[rng.integers(0, ctx.table.size, (size, pc.length))]
    x[:, pc.pilot_index] = 1.0
    z = chips * ((x * ctx.amps) @ ctx.matrix_t)
    if sigma_w2 > 0.0:
        noise = rng.standard_normal((size, pc.length, 2)).view(np.complex128)[..., 0]
        z += noise * np.sqrt(sigma_w2 / 2.0)
    h_est = (z @ ctx.pilot_col) / ctx.amps[pc.pilot_index]
    err = h_est - chips.mean(axis=1)
    return float(np.vdot(err, err).real)


def iter_mse_sweep(config: RunConfig) -> Iterator[SweepRecord]:
    """Yield one record per Eb/No point (simulated, analytical, floor)."""
    validate(config)
    ctx = _build_mse_context(config)
    digest = config.digest()
    floor = est.si_variance_analytical(ctx.pc, ctx.cir, ctx.doppler, ctx.n_fft)
    sizes = [_MSE_BATCH] * (config.num_subsets // _MSE_BATCH)
    if config.num_subsets % _MSE_BATCH:
        sizes.append(config.num_subsets % _MSE_BATCH)
    for point, ebno in enumerate(config.ebno_grid_db):
        sigma_w2 = config.sigma_w2(ebno)
        analytical = est.mse_analytical(ctx.pc, ctx.cir, ctx.doppler, ctx.n_fft,
                                        sigma_w2)

        def task(args, _sigma=sigma_w2, _point=point):
            batch, size = args
            return _mse_batch(ctx, _sigma, size, _rng_for(config.seed, _point, batch))

        sums = _map_batches(task, list(enumerate(sizes)), config.workers)
        yield SweepRecord(
            ebno_db=ebno,
            mse_simulated=math.fsum(sums) / config.num_subsets,
            mse_analytical=analytical.total,
            si_floor=floor,
            config_digest=digest,
            seed=config.seed,
        )


def run_mse_sweep(config: RunConfig) -> list[SweepRecord]:
    return list(iter_mse_sweep(config))


# ---------------------------------------------------------------------------
# BER sweep
# ---------------------------------------------------------------------------


@dataclass
class _BerContext:
    pc: PrecodeConfig
    matrix: np.ndarray
    matrix_t: np.ndarray
    pilot_col: np.ndarray
    amps: np.ndarray
    data_idx: np.ndarray
    scheme: Modulation
    cir: chan.SampledCir
    doppler: chan.DopplerParams
    n_fft: int
    subbands: int
    frames: int
    n_slots: int
    coded_len: int
    msg_len: int
    block_idx: np.ndarray
    mean_p_data: float
    interference_var: float
    equalizer: str


def _build_ber_context(config: RunConfig) -> _BerContext:
    pc = config.precode_config()
    matrix = build_walsh_hadamard(pc.order_n)
    scheme = config.scheme()
    cir = config.sampled_cir()
    doppler = config.doppler()
    subbands = config.num_subbands
    bps = scheme.bits_per_symbol
    per_frame_msg = subbands * (pc.length - 1) * bps // 2
    if config.frames_per_batch > 0:
        frames = config.frames_per_batch
    else:
        frames = int(np.clip(round(_TARGET_BATCH_MSG_BITS / per_frame_msg), 2, 64))
    n_slots = frames * subbands * (pc.length - 1)
    coded_len = n_slots * bps
    p_d = mean_data_power(pc)
    deficit = est.correlation_deficit(pc, cir, doppler, config.n_fft)
    other_power = (pc.pilot_power + (pc.length - 2) * p_d) / (pc.length - 1)
    return _BerContext(
        pc=pc,
        matrix=matrix.entries,
        matrix_t=matrix.entries.T.copy(),
        pilot_col=matrix.entries[:, pc.pilot_index].copy(),
        amps=allocate_powers(pc).amplitudes,
        data_idx=np.delete(np.arange(pc.length), pc.pilot_index),
        scheme=scheme,
        cir=cir,
        doppler=doppler,
        n_fft=config.n_fft,
        subbands=subbands,
        frames=frames,
        n_slots=n_slots,
        coded_len=coded_len,
        msg_len=coded_len // 2 - CODE.tail_bits,
        block_idx=block_interleave(np.arange(n_slots), n_slots // frames, frames),
        mean_p_data=p_d,
        interference_var=deficit * other_power,
        equalizer=config.equalizer,
    )


def _ber_batch(ctx: _BerContext, sigma_w2: float, want_perfect: bool,
               rng: np.random.Generator) -> tuple[int, int, int]:
    """(estimated-CSI errors, perfect-CSI errors, message bits) for one batch."""
    pc = ctx.pc
    length = pc.length
    num_subsets = ctx.frames * ctx.subbands
    gains = chan.generate_tap_gains(ctx.cir, ctx.doppler, ctx.frames * pc.l_t, rng)
    h = chan.freq_response(gains, ctx.n_fft, 0, ctx.subbands * pc.l_f)
    chips = (h.reshape(ctx.subbands, pc.l_f, ctx.frames, pc.l_t)
             .transpose(2, 0, 1, 3).reshape(num_subsets, length))

    msg = rng.integers(0, 2, ctx.msg_len).astype(np.uint8)
    coded = conv_encode(msg)
    bit_perm = rng.permutation(ctx.coded_len)
    symbols = map_symbols(coded[bit_perm], ctx.scheme)
    slots = symbols[ctx.block_idx]

    x = np.ones((num_subsets, length), dtype=complex)
    x[:, ctx.data_idx] = slots.reshape(num_subsets, length - 1)
    z = chips * ((x * ctx.amps) @ ctx.matrix_t)
    if sigma_w2 > 0.0:
        noise = rng.standard_normal((num_subsets, length, 2)).view(np.complex128)[..., 0]
        z += noise * np.sqrt(sigma_w2 / 2.0)

    h_est = (z @ ctx.pilot_col) / ctx.amps[pc.pilot_index]
    despread = z @ ctx.matrix

    def errors_with(h_hat: np.ndarray) -> int:
        h_sq = np.abs(h_hat) ** 2
        denom = h_sq + sigma_w2 if ctx.equalizer == "mmse" else h_sq
        gain = np.where(denom > 0.0, np.conj(h_hat) / np.where(denom > 0.0, denom, 1.0), 0.0)
        x_hat = despread[:, ctx.data_idx] * gain[:, None] / ctx.amps[ctx.data_idx]
        noise_var = ((sigma_w2 + ctx.interference_var)
                     / (ctx.mean_p_data * np.maximum(h_sq, 1e-30)))
        llr_slots = demap_soft(x_hat.reshape(-1), ctx.scheme,
                               np.repeat(noise_var, length - 1))
        bps = ctx.scheme.bits_per_symbol
        llr_symbols = np.empty((ctx.n_slots, bps))
        llr_symbols[ctx.block_idx] = llr_slots.reshape(ctx.n_slots, bps)
        llr_coded = np.empty(ctx.coded_len)
        llr_coded[bit_perm] = llr_symbols.reshape(-1)
        decoded = viterbi_decode(llr_coded)
        return int(np.count_nonzero(decoded != msg))

    err_est = errors_with(h_est)
    err_perf = errors_with(chips.mean(axis=1)) if want_perfect else 0
    return err_est, err_perf, ctx.msg_len


def iter_ber_sweep(config: RunConfig) -> Iterator[SweepRecord]:
    """Yield estimated-CSI (and optional perfect-CSI) records per Eb/No point.

    Each point stops once the estimated-CSI series reaches the bit-error
    target or the bit budget, whichever comes first; decisions fall on fixed
    wave boundaries, so results do not depend on the worker count.
    """
    validate(config)
    ctx = _build_ber_context(config)
    digest = config.digest()
    want_perfect = config.baseline == "perfect-csi"
    for point, ebno in enumerate(config.ebno_grid_db):
        sigma_w2 = config.sigma_w2(ebno)
        err_est = err_perf = bits = 0
        next_batch = 0
        while True:
            tasks = list(range(next_batch, next_batch + _BER_WAVE))
            next_batch += _BER_WAVE

            def task(batch, _sigma=sigma_w2, _point=point):
                return _ber_batch(ctx, _sigma, want_perfect,
                                  _rng_for(config.seed, _point, batch))

            for e_est, e_perf, n_bits in _map_batches(task, tasks, config.workers):
                err_est += e_est
                err_perf += e_perf
                bits += n_bits
            if err_est >= config.target_bit_errors or bits >= config.max_bits:
                break
        yield SweepRecord(ebno_db=ebno, ber=err_est / bits, bit_errors=err_est,
                          bits_counted=bits, csi="estimated",
                          config_digest=digest, seed=config.seed)
        if want_perfect:
            yield SweepRecord(ebno_db=ebno, ber=err_perf / bits, bit_errors=err_perf,
                              bits_counted=bits, csi="perfect",
                              config_digest=digest, seed=config.seed)


def run_ber_sweep(config: RunConfig) -> list[SweepRecord]:
    return list(iter_ber_sweep(config))


# ---------------------------------------------------------------------------
# Channel probe, bit rates, random-matrix check
# ---------------------------------------------------------------------------


def run_channel_probe(config: RunConfig) -> tuple[list[ProbeRecord], float]:
    """Empirical vs closed-form autocorrelation over the subset lag grid."""
    validate(config)
    pc = config.precode_config()
    cir = config.sampled_cir()
    doppler = config.doppler()
    digest = config.digest()
    l_f, l_t = pc.l_f, pc.l_t
    sums = np.zeros((l_f, l_t), dtype=complex)
    counts = np.zeros((l_f, l_t))
    sizes = [_MSE_BATCH] * (config.num_subsets // _MSE_BATCH)
    if config.num_subsets % _MSE_BATCH:
        sizes.append(config.num_subsets % _MSE_BATCH)

    def task(args):
        batch, size = args
        rng = _rng_for(config.seed, 0, batch)
        blocks = chan.generate_tap_gain_blocks(cir, doppler, l_t, size, rng)
        h = chan.freq_response(blocks, config.n_fft, 0, l_f,
                               indices=cir.active_indices)
        partial = np.empty((l_f, l_t), dtype=complex)
        for dn in range(l_f):
            for dq in range(l_t):
                prod = h[:, dn:, dq:] * np.conj(h[:, : l_f - dn, : l_t - dq])
                partial[dn, dq] = prod.sum()
        return partial, size

    for partial, size in _map_batches(task, list(enumerate(sizes)), config.workers):
        sums += partial
        for dn in range(l_f):
            for dq in range(l_t):
                counts[dn, dq] += size * (l_f - dn) * (l_t - dq)

    records = []
    max_dev = 0.0
    for dn in range(l_f):
        for dq in range(l_t):
            empirical = sums[dn, dq] / counts[dn, dq]
            analytical = chan.autocorrelation(dn, dq, cir, doppler, config.n_fft)
            dev = abs(empirical - analytical)
            max_dev = max(max_dev, dev)
            records.append(ProbeRecord(
                delta_n=dn, delta_q=dq,
                r_analytical_re=analytical.real, r_analytical_im=analytical.imag,
                r_empirical_re=empirical.real, r_empirical_im=empirical.imag,
                abs_dev=dev, config_digest=digest, seed=config.seed,
            ))
    return records, max_dev


def bitrate_table(config: RunConfig,
                  lengths: Sequence[int] = (16, 32, 64)) -> list[BitrateRecord]:
    """Useful bit rates under the one-pilot-in-L law, plus ratios across L."""
    digest = config.digest()
    records = []
    base_law = (lengths[0] - 1) / lengths[0]
    for scheme in (Modulation.QPSK, Modulation.QAM16):
        for length in lengths:
            law = (length - 1) / length
            rate = (config.data_subcarriers * scheme.bits_per_symbol * CODE.rate
                    * law / config.t_ofdm_s)
            records.append(BitrateRecord(
                spreading_length=length, modulation=scheme.value,
                useful_rate_mbps=rate / 1e6, ratio_vs_l16=law / base_law,
                config_digest=digest,
            ))
    return records


def run_rm_check(config: RunConfig, lengths: Sequence[int] = (16, 32, 64),
                 power_spread: float = 0.2) -> list[RmCheckRecord]:
    """Deviation of the data-matrix product from its orthogonal-projector form."""
    digest = config.digest()
    records = []
    for point, length in enumerate(lengths):
        rng = _rng_for(config.seed, point, 0)
        uniform = est.verify_rm_property(length, 1, rng, power_spread=0.0)
        spread = est.verify_rm_property(length, config.rm_trials, rng,
                                        power_spread=power_spread)
        records.append(RmCheckRecord(
            spreading_length=length, trials=config.rm_trials,
            deviation_uniform=uniform, deviation_spread=spread,
            power_spread=power_spread, config_digest=digest, seed=config.seed,
        ))
    return records


# ---------------------------------------------------------------------------
# Output emission
# ---------------------------------------------------------------------------


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


class CsvSink:
    """Deterministic CSV writer with a reproducibility header.

    Rows are flushed as they arrive, so an interrupted sweep keeps every
    completed point.
    """

    def __init__(self, path: str | Path, fieldnames: Sequence[str],
                 meta: dict | None = None):
        self.path = Path(path)
        self.fieldnames = list(fieldnames)
        self._fh = open(self.path, "w", newline="")
        for key in sorted(meta or {}):
            self._fh.write(f"# {key}={meta[key]}\n")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(self.fieldnames)
        self._fh.flush()

    def write(self, record) -> None:
        row = dataclasses.asdict(record) if dataclasses.is_dataclass(record) else dict(record)
        self._writer.writerow([_format_cell(row.get(name)) for name in self.fieldnames])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "CsvSink":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def record_fieldnames(record) -> list[str]:
    return [f.name for f in dataclasses.fields(record)]


def config_meta(config: RunConfig) -> dict:
    """Header metadata embedded in every output file."""
    meta = {"config_digest": config.digest()}
    for f in dataclasses.fields(config):
        if f.name == "workers":
            continue
        meta[f"config.{f.name}"] = getattr(config, f.name)
    return meta


def emit_csv(records: Iterable, path: str | Path, meta: dict | None = None) -> Path:
    """Write records (dataclasses with identical fields) to one CSV file."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    with CsvSink(path, record_fieldnames(records[0]), meta) as sink:
        for record in records:
            sink.write(record)
    return Path(path)


def emit_plotdata(records: Iterable, path: str | Path, group_field: str = "csi",
                  meta: dict | None = None) -> Path:
    """Whitespace-separated series blocks for external plotting tools."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    fieldnames = record_fieldnames(records[0])
    lines = [f"# {key}={val}" for key, val in sorted((meta or {}).items())]
    groups: dict[str, list] = {}
    for record in records:
        key = getattr(record, group_field, "") if group_field in fieldnames else ""
        groups.setdefault(str(key), []).append(record)
    for key, rows in groups.items():
        lines.append("")
        lines.append(f"# series: {group_field}={key}" if key else "# series")
        lines.append(" ".join(fieldnames))
        for record in rows:
            row = dataclasses.asdict(record)
            lines.append(" ".join(_format_cell(row[name]) or "nan" for name in fieldnames))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
