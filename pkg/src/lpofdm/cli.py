"""Command-line interface.

Subcommands: mse, ber, probe, bitrate, rmcheck. Flags mirror RunConfig
fields and may also be given in a flat key=value config file (command line
wins). Sweep subcommands write a CSV (one flushed row per finished point)
and render a matching figure next to it unless --no-plot is given.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .errors import ConfigurationError
from .harness import (
    CsvSink,
    RunConfig,
    SweepRecord,
    bitrate_table,
    config_meta,
    emit_csv,
    emit_plotdata,
    iter_ber_sweep,
    iter_mse_sweep,
    record_fieldnames,
    run_channel_probe,
    run_rm_check,
    validate,
)


def parse_ebno_spec(text: str) -> tuple[float, ...]:
    """Parse "a:b:step" (inclusive) or a comma-separated list of dB values."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"Eb/No range must be a:b:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigurationError("Eb/No step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise ConfigurationError(f"empty Eb/No range {text!r}")
        return tuple(start + i * step for i in range(count))
    return tuple(float(p) for p in text.split(",") if p.strip())


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read the flat key = value format; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"malformed config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _str2bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


# flag/config-key -> (RunConfig field, converter from string)
_OPTION_TABLE = {
    "seed": ("seed", int),
    "L": ("spreading_length", int),
    "Lf": ("l_f", int),
    "Lt": ("l_t", int),
    "Pp": ("pilot_power", float),
    "pilot-index": ("pilot_index", int),
    "power-mode": ("power_mode", str),
    "mod": ("modulation", str),
    "profile": ("profile", str),
    "speed": ("speed_kmh", float),
    "fd": ("f_d_hz", float),
    "carrier": ("carrier_hz", float),
    "nfft": ("n_fft", int),
    "guard": ("guard", int),
    "sample-rate": ("sample_rate_hz", float),
    "beta-override": ("beta_override", float),
    "ebno": ("ebno_grid_db", parse_ebno_spec),
    "subsets": ("num_subsets", int),
    "errors": ("target_bit_errors", int),
    "max-bits": ("max_bits", int),
    "data-subcarriers": ("data_subcarriers", int),
    "frames-per-batch": ("frames_per_batch", int),
    "baseline": ("baseline", str),
    "equalizer": ("equalizer", str),
    "gi-loss": ("include_gi_loss", _str2bool),
    "trials": ("rm_trials", int),
    "workers": ("workers", int),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="flat key=value config file")
    common.add_argument("--out", metavar="CSV", help="output CSV path")
    common.add_argument("--plotdata", metavar="FILE", help="also emit grouped plot data")
    common.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    common.add_argument("--seed", type=int)
    common.add_argument("--L", type=int, help="spreading length (power of two)")
    common.add_argument("--Lf", type=int, help="frequency spreading factor")
    common.add_argument("--Lt", type=int, help="time spreading factor")
    common.add_argument("--Pp", type=float, help="pilot power (linear)")
    common.add_argument("--pilot-index", type=int)
    common.add_argument("--power-mode", choices=["total", "unit"])
    common.add_argument("--mod", choices=["qpsk", "16qam"])
    common.add_argument("--profile", help="channel profile name or file")
    common.add_argument("--speed", type=float, help="mobile speed in km/h")
    common.add_argument("--fd", type=float, help="max Doppler frequency in Hz")
    common.add_argument("--carrier", type=float, help="carrier frequency in Hz")
    common.add_argument("--nfft", type=int)
    common.add_argument("--guard", type=int, help="guard interval in samples")
    common.add_argument("--sample-rate", type=float, help="sample rate in Hz")
    common.add_argument("--beta-override", type=float,
                        help="force the normalized Doppler f_d*T_ofdm")
    common.add_argument("--ebno", help="Eb/No grid: a:b:step or comma list (dB)")
    common.add_argument("--subsets", type=int, help="Monte-Carlo subsets per point")
    common.add_argument("--errors", type=int, help="bit-error target per BER point")
    common.add_argument("--max-bits", type=int, help="bit budget per BER point")
    common.add_argument("--data-subcarriers", type=int)
    common.add_argument("--frames-per-batch", type=int)
    common.add_argument("--baseline", choices=["perfect-csi"],
                        help="also run the perfect-CSI reference chain")
    common.add_argument("--equalizer", choices=["zf", "mmse"])
    common.add_argument("--gi-loss", choices=["true", "false"],
                        help="account for guard-interval energy loss (default true)")
    common.add_argument("--trials", type=int, help="trials for the rmcheck experiment")
    common.add_argument("--workers", type=int, help="parallel batch workers")

    parser = argparse.ArgumentParser(
        prog="lpofdm",
        description="Link-level experiments for spread-pilot 2D precoded OFDM.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    sub.add_parser("mse", parents=[common],
                   help="estimator MSE sweep: simulated vs analytical")
    sub.add_parser("ber", parents=[common],
                   help="coded BER sweep over the fading channel")
    sub.add_parser("probe", parents=[common],
                   help="channel autocorrelation: measured vs closed form")
    sub.add_parser("bitrate", parents=[common], help="useful bit-rate table")
    sub.add_parser("rmcheck", parents=[common],
                   help="random-matrix projector deviation across L")
    return parser


def assemble_config(args: argparse.Namespace) -> RunConfig:
    """Merge CLI flags over config-file values over RunConfig defaults."""
    file_values = parse_config_file(args.config) if args.config else {}
    known = set(_OPTION_TABLE)
    unknown = set(file_values) - known - {"out", "plotdata", "plot", "experiment"}
    if unknown:
        raise ConfigurationError(f"unknown config file keys: {sorted(unknown)}")
    kwargs: dict = {"experiment": args.experiment}
    for key, (field_name, convert) in _OPTION_TABLE.items():
        cli_value = getattr(args, key.replace("-", "_"), None)
        if cli_value is not None:
            kwargs[field_name] = convert(cli_value) if isinstance(cli_value, str) else cli_value
        elif key in file_values:
            kwargs[field_name] = convert(file_values[key])
    if ("l_f" in kwargs) != ("l_t" in kwargs):
        raise ConfigurationError("give both --Lf and --Lt or neither")
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _resolve_out(args: argparse.Namespace, config: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    file_values = parse_config_file(args.config) if args.config else {}
    if "out" in file_values:
        return Path(file_values["out"])
    return Path(f"{config.experiment}.csv")


def _figure_path(out: Path) -> Path:
    return out.with_suffix(".png")


def _run_sweep(args: argparse.Namespace, config: RunConfig) -> None:
    out = _resolve_out(args, config)
    iterator = iter_mse_sweep(config) if config.experiment == "mse" else iter_ber_sweep(config)
    records: list[SweepRecord] = []
    fieldnames = record_fieldnames(SweepRecord(ebno_db=0.0))
    with CsvSink(out, fieldnames, config_meta(config)) as sink:
        for record in iterator:
            sink.write(record)
            records.append(record)
            if record.ber is not None:
                print(f"Eb/No {record.ebno_db:g} dB [{record.csi}]: "
                      f"BER {record.ber:.3e} ({record.bit_errors} errors / "
                      f"{record.bits_counted} bits)")
            else:
                print(f"Eb/No {record.ebno_db:g} dB: simulated MSE "
                      f"{record.mse_simulated:.4e}, analytical "
                      f"{record.mse_analytical:.4e}")
    print(f"wrote {out}")
    if args.plotdata:
        emit_plotdata(records, args.plotdata, meta=config_meta(config))
        print(f"wrote {args.plotdata}")
    if not args.no_plot:
        title = f"L={config.spreading_length} ({config.l_f}x{config.l_t}), {config.modulation}"
        renderer = (plotting.render_mse_figure if config.experiment == "mse"
                    else plotting.render_ber_figure)
        figure = renderer(records, _figure_path(out), title=title)
        print(f"wrote {figure}")


def _run_probe(args: argparse.Namespace, config: RunConfig) -> None:
    out = _resolve_out(args, config)
    records, max_dev = run_channel_probe(config)
    meta = config_meta(config)
    meta["max_abs_dev"] = format(max_dev, ".6g")
    emit_csv(records, out, meta)
    print(f"max |measured - closed form| = {max_dev:.5f}")
    print(f"wrote {out}")
    if args.plotdata:
        emit_plotdata(records, args.plotdata, group_field="", meta=meta)
        print(f"wrote {args.plotdata}")
    if not args.no_plot:
        figure = plotting.render_probe_figure(
            records, _figure_path(out),
            title=f"{config.profile} autocorrelation, beta={config.doppler().beta:.4g}")
        print(f"wrote {figure}")


def _run_table(args: argparse.Namespace, config: RunConfig) -> None:
    if config.experiment == "bitrate":
        records = bitrate_table(config)
    else:
        records = run_rm_check(config)
    out = _resolve_out(args, config)
    emit_csv(records, out, config_meta(config))
    for record in records:
        print("  ".join(f"{name}={getattr(record, name)}"
                        for name in record_fieldnames(record)
                        if name not in ("config_digest", "seed")))
    print(f"wrote {out}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = assemble_config(args)
        validate(config)
        if config.experiment in ("mse", "ber"):
            _run_sweep(args, config)
        elif config.experiment == "probe":
            _run_probe(args, config)
        else:
            _run_table(args, config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
