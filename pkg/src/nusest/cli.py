"""Command-line front end.

Subcommands::

    nusest fig23        Monte Carlo RMS curves for ML, PE and PEInf
    nusest fig6         single-tap delay/frequency RMS reduction surface
    nusest bound-check  empirical check of the squared-error bound

Exit codes: 0 success, 1 property failure, 2 usage error, 3 I/O error.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .channel import write_channels
from .experiments import (SEED_SCHEME, ExperimentConfig, check_bound_dominance,
                          run_delay_frequency_surface, run_rms_curves, trial_channel)

log = logging.getLogger("nusest")

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class _IOFailure(Exception):
    pass


def _fmt(x):
    return format(float(x), ".17g")


def _alpha(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(
            f"alpha must lie in the range ]0, 1] (e.g. 0.25 or 0.125), got {value}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def read_config_file(path):
    """Parse a ``key = value`` file; ``#`` starts a comment, quotes are stripped."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value.strip("\"'")
    return values


def _common(p, *, experiment=True):
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    if experiment:
        p.add_argument("--alpha", type=_alpha, default=0.25,
                       help="delay spread as a fraction of 1/B_av, in ]0, 1]")
        p.add_argument("--gamma-db", type=float, default=30.0, help="SNR in dB")
        p.add_argument("--amplitude-bound", type=float, default=1.0)
        p.add_argument("--tap-window", choices=("centered", "causal"), default="centered")
        p.add_argument("--data-carriers-only", action="store_true")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="nusest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fig23", help="RMS error per carrier for ML, PE and PEInf")
    _common(p)
    p.add_argument("--trials", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--dump-channels", action="store_true",
                   help="also write the channel realizations to channels.txt")

    p = sub.add_parser("fig6", help="PE/ML RMS reduction over delay and frequency")
    _common(p)
    p.add_argument("--tau-points", type=_positive_int, default=101)

    p = sub.add_parser("bound-check", help="empirical check of the error bound")
    _common(p, experiment=False)
    p.add_argument("--configs", type=_non_negative_int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=_positive_int, default=10_000)
    p.add_argument("--signal-mode", choices=("fixed", "random"), default="fixed",
                   help="fixed: one signal per configuration, noise redrawn; "
                        "random: signal coefficients redrawn with every noise draw")
    p.add_argument("--bound-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = read_config_file(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read --config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, text in values.items():
            action = known.get(key)
            if action is None or key in ("config", "help"):
                parser.error(f"unknown key {key!r} in {args.config}")
            if action.nargs == 0:
                defaults[key] = text.lower() in ("1", "true", "yes", "on")
                continue
            try:
                value = action.type(text) if action.type else text
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"{args.config}: {key}: {exc}")
            if action.choices and value not in action.choices:
                parser.error(f"{args.config}: {key} must be one of {list(action.choices)}")
            defaults[key] = value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _config_from(args, trials=1, seed=0):
    return ExperimentConfig(alpha=args.alpha, gamma_db=args.gamma_db, trials=trials, seed=seed,
                            amplitude_bound=args.amplitude_bound, tap_window=args.tap_window,
                            data_carriers_only=args.data_carriers_only)


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}") from exc


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}") from exc


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_table(out, stem, fmt, header, rows):
    if fmt == "csv":
        path = out / f"{stem}.csv"
        _write_csv(path, header, [[_fmt(v) if isinstance(v, float) else v for v in row]
                                  for row in rows])
    else:
        path = out / f"{stem}.json"
        _write_text(path, _json({"columns": list(header), "rows": [list(r) for r in rows]}))
    return path


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _prepare_out(out):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _IOFailure(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_manifest(out, config, args, data_files, started, extra):
    manifest = {
        "tool": "nusest",
        "version": __version__,
        "command": args.command,
        "config": config.to_dict() if config is not None else None,
        "arguments": {k: v for k, v in sorted(vars(args).items())},
        "seed": getattr(args, "seed", None),
        "seed_scheme": SEED_SCHEME,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "duration_s": time.perf_counter() - started,
        "files": {p.name: _sha256(p) for p in data_files},
    }
    manifest.update(extra)
    _write_text(out / "manifest.json", _json(manifest))


def cmd_fig23(args):
    started = time.perf_counter()
    config = _config_from(args, trials=args.trials, seed=args.seed)
    out = _prepare_out(args.out)
    curve = run_rms_curves(config)
    db_ml, db_pe, db_inf = (curve.rms_db(n) for n in ("ML", "PE", "PEInf"))
    rows = [(int(i), float(f), float(a), float(b), float(c)) for i, f, a, b, c in
            zip(curve.carrier_indices, curve.frequencies, db_ml, db_pe, db_inf)]
    data = [_write_table(out, "rms_curve", args.format,
                         ("carrier_index", "freq", "rms_ml_db", "rms_pe_db", "rms_peinf_db"),
                         rows)]
    summary = {
        "alpha": config.alpha,
        "gamma_db": config.gamma_db,
        "trials": config.trials,
        "seed": config.seed,
        "mean_rms_db": {n: curve.mean_db(n) for n in ("ML", "PE", "PEInf")},
        "improvement_pe_vs_ml_db": curve.improvement_db("PE", "ML"),
        "improvement_peinf_vs_ml_db": curve.improvement_db("PEInf", "ML"),
        "ml_n_taps": curve.metadata["ml_n_taps"],
        "ml_first_tap": curve.metadata["ml_first_tap"],
        "peinf_ridge": curve.metadata["peinf_ridge"],
    }
    summary_path = out / "summary.json"
    _write_text(summary_path, _json(summary))
    data.append(summary_path)
    if args.dump_channels:
        params = config.channel_params()
        channels = [trial_channel(params, config.seed, t) for t in range(config.trials)]
        path = out / "channels.txt"
        try:
            write_channels(path, channels, config.delay_spread, config.seed)
        except OSError as exc:
            raise _IOFailure(f"cannot write {path}: {exc}") from exc
        data.append(path)
    _write_manifest(out, config, args, data, started,
                    {"ml_n_taps": summary["ml_n_taps"]})
    print(f"alpha={config.alpha:g}: PE improves on ML by "
          f"{summary['improvement_pe_vs_ml_db']:.2f} dB (PEInf "
          f"{summary['improvement_peinf_vs_ml_db']:.2f} dB), ML taps={summary['ml_n_taps']}")
    return EXIT_OK


def cmd_fig6(args):
    started = time.perf_counter()
    config = _config_from(args)
    out = _prepare_out(args.out)
    surface = run_delay_frequency_surface(config, tau_points=args.tau_points)
    rows = [(float(tau), float(f), float(surface.reduction_db[i, j]))
            for i, tau in enumerate(surface.delays)
            for j, f in enumerate(surface.frequencies)]
    data = [_write_table(out, "reduction_surface", args.format,
                         ("tau", "freq", "reduction_db"), rows)]
    summary = {
        "alpha": config.alpha,
        "gamma_db": config.gamma_db,
        "tau_points": args.tau_points,
        "interior_median_db": surface.interior_median(),
        "ml_n_taps": surface.metadata["ml_n_taps"],
        "ml_first_tap": surface.metadata["ml_first_tap"],
        "sign_convention": surface.metadata["sign_convention"],
    }
    summary_path = out / "summary.json"
    _write_text(summary_path, _json(summary))
    data.append(summary_path)
    _write_manifest(out, config, args, data, started, {"ml_n_taps": summary["ml_n_taps"]})
    print(f"alpha={config.alpha:g}: interior median reduction "
          f"{summary['interior_median_db']:.2f} dB (ML taps={summary['ml_n_taps']})")
    return EXIT_OK


def cmd_bound_check(args):
    results = check_bound_dominance(args.configs, seed=args.seed, n_draws=args.draws,
                                    bound_scale=args.bound_scale,
                                    signal_mode=args.signal_mode)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"config {r.index:3d}: {status} M={r.n_samples:2d} mu={r.mu:.3e} "
              f"worst margin={r.worst_margin:+.3e}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} configurations within the bound")
    return EXIT_PROPERTY if failed else EXIT_OK


COMMANDS = {"fig23": cmd_fig23, "fig6": cmd_fig6, "bound-check": cmd_bound_check}


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _IOFailure as exc:
        log.error("%s", exc)
        print(f"nusest: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"nusest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
