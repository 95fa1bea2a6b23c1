"""Command-line front end.

    ngpfbmp bench snr|p|robust [--config FILE] [--FIELD VALUE ...]
    ngpfbmp image recover [--input IMG.pgm] --output OUT.pgm [...]
    ngpfbmp recover --phi PHI.npy --y Y.npy [--p P --sigma2 S2] [--output X.npy]

Exit status: 0 on success, 2 on configuration errors, 3 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import bench
from .errors import ConfigError, DomainError
from .estimator import recover
from .image import multiscale_recover, pgm_read, pgm_write, synthetic_image
from .search import SearchConfig

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

BENCH_DEFAULTS = {
    "snr": {"experiment": "snr_sweep"},
    "p": {"experiment": "p_sweep", "p": [0.002, 0.005, 0.01, 0.02, 0.03], "snr_db": [20.0]},
    "robust": {"experiment": "hyper_robustness", "p": [0.005], "snr_db": [20.0]},
}

# field name -> argparse type; list fields take comma-separated values
_FLAG_TYPES = {
    "M": int, "N": int, "p": str, "snr_db": str, "trials": int, "D": int, "P": int,
    "tail_prob": float, "p_init": float, "seed": int, "signal_model": str,
    "output": str, "workers": int, "record_time": str,
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    for name, kind in _FLAG_TYPES.items():
        opts = [f"--{name}"]
        if "_" in name:
            opts.append("--" + name.replace("_", "-"))
        parser.add_argument(*opts, dest=name, type=kind, default=None)


def _overrides(args: argparse.Namespace) -> dict:
    return {k: getattr(args, k) for k in _FLAG_TYPES if getattr(args, k) is not None}


def _search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--D", type=int, default=5, help="number of greedy passes")
    parser.add_argument("--P", type=int, default=None, help="fixed search depth")
    parser.add_argument("--tail_prob", "--tail-prob", type=float, default=1e-3)
    parser.add_argument("--p_init", "--p-init", type=float, default=0.003)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ngpfbmp", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="Monte Carlo NMSE benchmarks (CSV output)")
    bench_sub = p_bench.add_subparsers(dest="kind", required=True)
    for kind, help_ in (("snr", "NMSE vs SNR"), ("p", "NMSE vs sparsity rate"),
                        ("robust", "invariance to the initial sparsity estimate")):
        _add_config_flags(bench_sub.add_parser(kind, help=help_))

    p_image = sub.add_parser("image", help="multiscale image recovery")
    image_sub = p_image.add_subparsers(dest="kind", required=True)
    p_ir = image_sub.add_parser("recover", help="Haar-domain compressed recovery of an image")
    p_ir.add_argument("--input", help="binary PGM; a synthetic image is used when omitted")
    p_ir.add_argument("--size", type=int, default=32, help="side of the synthetic image")
    p_ir.add_argument("--output", help="write the reconstruction as PGM")
    p_ir.add_argument("--M_per_band", "--M-per-band", type=int, default=None)
    p_ir.add_argument("--snr_db", "--snr-db", type=float, default=25.0)
    p_ir.add_argument("--keep_fraction", "--keep-fraction", type=float, default=0.05)
    p_ir.add_argument("--seed", type=int, default=0)
    _search_flags(p_ir)

    p_rec = sub.add_parser("recover", help="recover one instance stored as .npy files")
    p_rec.add_argument("--phi", required=True, help="M x N sensing matrix (.npy)")
    p_rec.add_argument("--y", required=True, help="length-M observation (.npy)")
    p_rec.add_argument("--p", type=float, default=None)
    p_rec.add_argument("--sigma2", type=float, default=None)
    p_rec.add_argument("--output", help="write x_ammse here (.npy)")
    _search_flags(p_rec)
    return parser


def _cmd_bench(args) -> int:
    cfg = bench.parse_config(args.config, _overrides(args), defaults=BENCH_DEFAULTS[args.kind])
    rows = bench.run_experiment(cfg)
    text = bench.format_csv(rows)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_image(args) -> int:
    img = pgm_read(args.input) if args.input else synthetic_image(args.size, args.seed)
    n_band = (img.shape[0] // 2) * (img.shape[1] // 2)
    m = args.M_per_band if args.M_per_band is not None else n_band // 4
    res = multiscale_recover(
        img, m, args.snr_db, args.keep_fraction,
        SearchConfig(P=args.P, D=args.D, tail_prob=args.tail_prob), args.seed,
    )
    if args.output:
        pgm_write(args.output, res.image)
    summary = {
        "image_nmse_db": res.image_nmse_db,
        "band_nmse_db": res.band_nmse_db,
        "p_hat": res.p_hat,
        "wall_time_s": res.wall_time_s,
        "M_per_band": m,
    }
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_recover(args) -> int:
    phi = np.load(args.phi)
    y = np.load(args.y)
    if phi.ndim != 2 or y.ndim != 1 or y.shape[0] != phi.shape[0]:
        raise ConfigError(f"shape mismatch: phi {phi.shape}, y {y.shape}")
    res = recover(
        phi, y, p=args.p, sigma2=args.sigma2, p_init=args.p_init,
        config=SearchConfig(P=args.P, D=args.D, tail_prob=args.tail_prob),
    )
    if args.output:
        np.save(args.output, res.x_ammse)
    print(json.dumps({
        "s_map": list(res.s_map),
        "p_hat": res.p_hat,
        "sigma2_hat": res.sigma2_hat,
        "iterations": res.iterations,
        "converged": res.converged,
        "n_dominant": len(res.dominant),
    }))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"bench": _cmd_bench, "image": _cmd_image, "recover": _cmd_recover}[args.command]
    try:
        return handler(args)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
