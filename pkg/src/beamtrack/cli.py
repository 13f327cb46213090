"""Command-line entry point.

Subcommands: ``track`` (run a configured Monte-Carlo experiment), ``crlb``
(evaluate or sweep the bounds), ``offsets`` (search for optimal exploration
offsets or sweep a fixed set's robustness), ``verify`` (run the built-in
correctness suites).  Exit codes: 0 success, 1 configuration error, 2
verification failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="beamtrack",
                     description="2D phased-array beam and channel tracking")
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser("track", help="run a Monte-Carlo tracking experiment")
    track.add_argument("--config", required=True, help="flat key=value config file")
    track.add_argument("--seed", type=int)
    track.add_argument("--out", help="CSV output path")
    track.add_argument("--trials", type=int)
    track.add_argument("--eccs", type=int)
    track.add_argument("--snr-db", type=float)
    track.add_argument("--scenario",
                       choices=["quasi-static", "dynamic-i", "dynamic-ii"])
    track.add_argument("--tracker")
    track.add_argument("--offsets")

    crlb = sub.add_parser("crlb", help="evaluate or sweep the tracking bounds")
    crlb.add_argument("--objective", required=True,
                      choices=["static-asymptotic", "static-finite",
                               "di-asymptotic", "di-finite"])
    crlb.add_argument("--m", type=int, default=8)
    crlb.add_argument("--n", type=int, default=8)
    crlb.add_argument("--snr-beta-db", type=float, default=0.0)
    crlb.add_argument("--offsets", default="tableII")
    crlb.add_argument("--sweep-sizes", help="comma list of square sizes, e.g. 8,16,32")

    off = sub.add_parser("offsets", help="search for optimal exploration offsets")
    off.add_argument("--objective", required=True,
                     choices=["static-asymptotic", "static-finite",
                              "di-asymptotic", "di-finite"])
    off.add_argument("--m", type=int, default=8)
    off.add_argument("--n", type=int, default=8)
    off.add_argument("--snr-beta-db", type=float, default=0.0)
    off.add_argument("--seed", type=int, default=0)
    off.add_argument("--grid", type=int, default=21)
    off.add_argument("--iters", type=int, default=400)
    off.add_argument("--out", help="append the result as a CSV row")
    off.add_argument("--robustness",
                     help="skip the search; sweep the preset offsets over "
                          "these square sizes, e.g. 8,16,32")

    ver = sub.add_parser("verify", help="run the built-in correctness suites")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--quick", action="store_true",
                     help="fewer Monte-Carlo draws")
    return parser


def _objective_from_args(args):
    from .offsets import DiAsymptotic, DiFinite, StaticAsymptotic, StaticFinite
    kind = args.objective
    if kind == "static-asymptotic":
        return StaticAsymptotic()
    if kind == "static-finite":
        return StaticFinite(args.m, args.n)
    if kind == "di-asymptotic":
        return DiAsymptotic(args.snr_beta_db)
    return DiFinite(args.m, args.n, args.snr_beta_db)


def _resolve_cli_offsets(token: str):
    from .harness import ConfigError
    from .offsets import OFFSET_PRESETS
    from .signal import OffsetSet
    if token in OFFSET_PRESETS:
        return OFFSET_PRESETS[token]
    try:
        vals = [float(v) for v in token.split(",")]
        return OffsetSet(np.array(vals).reshape(3, 2))
    except Exception:
        raise ConfigError(f"offsets: expected a preset name or six numbers, "
                          f"got {token!r}")


def _cmd_track(args) -> int:
    from .harness import (ConfigError, config_from_mapping, emit_csv,
                          parse_config_text, run_experiment)
    try:
        with open(args.config) as fh:
            mapping = parse_config_text(fh.read())
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return 1
    out_path = args.out or mapping.get("out")
    overrides = {"seed": args.seed, "trials": args.trials, "eccs": args.eccs,
                 "snr_db": args.snr_db, "scenario": args.scenario,
                 "tracker": args.tracker, "offsets": args.offsets}
    for key, val in overrides.items():
        if val is not None:
            mapping[key] = val
    ec = config_from_mapping(mapping)
    records = run_experiment(ec)
    if out_path:
        emit_csv(records, out_path)
        print(f"wrote {len(records)} records to {out_path}")
    else:
        from .harness import CSV_HEADER
        print(CSV_HEADER)
        for r in records:
            print(f"{r.ecc},{r.explorations_total},{r.mse_h:.12g},"
                  f"{r.mse_x:.12g},{r.crlb_ref:.12g},{r.trials}")
    return 0


def _cmd_crlb(args) -> int:
    off = _resolve_cli_offsets(args.offsets)
    if args.sweep_sizes:
        from .estimation import (crlb_di_asymptotic, crlb_static_asymptotic,
                                 di_offsets_crlb, static_offsets_crlb)
        sizes = [int(s) for s in args.sweep_sizes.split(",")]
        static = "static" in args.objective
        snr = 10.0 ** (args.snr_beta_db / 10.0)
        limit = crlb_static_asymptotic(off.deltas) if static \
            else crlb_di_asymptotic(off.deltas, snr)
        print("size,mn_times_crlb,asymptotic,rel_gap")
        for s in sizes:
            val = static_offsets_crlb(off.deltas, s, s) if static \
                else di_offsets_crlb(off.deltas, s, s, snr)
            scaled = val * s * s
            print(f"{s},{scaled:.12g},{limit:.12g},{(scaled - limit) / limit:.3e}")
        return 0
    obj = _objective_from_args(args)
    print(f"{args.objective} CRLB at the given offsets: "
          f"{float(obj.evaluate(off.deltas)):.12g}")
    return 0


def _cmd_offsets(args) -> int:
    from .offsets import (SearchConfig, canonicalize, optimize_offsets,
                          robustness_sweep)
    from .signal import OffsetSet
    if args.robustness:
        sizes = [(int(s), int(s)) for s in args.robustness.split(",")]
        kind = "static" if "static" in args.objective else "di"
        preset = _resolve_cli_offsets("tableII" if kind == "static" else "tableIII")
        print("m,n,crlb_at_offsets,crlb_min,rel_gap")
        for (size, at, best, gap) in robustness_sweep(preset, sizes, kind,
                                                      args.snr_beta_db):
            print(f"{size[0]},{size[1]},{at:.12g},{best:.12g},{gap:.3e}")
        return 0
    sc = SearchConfig(_objective_from_args(args), grid_points_per_axis=args.grid,
                      refine_iters=args.iters, seed=args.seed)
    result = optimize_offsets(sc)
    canon = canonicalize(result.offsets) if args.m == args.n else result.offsets
    print(f"objective: {args.objective}")
    print(f"crlb_value: {result.crlb_value:.12g}")
    print(f"restarts_used: {result.restarts_used}")
    print("canonical offsets:")
    for row in canon.deltas:
        print(f"  ({row[0]: .4f}, {row[1]: .4f})")
    if args.out:
        d = result.offsets.deltas.ravel()
        row = (f"{args.objective},{result.crlb_value:.12g},"
               f"{result.restarts_used}," + ",".join(f"{v:.12g}" for v in d))
        with open(args.out, "a", newline="\n") as fh:
            fh.write(row + "\n")
        print(f"appended result to {args.out}")
    return 0


def _cmd_verify(args) -> int:
    from .checks import (check_fisher_oracles, check_identifiability,
                         check_mean_field, check_op_counts)
    draws = 40_000 if args.quick else 200_000
    results = [
        check_identifiability(args.seed),
        check_mean_field(args.seed),
        check_op_counts(args.seed),
        check_fisher_oracles(args.seed, draws=draws),
    ]
    all_ok = True
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        all_ok &= ok
    return 0 if all_ok else 2


def main(argv=None) -> int:
    from .harness import ConfigError
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "track":
            return _cmd_track(args)
        if args.command == "crlb":
            return _cmd_crlb(args)
        if args.command == "offsets":
            return _cmd_offsets(args)
        return _cmd_verify(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
