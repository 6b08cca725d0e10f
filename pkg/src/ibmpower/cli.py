"""Command-line front end.

    ibmpower presets
    ibmpower identities --seed 7 --trials 50
    ibmpower verify kl_quartic --n 8,12,16 --replicates 2000 --out out/
    ibmpower simulate IBM --t 0.25,0.5,1 --replicates 500 --out ibm.csv

Exit codes: 0 pass, 1 statistical or identity failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, limits
from .gaussian_paths import SpatialField, Streams
from .skeleton import simulate_walk, tally_crossings, tally_doubled
from .variations import VariationSpec, s_space_value, v_space_value
from .weights import REGISTRY_NAMES

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SIMULATE_KINDS = ("V", "S", "BMRS", "WBMRS", "MixedOdd", "WienerAtYt", "IBM")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got {s!r}")


def _ints(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {s!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config; flags override its fields")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--n", type=_ints, help="comma list of levels")
    p.add_argument("--kappa", type=int)
    p.add_argument("--weight", choices=REGISTRY_NAMES)
    p.add_argument("--t", type=_floats, help="comma list of times")
    p.add_argument("--replicates", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--workers", type=int, help="worker processes (default: available cores)")
    p.add_argument("--out", type=Path, help="output location for machine-readable files")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ibmpower", description="Weighted power variations of iterated Brownian motion.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("presets", help="list theorem ids")
    q = sub.add_parser("identities", help="run the exact identity suite")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--trials", type=int, default=200)
    q.add_argument("--out", type=Path, help="write failures as JSON here")
    q = sub.add_parser("verify", help="Monte Carlo test of one theorem")
    q.add_argument("theorem_id", choices=list(harness.THEOREMS))
    q.add_argument("--no-retry", action="store_true", help="do not reseed after a failure")
    _common(q)
    q = sub.add_parser("simulate", help="raw samples of a finite-n functional or a limit")
    q.add_argument("kind", choices=SIMULATE_KINDS)
    _common(q)
    return p


def _load_config(args) -> dict:
    d = {}
    if args.config is not None:
        try:
            d = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
    flags = {"master_seed": args.seed, "levels": args.n, "kappa": args.kappa,
             "weight_name": args.weight, "times": args.t, "replicates": args.replicates,
             "alpha": args.alpha}
    d.update({k: v for k, v in flags.items() if v is not None})
    return d


def _cmd_presets(_args) -> int:
    for tid, (rule, k0, w0, anchor) in harness.THEOREMS.items():
        parity = f"kappa={rule}" if isinstance(rule, int) else f"{rule} kappa"
        print(f"{tid:13s} {parity:11s} default kappa={k0}, weight={w0}  {anchor}")
    return EXIT_PASS


def _cmd_identities(args) -> int:
    res = harness.identity_suite(args.seed, args.trials)
    print(res.summary())
    if res.failures:
        dump = harness.dump_failures(res)
        if args.out is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(dump + "\n", encoding="utf-8")
        else:
            print(dump)
    return EXIT_PASS if res.passed else EXIT_FAIL


def _cmd_verify(args) -> int:
    d = _load_config(args)
    d["theorem_id"] = args.theorem_id
    d["workers"] = args.workers or harness.default_workers()
    cfg = harness.ExperimentConfig.from_dict(d)
    print("config:", json.dumps(cfg.to_dict(), sort_keys=True))
    if args.no_retry:
        rep, samples = harness.run_experiment(cfg, return_samples=True)
    else:
        rep, samples = harness.run_with_retry(cfg)
    for pl in rep["per_level"]:
        ks = ", ".join(f"t={m['t']:g}: p={m['ks_p']:.3f}" for m in pl["marginals"])
        print(f"n={pl['n']:2d}  energy={pl['joint']['energy_stat']:.5f} "
              f"(p={pl['joint']['perm_p']:.3f})  std_ratio={pl['std_ratio']:.3f}  KS {ks}")
    print(f"verdict: {rep['verdict']}  checks: {rep['checks']}")
    if args.out is not None:
        run_cfg = harness.ExperimentConfig.from_dict({**rep["config"], "workers": cfg.workers})
        harness.export_report(rep, args.out / f"{cfg.theorem_id}_report.json")
        harness.export_samples(run_cfg, samples, args.out / f"{cfg.theorem_id}_samples.csv")
        print(f"wrote {args.out}/{cfg.theorem_id}_report.json and _samples.csv")
    return EXIT_PASS if rep["verdict"] == "pass" else EXIT_FAIL


def _simulate_rows(kind: str, d: dict):
    seed = int(d.get("master_seed", 0))
    times = [float(t) for t in d.get("times", (0.25, 0.5, 1.0))]
    reps = int(d.get("replicates", 100))
    kappa = int(d.get("kappa", 2))
    weight = d.get("weight_name", "one")
    levels = [int(n) for n in d.get("levels", (8,))]
    if kind in ("V", "S"):
        for n in levels:
            spec = VariationSpec(kappa, n, weight, times)
            for r in range(reps):
                st = Streams.for_replicate(seed, harness.stream_id(harness.ROLE_FINITE, n, r))
                walk = simulate_walk(st.Y, n, times[-1])
                fld = SpatialField(n, st.X)
                for t in times:
                    if kind == "V":
                        v = v_space_value(spec, tally_crossings(walk, t), fld)
                    else:
                        v = s_space_value(spec, tally_doubled(walk, t), fld)
                    yield kind, n, r, t, "finite_n", v
        return
    sampler = {
        "BMRS": lambda st: limits.sample_bmrs(st, times),
        "WBMRS": lambda st: limits.sample_wbmrs(weight, st, times, kappa=kappa),
        "MixedOdd": lambda st: limits.sample_mixed_odd(weight, kappa, st, times),
        "WienerAtYt": lambda st: limits.sample_wiener_at_yt(weight, kappa, st, times),
        "IBM": lambda st: limits.sample_ibm(st, times),
    }[kind]
    for r in range(reps):
        st = Streams.for_replicate(seed, harness.stream_id(harness.ROLE_LIMIT, 0, r))
        s = sampler(st)
        for t, v in zip(s.times, s.values):
            yield kind, "", r, t, "limit", v


def _cmd_simulate(args) -> int:
    d = _load_config(args)
    rows = list(_simulate_rows(args.kind, d))
    vals = np.array([r[-1] for r in rows], dtype=float)
    print(f"{args.kind}: {len(rows)} values, mean {vals.mean() if len(vals) else float('nan'):.4g}, "
          f"std {vals.std(ddof=1) if len(vals) > 1 else float('nan'):.4g}")
    if args.out is not None:
        path = args.out / f"{args.kind}.csv" if args.out.suffix != ".csv" else args.out
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(harness.CSV_HEADER)
            for kind, n, r, t, side, v in rows:
                w.writerow([kind, n, r, repr(float(t)), side, repr(float(v))])
        print(f"wrote {path}")
    return EXIT_PASS


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        return {"presets": _cmd_presets, "identities": _cmd_identities, "verify": _cmd_verify,
                "simulate": _cmd_simulate}[args.command](args)
    except ValueError as exc:
        print(f"ibmpower: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
