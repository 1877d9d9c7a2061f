"""Command-line entry point: ``dpquantiles {run,calibrate,verify,summarize}``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 gap-audit failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .errors import ConfigError, EmptyDatasetError
from .neighbor_maps import verify_lemma

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_AUDIT = 0, 1, 2, 3


def _load_config(args) -> bench.RunConfig:
    config = bench.RunConfig.from_json(args.config)
    adjacency = args.adjacency.replace("-", "_") if args.adjacency else None
    mechanisms = (args.mechanism,) if args.mechanism else None
    config = config.with_overrides(seed=args.seed, output=args.out, adjacency=adjacency, mechanisms=mechanisms)
    if getattr(args, "fixed_quantiles", False):
        config = config.with_overrides(resample_quantiles=False)
    if getattr(args, "no_audit", False):
        config = config.with_overrides(audit=False)
    return bench.RunConfig.from_dict(bench.config_dict(config))


def cmd_run(args) -> int:
    config = _load_config(args)
    records = bench.run_experiment(config)
    csv_path, json_path = bench.emit_results(records, config.output, config.seed, config.bootstrap_resamples)
    print(f"wrote {len(records)} records to {csv_path} and summary to {json_path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = _load_config(args)
    X = bench.build_dataset(config.dataset)
    failed = False
    print(f"n = {X.n}, epsilon1/epsilon2 = {config.stage_budgets}, delta = {config.delta}")
    for m in sorted(set(config.m_sweep)):
        s = bench.slice_setup(config, m, X.n, X.bounds[1])
        verdict = "pass" if s.audit_ok else "FAIL"
        failed |= not s.audit_ok
        print(f"m={m:4d}  w={s.params.w}  ell={s.params.ell}  h={s.params.h}  "
              f"margin={s.params.require_margin}  audit={verdict}")
    return EXIT_AUDIT if failed and config.audit else EXIT_OK


def cmd_verify(args) -> int:
    ok = True
    for m, n, h in args.case or [(2, 16, 2), (3, 24, 3)]:
        rep = verify_lemma(m, n, h)
        ok &= rep.ok
        print(f"(m={m}, n={n}, h={h}): |Good|={rep.good_size} checks={rep.checks} "
              f"add_injective={rep.add_injective} remove_injective={rep.remove_injective} "
              f"in_target={rep.add_in_target and rep.remove_in_target} contiguous={rep.contiguous} "
              f"max_cost=({rep.max_add_cost}, {rep.max_remove_cost}) naive_collisions={rep.naive_collisions} "
              f"-> {'PASS' if rep.ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_summarize(args) -> int:
    records = bench.read_records(args.records)
    if not records:
        raise ConfigError(f"{args.records} holds no records")
    summary = bench.summarize(records, args.seed or 0)
    text = json.dumps(summary, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _case(text: str) -> tuple[int, int, int]:
    try:
        m, n, h = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected m,n,h") from None
    return m, n, h


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpquantiles", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the base seed")
        sp.add_argument("--out", help="override the output directory")
        sp.add_argument("--mechanism", choices=bench.MECHANISMS, help="run a single mechanism")
        sp.add_argument("--adjacency", choices=("add-remove", "substitute"))
        sp.add_argument("--no-audit", action="store_true", help="record gap failures instead of aborting")
        return sp

    run = with_config(sub.add_parser("run", help="run the benchmark and write records.csv / summary.json"))
    run.add_argument("--fixed-quantiles", action="store_true", help="one quantile sample per m instead of per trial")
    run.set_defaults(func=cmd_run)
    with_config(sub.add_parser("calibrate", help="print w, ell, h and the audit verdict per m")).set_defaults(
        func=cmd_calibrate)

    ver = sub.add_parser("verify", help="exhaustively check the noisy-rank neighbour maps")
    ver.add_argument("--case", type=_case, action="append", help="m,n,h (repeatable)")
    ver.set_defaults(func=cmd_verify)

    summ = sub.add_parser("summarize", help="recompute summary.json from records.csv")
    summ.add_argument("records")
    summ.add_argument("--out")
    summ.add_argument("--seed", type=int)
    summ.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except bench.AuditFailure as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (ConfigError, EmptyDatasetError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
