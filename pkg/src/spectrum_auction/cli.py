"""Command-line driver: ``run``, ``fuzz``, ``sweep`` and ``fixtures``.

Exit codes: 0 success or expected result, 1 usage, 2 I/O, 3 capacity,
4 property violation.  Outputs go to ``--out``, falling back to
``$SPECTRUM_AUCTION_OUT`` and then the current directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis
from .fixtures import FIXTURES, LINEAR_DEVIATION, fixture_defaults, label, load_fixture
from .mechanisms import DEFAULT_VCG_CAP, MECHANISMS, InstanceTooLarge, outcome_to_dict, run_mechanism
from .model import ModelError
from .topology import (
    REGIMES,
    dumps,
    load_instance,
    profiles_from_dict,
    profiles_to_dict,
    random_instance,
    save_instance,
    topology_from_dict,
    topology_to_dict,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CAPACITY, EXIT_VIOLATION = 0, 1, 2, 3, 4
OUT_ENV = "SPECTRUM_AUCTION_OUT"

DEFAULT_K = {"single-channel": 1, "uniform-demand-2": 3, "nonuniform": 3}
DEFAULT_SWEEP_MECHANISMS = {
    "single-channel": "vcg,sc-spam,small",
    "uniform-demand-2": "sc-spam,small",
    "nonuniform": "nud-wspam,small",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sizes(text: str) -> tuple[int, ...]:
    """``6:21`` (inclusive), ``30:300:30`` or ``6,9,12``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            lo, hi, step = parts
            if step < 1 or hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1, step))
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    return lo, hi


def _mech_list(text: str) -> tuple[str, ...]:
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in MECHANISMS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown mechanism(s) {bad}; choose from {', '.join(MECHANISMS)}")
    return names


def read_config(path) -> dict:
    """Flat ``key = value`` document; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spectrum-auction", description="Operator-level spectrum auction simulator.")
    p.add_argument("--config", help="key = value file; command-line flags override it")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--degree", type=_pair, default=(0, 2), metavar="LO:HI",
                        help="per-pair BS degree range of the configuration model")
        sp.add_argument("--vcg-cap", type=int, default=DEFAULT_VCG_CAP)
        sp.add_argument("--k", type=int, default=None, help="number of channels")

    r = sub.add_parser("run", help="run mechanisms on one instance")
    common(r)
    src = r.add_mutually_exclusive_group()
    src.add_argument("--fixture", choices=sorted(FIXTURES))
    src.add_argument("--topology", help="topology file (needs --profiles)")
    src.add_argument("--regime", choices=sorted(REGIMES))
    r.add_argument("--profiles", help="profile file matching --topology")
    r.add_argument("--size", type=int, default=9, help="BS count for --regime")
    r.add_argument("--mechanism", type=_mech_list, default=None, help="comma-separated mechanisms")
    r.add_argument("--save-instance", action="store_true", help="also write the instance files")

    f = sub.add_parser("fuzz", help="search for profitable misreports")
    common(f)
    f.add_argument("--mechanism", choices=sorted(analysis.DEVIATION_CLASSES), required=True)
    f.add_argument("--trials", type=int, default=10000)
    f.add_argument("--fixture", choices=sorted(FIXTURES))
    f.add_argument("--class", dest="kind", default=None,
                   help="deviation class (default: the certified classes of the mechanism)")
    f.add_argument("--sizes", type=_sizes, default=tuple(range(6, 22)))

    s = sub.add_parser("sweep", help="Monte Carlo experiment grid")
    common(s)
    s.add_argument("--regime", choices=sorted(REGIMES), default="single-channel")
    s.add_argument("--sizes", type=_sizes, default=None)
    s.add_argument("--replicates", type=int, default=50)
    s.add_argument("--mechanisms", type=_mech_list, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="record runtime_ms (output no longer reproducible)")
    s.add_argument("--channels-max", type=int, default=20,
                   help="largest K tried for the channel-requirement table (nonuniform regime)")

    x = sub.add_parser("fixtures", help="list, validate or export the bundled examples")
    x.add_argument("--export", metavar="DIR", help="write topology/profile files for every fixture")
    return p


def _out_dir(args) -> Path:
    path = Path(args.out or os.environ.get(OUT_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def _fmt_price(i: int, p) -> str:
    return f"p_{label((i, 0))[0]}={p}"


def _trace_text(outcome) -> str:
    lines = [f"# {outcome.mechanism}: welfare {outcome.welfare}, utilization {outcome.utilization}"]
    for r in outcome.trace:
        bss = " ".join(label((r.winner, b)) for b in r.base_stations)
        price = "-" if r.price is None else r.price
        lines.append(f"channel {r.channel} round {r.round}: {label((r.winner, 0))[0]} wins {bss} "
                     f"sigma={r.sigma} price={price}")
    lines.append("prices: " + " ".join(_fmt_price(i, p) for i, p in enumerate(outcome.prices)))
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    if args.fixture:
        inst = load_fixture(args.fixture)
        mech, k = fixture_defaults(args.fixture)
        mechs = args.mechanism or (mech,)
        K = args.k if args.k is not None else k
    elif args.topology:
        if not args.profiles:
            raise UsageError("--topology needs --profiles")
        inst = load_instance(args.topology, args.profiles)
        mechs = args.mechanism or ("sc-spam",)
        K = args.k if args.k is not None else 1
    elif args.regime:
        inst = random_instance(args.size, args.regime, args.seed, args.degree,
                               K=args.k if args.regime == "nonuniform" else None)
        mechs = args.mechanism or ("sc-spam",)
        K = args.k if args.k is not None else DEFAULT_K[args.regime]
    else:
        raise UsageError("one of --fixture, --topology or --regime is required")
    out = _out_dir(args)
    if args.save_instance:
        save_instance(inst, out / "topology.json", out / "profiles.json")
    for mech in mechs:
        outcome = run_mechanism(mech, inst, K, args.vcg_cap)
        (out / f"{mech}.outcome.json").write_text(dumps(outcome_to_dict(outcome, K)), encoding="utf-8")
        _write_csv(out / f"{mech}.prices.csv", ("operator", "label", "price", "channels"),
                   [(i, label((i, 0))[0], p, outcome.channels_of(i)) for i, p in enumerate(outcome.prices)])
        text = _trace_text(outcome)
        (out / f"{mech}.trace.txt").write_text(text, encoding="utf-8")
        sys.stdout.write(text)
    return EXIT_OK


def _report_rows(reports, instance_ids=None):
    for n, r in enumerate(reports):
        yield (instance_ids[n] if instance_ids else "", r.operator, r.kind, r.descriptor,
               r.truthful, r.deviated, r.gain, int(r.violation), int(r.certified))


REPORT_HEADER = ("instance", "operator", "class", "deviation", "truthful_utility",
                 "deviated_utility", "gain", "violation", "certified")


def cmd_fuzz(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    mech = args.mechanism
    out = _out_dir(args)
    K = args.k if args.k is not None else (2 if mech == "nud-am" else 3 if mech == "nud-wspam" else 1)
    rng = np.random.default_rng(args.seed)

    if mech == "nud-am":
        # the documented counterexample: the mechanism is expected to be manipulable here
        inst = load_fixture(args.fixture or "linear")
        if inst.name != "linear":
            raise UsageError("nud-am fuzzing runs on the linear fixture")
        reports = analysis.deviation_oracle(mech, inst, 1, analysis.DeviationPlan("explicit", bids=LINEAR_DEVIATION),
                                            1, rng, K)
        reports += analysis.deviation_oracle(mech, inst, 1, analysis.DeviationPlan("scale"),
                                             max(args.trials - 1, 0), rng, K)
        _write_csv(out / "fuzz_nud-am.csv", REPORT_HEADER, _report_rows(reports))
        found = [r for r in reports if r.violation]
        best = max((r.gain for r in found), default=Fraction(0))
        print(f"nud-am: {len(found)} profitable deviations of {len(reports)}; "
              f"documented deviation gain {reports[0].gain}; best gain {best}")
        return EXIT_OK if found else EXIT_VIOLATION

    kinds = (args.kind,) if args.kind else tuple(sorted(analysis.CERTIFIED[mech]))
    for kind in kinds:
        if kind not in analysis.DEVIATION_CLASSES[mech]:
            raise UsageError(f"class {kind!r} does not apply to {mech}")
    total_bad = 0
    for n, kind in enumerate(kinds):
        share = args.trials // len(kinds) + (1 if n < args.trials % len(kinds) else 0)
        if args.fixture:
            inst = load_fixture(args.fixture)
            reports, ids = [], []
            per_op = max(share // inst.graph.num_operators, 1)
            for op in range(inst.graph.num_operators):
                batch = analysis.deviation_oracle(mech, inst, op, analysis.DeviationPlan(kind), per_op, rng, K)
                reports += batch
                ids += [args.fixture] * len(batch)
        else:
            summary, reports = analysis.fuzz(mech, kind, share, args.seed + n, args.sizes, K,
                                             degree_range=args.degree)
            ids = None
        _write_csv(out / f"fuzz_{mech}_{kind}.csv", REPORT_HEADER, _report_rows(reports, ids))
        bad = [r for r in reports if r.violation and r.certified]
        shown = [r for r in reports if r.violation]
        total_bad += len(bad)
        best = max((r.gain for r in shown), default=Fraction(0))
        print(f"{mech} {kind}: {len(reports)} trials, {len(shown)} profitable deviations"
              f"{'' if reports and reports[0].certified else ' (report only)'}; best gain {best}")
    return EXIT_VIOLATION if total_bad else EXIT_OK


def cmd_sweep(args) -> int:
    regime = args.regime
    sizes = args.sizes or {"single-channel": tuple(range(6, 22)),
                           "uniform-demand-2": tuple(range(30, 301, 30)),
                           "nonuniform": tuple(range(30, 301, 30))}[regime]
    mechs = args.mechanisms or _mech_list(DEFAULT_SWEEP_MECHANISMS[regime])
    K = args.k if args.k is not None else DEFAULT_K[regime]
    try:
        cfg = analysis.ExperimentConfig("sweep", mechs, regime, sizes, K, args.replicates, args.seed,
                                        str(args.out) if args.out else None, args.vcg_cap, args.degree,
                                        args.workers, args.timing)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    rows = analysis.monte_carlo(cfg)
    _write_csv(out / f"sweep_{regime}_replicates.csv", analysis.COLUMNS, (r.row() for r in rows))
    aggs = analysis.aggregate(rows)
    _write_csv(out / f"sweep_{regime}_aggregate.csv", analysis.Aggregate.COLUMNS,
               ((a.mechanism, a.size, a.K, a.n, f"{a.welfare_mean:.3f}", f"{a.welfare_std:.3f}",
                 f"{a.utilization_mean:.3f}", f"{a.utilization_std:.3f}",
                 None if a.runtime_ms_mean is None else f"{a.runtime_ms_mean:.3f}",
                 a.violation_count, a.errors) for a in aggs))
    if regime == "nonuniform":
        table = []
        for size in sizes:
            for rep in range(args.replicates):
                seed = args.seed + rep
                inst = random_instance(size, regime, [seed, size], args.degree)
                req = analysis.channels_to_satisfy(inst.graph, inst.bid_ladders, inst.demands, args.channels_max)
                for k, used in enumerate(req.utilization_curve, 1):
                    table.append((size, rep, seed, k, used, "" if req.required is None else req.required))
        _write_csv(out / "sweep_nonuniform_channels.csv",
                   ("size", "replicate", "seed", "K", "utilization", "required_K"), table)
    for a in aggs:
        print(f"{a.mechanism:>10} size {a.size:>4} K {a.K}: welfare {a.welfare_mean:.1f} "
              f"utilization {a.utilization_mean:.2f} violations {a.violation_count} errors {a.errors}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    for name in FIXTURES:
        inst = load_fixture(name)
        mech, k = fixture_defaults(name)
        doc_t, doc_p = topology_to_dict(inst.graph), profiles_to_dict(inst)
        again = profiles_from_dict(topology_from_dict(json.loads(dumps(doc_t))), json.loads(dumps(doc_p)))
        if again != inst:
            print(f"{name}: round trip FAILED")
            return EXIT_VIOLATION
        print(f"{name}: {inst.graph.bs_counts} BSs, {len(inst.graph.edges)} edges, {mech} K={k}: ok")
        if args.export:
            path = Path(args.export)
            path.mkdir(parents=True, exist_ok=True)
            save_instance(inst, path / f"{name}.topology.json", path / f"{name}.profiles.json")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "fuzz": cmd_fuzz, "sweep": cmd_sweep, "fixtures": cmd_fixtures}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.config:
            conf = read_config(args.config)
            sub = parser._subparsers._group_actions[0].choices[args.command]
            known = {a.dest: a for a in sub._actions}
            unknown = sorted(set(conf) - set(known))
            if unknown:
                raise UsageError(f"unknown config keys: {', '.join(unknown)}")
            for key, value in conf.items():
                if isinstance(known[key], argparse._StoreTrueAction):
                    conf[key] = value.lower() in ("1", "true", "yes", "on")
            sub.set_defaults(**conf)
            args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ModelError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
