"""Command line interface.

Subcommands ``test``, ``ci``, ``tost`` read a two-column delimited file
(first arm, second arm; a missing value is an empty field or ``NA``) and
``simulate`` runs a study described in a TOML file.

Exit codes: 0 success, 2 unreadable or malformed input, 3 a statistic or
procedure is undefined for the data, 4 I/O failure.
"""

import argparse
import csv
import json
import math
import sys

from . import harness, randomization, statistics
from .errors import DataError, PairPermError, RecordBothMissing
from .sample import PartiallyPairedSample, from_records

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_IO = 4

DEFAULT_MISSING = ("", "NA", "na")


class DatasetParseError(DataError):
    def __init__(self, path, line, message):
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def _sniff_delimiter(line):
    for delim in ("\t", ";", ","):
        if delim in line:
            return delim
    return ","


def read_dataset(path, missing_tokens=DEFAULT_MISSING, delimiter=None) -> PartiallyPairedSample:
    """Load a two-column dataset into a partially paired sample.

    A first row whose fields are neither numbers nor missing tokens is taken
    as a header. Blank lines are skipped.

    Raises
    ------
    DatasetParseError
        With the 1-based line number of the offending row.
    """
    missing = {t.strip() for t in missing_tokens}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if delimiter is None:
        first = next((ln for ln in lines if ln.strip()), "")
        delimiter = _sniff_delimiter(first)

    records, line_numbers = [], []
    seen_data = False
    for lineno, fields in enumerate(csv.reader(lines, delimiter=delimiter), start=1):
        if not fields or all(not f.strip() for f in fields) and len(fields) == 1:
            continue
        fields = [f.strip() for f in fields]
        if len(fields) != 2:
            raise DatasetParseError(path, lineno, f"expected 2 columns, found {len(fields)}")
        parsed = []
        try:
            for f in fields:
                parsed.append(None if f in missing else float(f))
        except ValueError:
            if not seen_data:
                seen_data = True  # header row
                continue
            raise DatasetParseError(path, lineno, f"cannot parse {fields!r} as numbers") from None
        seen_data = True
        for value in parsed:
            if value is not None and not math.isfinite(value):
                raise DatasetParseError(path, lineno, f"non-finite value in {fields!r}")
        records.append(tuple(parsed))
        line_numbers.append(lineno)
    try:
        return from_records(records)
    except RecordBothMissing as exc:
        raise DatasetParseError(path, line_numbers[exc.index], "both values missing") from None


# ---------------------------------------------------------------------------
# output


def _emit(args, record, lines):
    if args.format == "record":
        sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _sizes(sample):
    return {"n1": sample.n1, "n2": sample.n2, "n3": sample.n3}


def _perm_record(sample, args, rule):
    if args.exact:
        res = randomization.exact_permutation_test(sample, rule, args.alpha, args.side, keep_replicates=bool(args.dump_replicates))
    else:
        res = randomization.mc_permutation_test(
            sample, rule, args.B, args.seed, args.side, args.alpha,
            workers=args.threads, keep_replicates=bool(args.dump_replicates),
        )
    if args.dump_replicates:
        if res.weights is not None:
            values = [v for v, w in zip(res.values, res.weights) for _ in range(int(w))]
        else:
            values = res.values
        randomization.write_replicates(args.dump_replicates, values)
    return {
        "method": "perm",
        "statistic": res.t_obs,
        "reference": "exact randomization" if res.exact else "Monte Carlo randomization",
        "p_one_sided": res.p_one_sided,
        "p_two_sided": res.p_two_sided,
        "p_value": res.p_value,
        "reject": res.reject,
        "weight": res.weight,
        "replicates": res.replicates,
        "seed": res.seed,
        "critical_value": res.c_p_alpha,
        "gamma": res.gamma_p,
    }


def _reference_record(outcome, weight=None):
    record = {
        "method": outcome.method,
        "statistic": outcome.statistic.value,
        "reference": "normal" if outcome.statistic.reference == "normal" else "t",
        "df": outcome.statistic.df,
        "p_one_sided": outcome.p_one_sided,
        "p_two_sided": outcome.p_two_sided,
        "p_value": outcome.p_value,
        "reject": outcome.reject,
    }
    if weight is not None:
        record["weight"] = weight
    return record


def _one_test(method, sample, args, rule):
    if method == "perm":
        return _perm_record(sample, args, rule)
    if method == "asymptotic":
        weight = statistics.resolve_weight(sample, rule)
        return _reference_record(statistics.asymptotic_test(sample, rule, args.alpha, args.side), weight)
    if method == "lin-stivers":
        return _reference_record(statistics.lin_stivers_test(sample, args.alpha, args.side))
    return _reference_record(statistics.kim_t3_test(sample, args.alpha, args.side))


def cmd_test(args):
    sample = read_dataset(args.file, args.missing, args.delimiter)
    rule = statistics.WeightRule.parse(args.weight)
    methods = ["perm", "asymptotic", "lin-stivers", "kim"] if args.method == "all" else [args.method]
    results = [_one_test(m, sample, args, rule) for m in methods]
    record = {
        "command": "test",
        "file": str(args.file),
        "alpha": args.alpha,
        "side": args.side,
        "weight_rule": str(rule),
        **_sizes(sample),
    }
    if len(results) == 1:
        record.update(results[0])
    else:
        record["results"] = results
    lines = [
        f"n1={sample.n1} n2={sample.n2} n3={sample.n3}  alpha={args.alpha}  side={args.side}  weight rule={rule}",
        f"{'method':<12} {'statistic':>12} {'p one-sided':>12} {'p two-sided':>12}  reject",
    ]
    for res in results:
        lines.append(
            f"{res['method']:<12} {res['statistic']:>12.6f} {res['p_one_sided']:>12.6f} "
            f"{res['p_two_sided']:>12.6f}  {'yes' if res['reject'] else 'no'}"
        )
        if res["method"] == "perm":
            lines.append(f"  {res['reference']}, {res['replicates']} replicates, seed={res['seed']}")
    _emit(args, record, lines)


def cmd_ci(args):
    sample = read_dataset(args.file, args.missing, args.delimiter)
    rule = statistics.WeightRule.parse(args.weight)
    ci = randomization.confidence_interval(sample, rule, args.alpha, args.B, args.seed, workers=args.threads)
    record = {
        "command": "ci",
        "file": str(args.file),
        "lo": ci.lo,
        "hi": ci.hi,
        "statistic": ci.t_obs,
        "critical_value": ci.critical_value,
        "scale": ci.scale,
        "alpha": args.alpha,
        "B": args.B,
        "seed": args.seed,
        "weight_rule": str(rule),
        **_sizes(sample),
    }
    lines = [
        f"{100 * (1 - args.alpha):g}% interval for mu1 - mu2: [{ci.lo:.6f}, {ci.hi:.6f}]",
        f"T={ci.t_obs:.6f}  c={ci.critical_value:.6f}  S_w={ci.scale:.6f}  B={args.B}  seed={args.seed}",
    ]
    _emit(args, record, lines)


def cmd_tost(args):
    sample = read_dataset(args.file, args.missing, args.delimiter)
    rule = statistics.WeightRule.parse(args.weight)
    res = randomization.tost_equivalence_test(
        sample, rule, args.epsilon, args.alpha, args.B, args.seed, workers=args.threads
    )
    record = {
        "command": "tost",
        "file": str(args.file),
        "equivalent": res.equivalent,
        "p_upper_bound": res.p_upper_bound,
        "p_lower_bound": res.p_lower_bound,
        "p_value": res.p_value,
        "epsilon": args.epsilon,
        "alpha": args.alpha,
        "B": args.B,
        "seed": args.seed,
        "weight_rule": str(rule),
        **_sizes(sample),
    }
    lines = [
        f"equivalence margin {args.epsilon:g}: {'equivalent' if res.equivalent else 'not shown equivalent'}",
        f"p(mu1-mu2 >= eps)={res.p_upper_bound:.6f}  p(mu1-mu2 <= -eps)={res.p_lower_bound:.6f}",
    ]
    _emit(args, record, lines)


def cmd_simulate(args):
    grid = harness.load_study_config(args.config)
    table = harness.run_study(grid, workers=args.threads)
    if args.out:
        harness.emit_plot_data(table, args.out)
        with open(f"{args.out}.meta.json", "w") as fh:
            json.dump(harness.study_metadata(grid, table), fh, indent=2, sort_keys=True)
    else:
        harness.emit_plot_data(table, sys.stdout)


# ---------------------------------------------------------------------------
# parser


def _probability(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairperm",
        description="Randomization tests for matched pairs with missing values.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="two-column delimited file (arm 1, arm 2)")
    common.add_argument("--alpha", type=_probability, default=0.05)
    common.add_argument("--B", dest="B", type=_positive_int, default=1000, help="Monte Carlo replicates")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--weight", default="paper", help="paper (2n1/(n+n1)), prop (n1/n) or fixed=<a>")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--format", choices=("text", "record"), default="text")
    common.add_argument("--missing", nargs="*", default=list(DEFAULT_MISSING), help="tokens that mark a missing value")
    common.add_argument("--delimiter", default=None, help="field delimiter (default: sniffed)")

    p = sub.add_parser("test", parents=[common], help="test H0: mu1 = mu2")
    p.add_argument("--method", choices=("perm", "asymptotic", "lin-stivers", "kim", "all"), default="perm")
    p.add_argument("--side", choices=("one", "two"), default="two")
    p.add_argument("--exact", action="store_true", help="enumerate the whole randomization group")
    p.add_argument("--dump-replicates", metavar="PATH", help="write permutation statistics, one per line")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ci", parents=[common], help="two-sided interval for mu1 - mu2")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("tost", parents=[common], help="equivalence test |mu1 - mu2| < epsilon")
    p.add_argument("--epsilon", type=float, required=True)
    p.set_defaults(func=cmd_tost)

    p = sub.add_parser("simulate", help="run a simulation study from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="output CSV (default: stdout); metadata goes to <out>.meta.json")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "side", None) is not None:
        args.side = "greater" if args.side == "one" else "two-sided"
    try:
        args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PairPermError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        print(_remedy(exc), file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _remedy(exc):
    from . import errors

    hints = {
        errors.TooFewCompletePairs: "hint: use --weight fixed=0 to ignore the complete pairs",
        errors.TooFewIncomplete: "hint: use --weight fixed=1 to ignore the unpaired observations",
        errors.GroupTooLarge: "hint: drop --exact to use Monte Carlo replicates",
        errors.DegenerateVariance: "hint: the data have no spread in one part; check for constant columns",
    }
    for cls, hint in hints.items():
        if isinstance(exc, cls):
            return hint
    return "hint: check the sample sizes required by the chosen method"


if __name__ == "__main__":
    sys.exit(main())
