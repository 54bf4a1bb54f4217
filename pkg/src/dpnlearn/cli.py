"""Command-line entry point: sample, learn, eval, experiment."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .dataset import DataError, apply_regime, load_dataset, save_dataset
from .dpnfile import load_dpn, save_dpn
from .inference import StateSpaceError
from .metrics import hamming_breakdown, logloss_bits_per_slice
from .model import ModelError
from .pipeline import (
    CSV_COLUMNS,
    SWITCH,
    LearnOptions,
    format_float,
    learn,
    load_experiment_config,
    run_experiment,
)
from .scoring import BDE, BIC, ScoreError
from .sem import CPD_KINDS
from .simulation import load_pathway, pathway_to_dpn, sample

EXIT_USAGE, EXIT_DATA, EXIT_CAP = 2, 3, 4
EVAL_COLUMNS = ("logloss_bits_per_slice", "hamming", "hamming_prior", "hamming_transition", "rel_logloss")


class UsageError(Exception):
    pass


def load_model(path):
    """A DPN file, or a pathway file converted to its DPN."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return load_dpn(path)
    return pathway_to_dpn(load_pathway(path))


def cmd_sample(args):
    if args.T < 0 or args.n < 0:
        raise UsageError("--T and --n must be >= 0")
    dpn = load_model(args.model)
    data = sample(dpn, args.T, args.n, args.seed)
    data = apply_regime(data, args.regime, [args.seed, 1])
    save_dataset(data, args.out)


def cmd_learn(args):
    data = load_dataset(args.data)
    prior = load_dpn(args.prior_dpn) if args.prior_dpn else None
    if args.restarts < 1:
        raise UsageError("--restarts must be >= 1")
    opts = LearnOptions(
        score=args.score,
        cpd_kind=args.cpd,
        hidden=args.hidden,
        hidden_cardinality=args.hidden_card,
        forced_persistence=args.forced_persistence,
        inter_slice_only=args.inter_slice_only,
        max_parents=args.max_parents,
        seed=args.seed,
        restarts=args.restarts,
        bde_ess=args.bde_ess,
        prior_dpn=prior,
        edge_penalty=args.edge_penalty,
        switch=args.switch,
        p_on=args.p_on,
        max_outer_iterations=args.max_iters,
    )
    res = learn(data, opts)
    save_dpn(res.dpn, args.out)
    log_path = args.log or str(args.out) + ".log.json"
    Path(log_path).write_text(json.dumps(res.log_record(), indent=1, default=float) + "\n")
    print(f"{res.method}: score {res.score:.6f} after {res.iterations} iterations", file=sys.stderr)


def cmd_eval(args):
    model = load_model(args.model)
    data = load_dataset(args.data)
    row = {"logloss_bits_per_slice": format_float(logloss_bits_per_slice(model, data))}
    if args.truth:
        truth = load_model(args.truth)
        hb = hamming_breakdown(model.structure, truth.structure, ignore=(SWITCH,))
        rel = logloss_bits_per_slice(model, data) - logloss_bits_per_slice(truth, data)
        row.update(hamming=hb["total"], hamming_prior=hb["prior"], hamming_transition=hb["transition"],
                   rel_logloss=format_float(rel))
    _write_csv(args.out, EVAL_COLUMNS, [row])


def cmd_experiment(args):
    cfg = load_experiment_config(args.config)
    rows = run_experiment(cfg, args.jobs)
    for r in rows:
        r["rel_logloss"] = format_float(r["rel_logloss"])
    _write_csv(args.out, CSV_COLUMNS, rows)


def _write_csv(out, columns, rows):
    fh = open(out, "w", newline="") if out and out != "-" else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=columns, restval="", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpnlearn", description="Learn dynamic probabilistic networks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="simulate a dataset from a DPN or pathway file")
    s.add_argument("--model", required=True)
    s.add_argument("--T", type=int, default=20)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--regime", default="complete", help="complete | hide:h | two-obs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    l = sub.add_parser("learn", help="learn structure and parameters")
    l.add_argument("--data", required=True)
    l.add_argument("--score", choices=(BIC, BDE), default=BIC)
    l.add_argument("--cpd", choices=CPD_KINDS, default="table")
    l.add_argument("--hidden", type=int, default=0)
    l.add_argument("--hidden-card", type=int, default=2)
    l.add_argument("--forced-persistence", action="store_true")
    l.add_argument("--inter-slice-only", action="store_true", help="no arcs inside slice 1")
    l.add_argument("--max-parents", type=int, default=5)
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--restarts", type=int, default=1)
    l.add_argument("--bde-ess", type=float, default=1.0)
    l.add_argument("--prior-dpn")
    l.add_argument("--edge-penalty", type=float, default=0.0)
    l.add_argument("--switch", action="store_true", help="add a frozen-dynamics switch variable")
    l.add_argument("--p-on", type=float, help="switch-on probability per step")
    l.add_argument("--max-iters", type=int, default=30)
    l.add_argument("--out", required=True)
    l.add_argument("--log", help="diagnostics file (default: <out>.log.json)")
    l.set_defaults(func=cmd_learn)

    e = sub.add_parser("eval", help="logloss, and distances to a generating model")
    e.add_argument("--model", required=True)
    e.add_argument("--truth")
    e.add_argument("--data", required=True)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="run a sweep from a config file")
    x.add_argument("--config", required=True)
    x.add_argument("--out", default="-")
    x.add_argument("--jobs", type=int)
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except StateSpaceError as exc:
        print(f"dpnlearn: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, ModelError, ScoreError, OSError, KeyError, ValueError) as exc:
        print(f"dpnlearn: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
