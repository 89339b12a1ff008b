"""Command-line entry point: ``kgpoison <command> [flags]``.

Every command writes TSV files plus a ``manifest.txt`` under ``--out``.  A
``--config`` file of ``key=value`` lines supplies defaults for any flag (keys
use the flag name with dashes or underscores); flags given on the command
line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .attack import AttackConfig, generate_attack, generate_random_baseline, read_decoys, read_edits
from .attack.generate import BASELINES, write_decoys, write_edits
from .attack.kmeans import ELBOW_GRID, elbow_scan
from .evaluate import evaluate, select_targets, write_metrics
from .graph import DatasetError, Triple, build_filter_index, load_dataset_dir, merge_poison, write_dataset
from .models import load_model
from .pipeline import PipelineConfig, decoy_report, run_pipeline, write_manifest, write_runtime
from .synthetic import symmetric_kg
from .trainer import desk_config, train

log = logging.getLogger("kgpoison")

KINDS = ("distmult", "complex", "transe")
# checked after the config file is merged, so a config can supply them
REQUIRED = {
    "train": ("out", "dataset_dir"),
    "evaluate": ("out", "dataset_dir", "checkpoint"),
    "select-targets": ("out", "dataset_dir", "checkpoint"),
    "attack": ("out", "dataset_dir", "checkpoint"),
    "poison": ("out", "dataset_dir", "edits"),
    "pipeline": ("out", "dataset_dir"),
    "decoy-report": ("out", "dataset_dir", "clean", "poisoned", "decoys"),
    "synth": ("out",),
    "elbow": ("out", "checkpoint"),
}
BOOL_KEYS = {"either_side", "vary_retrain_seed", "save_checkpoints", "exclude_target_pair", "verbose"}


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _truthy(value: str) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


# --- shared flag groups -------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="key=value file with flag defaults")
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("-v", "--verbose", action="store_true")


def _dataset(p):
    p.add_argument("--dataset-dir", help="directory with train.txt, valid.txt, test.txt (required)")


def _training(p):
    p.add_argument("--model", choices=KINDS, default="distmult")
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--label-smoothing", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--input-dropout", type=float)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--seed", type=int, default=0)


def _attack(p):
    p.add_argument("--pattern", choices=("sym", "inv", "com"))
    p.add_argument("--heuristic", choices=("truth", "rank", "cos"), default="truth")
    p.add_argument("--clusters", type=int, default=100)
    p.add_argument("--step3-mode", choices=("literal", "body"), default="literal")
    p.add_argument("--exclude-target-pair", action="store_true")
    p.add_argument("--baseline", choices=BASELINES)


def train_config_from(args):
    changes = {
        k: getattr(args, k)
        for k in ("dim", "epochs", "batch_size", "lr", "label_smoothing", "l2", "input_dropout", "optimizer", "seed")
        if getattr(args, k, None) is not None
    }
    return desk_config(args.model, **changes)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="kgpoison", description="Inference-pattern poisoning of link predictors")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["train"] = sub.add_parser("train", help="train a clean model and save its checkpoint")
    _common(p)
    _dataset(p)
    _training(p)

    p = subs["evaluate"] = sub.add_parser("evaluate", help="filtered MR/MRR/Hits of a checkpoint")
    _common(p)
    _dataset(p)
    p.add_argument("--checkpoint")
    p.add_argument("--split", choices=("valid", "test"), default="test")
    p.add_argument("--targets", help="evaluate only the triples in this targets.tsv")

    p = subs["select-targets"] = sub.add_parser("select-targets", help="test triples ranked within the cutoff")
    _common(p)
    _dataset(p)
    p.add_argument("--checkpoint")
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--either-side", action="store_true")

    p = subs["attack"] = sub.add_parser("attack", help="generate adversarial additions")
    _common(p)
    _dataset(p)
    _attack(p)
    p.add_argument("--checkpoint")
    p.add_argument("--targets", help="targets.tsv from select-targets (default: select now)")
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--either-side", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = subs["poison"] = sub.add_parser("poison", help="merge an edits TSV into the train split")
    _common(p)
    _dataset(p)
    p.add_argument("--edits")

    p = subs["pipeline"] = sub.add_parser("pipeline", help="clean train, attack, retrain, report")
    _common(p)
    _dataset(p)
    _training(p)
    p.add_argument("--attacks", default="sym_truth", help="comma list, e.g. sym_truth,sym_cos,random_n")
    p.add_argument("--seeds", default="0", help="comma list of seeds")
    p.add_argument("--clusters", type=int, default=100)
    p.add_argument("--step3-mode", choices=("literal", "body"), default="literal")
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--either-side", action="store_true")
    p.add_argument("--vary-retrain-seed", action="store_true")
    p.add_argument("--save-checkpoints", action="store_true")

    p = subs["decoy-report"] = sub.add_parser("decoy-report", help="decoy MRR before and after poisoning")
    _common(p)
    _dataset(p)
    p.add_argument("--clean", help="clean checkpoint directory")
    p.add_argument("--poisoned", help="poisoned checkpoint directory")
    p.add_argument("--decoys", help="decoys.tsv from the attack command")
    p.add_argument("--poisoned-dataset-dir", help="filter with the poisoned splits (default: clean splits)")

    p = subs["synth"] = sub.add_parser("synth", help="write a synthetic KG with a planted symmetric family")
    _common(p)
    p.add_argument("--entities", type=int, default=200)
    p.add_argument("--triples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    p = subs["elbow"] = sub.add_parser("elbow", help="k-means inertia over a grid of cluster counts")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--grid", default=",".join(map(str, ELBOW_GRID)))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-init", type=int, default=1)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise SystemExit(f"{args.config}: unknown keys {unknown} for '{args.command}'")
        sp.set_defaults(**{k: (_truthy(v) if k in BOOL_KEYS else v) for k, v in cfg.items()})
        args = parser.parse_args(argv)
    missing = [k for k in REQUIRED[args.command] if getattr(args, k, None) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        parser.error(f"{args.command}: missing required {flags} (flag or config key)")
    return args


# --- commands -----------------------------------------------------------------


def _targets_tsv(path, targets, vocab):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("subject\trelation\tobject\tsubject_rank\tobject_rank\n")
        for t in targets:
            fh.write("\t".join([*vocab.decode(t.triple), str(t.subject_rank), str(t.object_rank)]) + "\n")


def _read_targets(path, vocab) -> list[Triple]:
    return read_edits(path, vocab)  # same leading (subject, relation, object) columns


def cmd_train(args, out: Path):
    ds = load_dataset_dir(args.dataset_dir)
    cfg = train_config_from(args)
    model, report = train(ds, args.model, cfg, out / "model")
    report.write_tsv(out / "train_report.tsv")
    log.info("trained %s in %.1fs, final loss %.5f", args.model, report.seconds, report.losses[-1])
    return cfg.canonical()


def cmd_evaluate(args, out: Path):
    ds = load_dataset_dir(args.dataset_dir)
    model = load_model(args.checkpoint)
    triples = _read_targets(args.targets, ds.vocab) if args.targets else ds.split(args.split)
    fi = build_filter_index(ds)
    reports = [evaluate(model, triples, fi, side) for side in ("subject", "object", "both")]
    write_metrics(reports, out / "metrics.tsv")
    for rep in reports:
        print(rep.summary())


def cmd_select_targets(args, out: Path):
    ds = load_dataset_dir(args.dataset_dir)
    model = load_model(args.checkpoint)
    targets = select_targets(model, ds, build_filter_index(ds), args.cutoff, require_both=not args.either_side)
    _targets_tsv(out / "targets.tsv", targets, ds.vocab)
    print(f"{len(targets)} targets of {len(ds.test)} test triples")


def cmd_attack(args, out: Path):
    ds = load_dataset_dir(args.dataset_dir)
    model = load_model(args.checkpoint)
    fi = build_filter_index(ds)
    if args.targets:
        targets = _read_targets(args.targets, ds.vocab)
    else:
        targets = [t.triple for t in select_targets(model, ds, fi, args.cutoff, require_both=not args.either_side)]
    if args.baseline:
        result = generate_random_baseline(ds, targets, args.baseline, args.seed, fi)
    else:
        if not args.pattern:
            raise SystemExit("attack needs --pattern or --baseline")
        cfg = AttackConfig(args.pattern, args.heuristic, args.clusters, args.seed, args.step3_mode, args.exclude_target_pair)
        result = generate_attack(model, ds, targets, cfg, fi)
    write_edits(result, ds.vocab, out / "edits.tsv")
    write_decoys(result.decoys, ds.vocab, out / "decoys.tsv")
    write_runtime([(args.seed, result.name, result.seconds)], out / "runtime.tsv")
    print(f"{result.name}: {len(result)} edit triples for {len(targets)} targets, {len(result.skipped)} sides skipped")


def cmd_poison(args, out: Path):
    ds = load_dataset_dir(args.dataset_dir)
    edits = read_edits(args.edits, ds.vocab)
    poisoned = merge_poison(ds, edits)
    write_dataset(poisoned, out)
    print(f"added {poisoned.stats.added_edits} of {len(edits)} edit triples")


def cmd_pipeline(args, out: Path):
    cfg = PipelineConfig(
        dataset=args.dataset_dir,
        kind=args.model,
        train_config=train_config_from(args),
        attacks=[_attack_spec(a, args) for a in args.attacks.split(",") if a.strip()],
        output_dir=out,
        seeds=[int(s) for s in str(args.seeds).split(",") if s.strip()],
        cutoff=args.cutoff,
        either_side=args.either_side,
        vary_retrain_seed=args.vary_retrain_seed,
        save_checkpoints=args.save_checkpoints,
    )
    report = run_pipeline(cfg)
    for row in report.mean_rows():
        print(f"{row['attack']:>12}  clean MRR {row['clean_mrr']:.4f}  poisoned MRR {row['poisoned_mrr']:.4f}  "
              f"relative drop {100 * row['relative_change']:.1f}%")
    return None  # run_pipeline writes its own manifest


def _attack_spec(name: str, args):
    name = name.strip().lower()
    if name in BASELINES or name == "none":
        return name
    pattern, _, heuristic = name.partition("_")
    return AttackConfig(pattern, heuristic, args.clusters, 0, args.step3_mode)


def cmd_decoy_report(args, out: Path):
    ds = load_dataset_dir(args.dataset_dir)
    clean, poisoned = load_model(args.clean), load_model(args.poisoned)
    decoys = read_decoys(args.decoys, ds.vocab)
    fi = build_filter_index(ds)
    pfi = build_filter_index(load_dataset_dir(args.poisoned_dataset_dir)) if args.poisoned_dataset_dir else fi
    rows = decoy_report(clean, poisoned, decoys, fi, pfi)
    with open(out / "decoy_report.tsv", "w") as fh:
        fh.write("side\tn\tclean_mrr\tpoisoned_mrr\trelative_change\n")
        for r in rows:
            fh.write(f"{r.side}\t{r.n}\t{r.clean_mrr:.6f}\t{r.poisoned_mrr:.6f}\t{r.relative_change:.6f}\n")
    for r in rows:
        print(f"{r.side}: decoy MRR {r.clean_mrr:.4f} -> {r.poisoned_mrr:.4f}")


def cmd_synth(args, out: Path):
    ds = symmetric_kg(n_entities=args.entities, n_train=args.triples, seed=args.seed)
    write_dataset(ds, out)
    print(f"{ds.n_entities} entities, {ds.n_relations} relations, {len(ds.train)} train triples")


def cmd_elbow(args, out: Path):
    model = load_model(args.checkpoint)
    grid = [int(k) for k in args.grid.split(",") if k.strip()]
    rows = elbow_scan(model.entities, grid, args.seed, args.n_init)
    with open(out / "elbow.tsv", "w") as fh:
        fh.write("k\tinertia\n")
        for k, inertia in rows:
            fh.write(f"{k}\t{inertia!r}\n")
            print(f"k={k}\tinertia={inertia:.4f}")


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "select-targets": cmd_select_targets,
    "attack": cmd_attack,
    "poison": cmd_poison,
    "pipeline": cmd_pipeline,
    "decoy-report": cmd_decoy_report,
    "synth": cmd_synth,
    "elbow": cmd_elbow,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        text = COMMANDS[args.command](args, out)
    except (DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command != "pipeline":
        settings = ";".join(f"{k}={v!r}" for k, v in sorted(vars(args).items()) if k not in ("out", "verbose"))
        write_manifest(out / "manifest.txt", text or settings, {"command": args.command})
    return 0


if __name__ == "__main__":
    sys.exit(main())
