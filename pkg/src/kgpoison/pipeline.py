"""Clean train -> select targets -> poison -> retrain -> evaluate, with reports."""

from __future__ import annotations

import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .attack import AttackConfig, AttackResult, DecoyChoice, entity_centroids, generate_attack, generate_random_baseline
from .attack.generate import BASELINES, write_decoys, write_edits
from .evaluate import MetricsReport, evaluate, filtered_rank, select_targets
from .graph import Dataset, FilterIndex, build_filter_index, load_dataset_dir, merge_poison, write_dataset
from .models import Model, config_hash, score_side
from .trainer import TrainConfig, check_config_hash, train

log = logging.getLogger(__name__)

NO_ATTACK = "none"


def parse_attack(spec) -> AttackConfig | str:
    """``sym_truth``-style names become AttackConfig; baselines and ``none`` stay strings."""
    if isinstance(spec, AttackConfig):
        return spec
    spec = str(spec).strip().lower()
    if spec in BASELINES or spec == NO_ATTACK:
        return spec
    pattern, _, heuristic = spec.partition("_")
    return AttackConfig(pattern=pattern, heuristic=heuristic)


def attack_name(spec) -> str:
    return spec.name if isinstance(spec, AttackConfig) else spec


@dataclass
class PipelineConfig:
    dataset: Dataset | str | Path
    kind: str
    train_config: TrainConfig
    attacks: Sequence = ("sym_truth",)
    output_dir: str | Path | None = None
    seeds: Sequence[int] = (0,)
    cutoff: int = 10
    either_side: bool = False
    vary_retrain_seed: bool = False
    save_checkpoints: bool = False

    def __post_init__(self):
        self.attacks = [parse_attack(a) for a in self.attacks]
        if not self.attacks:
            raise ValueError("pipeline needs at least one attack")
        if not self.seeds:
            raise ValueError("pipeline needs at least one seed")

    def canonical(self) -> str:
        ds = self.dataset if isinstance(self.dataset, (str, Path)) else "<in-memory>"
        return (
            f"dataset={ds};kind={self.kind};train={self.train_config.canonical()};"
            f"attacks={[repr(a) for a in self.attacks]};seeds={list(self.seeds)};cutoff={self.cutoff};"
            f"either_side={self.either_side};vary_retrain_seed={self.vary_retrain_seed}"
        )


@dataclass
class AttackRow:
    seed: int
    attack: str
    n_targets: int
    n_edits: int
    clean_mrr: float
    clean_hits1: float
    poisoned_mrr: float
    poisoned_hits1: float
    seconds: float
    error: str = ""

    @property
    def relative_change(self) -> float:
        """(clean - poisoned) / clean: positive means the attack degraded the targets."""
        return (self.clean_mrr - self.poisoned_mrr) / self.clean_mrr if self.clean_mrr else float("nan")


@dataclass
class DecoyRow:
    seed: int
    attack: str
    side: str
    n: int
    clean_mrr: float
    poisoned_mrr: float
    note: str = ""

    @property
    def relative_change(self) -> float:
        """(poisoned - clean) / clean: positive means the decoys moved up."""
        return (self.poisoned_mrr - self.clean_mrr) / self.clean_mrr if self.clean_mrr else float("nan")


@dataclass
class ExperimentReport:
    rows: list[AttackRow] = field(default_factory=list)
    decoy_rows: list[DecoyRow] = field(default_factory=list)
    runtime_rows: list[tuple[int, str, float]] = field(default_factory=list)
    results: dict = field(default_factory=dict, repr=False)

    def mean_rows(self) -> list[dict]:
        """Seed-averaged clean/poisoned metrics per attack (failed rows excluded)."""
        out = []
        for name in dict.fromkeys(r.attack for r in self.rows):
            rows = [r for r in self.rows if r.attack == name and not r.error]
            if not rows:
                continue
            out.append({
                "attack": name,
                "seeds": len(rows),
                "clean_mrr": float(np.mean([r.clean_mrr for r in rows])),
                "clean_hits1": float(np.mean([r.clean_hits1 for r in rows])),
                "poisoned_mrr": float(np.mean([r.poisoned_mrr for r in rows])),
                "poisoned_hits1": float(np.mean([r.poisoned_hits1 for r in rows])),
                "relative_change": float(np.mean([r.relative_change for r in rows])),
                "n_edits": float(np.mean([r.n_edits for r in rows])),
            })
        return out

    def mean_relative_change(self, attack: str) -> float:
        vals = [r.relative_change for r in self.rows if r.attack == attack and not r.error]
        return float(np.mean(vals)) if vals else float("nan")

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "report.tsv", "w") as fh:
            fh.write("seed\tattack\tn_targets\tn_edits\tclean_mrr\tclean_hits1\tpoisoned_mrr\tpoisoned_hits1\trelative_change\terror\n")
            for r in self.rows:
                fh.write(
                    f"{r.seed}\t{r.attack}\t{r.n_targets}\t{r.n_edits}\t{r.clean_mrr:.6f}\t{r.clean_hits1:.6f}\t"
                    f"{r.poisoned_mrr:.6f}\t{r.poisoned_hits1:.6f}\t{r.relative_change:.6f}\t{r.error}\n"
                )
            for m in self.mean_rows():
                fh.write(
                    f"mean\t{m['attack']}\t\t{m['n_edits']:.1f}\t{m['clean_mrr']:.6f}\t{m['clean_hits1']:.6f}\t"
                    f"{m['poisoned_mrr']:.6f}\t{m['poisoned_hits1']:.6f}\t{m['relative_change']:.6f}\t\n"
                )
        with open(d / "decoys.tsv", "w") as fh:
            fh.write("seed\tattack\tside\tn\tclean_mrr\tpoisoned_mrr\trelative_change\tnote\n")
            for r in self.decoy_rows:
                fh.write(
                    f"{r.seed}\t{r.attack}\t{r.side}\t{r.n}\t{r.clean_mrr:.6f}\t{r.poisoned_mrr:.6f}\t"
                    f"{r.relative_change:.6f}\t{r.note}\n"
                )
        write_runtime(self.runtime_rows, d / "runtime.tsv")
        return d


def decoy_report(
    clean: Model,
    poisoned: Model,
    decoys: Sequence[DecoyChoice],
    filter_index: FilterIndex,
    poisoned_filter_index: FilterIndex | None = None,
    seed: int = 0,
    attack: str = "",
) -> list[DecoyRow]:
    """Per-side MRR of the decoy triples before and after poisoning."""
    pfi = poisoned_filter_index if poisoned_filter_index is not None else filter_index
    rows = []
    for side in ("subject", "object"):
        chosen = [d for d in decoys if d.side == side]
        if not chosen:
            log.info("no %s-side decoys for %s; row omitted", side, attack or "attack")
            continue

        def mrr(model, fi):
            ranks = [
                filtered_rank(score_side(model, d.triple, side), d.entity, fi.known(d.triple, side))
                for d in chosen
            ]
            return MetricsReport.from_ranks(ranks, side).mrr

        rows.append(DecoyRow(seed, attack, side, len(chosen), mrr(clean, filter_index), mrr(poisoned, pfi)))
    return rows


def runtime_report(results: Sequence[AttackResult]) -> list[tuple[str, float]]:
    """Attack-generation seconds per executed attack (training and clustering excluded)."""
    return [(r.name, r.seconds) for r in results]


def write_runtime(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("seed\tattack\tseconds\n")
        for seed, name, sec in rows:
            fh.write(f"{seed}\t{name}\t{sec:.6f}\n")


def run_attack(spec, model: Model, dataset: Dataset, targets, fi: FilterIndex, seed: int, centroids=None) -> AttackResult:
    if spec == NO_ATTACK:
        return AttackResult(NO_ATTACK)
    if isinstance(spec, str):
        return generate_random_baseline(dataset, targets, spec, seed, fi)
    return generate_attack(model, dataset, targets, spec, fi, centroids)


def write_manifest(path, config_text: str, extra: dict | None = None) -> None:
    fields = {
        "config_hash": config_hash(config_text),
        "kgpoison": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        **(extra or {}),
    }
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in fields.items()))


def run_pipeline(config: PipelineConfig) -> ExperimentReport:
    dataset = config.dataset
    if not isinstance(dataset, Dataset):
        dataset = load_dataset_dir(dataset)
    fi = build_filter_index(dataset)
    out = Path(config.output_dir) if config.output_dir is not None else None
    report = ExperimentReport()

    for seed in config.seeds:
        tc = config.train_config.replace(seed=seed)
        ckpt = out / f"seed{seed}" / "clean" if out is not None and config.save_checkpoints else None
        clean, _ = train(dataset, config.kind, tc, ckpt)
        targets = select_targets(clean, dataset, fi, config.cutoff, require_both=not config.either_side)
        log.info("seed %d: %d targets", seed, len(targets))
        target_triples = [t.triple for t in targets]
        clean_metrics = evaluate(clean, target_triples, fi) if targets else None

        centroids = None
        for spec in config.attacks:
            if isinstance(spec, AttackConfig) and spec.pattern == "com" and spec.heuristic == "truth":
                centroids = entity_centroids(clean, spec.clusters, spec.seed)
                break

        for spec in config.attacks:
            name = attack_name(spec)
            if clean_metrics is None:
                report.rows.append(AttackRow(seed, name, 0, 0, float("nan"), float("nan"), float("nan"), float("nan"), 0.0, "no targets"))
                continue
            try:
                result = run_attack(spec, clean, dataset, targets, fi, seed, centroids)
                poisoned_ds = merge_poison(dataset, result.triples())
                retrain_cfg = tc.replace(seed=tc.seed + 1000) if config.vary_retrain_seed else tc
                check_config_hash(clean.meta, retrain_cfg, override=config.vary_retrain_seed)
                poisoned, _ = train(poisoned_ds, config.kind, retrain_cfg)
                pfi = build_filter_index(poisoned_ds)
                pm = evaluate(poisoned, target_triples, pfi)
            except Exception as exc:  # one failed attack must not sink the others
                log.exception("attack %s failed for seed %d", name, seed)
                report.rows.append(AttackRow(seed, name, len(targets), 0, clean_metrics.mrr, clean_metrics.hits_at[1], float("nan"), float("nan"), 0.0, repr(exc)))
                continue
            report.rows.append(AttackRow(
                seed, name, len(targets), poisoned_ds.stats.added_edits,
                clean_metrics.mrr, clean_metrics.hits_at[1], pm.mrr, pm.hits_at[1], result.seconds,
            ))
            report.decoy_rows.extend(decoy_report(clean, poisoned, result.decoys, fi, pfi, seed, name))
            report.runtime_rows.append((seed, name, result.seconds))
            report.results[(seed, name)] = result
            if out is not None:
                adir = out / f"seed{seed}" / name
                adir.mkdir(parents=True, exist_ok=True)
                write_edits(result, dataset.vocab, adir / "edits.tsv")
                write_decoys(result.decoys, dataset.vocab, adir / "decoys.tsv")
                write_dataset(poisoned_ds, adir / "poisoned")

    if out is not None:
        report.write(out)
        write_manifest(out / "manifest.txt", config.canonical(), {"kind": config.kind})
    return report
