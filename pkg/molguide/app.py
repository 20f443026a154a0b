"""molguide application layer: one method per CLI subcommand.

Orchestrates the subsystems (dataset ingestion, diffusion training,
classifier training, guided sampling, screening and degradation
analysis), writes every artifact under the output directory and prints
a rich summary table on stdout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from molguide.analysis.clustering import kmeans_fingerprints
from molguide.analysis.report import DegradationReport, cluster_table, fingerprints
from molguide.chem.elements import BondClass, Element
from molguide.chem.fingerprint import check_shape
from molguide.chem.graph import MolecularGraph
from molguide.chem.similarity import best_similarities, drug_index_from_counts
from molguide.core.diffusion import (
    NoiseSchedule,
    StateSpace,
    TransitionModel,
    build_transitions,
    estimate_marginals,
    node_count_histogram,
)
from molguide.core.engine import load_engine, network_checkpoint, transitions_from_checkpoint
from molguide.core.guidance import GuidanceConfig, LabeledMolecule, train_classifier
from molguide.core.monitor import TrainingMonitor
from molguide.core.training import TrainingResult, train_diffusion
from molguide.data.dataset import (
    DatasetFilter,
    IngestResult,
    dataset_stats,
    filter_dataset,
    ingest_csv,
    limit_size,
    read_molecules,
)
from molguide.data.metrics import canonical_or_none, generation_metrics
from molguide.utils.config import RunConfig
from molguide.utils.container import load_checkpoint, save_checkpoint
from molguide.utils.errors import CheckpointError, ConfigError, DatasetError
from molguide.utils.logger import get_logger
from molguide.utils.output import (
    write_csv,
    write_fingerprint_file,
    write_loss_trace,
    write_smiles_file,
)

log = get_logger(__name__)

DENOISER_FILE = "denoiser.ckpt"
CLASSIFIER_FILE = "classifier.ckpt"


@dataclass
class ScreenResult:
    drug_like_generated: float
    drug_like_training: float
    drug_index: float
    per_molecule: pd.DataFrame
    top_pairs: pd.DataFrame | None = None


@dataclass
class CommandResult:
    """Files written by a command plus its headline numbers."""
    paths: dict[str, Path] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def parse_sources(entries: tuple[str, ...] | list[str]) -> dict[str, str]:
    """``A=path,B=path`` (repeatable) into an ordered name → path mapping.

    Raises:
        ConfigError: malformed entry or repeated name.
    """
    sources: dict[str, str] = {}
    for entry in entries:
        for item in filter(None, (part.strip() for part in entry.split(","))):
            name, sep, path = item.partition("=")
            if not sep or not name or not path:
                raise ConfigError(f"source {item!r} is not NAME=PATH")
            if name in sources:
                raise ConfigError(f"source {name!r} given twice")
            sources[name] = path
    if not sources:
        raise ConfigError("at least one source is required")
    return sources


class MolGuideApp:
    """Runs subcommands against one RunConfig and one output directory.

    Usage:
        app = MolGuideApp(load_config("run.json"))
        app.train_diffusion()
        app.sample("runs/denoiser.ckpt", count=100, seed=0)
    """

    def __init__(
        self,
        config: RunConfig | None = None,
        out_dir: str | Path | None = None,
        console: Console | None = None,
    ):
        self.config = config or RunConfig()
        self.out_dir = Path(out_dir or self.config.output_dir)
        self.console = console or Console()

    # ── Helpers ─────────────────────────────────────────────────

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _table(self, title: str, rows: Mapping[str, object]) -> None:
        table = Table(title=title, show_header=True, header_style="bold cyan")
        table.add_column("metric")
        table.add_column("value", justify="right")
        for key, value in rows.items():
            table.add_row(str(key), _fmt(value))
        self.console.print(table)

    def training_molecules(self, path: str) -> list[MolecularGraph]:
        """Valid molecules from ``path`` after the dataset filter and the size cap."""
        if not path:
            raise ConfigError("no training data path configured (train_path)")
        molecules = read_molecules(path, self.config.smiles_column).molecules
        if self.config.apply_filter:
            molecules = filter_dataset(molecules).kept
        molecules = limit_size(molecules, self.config.max_nodes)
        if not molecules:
            raise DatasetError(f"no usable molecules left in {path} after filtering")
        return molecules

    def diffusion_process(self, molecules: list[MolecularGraph]) -> TransitionModel:
        space = StateSpace()
        marginals = estimate_marginals(molecules, self.config.max_nodes, space)
        schedule = NoiseSchedule.cosine(self.config.diffusion_steps)
        return build_transitions(schedule, marginals, space)

    # ── train-diffusion ─────────────────────────────────────────

    def train_diffusion(self) -> CommandResult:
        cfg = self.config
        molecules = self.training_molecules(cfg.train_path)
        model = self.diffusion_process(molecules)
        histogram = node_count_histogram(molecules, cfg.max_nodes)
        ckpt_path = self._path(DENOISER_FILE)

        def snapshot(result: TrainingResult):
            metadata = {
                "lambda_edge": cfg.lambda_edge,
                "loss": "cross_entropy",
                "lambda_guidance": cfg.lambda_guidance,
                "steps": result.steps,
                "seed": cfg.seed,
                "final_loss": result.final_loss,
            }
            ckpt = network_checkpoint("denoiser", result.net, model, cfg.to_dict(), histogram, metadata)
            save_checkpoint(ckpt_path, ckpt)
            log.info("Checkpoint written: %s (step %d)", ckpt_path, result.steps)

        monitor = TrainingMonitor(name="diffusion")
        result = train_diffusion(molecules, cfg, model, monitor=monitor, on_checkpoint=snapshot)
        snapshot(result)
        loss_path = write_loss_trace(
            self._path("denoiser_loss.csv"), monitor.trace, "train-diffusion", cfg
        )
        summary = {
            "molecules": len(molecules),
            "steps": result.steps,
            "final loss": result.final_loss,
            "parameters": result.net.n_parameters(),
        }
        self._table("Denoiser training", summary)
        return CommandResult({"checkpoint": ckpt_path, "loss": loss_path}, summary)

    # ── train-classifier ────────────────────────────────────────

    def labeled_molecules(self, path: str) -> list[LabeledMolecule]:
        if not path:
            raise ConfigError("no classifier data path configured (classifier_path)")
        ingested = ingest_csv(path, self.config.smiles_column, self.config.label_column)
        pairs = list(zip(ingested.molecules, ingested.labels))
        if self.config.apply_filter:
            kept = filter_dataset(ingested.molecules).indices
            pairs = [pairs[i] for i in kept]
        dataset = [LabeledMolecule(g, y) for g, y in pairs if g.n <= self.config.max_nodes]
        if not dataset:
            raise DatasetError(f"no usable labeled molecules left in {path} after filtering")
        return dataset

    def train_classifier(self, loss_name: str | None = None, process_from: str | None = None) -> CommandResult:
        """Fit the noisy-graph classifier.

        ``process_from`` names a denoiser checkpoint whose diffusion process
        the classifier should share (required for guiding that denoiser);
        without it the process is estimated from the classifier data.
        """
        cfg = self.config
        loss_name = loss_name or cfg.classifier_loss
        dataset = self.labeled_molecules(cfg.classifier_path)
        molecules = [m.graph for m in dataset]
        if process_from:
            denoiser_ckpt = load_checkpoint(process_from)
            if denoiser_ckpt.kind != "denoiser":
                raise CheckpointError(f"{process_from} is not a denoiser checkpoint")
            model = transitions_from_checkpoint(denoiser_ckpt)
        else:
            model = self.diffusion_process(molecules)
        histogram = node_count_histogram(molecules, cfg.max_nodes)

        monitor = TrainingMonitor(name=f"classifier-{loss_name}")
        result = train_classifier(dataset, cfg, model, loss_name=loss_name, monitor=monitor)
        metadata = {
            "lambda_edge": cfg.lambda_edge,
            "loss": loss_name,
            "lambda_guidance": cfg.lambda_guidance,
            "steps": len(result.losses),
            "seed": cfg.seed,
            "final_loss": result.final_loss,
            "evaluation": {str(t): v for t, v in result.evaluation.items()},
        }
        ckpt_path = self._path(CLASSIFIER_FILE)
        save_checkpoint(
            ckpt_path, network_checkpoint("classifier", result.net, model, cfg.to_dict(), histogram, metadata)
        )
        paths = {
            "checkpoint": ckpt_path,
            "loss": write_loss_trace(self._path("classifier_loss.csv"), monitor.trace, "train-classifier", cfg),
        }
        if result.evaluation:
            frame = pd.DataFrame(
                [{"t": t, **scores} for t, scores in sorted(result.evaluation.items())]
            )
            paths["evaluation"] = write_csv(self._path("classifier_eval.csv"), frame, "train-classifier", cfg)

        labels = np.array([m.label for m in dataset])
        summary = {
            "loss function": loss_name,
            "molecules": len(dataset),
            "actives": int(labels.sum()),
            "steps": len(result.losses),
            "final loss": result.final_loss,
        }
        for t, scores in sorted(result.evaluation.items()):
            summary[f"AUC @ t={t}"] = scores["auc"]
        self._table("Classifier training", summary)
        return CommandResult(paths, summary)

    # ── sample ──────────────────────────────────────────────────

    def sample(
        self,
        checkpoint: str,
        count: int,
        classifier: str | None = None,
        nodes: int | None = None,
        train_path: str | None = None,
    ) -> CommandResult:
        """Sample ``count`` molecules; guided when a classifier is given.

        Valid molecules go to ``samples.smi`` in generation order; the
        validity report counts every chain. Novelty is measured against
        ``train_path`` when given.
        """
        cfg = self.config
        if count < 1:
            raise ConfigError("--count must be >= 1")
        engine = load_engine(checkpoint, classifier_path=classifier, batch_size=cfg.batch_size)
        guidance = GuidanceConfig.from_run_config(cfg) if classifier else None
        graphs = engine.sample(count, cfg.seed, guidance=guidance, nodes=nodes)

        smiles = [canonical_or_none(g)[0] for g in graphs]
        training = set()
        if train_path:
            training = {
                s for s in (canonical_or_none(g)[0] for g in read_molecules(train_path, cfg.smiles_column).molecules)
                if s is not None
            }
        metrics = generation_metrics(smiles, training, DatasetFilter())
        report = metrics.to_dict()
        report["training_set"] = bool(train_path)
        report["guided"] = guidance is not None

        paths = {
            "smiles": write_smiles_file(
                self._path("samples.smi"), [s for s in smiles if s is not None], "sample", cfg
            ),
            "report": write_csv(self._path("samples_report.csv"), pd.DataFrame([report]), "sample", cfg),
        }
        summary = {
            "samples": metrics.total,
            "valid": metrics.valid,
            "unique": metrics.unique,
            "novel": metrics.novel if train_path else "n/a",
            "filters": metrics.filters,
        }
        if guidance is not None:
            summary["lambda"] = guidance.lambda_guidance
            summary["target label"] = guidance.target_label
        self._table("Sampling", summary)
        return CommandResult(paths, summary)

    # ── screen ──────────────────────────────────────────────────

    def screen(self, drugs: str, training: str, generated: str, top_pairs: int = 0) -> CommandResult:
        """DrugLike of the generated and training sets against known drugs, and DrugIndex."""
        cfg = self.config
        check_shape(cfg.screen_radius, cfg.screen_width)
        sets = {
            "drugs": read_molecules(drugs, cfg.smiles_column),
            "training": read_molecules(training, cfg.smiles_column),
            "generated": read_molecules(generated, cfg.smiles_column),
        }
        for name, ingested in sets.items():
            if not len(ingested):
                raise DatasetError(f"{name} set contains no valid molecules")
        fps = {
            name: fingerprints(ingested.molecules, cfg.screen_radius, cfg.screen_width)
            for name, ingested in sets.items()
        }
        threshold = cfg.similarity_threshold
        gen_best = best_similarities(fps["drugs"], fps["generated"])
        train_best = best_similarities(fps["drugs"], fps["training"])
        gen_hits = int(np.count_nonzero(gen_best.values > threshold))
        train_hits = int(np.count_nonzero(train_best.values > threshold))
        result = ScreenResult(
            drug_like_generated=gen_hits / len(fps["generated"]),
            drug_like_training=train_hits / len(fps["training"]),
            drug_index=drug_index_from_counts(gen_hits, len(fps["generated"]), train_hits, len(fps["training"])),
            per_molecule=pd.DataFrame({
                "smiles": sets["generated"].smiles,
                "best_similarity": gen_best.values,
                "nearest_drug": gen_best.indices,
                "nearest_drug_smiles": [sets["drugs"].smiles[i] for i in gen_best.indices],
                "drug_like": gen_best.values > threshold,
            }),
        )
        paths = {"per_molecule": write_csv(self._path("screen_generated.csv"), result.per_molecule, "screen", cfg)}
        if top_pairs > 0:
            order = np.argsort(-gen_best.values, kind="stable")[:top_pairs]
            result.top_pairs = result.per_molecule.iloc[order].reset_index(drop=True)
            paths["top_pairs"] = write_csv(self._path("screen_top_pairs.csv"), result.top_pairs, "screen", cfg)
        summary_frame = pd.DataFrame([{
            "drug_like_generated": result.drug_like_generated,
            "drug_like_training": result.drug_like_training,
            "drug_index_percent": result.drug_index,
            "generated": len(fps["generated"]),
            "training": len(fps["training"]),
            "drugs": len(fps["drugs"]),
        }])
        paths["summary"] = write_csv(self._path("screen_summary.csv"), summary_frame, "screen", cfg)

        summary = {
            "DrugLike(drugs, generated)": result.drug_like_generated,
            "DrugLike(drugs, training)": result.drug_like_training,
            "DrugIndex": f"{result.drug_index:.2f}%",
        }
        self._table("Screening", summary)
        return CommandResult(paths, {**summary, "result": result})

    # ── analyze-degradation ─────────────────────────────────────

    def analyze_degradation(self, drugs: str, sources: Mapping[str, str]) -> CommandResult:
        """Cluster the drugs, then count which clusters each source reaches."""
        cfg = self.config
        actives = read_molecules(drugs, cfg.smiles_column).molecules
        if not actives:
            raise DatasetError(f"{drugs} contains no valid molecules")
        loaded = {name: read_molecules(path, cfg.smiles_column).molecules for name, path in sources.items()}
        model = kmeans_fingerprints(
            fingerprints(actives, cfg.cluster_radius, cfg.cluster_width), k=cfg.n_clusters, seed=cfg.seed
        )
        report: DegradationReport = cluster_table(
            loaded,
            model,
            actives,
            screen_radius=cfg.screen_radius,
            screen_width=cfg.screen_width,
            cluster_radius=cfg.cluster_radius,
            cluster_width=cfg.cluster_width,
            threshold=cfg.similarity_threshold,
        )
        counts = report.counts.reset_index()
        counts.insert(1, "drugs", model.cluster_sizes())
        paths = {
            "counts": write_csv(self._path("degradation_counts.csv"), counts, "analyze-degradation", cfg),
            "proportions": write_csv(
                self._path("degradation_proportions.csv"), report.proportion_frame(), "analyze-degradation", cfg
            ),
            "summary": write_csv(
                self._path("degradation_summary.csv"), report.summary_frame(), "analyze-degradation", cfg
            ),
        }
        table = Table(title="Degradation", header_style="bold cyan")
        for column in ("source", "molecules", "DrugLike", "clusters hit", "fused 5/6"):
            table.add_column(column, justify="right" if column != "source" else "left")
        for name in report.totals:
            table.add_row(
                name,
                str(report.totals[name]),
                str(report.screened[name]),
                str(int((report.counts[name] > 0).sum())),
                _fmt(report.proportions[name]),
            )
        self.console.print(table)
        return CommandResult(paths, {"report": report, "clusters": model.k})

    # ── fingerprint ─────────────────────────────────────────────

    def fingerprint(self, path: str, radius: int, width: int) -> CommandResult:
        check_shape(radius, width)
        ingested: IngestResult = read_molecules(path, self.config.smiles_column)
        if not len(ingested):
            raise DatasetError(f"{path} contains no valid molecules")
        fps = fingerprints(ingested.molecules, radius, width)
        out = write_fingerprint_file(
            self._path("fingerprints.hex"), fps, ingested.smiles, "fingerprint", self.config
        )
        summary = {
            "molecules": len(fps),
            "rejected": len(ingested.rejected),
            "radius": radius,
            "width": width,
            "mean bits set": float(np.mean([fp.popcount for fp in fps])),
        }
        self._table("Fingerprints", summary)
        return CommandResult({"fingerprints": out}, summary)

    # ── dataset-stats ───────────────────────────────────────────

    def dataset_stats(self, path: str) -> CommandResult:
        cfg = self.config
        ingested = read_molecules(path, cfg.smiles_column)
        stats = dataset_stats(ingested.molecules, cfg.max_nodes)
        marginals = pd.DataFrame(
            [{"kind": "atom", "class": Element.from_index(i).symbol, "frequency": p}
             for i, p in enumerate(stats.marginals.nodes)]
            + [{"kind": "edge", "class": BondClass(i).name.lower(), "frequency": p}
               for i, p in enumerate(stats.marginals.edges)]
        )
        histogram = pd.DataFrame(
            {"atoms": np.arange(len(stats.node_histogram)), "count": stats.node_histogram}
        )
        tally = pd.DataFrame(
            [{"rule": "kept", "count": stats.filter_kept}]
            + [{"rule": rule, "count": n} for rule, n in sorted(stats.filter_tally.items())]
        )
        counts = pd.DataFrame(
            [{"kind": "element", "name": k, "count": v} for k, v in stats.element_counts.items()]
            + [{"kind": "bond", "name": k.lower(), "count": v} for k, v in stats.bond_counts.items()]
        )
        paths = {
            "marginals": write_csv(self._path("dataset_marginals.csv"), marginals, "dataset-stats", cfg),
            "histogram": write_csv(self._path("dataset_histogram.csv"), histogram, "dataset-stats", cfg),
            "filter": write_csv(self._path("dataset_filter.csv"), tally, "dataset-stats", cfg),
            "counts": write_csv(self._path("dataset_counts.csv"), counts, "dataset-stats", cfg),
        }
        summary = {
            "molecules": stats.n_molecules,
            "rejected rows": len(ingested.rejected),
            "largest": int(np.flatnonzero(stats.node_histogram).max()),
            "filter kept": stats.filter_kept,
            **{f"filter: {rule}": n for rule, n in sorted(stats.filter_tally.items())},
        }
        self._table("Dataset", summary)
        return CommandResult(paths, {**summary, "stats": stats})


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.4f}"
    return str(value)
