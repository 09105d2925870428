"""Command-line entry point.

Subcommands:

* ``rank``      one rank measure (rankme-t or ger) over one EMBD file
* ``cluster``   fit mini-batch k-means on one EMBD file and report quality
* ``sweep``     all requested measures over every manifest entry, to CSV
* ``correlate`` Pearson report joining a measures CSV with downstream scores
* ``synth``     generate synthetic EMBD fixtures (single set or cohort)

Exit codes: 0 success, 1 I/O or format problem, 2 undefined math
(zero matrix, degenerate centroids), 3 violated precondition (frames < k,
fewer than 3 matched models). Every command is deterministic given its
flags; all randomness sits behind ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, rng
from .cluster import MiniBatchKMeans, cluster_quality
from .correlate import (
    correlate,
    format_float,
    read_downstream_csv,
    read_measures_csv,
    report_to_dict,
    write_downstream_csv,
    write_report_csv,
    write_report_json,
)
from .errors import (
    EmbmetricsError,
    FormatError,
    InsufficientDataError,
    MathError,
    NonFiniteFrameError,
)
from .rank import global_effective_rank, rankme_t
from .store import (
    ManifestEntry,
    SampleSpec,
    load_manifest,
    read_embeddings,
    subsample,
    write_embeddings,
    write_manifest,
)
from .synth import SynthSpec, generate, generate_cohort

# CLI spelling -> canonical measure name used in CSV columns.
MEASURE_FLAGS = {
    "rankme-t": "rankme_t",
    "ger": "ger",
    "wcss": "wcss",
    "db-index": "db_index",
}


def _sample_spec(args) -> SampleSpec:
    return SampleSpec(max_frames=args.max_frames, seed=args.seed, unit=args.sample_unit)


def _add_sample_flags(parser):
    parser.add_argument("--max-frames", type=int, default=None, help="frame budget (default: unlimited)")
    parser.add_argument(
        "--sample-unit",
        choices=["frames", "sequences"],
        default="sequences",
        help="keep whole sequences or draw individual frames",
    )


def _add_cluster_flags(parser):
    parser.add_argument("--k", type=int, default=1024, help="number of clusters (default 1024)")
    parser.add_argument("--batch-frames", type=int, default=10240, help="mini-batch size in frames")
    parser.add_argument("--max-iter", type=int, default=300, help="maximum mini-batch iterations")
    parser.add_argument("--center-move-tol", type=float, default=1e-4, help="relative convergence threshold")
    parser.add_argument(
        "--allow-k-reduction",
        action="store_true",
        help="fit with fewer centroids instead of failing when frames < k",
    )


def _fit_estimator(frames, args) -> MiniBatchKMeans:
    return MiniBatchKMeans(
        n_clusters=args.k,
        batch_frames=args.batch_frames,
        max_iterations=args.max_iter,
        center_move_tol=args.center_move_tol,
        seed=args.seed,
        allow_k_reduction=args.allow_k_reduction,
    ).fit(frames)


def cmd_rank(args) -> int:
    emb = subsample(read_embeddings(args.input), _sample_spec(args))
    measure = MEASURE_FLAGS[args.measure]
    result = rankme_t(emb) if measure == "rankme_t" else global_effective_rank(emb)
    print(
        json.dumps(
            {
                "measure": measure,
                "value": result.value,
                "frames_used": emb.total_frames,
                "seed": args.seed,
            }
        )
    )
    return 0


def cmd_cluster(args) -> int:
    emb = subsample(read_embeddings(args.input), _sample_spec(args))
    frames = emb.frames()
    est = _fit_estimator(frames, args)
    quality = cluster_quality(frames, est.cluster_centers_)
    print(
        json.dumps(
            {
                "wcss": quality.wcss,
                "db_index": quality.db_index,
                "populated_clusters": quality.populated_clusters,
            }
        )
    )
    return 0


def _sweep_entry(entry: ManifestEntry, measures: list[str], args) -> list[tuple]:
    emb = subsample(read_embeddings(entry.path), _sample_spec(args))
    rows = []
    if "rankme_t" in measures:
        rows.append((entry.model_id, entry.checkpoint_step, entry.layer, "rankme_t", rankme_t(emb).value))
    if "ger" in measures:
        rows.append((entry.model_id, entry.checkpoint_step, entry.layer, "ger", global_effective_rank(emb).value))
    if "wcss" in measures or "db_index" in measures:
        frames = emb.frames()
        est = _fit_estimator(frames, args)
        quality = cluster_quality(frames, est.cluster_centers_)
        if "wcss" in measures:
            rows.append((entry.model_id, entry.checkpoint_step, entry.layer, "wcss", quality.wcss))
        if "db_index" in measures:
            rows.append((entry.model_id, entry.checkpoint_step, entry.layer, "db_index", quality.db_index))
    return rows


def cmd_sweep(args) -> int:
    manifest = load_manifest(args.manifest)
    flags = args.measure or list(MEASURE_FLAGS)
    measures = [MEASURE_FLAGS[f] for f in flags]

    def work(entry: ManifestEntry):
        try:
            return entry, _sweep_entry(entry, measures, args), None
        except (EmbmetricsError, OSError, ValueError) as exc:
            return entry, None, str(exc)

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        outcomes = list(pool.map(work, manifest))

    rows, failures = [], []
    for entry, entry_rows, error in outcomes:
        if error is None:
            rows.extend(entry_rows)
        else:
            failures.append((entry.model_id, entry.checkpoint_step, entry.layer, error))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    failures.sort(key=lambda r: (r[0], r[1], r[2]))

    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "checkpoint_step", "layer", "measure", "value"])
        for model_id, step, layer, name, value in rows:
            writer.writerow([model_id, step, layer, name, format_float(value)])
    with open(out.with_name(out.name + ".errors"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "checkpoint_step", "layer", "error"])
        for model_id, step, layer, error in failures:
            writer.writerow([model_id, step, layer, error])
    return 0


def cmd_correlate(args) -> int:
    records = read_measures_csv(args.measures)
    table = read_downstream_csv(args.downstream)
    report = correlate(
        records,
        table,
        task=args.task,
        checkpoint_step=args.measure_step,
        layer=args.layer,
        score_task=args.score_label,
    )
    out = Path(args.out)
    write_report_csv(report, out.with_suffix(".csv"))
    write_report_json(report, out.with_suffix(".json"))
    print(json.dumps(report_to_dict(report), sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = {"rng": rng.GENERATOR_NAME, "seed": args.seed}

    if args.cohort is not None:
        cohort = generate_cohort(
            args.cohort,
            args.rank_low,
            args.rank_high,
            args.score_noise,
            args.seed,
            dim=args.dim,
            n_sequences=args.sequences,
            frames_per_sequence=args.frames_per_sequence,
            noise_amplitude=args.noise_amplitude,
            task=args.task,
        )
        entries = []
        for model_id, emb in zip(cohort.model_ids, cohort.sets):
            path = out_dir / f"{model_id}.embd"
            write_embeddings(emb, path)
            entries.append(
                ManifestEntry(
                    model_id=model_id,
                    checkpoint_step=args.checkpoint_step,
                    layer=args.layer,
                    path=path,
                    dataset_tag=args.dataset_tag,
                )
            )
        write_manifest(entries, out_dir / "manifest.json", relative_to=out_dir)
        write_downstream_csv(cohort.downstream, out_dir / "downstream.csv")
        params.update(
            n_models=args.cohort,
            rank_low=args.rank_low,
            rank_high=args.rank_high,
            score_noise=args.score_noise,
            dim=args.dim,
            n_sequences=args.sequences,
            frames_per_sequence=args.frames_per_sequence,
            noise_amplitude=args.noise_amplitude,
            task=args.task,
        )
        summary = {"models": args.cohort, "out_dir": str(out_dir)}
    else:
        spec = SynthSpec(
            dim=args.dim,
            intrinsic_rank=args.rank,
            n_sequences=args.sequences,
            frames_per_sequence=args.frames_per_sequence,
            noise_amplitude=args.noise_amplitude,
            cluster_count=args.clusters,
            cluster_separation=args.cluster_separation,
            seed=args.seed,
        )
        path = out_dir / f"{args.name}.embd"
        write_embeddings(generate(spec), path)
        entry = ManifestEntry(
            model_id=args.name,
            checkpoint_step=args.checkpoint_step,
            layer=args.layer,
            path=path,
            dataset_tag=args.dataset_tag,
        )
        write_manifest([entry], out_dir / "manifest.json", relative_to=out_dir)
        params.update(
            dim=args.dim,
            intrinsic_rank=args.rank,
            n_sequences=args.sequences,
            frames_per_sequence=args.frames_per_sequence,
            noise_amplitude=args.noise_amplitude,
            cluster_count=args.clusters,
            cluster_separation=args.cluster_separation,
        )
        summary = {"models": 1, "out_dir": str(out_dir)}

    (out_dir / "synth_params.json").write_text(json.dumps(params, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embmetrics",
        description="Unsupervised embedding-quality measures and correlation reports",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_rank = sub.add_parser("rank", help="compute one rank measure over an EMBD file")
    p_rank.add_argument("--input", required=True, help="EMBD file")
    p_rank.add_argument("--measure", choices=["rankme-t", "ger"], required=True)
    p_rank.add_argument("--seed", type=int, default=0)
    _add_sample_flags(p_rank)
    p_rank.set_defaults(func=cmd_rank)

    p_cluster = sub.add_parser("cluster", help="fit mini-batch k-means and report quality")
    p_cluster.add_argument("--input", required=True, help="EMBD file")
    p_cluster.add_argument("--seed", type=int, default=0)
    _add_cluster_flags(p_cluster)
    _add_sample_flags(p_cluster)
    p_cluster.set_defaults(func=cmd_cluster)

    p_sweep = sub.add_parser("sweep", help="compute measures for every manifest entry")
    p_sweep.add_argument("--manifest", required=True, help="manifest JSON")
    p_sweep.add_argument("--out", required=True, help="output measures CSV (errors go to <out>.errors)")
    p_sweep.add_argument(
        "--measure",
        action="append",
        choices=sorted(MEASURE_FLAGS),
        help="measure to compute; repeatable (default: all)",
    )
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel manifest entries")
    p_sweep.add_argument("--seed", type=int, default=0)
    _add_cluster_flags(p_sweep)
    _add_sample_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_corr = sub.add_parser("correlate", help="Pearson report of measures vs downstream scores")
    p_corr.add_argument("--measures", required=True, help="measures CSV from sweep")
    p_corr.add_argument("--downstream", required=True, help="downstream scores CSV")
    p_corr.add_argument("--task", required=True, help="task label for the report")
    p_corr.add_argument("--measure-step", type=int, required=True, help="checkpoint step of the measures")
    p_corr.add_argument("--layer", type=int, required=True)
    p_corr.add_argument(
        "--score-label",
        default=None,
        help="task label of the score rows to join (default: same as --task)",
    )
    p_corr.add_argument("--out", required=True, help="report path prefix (.csv and .json)")
    p_corr.set_defaults(func=cmd_correlate)

    p_synth = sub.add_parser("synth", help="generate synthetic EMBD fixtures")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--sequences", type=int, default=100)
    p_synth.add_argument("--frames-per-sequence", type=int, default=200)
    p_synth.add_argument("--noise-amplitude", type=float, default=1e-7)
    p_synth.add_argument("--checkpoint-step", type=int, default=0)
    p_synth.add_argument("--layer", type=int, default=0)
    p_synth.add_argument("--dataset-tag", default="synth")
    # single-set mode
    p_synth.add_argument("--name", default="synth-000", help="model id / file stem (single-set mode)")
    p_synth.add_argument("--rank", type=int, default=8, help="intrinsic rank (single-set mode)")
    p_synth.add_argument("--clusters", type=int, default=0, help="planted cluster count (single-set mode)")
    p_synth.add_argument("--cluster-separation", type=float, default=20.0)
    # cohort mode
    p_synth.add_argument("--cohort", type=int, default=None, help="generate a cohort of this many models")
    p_synth.add_argument("--rank-low", type=int, default=4)
    p_synth.add_argument("--rank-high", type=int, default=48)
    p_synth.add_argument("--score-noise", type=float, default=0.5)
    p_synth.add_argument("--task", default="synthetic")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, NonFiniteFrameError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
