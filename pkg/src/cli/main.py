"""gazekit command-line interface."""

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import click
from rich.console import Console
from rich.table import Table

from src.cli.runs import (
    RunConfig,
    RunConfigError,
    merge_runs,
    read_manifest,
    run_directory,
    train_spec,
    write_manifest,
)
from src.dataset.manifest import RICE_CORPUS, open_corpus, write_corpus
from src.dataset.pruning import prune_chunks
from src.dataset.synthetic import synth_generate
from src.evaluation.partition import ExperimentSpec, Factor, partition_experiments
from src.evaluation.protocols import (
    CrossValidationResult,
    ensure_table,
    loso_cv,
    loso_session_cv,
    size_study,
    sweep,
)
from src.evaluation.reports import (
    reference_check,
    write_cv_report,
    write_json,
    write_partition,
    write_size_study,
    write_sweep,
)
from src.features.models import Descriptor
from src.features.table import build_feature_table, write_table
from src.regress.config import RegressorKind
from src.regress.model import train_gaze
from src.regress.serialization import load_model, save_model
from src.tracking.bilateral import bilateral_filter
from src.tracking.export import write_track_csv, write_track_svg
from src.tracking.tracker import track_corpus_session
from src.utils.config import GazeKitConfig, load_config
from src.utils.errors import GazeKitError
from src.utils.logging import bind_run_context, get_logger, setup_logging
from src.utils.settings import GazeKitSettings, get_settings

logger = get_logger(__name__)

PROTOCOLS = ("loso", "session", "sweep", "size", "partition")


@dataclass
class AppContext:
    config: GazeKitConfig
    settings: GazeKitSettings

    @property
    def cache_dir(self) -> Optional[str]:
        return str(self.settings.cache) if self.settings.cache else None


def _options(*decorators: Callable) -> Callable:
    def apply(f: Callable) -> Callable:
        for decorator in reversed(decorators):
            f = decorator(f)
        return f

    return apply


seed_option = click.option("--seed", type=int, default=0, show_default=True, help="Master seed")
jobs_option = click.option(
    "--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Worker cap"
)
force_option = click.option("--force", is_flag=True, help="Replace a non-empty output directory")
out_option = click.option(
    "--out", type=click.Path(path_type=Path), required=True, help="Output directory"
)
corpus_options = _options(
    click.option(
        "--corpus", required=True, help=f"Corpus directory, manifest CSV or '{RICE_CORPUS}'"
    ),
    click.option("--annotations", type=click.Path(exists=True), help="Eye-box sidecar CSV"),
    click.option("--detector", help="Live eye detector: 'haar' or 'cmd:<command>'"),
)
feature_option = click.option(
    "--feature",
    type=click.Choice([d.value for d in Descriptor]),
    default=Descriptor.MHOG.value,
    show_default=True,
)
regressor_option = click.option(
    "--regressor",
    type=click.Choice([k.value for k in RegressorKind]),
    default=RegressorKind.RF.value,
    show_default=True,
)
model_options = _options(
    feature_option,
    regressor_option,
    click.option("--augmented", is_flag=True, help="Append eye-box geometry after reduction"),
    click.option("--clamp", is_flag=True, help="Clamp predictions to the screen"),
    click.option("--trees", type=click.IntRange(min=1), help="Random forest size"),
)


def _summary_table(title: str, rows: Sequence[Dict[str, Any]]) -> Table:
    table = Table(title=title)
    if not rows:
        return table
    columns = list(rows[0])
    for column in columns:
        table.add_column(column)
    for row in rows:
        cells = []
        for column in columns:
            value = row.get(column)
            cells.append(f"{value:.3f}" if isinstance(value, float) else str(value))
        table.add_row(*cells)
    return table


def _done(title: str, out: Path, rows: Sequence[Dict[str, Any]] = ()) -> None:
    console = Console()
    if rows:
        console.print(_summary_table(title, rows))
    console.print(f"[green]wrote[/green] {out}")


@click.group()
@click.option("--config", "config_path", type=click.Path(), help="Pipeline YAML configuration")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]))
@click.option("--log-format", type=click.Choice(["console", "json"]))
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[str],
    log_level: Optional[str],
    log_format: Optional[str],
) -> None:
    """Appearance-based gaze estimation for tablets."""
    settings = get_settings()
    setup_logging(
        level=log_level or settings.log_level, log_format=log_format or settings.log_format
    )
    bind_run_context(command=ctx.invoked_subcommand)
    path = config_path or (str(settings.config_path) if settings.config_path else None)
    ctx.obj = AppContext(config=load_config(path), settings=settings)


@cli.command()
@click.option("--subjects", type=click.IntRange(min=2), default=8, show_default=True)
@click.option("--sessions", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--frames-per-point", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--glare", type=click.FloatRange(min=0), default=0.0, show_default=True)
@_options(seed_option, out_option, force_option)
@click.pass_obj
def synth(
    app: AppContext,
    subjects: int,
    sessions: int,
    frames_per_point: int,
    glare: float,
    seed: int,
    out: Path,
    force: bool,
) -> None:
    """Generate a synthetic corpus."""
    run = RunConfig(
        command="synth",
        params={
            "subjects": subjects,
            "sessions": sessions,
            "frames_per_point": frames_per_point,
            "glare": glare,
        },
        seed=seed,
        out=out,
        force=force,
    )
    corpus = synth_generate(
        subjects,
        sessions_per_subject=sessions,
        seed=seed,
        geom=app.config.geometry,
        frames_per_point=frames_per_point,
        glare=glare,
    )
    with run_directory(run) as staging:
        write_corpus(corpus, staging)
        write_manifest(staging, run, corpus.fingerprint(), settings=app.config)
    _done("synth", out)


@cli.command()
@corpus_options
@click.option(
    "--frames-per-point", type=click.IntRange(min=1), default=None, help="Frames kept per chunk"
)
@_options(out_option, force_option)
@click.pass_obj
def ingest(
    app: AppContext,
    corpus: str,
    annotations: Optional[str],
    detector: Optional[str],
    frames_per_point: Optional[int],
    out: Path,
    force: bool,
) -> None:
    """Validate a recorded corpus and keep the best frames of every dot chunk."""
    k = frames_per_point or app.config.frames.frames_per_chunk
    run = RunConfig(
        command="ingest",
        corpus=[corpus],
        params={"frames_per_point": k, "annotations": annotations, "detector": detector},
        out=out,
        force=force,
    )
    data = open_corpus(corpus, annotations, detector, app.config.geometry)
    pruned, report = prune_chunks(
        data,
        k=k,
        min_box_fraction=app.config.eyes.min_box_fraction,
        symmetry_tolerance=app.config.eyes.symmetry_tolerance,
        log_sigma=app.config.imaging.log_sigma,
        log_side=app.config.imaging.log_side,
    )
    with run_directory(run) as staging:
        write_corpus(pruned, staging)
        write_json(report.model_dump(mode="json"), staging / "prune_report.json")
        write_manifest(staging, run, pruned.fingerprint(), inputs=[corpus], settings=app.config)
    _done("ingest", out, [report.model_dump(exclude={"short_chunks"})])


@cli.command()
@corpus_options
@_options(feature_option, jobs_option, out_option, force_option)
@click.pass_obj
def extract(
    app: AppContext,
    corpus: str,
    annotations: Optional[str],
    detector: Optional[str],
    feature: str,
    jobs: int,
    out: Path,
    force: bool,
) -> None:
    """Extract a feature table and write it as a feature dump."""
    run = RunConfig(command="extract", corpus=[corpus], descriptor=feature, out=out, force=force)
    data = open_corpus(corpus, annotations, detector, app.config.geometry)
    spec = train_spec(app.config, run)
    table = build_feature_table(data, spec.feature, app.config.eyes, jobs, app.cache_dir)
    with run_directory(run) as staging:
        write_table(table, staging / f"features_{feature}.gzf")
        write_json(table.exclusions.model_dump(mode="json"), staging / "exclusions.json")
        write_manifest(staging, run, data.fingerprint(), inputs=[corpus], settings=app.config)
    _done("extract", out, [{"descriptor": feature, "rows": len(table), "dim": table.dim}])


@cli.command()
@corpus_options
@_options(model_options, seed_option, jobs_option, out_option, force_option)
@click.pass_obj
def train(
    app: AppContext,
    corpus: str,
    annotations: Optional[str],
    detector: Optional[str],
    feature: str,
    regressor: str,
    augmented: bool,
    clamp: bool,
    trees: Optional[int],
    seed: int,
    jobs: int,
    out: Path,
    force: bool,
) -> None:
    """Fit a gaze model on a whole corpus."""
    run = RunConfig(
        command="train",
        corpus=[corpus],
        descriptor=feature,
        regressor=regressor,
        params={"trees": trees},
        seed=seed,
        out=out,
        augmented=augmented,
        clamp=clamp,
        force=force,
    )
    data = open_corpus(corpus, annotations, detector, app.config.geometry)
    spec = train_spec(app.config, run, trees)
    model = train_gaze(data, spec=spec, eyes=app.config.eyes, jobs=jobs, cache_dir=app.cache_dir)
    with run_directory(run) as staging:
        save_model(model, staging / "model.gzm")
        write_json(model.training.model_dump(mode="json"), staging / "training.json")
        write_manifest(staging, run, data.fingerprint(), inputs=[corpus], settings=app.config)
    _done(
        "train",
        out,
        [{"descriptor": feature, "regressor": regressor, "samples": model.training.samples}],
    )


def _cv_rows(protocol: str, cv: CrossValidationResult, spec: Any) -> List[Dict[str, Any]]:
    return [
        {
            "protocol": protocol,
            "descriptor": spec.feature.descriptor.value,
            "regressor": spec.regressor.value,
            "mean_error_cm": cv.report.mean_error_cm,
            "std_error_cm": cv.report.std_error_cm,
        }
    ]


@cli.command(name="eval")
@corpus_options
@click.option("--protocol", type=click.Choice(PROTOCOLS), default="loso", show_default=True)
@click.option("--factor", type=click.Choice([f.value for f in Factor]), help="Partition factor")
@click.option("--sizes", help="Comma-separated group sizes for the size study")
@click.option("--repeats", type=click.IntRange(min=1), help="Random redraws per setting")
@_options(model_options, seed_option, jobs_option, out_option, force_option)
@click.pass_obj
def evaluate(
    app: AppContext,
    corpus: str,
    annotations: Optional[str],
    detector: Optional[str],
    protocol: str,
    factor: Optional[str],
    sizes: Optional[str],
    repeats: Optional[int],
    feature: str,
    regressor: str,
    augmented: bool,
    clamp: bool,
    trees: Optional[int],
    seed: int,
    jobs: int,
    out: Path,
    force: bool,
) -> None:
    """Run an evaluation protocol and write its report."""
    if protocol == "partition" and factor is None:
        raise RunConfigError("--protocol partition needs --factor")
    try:
        size_list = [int(s) for s in sizes.split(",")] if sizes else []
    except ValueError as e:
        raise RunConfigError(f"--sizes must be comma-separated integers, got {sizes!r}") from e
    repeats = repeats or app.config.evaluation.repeats
    run = RunConfig(
        command="eval",
        corpus=[corpus],
        descriptor=feature,
        regressor=regressor,
        params={
            "protocol": protocol,
            "factor": factor,
            "sizes": size_list,
            "repeats": repeats,
            "trees": trees,
        },
        seed=seed,
        out=out,
        augmented=augmented,
        clamp=clamp,
        force=force,
    )
    data = open_corpus(corpus, annotations, detector, app.config.geometry)
    spec = train_spec(app.config, run, trees)
    meta = {
        "seed": seed,
        "corpus_fingerprint": data.fingerprint(),
        "run_fingerprint": run.fingerprint(),
    }
    eyes, cache = app.config.eyes, app.cache_dir

    with run_directory(run) as staging:
        rows: List[Dict[str, Any]] = []
        if protocol == "sweep":
            result = sweep(data, spec=spec, eyes=eyes, jobs=jobs, cache_dir=cache)
            write_sweep(result, staging, meta)
            for (reg, desc), cv in result.results.items():
                rows.append(
                    {
                        "protocol": protocol,
                        "descriptor": desc,
                        "regressor": reg,
                        "mean_error_cm": cv.report.mean_error_cm,
                        "std_error_cm": cv.report.std_error_cm,
                    }
                )
            if corpus == RICE_CORPUS and ("rf", "mhog") in result.results:
                check = reference_check(
                    result.results[("rf", "mhog")].report.mean_error_cm, result.table
                )
                write_json(check.model_dump(mode="json"), staging / "reference_check.json")
        else:
            table = ensure_table(data, spec.feature, eyes, jobs, cache)
            if protocol in ("loso", "session"):
                run_cv = loso_cv if protocol == "loso" else loso_session_cv
                cv = run_cv(table, spec, jobs=jobs)
                write_cv_report(cv, table, staging, protocol, meta)
                rows = _cv_rows(protocol, cv, spec)
                if corpus == RICE_CORPUS and protocol == "loso":
                    check = reference_check(cv.report.mean_error_cm)
                    write_json(check.model_dump(mode="json"), staging / "reference_check.json")
            elif protocol == "size":
                if not size_list:
                    size_list = app.config.evaluation.size_study_sizes or list(
                        range(2, len(table.subject_ids()) + 1)
                    )
                study = size_study(table, size_list, repeats, spec, jobs=jobs)
                write_size_study(study, staging, meta)
                rows = [
                    {"protocol": protocol, "k": p.k, "mean_error_cm": p.mean_error_cm}
                    for p in study.points
                ]
            else:
                experiment = ExperimentSpec(factor=Factor(factor), repeats=repeats, seed=seed)
                part = partition_experiments(data, experiment, spec, source=table, jobs=jobs)
                write_partition(part, staging, meta)
                for group in part.groups:
                    rows.append(
                        {
                            "protocol": protocol,
                            "factor": factor,
                            "group": group.name,
                            "e1_mean_error_cm": group.e1_mean_error_cm,
                            "e2_mean_error_cm": group.e2_mean_error_cm,
                            "e3_mean_error_cm": group.e3_mean_error_cm,
                        }
                    )
        write_manifest(
            staging, run, data.fingerprint(), inputs=[corpus], results=rows, settings=app.config
        )
    _done(f"eval ({protocol})", out, rows)


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@corpus_options
@click.option("--subject", required=True, help="Subject to track")
@click.option("--session", required=True, help="Session to track")
@click.option("--sigma-t", type=float, help="Filter temporal sigma (frames)")
@click.option("--sigma-r", type=float, help="Filter range sigma (cm)")
@click.option("--clamp", is_flag=True, help="Clamp estimates to the screen")
@_options(out_option, force_option)
@click.pass_obj
def track(
    app: AppContext,
    model_path: str,
    corpus: str,
    annotations: Optional[str],
    detector: Optional[str],
    subject: str,
    session: str,
    sigma_t: Optional[float],
    sigma_r: Optional[float],
    clamp: bool,
    out: Path,
    force: bool,
) -> None:
    """Track the gaze through one recorded session and smooth it."""
    sigma_t = sigma_t if sigma_t is not None else app.config.tracking.sigma_t
    sigma_r = sigma_r if sigma_r is not None else app.config.tracking.sigma_r_cm
    model = load_model(model_path)
    run = RunConfig(
        command="track",
        corpus=[corpus],
        descriptor=model.feature.descriptor,
        regressor=model.kind,
        params={
            "model": model.training.config_fingerprint,
            "subject": subject,
            "session": session,
            "sigma_t": sigma_t,
            "sigma_r": sigma_r,
        },
        seed=model.training.seed,
        out=out,
        augmented=model.augmented,
        clamp=clamp,
        force=force,
    )
    data = open_corpus(corpus, annotations, detector, app.config.geometry)
    raw = track_corpus_session(data, subject, session, model, app.config.eyes, clamp)
    smoothed = bilateral_filter(raw, sigma_t=sigma_t, sigma_r=sigma_r)
    summary = {
        "protocol": "track",
        "subject": subject,
        "session": session,
        "frames": len(smoothed),
        "estimates": len(smoothed.estimates),
        "blink_frames": len(smoothed.blink_frames),
        "raw_error_cm": smoothed.mean_error(filtered=False),
        "filtered_error_cm": smoothed.mean_error(filtered=True),
    }
    with run_directory(run) as staging:
        write_track_csv(smoothed, staging / "track.csv")
        write_track_svg(smoothed, staging / "track.svg", model.geometry)
        write_json({**summary, "warning": smoothed.warning}, staging / "track_summary.json")
        write_manifest(
            staging,
            run,
            data.fingerprint(),
            inputs=[corpus, model_path],
            results=[summary],
            settings=app.config,
        )
    _done("track", out, [summary])


@cli.command()
@click.argument(
    "run_dirs", nargs=-1, type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@_options(out_option, force_option)
def report(run_dirs: Sequence[Path], out: Path, force: bool) -> None:
    """Merge the results of several runs into one table."""
    merged = merge_runs(list(run_dirs))
    first = read_manifest(run_dirs[0])
    run = RunConfig(
        command="report",
        corpus=[str(d) for d in run_dirs],
        seed=first.seed,
        out=out,
        force=force,
    )
    with run_directory(run) as staging:
        merged.to_csv(staging / "report.csv", index=False, float_format="%.6f")
        write_json(json.loads(merged.to_json(orient="records")), staging / "report.json")
        write_manifest(
            staging,
            run,
            first.corpus_fingerprint,
            inputs=[str(d) for d in run_dirs],
            results=json.loads(merged.drop(columns=["run"]).to_json(orient="records")),
        )
    _done("report", out, json.loads(merged.to_json(orient="records")))


def _fail(payload: Dict[str, Any], code: int) -> int:
    click.echo(json.dumps(payload, sort_keys=True))
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point. Errors are printed as a JSON document and give a nonzero exit code.

    Returns:
        Process exit code
    """
    try:
        rv = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="gazekit",
            standalone_mode=False,
        )
    except GazeKitError as e:
        logger.error("command_failed", error=e.code, message=e.message)
        return _fail(e.to_dict(), 1)
    except click.ClickException as e:
        return _fail({"error": "usage_error", "message": e.format_message(), "details": {}}, 2)
    except click.exceptions.Abort:
        return _fail({"error": "aborted", "message": "aborted", "details": {}}, 1)
    except ValueError as e:
        return _fail({"error": "invalid_input", "message": str(e), "details": {}}, 1)
    except OSError as e:
        return _fail({"error": "io_error", "message": str(e), "details": {}}, 1)
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
