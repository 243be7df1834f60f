"""Run configuration, atomic output directories and run manifests."""

import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.features.models import Descriptor
from src.regress.config import RegressorKind
from src.regress.model import TrainSpec
from src.utils.config import GazeKitConfig
from src.utils.errors import GazeKitError
from src.utils.logging import get_logger
from src.utils.seeding import fingerprint

logger = get_logger(__name__)

MANIFEST_FILE = "run_manifest.json"
MANIFEST_VERSION = 1


class RunConfigError(GazeKitError):
    """Invalid command arguments, missing inputs or an occupied output directory."""

    code = "run_config_error"


class FingerprintMismatchError(GazeKitError):
    """Runs being merged were produced from different corpora, seeds or settings."""

    code = "fingerprint_mismatch"


class RunConfig(BaseModel):
    """Arguments of one command invocation."""

    command: str
    corpus: List[str] = Field(default_factory=list, description="Input corpus paths or names")
    descriptor: Optional[Descriptor] = None
    regressor: Optional[RegressorKind] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    out: Path
    augmented: bool = False
    clamp: bool = False
    force: bool = False

    model_config = ConfigDict(frozen=True)

    def fingerprint(self) -> str:
        """Hash of everything that affects results; the output location does not."""
        return fingerprint(self.model_dump(mode="json", exclude={"out", "force"}))


class RunManifest(BaseModel):
    """Inputs, fingerprints and outputs of a finished run."""

    version: int = MANIFEST_VERSION
    command: str
    run: Dict[str, Any]
    config_fingerprint: str
    corpus_fingerprint: Optional[str] = None
    settings_fingerprint: Optional[str] = Field(
        None, description="Hash of the YAML configuration the run was made with"
    )
    seed: int
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    results: List[Dict[str, Any]] = Field(default_factory=list)


def train_spec(
    config: GazeKitConfig,
    run: RunConfig,
    trees: Optional[int] = None,
) -> TrainSpec:
    """TrainSpec from the YAML configuration overridden by command flags."""
    feature = config.features
    if run.descriptor is not None:
        feature = feature.model_copy(update={"descriptor": run.descriptor})
    forest = config.forest
    if trees is not None:
        forest = forest.model_copy(update={"n_trees": trees})
    try:
        return TrainSpec(
            feature=feature,
            regressor=run.regressor or RegressorKind.RF,
            forest=forest,
            knn=config.knn,
            augmented=run.augmented,
            clamp=run.clamp,
            seed=run.seed,
            pca_floor=config.reduction.pca_floor,
            lda_epsilon_scale=config.reduction.lda_epsilon_scale,
        )
    except ValidationError as e:
        raise RunConfigError(f"invalid training settings: {e}") from e


@contextmanager
def run_directory(run: RunConfig) -> Iterator[Path]:
    """
    Stage a command's outputs and move them into ``run.out`` on success.

    The staging directory is a sibling of the target, so the final rename stays
    on one filesystem. On failure nothing is left behind.

    Raises:
        RunConfigError: When the target exists and is not empty and ``force`` is off
    """
    out = Path(run.out)
    if out.exists() and (not out.is_dir() or any(out.iterdir())) and not run.force:
        raise RunConfigError(
            f"output directory {out} is not empty; pass --force to replace it",
            {"out": str(out)},
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if out.exists():
        if out.is_dir():
            shutil.rmtree(out)
        else:
            out.unlink()
    os.replace(staging, out)
    logger.info("run_output_committed", out=str(out), command=run.command)


def write_manifest(
    directory: Path,
    run: RunConfig,
    corpus_fingerprint: Optional[str] = None,
    inputs: Sequence[str] = (),
    results: Sequence[Dict[str, Any]] = (),
    settings: Optional[GazeKitConfig] = None,
) -> RunManifest:
    """Write ``run_manifest.json`` listing every file already in ``directory``."""
    outputs = sorted(
        p.relative_to(directory).as_posix()
        for p in directory.rglob("*")
        if p.is_file() and p.name != MANIFEST_FILE
    )
    manifest = RunManifest(
        command=run.command,
        run=run.model_dump(mode="json", exclude={"out", "force"}),
        config_fingerprint=run.fingerprint(),
        corpus_fingerprint=corpus_fingerprint,
        settings_fingerprint=(
            fingerprint(settings.model_dump(mode="json")) if settings is not None else None
        ),
        seed=run.seed,
        inputs=list(inputs),
        outputs=outputs,
        results=list(results),
    )
    (directory / MANIFEST_FILE).write_text(
        json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
    )
    return manifest


def read_manifest(run_dir: Path) -> RunManifest:
    path = Path(run_dir) / MANIFEST_FILE
    if not path.exists():
        raise RunConfigError(f"{run_dir} is not a run directory (no {MANIFEST_FILE})")
    try:
        return RunManifest(**json.loads(path.read_text()))
    except (json.JSONDecodeError, ValidationError) as e:
        raise RunConfigError(f"{path} is malformed: {e}") from e


def _experiment(manifest: RunManifest) -> tuple:
    """Command, descriptor, regressor and protocol: what a run's result rows describe."""
    run = manifest.run
    return (
        manifest.command,
        run.get("descriptor"),
        run.get("regressor"),
        run.get("params", {}).get("protocol"),
    )


def _mismatch(reason: str, runs: Sequence[Tuple[Path, RunManifest]]) -> FingerprintMismatchError:
    return FingerprintMismatchError(
        f"runs were produced from different {reason}",
        {
            "runs": {
                str(d): {
                    "corpus_fingerprint": m.corpus_fingerprint,
                    "settings_fingerprint": m.settings_fingerprint,
                    "config_fingerprint": m.config_fingerprint,
                    "seed": m.seed,
                }
                for d, m in runs
            }
        },
    )


def merge_runs(run_dirs: Sequence[Path]) -> pd.DataFrame:
    """
    Combine the result rows of several runs into one table.

    Runs must share the corpus, seed and YAML configuration. Two runs of the same
    experiment (command, descriptor, regressor, protocol) must also share the run
    fingerprint.

    Raises:
        RunConfigError: With no run directories or no result rows
        FingerprintMismatchError: When any of those fingerprints differ
    """
    if not run_dirs:
        raise RunConfigError("report needs at least one run directory")
    manifests = [(Path(d), read_manifest(d)) for d in run_dirs]

    if len({m.corpus_fingerprint for _, m in manifests}) > 1:
        raise _mismatch("corpora", manifests)
    if len({m.seed for _, m in manifests}) > 1:
        raise _mismatch("seeds", manifests)
    if len({m.settings_fingerprint for _, m in manifests}) > 1:
        raise _mismatch("configurations", manifests)
    experiments: Dict[tuple, List[Tuple[Path, RunManifest]]] = {}
    for entry in manifests:
        experiments.setdefault(_experiment(entry[1]), []).append(entry)
    for group in experiments.values():
        if len({m.config_fingerprint for _, m in group}) > 1:
            raise _mismatch("run settings for the same experiment", group)

    rows = []
    for run_dir, manifest in manifests:
        for result in manifest.results:
            rows.append(
                {
                    "run": run_dir.name,
                    "command": manifest.command,
                    "config_fingerprint": manifest.config_fingerprint,
                    **result,
                }
            )
    if not rows:
        raise RunConfigError("none of the runs recorded results to merge")
    return pd.DataFrame(rows)
