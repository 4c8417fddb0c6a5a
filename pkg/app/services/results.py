"""
Results service: chain CSVs, summary JSON, run manifests and parameter files
"""

import json
import logging
import platform
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import ResultsError
from app.models.domain import Cohort, Sex
from app.models.parameters import Parameters, default_parameters

logger = logging.getLogger(__name__)

PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "python-dotenv", "jinja2", "tabulate", "tqdm")

SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"


@dataclass
class LoadedFit:
    """A fit directory read back from disk"""
    path: Path
    manifest: Dict
    draws: List[pd.DataFrame]
    event_log_hazard: List[pd.DataFrame]
    med_years: List[pd.DataFrame]
    summary: Dict

    @property
    def model(self) -> str:
        return self.manifest.get("model", "")

    @property
    def subject_ids(self) -> List[str]:
        return list(self.manifest.get("subject_ids", []))

    def pooled(self, frames: List[pd.DataFrame]) -> pd.DataFrame:
        return pd.concat(frames, ignore_index=True)


class ResultsStore:
    """File layout of simulation and fit outputs"""

    @staticmethod
    def package_versions() -> Dict[str, str]:
        """Installed versions of the numerical stack"""
        versions = {"python": platform.python_version()}
        for name in PACKAGES:
            try:
                versions[name] = metadata.version(name)
            except metadata.PackageNotFoundError:
                versions[name] = "unknown"
        return versions

    @staticmethod
    def write_json(data: Dict, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=False, default=_json_default)
            f.write("\n")

    @staticmethod
    def read_json(path: Path) -> Dict:
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        except FileNotFoundError:
            raise ResultsError(f"missing file: {path}")
        except json.JSONDecodeError as e:
            raise ResultsError(f"unreadable JSON in {path}: {e}")

    @staticmethod
    def write_frame(frame: pd.DataFrame, path: Path, index: bool = False):
        path.parent.mkdir(parents=True, exist_ok=True)
        if len(frame.columns) == 0:
            path.write_text("", encoding="utf-8")
            return
        frame.to_csv(path, index=index, lineterminator="\n", float_format="%.10g")

    @staticmethod
    def save_fit(result, cohort: Cohort, output_dir: Path) -> Path:
        """Write per-chain CSVs, summary.json and manifest.json; returns the directory"""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)

        for chain in result.chains:
            k = chain.chain
            ResultsStore.write_frame(chain.draws, output_dir / f"chain{k}.csv")
            ResultsStore.write_frame(chain.event_log_hazard, output_dir / f"event_log_hazard_chain{k}.csv")
            ResultsStore.write_frame(chain.med_years, output_dir / f"med_years_chain{k}.csv")
            if chain.augmentations is not None:
                ResultsStore.write_frame(chain.augmentations, output_dir / f"augmentation_chain{k}.csv")

        ResultsStore.write_json(result.fit_summary.model_dump(), output_dir / SUMMARY_FILE)

        basis = result.spec.basis
        manifest = {
            "command": "fit",
            "model": result.config.options.model,
            "seed": result.seed,
            "cohort_label": cohort.label,
            "subject_ids": list(cohort.ids),
            "config": result.config.model_dump(mode="json"),
            "basis": {
                "degree": basis.degree,
                "interior_knots": list(basis.interior_knots),
                "lo": basis.lo,
                "hi": basis.hi,
                "n_basis": basis.n_basis,
            },
            "chains": [
                {"chain": c.chain, "acceptance": c.acceptance, "counters": c.counters, "step_sizes": c.step_sizes}
                for c in result.chains
            ],
            "versions": ResultsStore.package_versions(),
        }
        ResultsStore.write_json(manifest, output_dir / MANIFEST_FILE)
        logger.info(f"Saved fit ({len(result.chains)} chains) to {output_dir}")
        return output_dir

    @staticmethod
    def load_fit(path: Path) -> LoadedFit:
        """Read a fit directory written by save_fit"""
        path = Path(path)
        if not path.is_dir():
            raise ResultsError(f"fit directory not found: {path}")
        manifest = ResultsStore.read_json(path / MANIFEST_FILE)
        summary = ResultsStore.read_json(path / SUMMARY_FILE)
        n_chains = len(manifest.get("chains", []))
        if n_chains == 0:
            raise ResultsError(f"{path}: manifest lists no chains")

        def read(name: str) -> pd.DataFrame:
            file = path / name
            if not file.exists():
                raise ResultsError(f"missing file: {file}")
            try:
                frame = pd.read_csv(file, dtype=float)
            except pd.errors.EmptyDataError:
                return pd.DataFrame()
            # subject ids stay strings even when they look numeric
            frame.columns = [str(c) for c in frame.columns]
            return frame

        chains = [c["chain"] for c in manifest["chains"]]
        return LoadedFit(
            path=path,
            manifest=manifest,
            draws=[read(f"chain{k}.csv") for k in chains],
            event_log_hazard=[read(f"event_log_hazard_chain{k}.csv") for k in chains],
            med_years=[read(f"med_years_chain{k}.csv") for k in chains],
            summary=summary,
        )

    @staticmethod
    def load_parameters(path: Optional[Path], sex: Sex = Sex.MEN, n_basis: int = 4) -> Parameters:
        """JSON keyed by flat parameter paths over the sex-specific defaults"""
        template = default_parameters(sex, n_basis=n_basis)
        if path is None:
            return template
        flat = ResultsStore.read_json(Path(path))
        if "hazard.kappa1" in flat:
            n_file = sum(1 for key in flat if key.startswith("hazard.kappa") and key[len("hazard.kappa"):].isdigit()
                         and key != "hazard.kappa0")
            if n_file != n_basis:
                raise ResultsError(f"{path}: {n_file} spline coefficients, basis has {n_basis}")
        try:
            return Parameters.from_flat(flat, template)
        except KeyError as e:
            raise ResultsError(f"{path}: {e.args[0]}")

    @staticmethod
    def default_output_dir(name: str) -> Path:
        return settings.OUTPUT_DIR / name


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")
