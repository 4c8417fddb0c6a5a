"""
diagnose: recompute R-hat and summaries of a saved fit and render a report
"""

import argparse
import logging
from pathlib import Path

import numpy as np
from jinja2 import Environment, FileSystemLoader
from tabulate import tabulate

from app.core.exceptions import ConvergenceError
from app.models.parameters import MedicationParams, N_ALPHA
from app.services.diagnostics import failing_parameters, gelman_rubin, summarize
from app.services.medication import gap_decay_curve
from app.services.results import LoadedFit, ResultsStore

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
DECAY_GAPS = np.arange(0.0, 10.5, 0.5)


def register(subparsers):
    parser = subparsers.add_parser("diagnose", help="convergence report for a fit directory")
    parser.add_argument("fit_dir", help="fit directory written by 'fit'")
    parser.add_argument("--threshold", type=float, help="R-hat threshold (default: the fit's)")
    parser.add_argument("--strict", action="store_true", help="exit 3 when any R-hat reaches the threshold")
    parser.set_defaults(handler=run)


def posterior_mean_medication(summary) -> MedicationParams:
    means = summary["mean"]
    return MedicationParams(alpha=[means[f"medication.alpha{k}"] for k in range(1, N_ALPHA + 1)],
                            decay=means["medication.decay"])


def render_report(fit: LoadedFit, summary, rhat, threshold: float) -> str:
    env = Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)), trim_blocks=True, lstrip_blocks=True)
    template = env.get_template("diagnose.md.j2")
    finite = [v for v in rhat.values() if np.isfinite(v)]
    rows = [{"name": name, "mean": r["mean"], "sd": r["sd"], "q025": r["q025"], "q975": r["q975"],
             "rhat": rhat.get(name)} for name, r in summary.iterrows()]
    return template.render(
        model=fit.model,
        cohort_label=fit.manifest.get("cohort_label", ""),
        n_chains=len(fit.draws),
        n_draws=len(fit.draws[0]),
        seed=fit.manifest.get("seed"),
        threshold=threshold,
        max_rhat=max(rhat.values()) if rhat else None,
        converged=bool(rhat) and len(finite) == len(rhat) and max(finite) < threshold,
        failing=failing_parameters(rhat, threshold),
        rows=rows,
        acceptance=fit.manifest.get("chains", []),
    )


def run(args: argparse.Namespace) -> int:
    fit = ResultsStore.load_fit(Path(args.fit_dir))
    threshold = args.threshold or fit.manifest.get("config", {}).get("rhat_threshold", 1.1)

    rhat = gelman_rubin(fit.draws) if len(fit.draws) >= 2 and len(fit.draws[0]) >= 4 else {}
    summary = summarize(fit.pooled(fit.draws))
    summary["rhat"] = [rhat.get(name, np.nan) for name in summary.index]

    report_path = fit.path / "diagnose.md"
    report_path.write_text(render_report(fit, summary, rhat, threshold), encoding="utf-8")
    curve = gap_decay_curve(posterior_mean_medication(summary), DECAY_GAPS)
    ResultsStore.write_frame(curve, fit.path / "gap_decay_curve.csv")
    logger.info(f"Wrote {report_path} and the gap-decay curve")

    if not args.quiet:
        rows = [[name, f"{r['mean']:.4g}", f"{r['sd']:.4g}", f"{r['rhat']:.3f}" if np.isfinite(r["rhat"]) else "-"]
                for name, r in summary.iterrows()]
        print(tabulate(rows, headers=["Parameter", "Mean", "SD", "R-hat"], tablefmt="grid"))

    failing = failing_parameters(rhat, threshold)
    if args.strict and (failing or not rhat):
        raise ConvergenceError(f"{len(failing)} parameter(s) with R-hat >= {threshold}", failing)
    return 0
