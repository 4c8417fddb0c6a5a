#!/usr/bin/env python3
"""
Parameter-recovery study for the JM-RMT sampler.
Each replication simulates a cohort from the men's default parameters, fits it,
and checks whether the 95% credible intervals cover the true values.
"""

import argparse
import json
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, List

import pandas as pd
from tabulate import tabulate

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.core.log_setup import configure_logging  # noqa: E402
from app.models.domain import Sex  # noqa: E402
from app.models.parameters import default_parameters  # noqa: E402
from app.models.schemas import FitConfig, SimulationConfig  # noqa: E402
from app.services.sampler import run_fit  # noqa: E402
from app.services.simulator import simulate_cohort, simulation_basis  # noqa: E402

TRACKED = (
    "longitudinal.beta_m",
    "hazard.lambda_mu",
    "hazard.lambda_m",
    "medication.alpha2",
    "longitudinal.omega",
)


class RecoveryStudy:
    def __init__(self, replications: int, n: int, n_chains: int, n_iter: int, n_burnin: int, seed: int,
                 jobs: int, output_dir: Path):
        self.replications = replications
        self.sim_config = SimulationConfig(n=n, sex=Sex.MEN, visit_gaps=[2, 2, 2, 2], missing_rate=0.1)
        self.fit_config = FitConfig.from_flat({"n_chains": n_chains, "n_iter": n_iter, "n_burnin": n_burnin})
        self.seed = seed
        self.jobs = jobs
        self.output_dir = output_dir
        basis = simulation_basis(self.sim_config)
        self.truth = default_parameters(Sex.MEN, n_basis=basis.n_basis)
        self.basis = basis

        self.results = {
            "timestamp": datetime.now().isoformat(),
            "design": {"n": n, "n_chains": n_chains, "n_iter": n_iter, "n_burnin": n_burnin, "seed": seed},
            "replications": [],
            "summary": {},
        }

    def run_replication(self, k: int) -> Dict:
        """Simulate, fit and score one replication"""
        start = time.time()
        sim = simulate_cohort(self.truth, self.sim_config, seed=self.seed + k, basis=self.basis)
        config = self.fit_config.model_copy(
            update={"chain": self.fit_config.chain.model_copy(update={"seed": self.seed + 1000 + k})})
        fit = run_fit(sim.cohort, config, jobs=self.jobs, quiet=True)

        true_flat = self.truth.to_flat()
        covered = {}
        for name in TRACKED:
            row = fit.summary.loc[name]
            covered[name] = bool(row["q025"] <= true_flat[name] <= row["q975"])
        return {
            "replication": k,
            "covered": covered,
            "n_covered": sum(covered.values()),
            "max_rhat": fit.fit_summary.max_rhat,
            "converged": fit.fit_summary.converged,
            "seconds": time.time() - start,
        }

    def calculate_metrics(self, replications: List[Dict]) -> Dict:
        """Per-parameter coverage and the pass criterion (at least 4 of 5 covered in 18 of 20 runs)"""
        coverage = {name: sum(r["covered"][name] for r in replications) / len(replications) for name in TRACKED}
        good = sum(1 for r in replications if r["n_covered"] >= len(TRACKED) - 1)
        needed = int(0.9 * len(replications))
        return {
            "coverage": coverage,
            "replications_with_4_of_5": good,
            "all_converged": all(r["converged"] for r in replications),
            "passed": good >= needed and all(r["converged"] for r in replications),
        }

    def run_benchmark(self):
        print(f"Running {self.replications} replications")
        for k in range(self.replications):
            print(f"\n{'=' * 60}\nReplication {k + 1}/{self.replications}\n{'=' * 60}")
            result = self.run_replication(k)
            self.results["replications"].append(result)
            print(f"  covered {result['n_covered']}/{len(TRACKED)}, max R-hat {result['max_rhat']}, "
                  f"{result['seconds']:.0f}s")
        self.results["summary"] = self.calculate_metrics(self.results["replications"])
        self.generate_summary()
        self.save_results()

    def generate_summary(self):
        print("\n" + "=" * 80)
        print("RECOVERY SUMMARY")
        print("=" * 80)
        summary = self.results["summary"]
        rows = [[name, f"{value:.2f}"] for name, value in summary["coverage"].items()]
        print(tabulate(rows, headers=["Parameter", "95% coverage"], tablefmt="grid"))
        print(f"Replications with >= 4 of 5 covered: {summary['replications_with_4_of_5']}/{self.replications}")
        print(f"Passed: {summary['passed']}")

    def save_results(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        json_path = self.output_dir / f"recovery_results_{timestamp}.json"
        with open(json_path, "w") as f:
            json.dump(self.results, f, indent=2)
        rows = [{"replication": r["replication"], **r["covered"], "max_rhat": r["max_rhat"]}
                for r in self.results["replications"]]
        csv_path = self.output_dir / f"recovery_summary_{timestamp}.csv"
        pd.DataFrame(rows).to_csv(csv_path, index=False)
        print(f"\nResults saved to {json_path} and {csv_path}")


def main():
    parser = argparse.ArgumentParser(description="JM-RMT parameter-recovery study")
    parser.add_argument("--replications", type=int, default=20)
    parser.add_argument("--n", type=int, default=300)
    parser.add_argument("--chains", type=int, default=4)
    parser.add_argument("--iter", type=int, default=10000)
    parser.add_argument("--burnin", type=int, default=4000)
    parser.add_argument("--seed", type=int, default=20240101)
    parser.add_argument("--jobs", type=int, default=4)
    parser.add_argument("--out", default="runs/recovery")
    args = parser.parse_args()

    configure_logging("WARNING")
    study = RecoveryStudy(args.replications, args.n, args.chains, args.iter, args.burnin, args.seed,
                          args.jobs, Path(args.out))
    try:
        study.run_benchmark()
    except KeyboardInterrupt:
        print("\nRecovery study interrupted")
        return 1
    return 0 if study.results["summary"]["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
