from benchmark.recovery_study import TRACKED, RecoveryStudy


def replication(n_missed: int, converged: bool = True):
    covered = {name: k >= n_missed for k, name in enumerate(TRACKED)}
    return {"covered": covered, "n_covered": sum(covered.values()), "converged": converged}


def study(tmp_path, replications=10):
    return RecoveryStudy(replications=replications, n=10, n_chains=2, n_iter=20, n_burnin=10, seed=1,
                         jobs=1, output_dir=tmp_path)


def test_passes_with_one_miss_per_replication(tmp_path):
    metrics = study(tmp_path).calculate_metrics([replication(1)] * 9 + [replication(3)])
    assert metrics["replications_with_4_of_5"] == 9
    assert metrics["passed"]
    assert metrics["coverage"][TRACKED[0]] == 0.0
    assert metrics["coverage"][TRACKED[-1]] == 1.0


def test_fails_when_too_many_replications_miss(tmp_path):
    metrics = study(tmp_path).calculate_metrics([replication(0)] * 8 + [replication(2)] * 2)
    assert not metrics["passed"]


def test_fails_without_convergence(tmp_path):
    metrics = study(tmp_path).calculate_metrics([replication(0)] * 9 + [replication(0, converged=False)])
    assert not metrics["passed"]
