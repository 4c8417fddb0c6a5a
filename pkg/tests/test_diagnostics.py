import numpy as np
import pandas as pd
import pytest

from app.services.diagnostics import failing_parameters, gelman_rubin, split_rhat, summarize


class TestSplitRhat:
    def test_constant_draws(self):
        assert split_rhat(np.full((3, 100), 2.5)) == 1.0

    def test_well_mixed_chains(self, rng):
        assert split_rhat(rng.normal(size=(4, 5000))) < 1.01

    def test_disjoint_chains(self, rng):
        draws = rng.normal(size=(2, 1000))
        draws[1] += 10.0
        assert split_rhat(draws) > 1.1

    def test_trending_chain_is_caught_by_splitting(self):
        trend = np.tile(np.linspace(0.0, 1.0, 1000), (2, 1))
        assert split_rhat(trend) > 1.1

    def test_needs_two_chains(self, rng):
        with pytest.raises(ValueError):
            split_rhat(rng.normal(size=(1, 100)))
        with pytest.raises(ValueError):
            split_rhat(rng.normal(size=(2, 3)))


class TestGelmanRubin:
    def test_per_column(self, rng):
        chains = [pd.DataFrame({"a": rng.normal(size=500), "b": np.zeros(500)}) for _ in range(3)]
        rhat = gelman_rubin(chains)
        assert set(rhat) == {"a", "b"}
        assert rhat["b"] == 1.0

    def test_unequal_lengths(self, rng):
        with pytest.raises(ValueError):
            gelman_rubin([pd.DataFrame({"a": rng.normal(size=50)}), pd.DataFrame({"a": rng.normal(size=40)})])

    def test_single_chain(self, rng):
        with pytest.raises(ValueError):
            gelman_rubin([pd.DataFrame({"a": rng.normal(size=50)})])


class TestSummarize:
    def test_constant_samples(self):
        summary = summarize({"x": [3.0] * 10})
        assert summary.loc["x"].tolist() == pytest.approx([3.0, 0.0, 3.0, 3.0])

    def test_standard_normal(self, rng):
        summary = summarize({"z": rng.normal(size=200_000)})
        assert summary.loc["z", "mean"] == pytest.approx(0.0, abs=0.01)
        assert summary.loc["z", "sd"] == pytest.approx(1.0, abs=0.01)
        assert summary.loc["z", "q025"] == pytest.approx(-1.96, abs=0.03)
        assert summary.loc["z", "q975"] == pytest.approx(1.96, abs=0.03)

    def test_linear_quantiles(self):
        summary = summarize({"x": np.arange(41.0)})
        assert summary.loc["x", "q025"] == pytest.approx(1.0)
        assert summary.loc["x", "q975"] == pytest.approx(39.0)
        assert summary.loc["x", "sd"] == pytest.approx(np.arange(41.0).std(ddof=1))

    def test_no_draws(self):
        with pytest.raises(ValueError):
            summarize({"x": []})


def test_failing_parameters():
    rhat = {"a": 1.0, "b": 1.2, "c": float("nan")}
    assert set(failing_parameters(rhat, 1.1)) == {"b", "c"}
