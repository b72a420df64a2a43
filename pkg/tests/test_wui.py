import math

import numpy as np
import pytest

from epukit.corpus import CorpusStats
from epukit.series import MonthlySeries, month_range
from epukit.wui import (
    PlsModel,
    TermMatrix,
    WuiConfig,
    build_bulks,
    estimate_monthly_wui,
    pls_fit,
    pls_predict,
    quarterly_mean_targets,
    read_targets_csv,
    select_components,
    write_mse_curve_csv,
    write_targets_csv,
)

from conftest import make_doc, ols_fitted


class TestTermMatrix:
    def test_validation(self):
        with pytest.raises(ValueError):
            TermMatrix(periods=["2015-Q1"], vocabulary=["a"], counts=np.zeros((2, 1)))
        with pytest.raises(ValueError, match="nonnegative"):
            TermMatrix(periods=["2015-Q1"], vocabulary=["a"], counts=np.array([[-1.0]]))


class TestBuildBulks:
    def docs(self):
        return [
            make_doc("a", "2015-01", ["tax", "tax", "growth"]),
            make_doc("b", "2015-02", ["tax"]),
            make_doc("c", "2015-05", ["growth", "oov"]),
        ]

    def test_quarterly_counts(self):
        tm = build_bulks(self.docs(), "quarter", {"tax", "growth"})
        assert tm.periods == ["2015-Q1", "2015-Q2"]
        assert tm.vocabulary == ["growth", "tax"]  # sorted columns
        np.testing.assert_array_equal(tm.counts, [[1.0, 3.0], [1.0, 0.0]])

    def test_monthly_counts_with_gap(self):
        tm = build_bulks(self.docs(), "month", {"tax", "growth"})
        assert tm.periods == month_range("2015-01", "2015-05")
        np.testing.assert_array_equal(tm.counts[2], [0.0, 0.0])  # empty March row

    def test_explicit_periods(self):
        tm = build_bulks(self.docs()[:2], "quarter", {"tax"}, periods=["2015-Q1", "2015-Q2"])
        np.testing.assert_array_equal(tm.counts, [[3.0], [0.0]])

    def test_doc_outside_periods_fatal(self):
        with pytest.raises(ValueError, match="outside the period list"):
            build_bulks(self.docs(), "quarter", {"tax"}, periods=["2015-Q1"])

    def test_bad_granularity(self):
        with pytest.raises(ValueError, match="granularity"):
            build_bulks(self.docs(), "weekly", {"tax"})

    def test_empty_vocabulary(self):
        with pytest.raises(ValueError, match="empty vocabulary"):
            build_bulks(self.docs(), "month", set())


def random_regression(rng, n=12, p=5, noise=0.0):
    x = rng.normal(size=(n, p))
    coef = rng.normal(size=p)
    y = x @ coef + 1.5 + noise * rng.normal(size=n)
    return x, y


class TestPlsFit:
    def test_full_rank_max_components_matches_ols(self, rng):
        x, y = random_regression(rng, n=12, p=5)
        model = pls_fit(x, y, n_components=5)
        fitted = pls_predict(model, x)
        np.testing.assert_allclose(fitted, ols_fitted(x, y), atol=1e-6)

    def test_scores_orthogonal(self, rng):
        x, y = random_regression(rng, n=20, p=6, noise=0.3)
        model = pls_fit(x, y, n_components=6)
        gram = model.scores.T @ model.scores
        off_diag = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off_diag)) < 1e-8

    def test_rank_deficient_stops_early(self, rng):
        base = rng.normal(size=(10, 2))
        x = np.column_stack([base, base[:, 0] + base[:, 1]])  # rank 2
        y = x[:, 0] + 0.5 * x[:, 1]
        model = pls_fit(x, y, n_components=3)
        assert model.n_components == 2

    def test_zero_variance_target(self, rng):
        x, _ = random_regression(rng)
        with pytest.raises(ValueError, match="zero variance"):
            pls_fit(x, np.ones(len(x)), n_components=1)

    def test_component_bound(self, rng):
        x, y = random_regression(rng, n=6, p=3)
        with pytest.raises(ValueError, match="n_components"):
            pls_fit(x, y, n_components=4)
        with pytest.raises(ValueError, match="n_components"):
            pls_fit(x, y, n_components=0)

    def test_length_mismatch(self, rng):
        x, y = random_regression(rng)
        with pytest.raises(ValueError, match="target values"):
            pls_fit(x, y[:-1], n_components=1)

    def test_scale_flag_changes_fit_not_contract(self, rng):
        x, y = random_regression(rng, n=15, p=4, noise=0.2)
        x[:, 0] *= 100.0  # one dominant-variance column
        plain = pls_fit(x, y, n_components=2)
        scaled = pls_fit(x, y, n_components=2, scale=True)
        assert not np.allclose(plain.coef, scaled.coef)
        # both still reproduce OLS at full rank
        full = pls_fit(x, y, n_components=4, scale=True)
        np.testing.assert_allclose(pls_predict(full, x), ols_fitted(x, y), atol=1e-6)

    def test_training_mse_non_increasing(self, rng):
        x, y = random_regression(rng, n=25, p=8, noise=0.5)
        previous = math.inf
        for k in range(1, 9):
            model = pls_fit(x, y, n_components=k)
            mse = float(np.mean((pls_predict(model, x) - y) ** 2))
            assert mse <= previous + 1e-12
            previous = mse


class TestPlsPredict:
    def test_truncation_equals_smaller_fit(self, rng):
        x, y = random_regression(rng, n=18, p=6, noise=0.4)
        big = pls_fit(x, y, n_components=5)
        small = pls_fit(x, y, n_components=2)
        x_new = rng.normal(size=(7, 6))
        np.testing.assert_allclose(
            pls_predict(big, x_new, n_components=2),
            pls_predict(small, x_new),
            atol=1e-10,
        )

    def test_truncation_above_fit_uses_all(self, rng):
        x, y = random_regression(rng, n=10, p=4)
        model = pls_fit(x, y, n_components=3)
        np.testing.assert_array_equal(
            pls_predict(model, x, n_components=99), pls_predict(model, x)
        )

    def test_vocabulary_mismatch(self):
        docs = [
            make_doc("a", "2015-01", ["tax", "growth"]),
            make_doc("b", "2015-04", ["tax"]),
            make_doc("c", "2015-07", ["growth", "growth"]),
        ]
        tm = build_bulks(docs, "quarter", {"tax", "growth"})
        model = pls_fit(tm, np.array([1.0, 2.0, 3.0]), n_components=1)
        other = build_bulks(docs, "quarter", {"tax", "debt"})
        with pytest.raises(ValueError, match="mismatch"):
            pls_predict(model, other)

    def test_column_count_checked_for_plain_arrays(self, rng):
        x, y = random_regression(rng, n=10, p=4)
        model = pls_fit(x, y, n_components=2)
        with pytest.raises(ValueError, match="columns"):
            pls_predict(model, np.zeros((3, 5)))


class TestSelectComponents:
    def test_train_mode_curve_non_increasing(self, rng):
        x, y = random_regression(rng, n=20, p=6, noise=0.5)
        best_k, curve = select_components(x, y, range(1, 7), method="train")
        mses = [m for _, m in curve]
        assert all(b <= a + 1e-12 for a, b in zip(mses, mses[1:]))
        assert best_k == min(k for k, m in curve if m == min(mses))

    def test_loo_recovers_low_rank_signal(self, rng):
        n, p = 24, 8
        latent = rng.normal(size=(n, 2))
        mix = rng.normal(size=(2, p))
        x = latent @ mix + 0.01 * rng.normal(size=(n, p))
        y = latent @ np.array([2.0, -1.0]) + 0.01 * rng.normal(size=n)
        best_k, curve = select_components(x, y, range(1, 7), method="loo")
        assert best_k <= 3
        best_mse = dict(curve)[best_k]
        assert all(best_mse <= m for _, m in curve)

    def test_loo_drops_infeasible_k(self, rng):
        x, y = random_regression(rng, n=6, p=5, noise=0.1)
        best_k, curve = select_components(x, y, range(1, 6), method="loo")
        assert [k for k, _ in curve] == [1, 2, 3, 4]  # k=5 needs n-2=4 max

    def test_tie_breaks_to_smallest_k(self, rng):
        # rank-1 predictors: every k beyond 1 reuses the same single component
        direction = rng.normal(size=4)
        x = np.outer(rng.normal(size=10), direction)
        y = x @ np.ones(4) + 5.0
        best_k, curve = select_components(x, y, [1, 2, 3], method="train")
        assert best_k == 1
        mses = [m for _, m in curve]
        assert mses[0] == pytest.approx(mses[1]) == pytest.approx(mses[2])

    def test_unknown_method(self, rng):
        x, y = random_regression(rng)
        with pytest.raises(ValueError, match="unknown selection"):
            select_components(x, y, [1], method="aic")


def planted_corpus(n_months=24, seed=11):
    """Corpus whose 'worried' term density carries a monthly signal."""
    rng = np.random.default_rng(seed)
    months = month_range("2015-01", f"{2015 + (n_months - 1) // 12}-{(n_months - 1) % 12 + 1:02d}")
    signal = {m: float(3.0 + 2.0 * math.sin(i / 3.0)) for i, m in enumerate(months)}
    fillers = [f"filler{j}" for j in range(6)]
    docs = []
    for m_idx, month in enumerate(months):
        for d in range(8):
            worried = int(round(signal[month])) + (d % 2)
            tokens = ["worried"] * worried + [fillers[(m_idx + j) % 6] for j in range(4)]
            perm = rng.permutation(len(tokens))
            docs.append(make_doc(f"{month}-{d}", month, [tokens[i] for i in perm],
                                 day=1 + d))
    stats = CorpusStats()
    for doc in docs:
        stats.add_document(doc)
    return docs, stats, months, signal


class TestEstimateMonthlyWui:
    def test_recovers_planted_monthly_signal(self):
        docs, stats, months, signal = planted_corpus()
        monthly = MonthlySeries(
            label="target", stage="raw", values={m: signal[m] for m in months}
        )
        targets = quarterly_mean_targets(monthly)
        result = estimate_monthly_wui(
            docs, stats, targets, WuiConfig(kmax=4, max_df_ratio=1.0)
        )
        assert result.standardized.stage == "standardized"
        got = np.array([result.raw.values[m] for m in months])
        want = np.array([signal[m] for m in months])
        r = np.corrcoef(got, want)[0, 1]
        assert r > 0.9
        assert result.best_k >= 1
        assert [k for k, _ in result.mse_curve][0] == 1

    def test_bad_quarter_id(self):
        docs, stats, _, _ = planted_corpus(n_months=6)
        with pytest.raises(ValueError, match="bad quarter identifier"):
            estimate_monthly_wui(docs, stats, {"2015-01": 1.0})

    def test_missing_quarter_target(self):
        docs, stats, months, signal = planted_corpus(n_months=12)
        monthly = MonthlySeries(
            label="t", stage="raw", values={m: signal[m] for m in months}
        )
        targets = quarterly_mean_targets(monthly)
        targets.pop("2015-Q3")
        with pytest.raises(ValueError, match="missing for: 2015-Q3"):
            estimate_monthly_wui(docs, stats, targets)


class TestTargetsCsv:
    def test_round_trip(self, tmp_path):
        targets = {"2015-Q1": 1.25, "2015-Q2": -0.5}
        write_targets_csv(tmp_path / "t.csv", targets)
        assert read_targets_csv(tmp_path / "t.csv") == targets

    def test_bad_header(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="expected columns"):
            read_targets_csv(tmp_path / "t.csv")

    def test_bad_quarter(self, tmp_path):
        (tmp_path / "t.csv").write_text("quarter,value\n2015-13,1.0\n")
        with pytest.raises(ValueError, match="bad quarter"):
            read_targets_csv(tmp_path / "t.csv")

    def test_duplicate_quarter(self, tmp_path):
        (tmp_path / "t.csv").write_text("quarter,value\n2015-Q1,1.0\n2015-Q1,2.0\n")
        with pytest.raises(ValueError, match="duplicate"):
            read_targets_csv(tmp_path / "t.csv")

    def test_empty(self, tmp_path):
        (tmp_path / "t.csv").write_text("quarter,value\n")
        with pytest.raises(ValueError, match="no target rows"):
            read_targets_csv(tmp_path / "t.csv")

    def test_mse_curve_csv(self, tmp_path):
        write_mse_curve_csv(tmp_path / "c.csv", [(1, 0.5), (2, 0.25)])
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "k,mse"
        assert lines[1] == "1,0.5"


class TestQuarterlyMeanTargets:
    def test_complete_quarters_only(self):
        values = {m: float(i) for i, m in enumerate(month_range("2015-01", "2015-04"))}
        series = MonthlySeries(label="x", stage="raw", values=values)
        targets = quarterly_mean_targets(series)
        assert targets == {"2015-Q1": 1.0}  # Q2 has one month only

    def test_gap_breaks_quarter(self):
        values = {"2015-01": 1.0, "2015-02": None, "2015-03": 3.0}
        series = MonthlySeries(label="x", stage="raw", values=values)
        assert quarterly_mean_targets(series) == {}
