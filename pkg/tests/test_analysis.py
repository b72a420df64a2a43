import numpy as np
import pytest
import scipy.cluster.hierarchy as sch
import scipy.spatial.distance as ssd
import scipy.stats as sps

from epukit.analysis import (
    CorrelationMatrix,
    Dendrogram,
    align,
    correlation_matrix,
    hcluster,
    pearson,
    pearson_pvalue,
    read_dendrogram_json,
    read_matrix_csv,
    significance_level,
    write_dendrogram_json,
    write_matrix_csv,
)
from epukit.series import MonthlySeries, month_range

from conftest import cophenetic_matrix


def series_from(label, values, stage="standardized"):
    return MonthlySeries(label=label, stage=stage, values=dict(values))


class TestAlign:
    def test_intersection_of_observed_months(self):
        a = series_from("a", {"2015-01": 1.0, "2015-02": 2.0, "2015-03": 3.0, "2015-04": 4.0})
        b = series_from("b", {"2015-01": 1.0, "2015-02": None, "2015-03": 3.0,
                              "2015-04": 4.0, "2015-05": 5.0})
        months, matrix = align([a, b])
        assert months == ["2015-01", "2015-03", "2015-04"]
        assert matrix.shape == (3, 2)
        np.testing.assert_array_equal(matrix[:, 0], [1.0, 3.0, 4.0])

    def test_too_few_series(self):
        a = series_from("a", {"2015-01": 1.0})
        with pytest.raises(ValueError, match="at least 2"):
            align([a])

    def test_too_little_overlap(self):
        a = series_from("a", {"2015-01": 1.0, "2015-02": 2.0})
        b = series_from("b", {"2015-02": 2.0, "2015-03": 3.0})
        with pytest.raises(ValueError, match="overlap"):
            align([a, b])


class TestPearson:
    def test_known_value(self):
        r = pearson([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
        assert r == pytest.approx(0.9819805060619659, abs=1e-9)

    def test_perfect_and_inverse(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)

    def test_matches_scipy(self, rng):
        for _ in range(20):
            x = rng.normal(size=12)
            y = rng.normal(size=12)
            expected = sps.pearsonr(x, y)
            assert pearson(x, y) == pytest.approx(expected.statistic, abs=1e-12)
            assert pearson_pvalue(pearson(x, y), 12) == pytest.approx(
                expected.pvalue, abs=1e-9
            )

    def test_errors(self):
        with pytest.raises(ValueError, match="equal length"):
            pearson([1, 2, 3], [1, 2])
        with pytest.raises(ValueError, match=">= 3"):
            pearson([1, 2], [1, 2])
        with pytest.raises(ValueError, match="zero variance"):
            pearson([1, 1, 1], [1, 2, 3])

    def test_clipped_to_unit_interval(self):
        x = np.array([1.0, 2.0, 3.0, 4.0]) * 1e-8
        assert -1.0 <= pearson(x, x * 7.0) <= 1.0


class TestPearsonPvalue:
    def test_extremes(self):
        assert pearson_pvalue(1.0, 10) == 0.0
        assert pearson_pvalue(-1.0, 10) == 0.0
        assert pearson_pvalue(0.0, 10) == pytest.approx(1.0)

    def test_monotone_in_strength(self):
        ps = [pearson_pvalue(r, 20) for r in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(b < a for a, b in zip(ps, ps[1:]))

    def test_larger_n_smaller_p(self):
        assert pearson_pvalue(0.5, 30) < pearson_pvalue(0.5, 10)

    def test_validation(self):
        with pytest.raises(ValueError):
            pearson_pvalue(0.5, 2)
        with pytest.raises(ValueError):
            pearson_pvalue(1.5, 10)

    def test_levels(self):
        assert significance_level(0.005) == "<1%"
        assert significance_level(0.03) == "<5%"
        assert significance_level(0.2) == "ns"
        assert significance_level(0.05) == "ns"
        assert significance_level(0.01) == "<5%"


def three_series(rng=None, months=None):
    months = months or month_range("2015-01", "2015-12")
    base = np.sin(np.arange(len(months)))
    a = series_from("epu", dict(zip(months, base + 0.0)))
    b = series_from("bbd", dict(zip(months, base * 2.0 + 0.1)))
    noise = np.cos(np.arange(len(months)) * 1.7)
    c = series_from("wui", dict(zip(months, noise)))
    return [a, b, c]


class TestCorrelationMatrix:
    def test_symmetric_unit_diagonal(self):
        matrix = correlation_matrix(three_series())
        np.testing.assert_allclose(matrix.r, matrix.r.T)
        np.testing.assert_allclose(np.diag(matrix.r), 1.0)
        assert matrix.n == 12

    def test_pairwise_values(self):
        series = three_series()
        matrix = correlation_matrix(series)
        months, aligned = align(series)
        r, p = matrix.pair("epu", "bbd")
        assert r == pytest.approx(pearson(aligned[:, 0], aligned[:, 1]))
        assert p == pytest.approx(pearson_pvalue(r, len(months)))
        assert matrix.pair("epu", "bbd") == matrix.pair("bbd", "epu")

    def test_duplicate_labels_rejected(self):
        series = three_series()
        series[1] = series_from("epu", dict(series[1].values))
        with pytest.raises(ValueError, match="unique"):
            correlation_matrix(series)

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="shape"):
            CorrelationMatrix(labels=["a", "b"], r=np.eye(3), p=np.zeros((3, 3)), n=5)


class TestMatrixCsv:
    def test_round_trip(self, tmp_path):
        matrix = correlation_matrix(three_series())
        path = tmp_path / "matrix.csv"
        write_matrix_csv(path, matrix)
        lines = path.read_text().splitlines()
        assert lines[0] == "label_a,label_b,r,p,n,level"
        assert len(lines) == 1 + 3 * 4 // 2  # upper triangle incl. diagonal
        loaded = read_matrix_csv(path)
        assert loaded.labels == matrix.labels
        np.testing.assert_allclose(loaded.r, matrix.r, atol=1e-15)
        np.testing.assert_allclose(loaded.p, matrix.p, atol=1e-15)
        assert loaded.n == matrix.n

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="expected columns"):
            read_matrix_csv(tmp_path / "m.csv")


def matrix_from_r(labels, r, n=10):
    r = np.asarray(r, dtype=np.float64)
    p = np.zeros_like(r)
    return CorrelationMatrix(labels=list(labels), r=r, p=p, n=n)


class TestHcluster:
    def test_two_families_merge_first(self):
        # a/b strongly correlated, c/d strongly correlated, families unrelated
        r = np.array(
            [
                [1.0, 0.95, 0.1, 0.05],
                [0.95, 1.0, 0.05, 0.1],
                [0.1, 0.05, 1.0, 0.9],
                [0.05, 0.1, 0.9, 1.0],
            ]
        )
        dendrogram = hcluster(matrix_from_r(["a", "b", "c", "d"], r))
        (l0, r0, d0), (l1, r1, d1), _ = dendrogram.merges
        assert {l0, r0} == {0, 1}
        assert d0 == pytest.approx(0.05)
        assert {l1, r1} == {2, 3}
        assert d1 == pytest.approx(0.1)

    def test_linkage_variants(self):
        r = np.array(
            [
                [1.0, 0.8, 0.0],
                [0.8, 1.0, 0.4],
                [0.0, 0.4, 1.0],
            ]
        )
        labels = ["a", "b", "c"]
        for linkage, expected in (("single", 0.6), ("complete", 1.0), ("average", 0.8)):
            dendrogram = hcluster(matrix_from_r(labels, r), linkage=linkage)
            assert dendrogram.merges[0][:2] == (0, 1)  # d(a,b)=0.2 is smallest
            assert dendrogram.merges[1][2] == pytest.approx(expected)

    def test_ties_break_lexicographically(self):
        # all pairwise distances equal: first merge must be the (a, b) pair
        r = np.full((3, 3), 0.5)
        np.fill_diagonal(r, 1.0)
        dendrogram = hcluster(matrix_from_r(["c", "a", "b"], r))
        left, right, _ = dendrogram.merges[0]
        # leaves are in label order c,a,b -> indices 1 (a) and 2 (b)
        assert (left, right) == (1, 2)

    def test_left_child_has_smaller_key(self):
        r = np.array([[1.0, 0.9], [0.9, 1.0]])
        dendrogram = hcluster(matrix_from_r(["zed", "ant"], r))
        left, right, _ = dendrogram.merges[0]
        assert (left, right) == (1, 0)  # ant before zed

    def test_matches_scipy_cophenetic(self, rng):
        for linkage in ("single", "complete", "average"):
            for trial in range(5):
                k = 6
                data = rng.normal(size=(k, 30))
                r = np.corrcoef(data)
                labels = [f"s{i}" for i in range(k)]
                dendrogram = hcluster(matrix_from_r(labels, r), linkage=linkage)
                ours = cophenetic_matrix(labels, dendrogram.merges)
                condensed = ssd.squareform(1.0 - r, checks=False)
                reference = ssd.squareform(
                    sch.cophenet(sch.linkage(condensed, method=linkage))
                )
                np.testing.assert_allclose(ours, reference, atol=1e-10)

    def test_merge_count(self):
        series = three_series()
        dendrogram = hcluster(correlation_matrix(series))
        assert len(dendrogram.merges) == 2
        assert dendrogram.labels == ["epu", "bbd", "wui"]

    def test_validation(self):
        with pytest.raises(ValueError, match="linkage"):
            hcluster(matrix_from_r(["a", "b"], np.eye(2)), linkage="ward")
        with pytest.raises(ValueError, match="merges"):
            Dendrogram(labels=["a", "b", "c"], merges=[(0, 1, 0.5)])


class TestDendrogramJson:
    def test_round_trip(self, tmp_path):
        dendrogram = hcluster(correlation_matrix(three_series()))
        path = tmp_path / "dendrogram.json"
        write_dendrogram_json(path, dendrogram)
        loaded = read_dendrogram_json(path)
        assert loaded.labels == dendrogram.labels
        assert loaded.merges == dendrogram.merges
