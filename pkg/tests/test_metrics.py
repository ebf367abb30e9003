import itertools

import numpy as np
import pytest

from catvae.core.errors import DataError
from catvae.ml import metrics
from catvae.ml.data import CategoricalDataset, to_onehot
from catvae.ml.metrics import (
    REPORT_NOTES,
    accuracy_mse,
    adversarial_accuracy,
    adversarial_accuracy_score,
    build_report,
    correlation_matrix,
    coverage_per_column,
    dim_prob_mse,
    equalize_rows,
    evaluate_system,
    kl_marginal,
    kl_per_column,
    ks_marginal,
    ks_per_column,
    log_cluster,
    pcd,
    prediction_accuracies,
    report_frame,
    support_coverage,
)
from catvae.schemas.config import MetricsConfig
from catvae.schemas.reports import METRIC_DIRECTIONS, PRIVACY_METRICS, SystemMetrics
from tests.conftest import make_schema, random_dataset


def dataset(sizes, rows) -> CategoricalDataset:
    return CategoricalDataset(make_schema(*sizes), np.array(rows))


def brute_force_tau_b(x: np.ndarray, y: np.ndarray) -> float:
    concordant = discordant = ties_x = ties_y = 0
    for i, j in itertools.combinations(range(x.size), 2):
        dx, dy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            ties_x += 1
        elif dy == 0:
            ties_y += 1
        elif dx == dy:
            concordant += 1
        else:
            discordant += 1
    return (concordant - discordant) / np.sqrt(
        (concordant + discordant + ties_x) * (concordant + discordant + ties_y)
    )


def test_kl_example_and_exact_zero() -> None:
    real = dataset((2,), [[0], [1]])
    synth = dataset((2,), [[0], [0]])
    eps = 1e-6
    q = (np.array([1.0, 0.0]) + eps) / (1 + 2 * eps)
    expected = 0.5 * np.log(0.5 / q[0]) + 0.5 * np.log(0.5 / q[1])
    assert kl_per_column(real, synth).tolist() == pytest.approx([expected])
    assert kl_marginal(real, dataset((2,), [[1], [0]])) == 0.0


def test_kl_ignores_levels_absent_from_real_data() -> None:
    real = dataset((3,), [[0], [0]])
    synth = dataset((3,), [[0], [2]])
    q0 = (0.5 + 1e-6) / (1 + 3e-6)
    assert kl_per_column(real, synth)[0] == pytest.approx(np.log(1 / q0))


def test_ks_uses_level_order() -> None:
    real = dataset((3,), [[0], [0], [1], [2]])
    synth = dataset((3,), [[0], [1], [2], [2]])
    assert ks_per_column(real, synth).tolist() == pytest.approx([0.25])


def test_coverage_counts_real_levels_only() -> None:
    real = dataset((4, 2), [[0, 0], [1, 1], [2, 1]])
    synth = dataset((4, 2), [[0, 1], [1, 1], [3, 1]])
    assert coverage_per_column(real, synth).tolist() == pytest.approx([2 / 3, 0.5])
    assert support_coverage(real, synth) == pytest.approx((2 / 3 + 0.5) / 2)


def test_dim_prob_sums_squared_differences() -> None:
    real = dataset((2, 2), [[0, 0], [0, 1]])
    synth = dataset((2, 2), [[1, 0], [1, 0]])
    # one-hot means: real [1, 0, .5, .5], synth [0, 1, 1, 0]
    assert dim_prob_mse(real, synth) == pytest.approx(1 + 1 + 0.25 + 0.25)


def test_kendall_matches_brute_force() -> None:
    ds = random_dataset((3, 4, 2), n=40, seed=0)
    corr = correlation_matrix(ds, "kendall")
    for i, j in itertools.combinations(range(3), 2):
        assert corr[i, j] == pytest.approx(brute_force_tau_b(ds.rows[:, i], ds.rows[:, j]))
        assert corr[j, i] == corr[i, j]
    assert np.allclose(np.diag(corr), 1.0)


def test_pearson_matches_numpy() -> None:
    ds = random_dataset((3, 5), n=30, seed=1)
    expected = np.corrcoef(ds.rows[:, 0], ds.rows[:, 1])[0, 1]
    assert correlation_matrix(ds, "pearson")[0, 1] == pytest.approx(expected)


def test_pcd_zero_for_identical_and_positive_otherwise() -> None:
    a = random_dataset((3, 3, 3), n=50, seed=2)
    b = random_dataset((3, 3, 3), n=50, seed=3)
    assert pcd(a, a) == 0.0
    assert pcd(a, b, "kendall") > 0


def test_pcd_undefined_for_constant_column(log_messages) -> None:
    real = random_dataset((2, 3), n=20, seed=4)
    synth = dataset((2, 3), [[0, k % 3] for k in range(20)])
    assert pcd(real, synth) is None
    assert any("undefined" in m for m in log_messages)
    with pytest.raises(DataError):
        pcd(random_dataset((3,), n=5), random_dataset((3,), n=5))


def test_log_cluster_pure_clusters() -> None:
    real = dataset((2, 2), [[0, 0]] * 10)
    synth = dataset((2, 2), [[1, 1]] * 10)
    assert log_cluster(real, synth, groups=2) == pytest.approx(np.log(0.25))


def test_log_cluster_floor_for_shuffled_copy() -> None:
    real = random_dataset((3, 3, 2), n=60, seed=5)
    synth = real.subset(np.random.default_rng(0).permutation(60))
    assert log_cluster(real, synth, groups=5) == pytest.approx(np.log(1e-8))


def test_log_cluster_needs_equal_counts() -> None:
    with pytest.raises(DataError):
        log_cluster(random_dataset((2,), n=5), random_dataset((2,), n=6))


def test_prediction_accuracies_copy_and_constant_columns() -> None:
    rows = [[k % 3, k % 3, 0] for k in range(30)]
    ds = dataset((3, 3, 2), rows)
    acc = prediction_accuracies(ds, ds)
    assert acc.tolist() == pytest.approx([1.0, 1.0, 1.0])
    assert accuracy_mse([1.0, 0.5], [0.5, 0.5]) == pytest.approx(0.125)


def test_adversarial_accuracy_extremes() -> None:
    real = dataset((2, 2), [[0, 0]] * 6)
    far = dataset((2, 2), [[1, 1]] * 6)
    assert adversarial_accuracy_score(real, far) == 1.0
    train = random_dataset((3, 3, 3), n=40, seed=6)
    assert adversarial_accuracy_score(train, train) == 0.0


def test_adversarial_accuracy_subsamples_larger_set() -> None:
    train = random_dataset((3, 3), n=30, seed=7)
    synth = random_dataset((3, 3), n=80, seed=8)
    assert adversarial_accuracy_score(train, synth, seed=1) == adversarial_accuracy_score(train, synth, seed=1)
    with pytest.raises(DataError):
        adversarial_accuracy_score(random_dataset((3,), n=1), random_dataset((3,), n=4))


def test_adversarial_accuracy_triple_for_copy() -> None:
    train = random_dataset((4, 4, 4), n=50, seed=9)
    test = random_dataset((4, 4, 4), n=50, seed=10)
    aa_train, aa_test, gap = adversarial_accuracy(train, test, train)
    assert aa_train == 0.5
    # AA_TrS is 0 for a copy, so the gap is AA_TeS itself
    assert abs(gap - 0.5) == pytest.approx(aa_test)


def test_identity_suite() -> None:
    train = random_dataset((3, 4, 2, 3), n=80, seed=11)
    test = random_dataset((3, 4, 2, 3), n=40, seed=12)
    result = evaluate_system("copy", train, test, train)
    assert result.values["KL"] == 0.0
    assert result.values["KS"] == 0.0
    assert result.values["Coverage"] == 1.0
    assert result.values["DimProb"] == 0.0
    assert result.values["PCD(P)"] == 0.0
    assert result.values["PCD(K)"] == 0.0
    assert result.values["log-cluster"] == pytest.approx(np.log(1e-8))
    assert result.values["VarPred"] == 0.0
    assert result.privacy["AA(train)"] == 0.5
    assert set(result.privacy) == set(PRIVACY_METRICS)


def test_evaluate_system_marks_missing_metrics() -> None:
    train = random_dataset((2, 3), n=40, seed=13)
    test = random_dataset((2, 3), n=20, seed=14)
    synth = dataset((2, 3), [[1, k % 3] for k in range(30)])
    result = evaluate_system("odd", train, test, synth, MetricsConfig(seed=2))
    assert result.values["log-cluster"] is None
    assert "row counts differ" in result.missing["log-cluster"]
    assert result.values["PCD(P)"] is None
    assert "constant" in result.missing["PCD(P)"]


def test_schema_mismatch_is_rejected() -> None:
    with pytest.raises(DataError):
        kl_marginal(random_dataset((2, 3), n=5), random_dataset((2, 4), n=5))


def test_build_report_ranks() -> None:
    systems = [
        SystemMetrics(name="a", values={"KL": 0.1, "Coverage": 0.9}),
        SystemMetrics(name="b", values={"KL": 0.2, "Coverage": 0.9}),
        SystemMetrics(name="c", values={"KL": None, "Coverage": 1.0}),
    ]
    report = build_report(systems)
    assert [report.ranks[n]["KL"] for n in "abc"] == [1.0, 2.0, 3.0]
    assert [report.ranks[n]["Coverage"] for n in "abc"] == [2.5, 2.5, 1.0]
    for name in "abc":
        assert report.average_rank[name] == pytest.approx(np.mean(list(report.ranks[name].values())))
    assert report.notes == REPORT_NOTES
    with pytest.raises(DataError):
        build_report([])


def test_report_frame_layout() -> None:
    systems = [SystemMetrics(name="a", values={"KL": 0.1}, privacy={"AA(train)": 0.1})]
    frame = report_frame(build_report(systems))
    assert list(frame.columns) == ["system", *METRIC_DIRECTIONS, *PRIVACY_METRICS, "Rank"]
    assert frame.loc[0, "KL"] == 0.1
    assert frame.loc[0, "Rank"] == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_marginal_metrics_ignore_row_order(seed) -> None:
    real = random_dataset((3, 4, 2), n=50, seed=seed)
    synth = random_dataset((3, 4, 2), n=70, seed=seed + 10)
    shuffled = synth.subset(np.random.default_rng(seed).permutation(synth.n))
    for metric in (kl_marginal, ks_marginal, support_coverage, dim_prob_mse):
        assert metric(real, shuffled) == metric(real, synth)


@pytest.mark.parametrize("seed", range(10))
def test_marginal_metric_ranges(seed) -> None:
    rng = np.random.default_rng(seed)
    sizes = tuple(int(t) for t in rng.integers(2, 6, size=3))
    real = random_dataset(sizes, n=int(rng.integers(20, 60)), seed=seed)
    synth = random_dataset(sizes, n=int(rng.integers(20, 60)), seed=seed + 100)
    assert (kl_per_column(real, synth) >= 0).all()
    ks = ks_per_column(real, synth)
    assert ((ks >= 0) & (ks <= 1)).all()
    assert 0 < support_coverage(real, synth) <= 1


def test_pcd_opposite_perfect_correlations() -> None:
    real = dataset((2, 2), [[0, 0], [1, 1]] * 10)
    synth = dataset((2, 2), [[0, 1], [1, 0]] * 10)
    assert pcd(real, synth, "pearson") == pytest.approx(2 * np.sqrt(2))
    assert pcd(real, synth, "kendall") == pytest.approx(2 * np.sqrt(2))


def test_single_column_schema_reports_prediction_missing() -> None:
    train = random_dataset((3,), n=40, seed=15)
    test = random_dataset((3,), n=20, seed=16)
    synth = random_dataset((3,), n=40, seed=17)
    result = evaluate_system("one", train, test, synth)
    assert result.values["VarPred"] is None
    assert result.missing["VarPred"] == "fewer than 2 columns"
    assert result.values["PCD(P)"] is None
    assert result.values["KL"] >= 0
    assert set(result.privacy) == set(PRIVACY_METRICS)
    with pytest.raises(DataError):
        prediction_accuracies(train, test)


def test_adversarial_accuracy_shares_one_row_count(monkeypatch) -> None:
    scanned = []
    nearest = metrics._nearest_hamming

    def recording(a, b, p, exclude_self, chunk=1024):
        scanned.append((a.shape[0], b.shape[0]))
        return nearest(a, b, p, exclude_self, chunk)

    monkeypatch.setattr(metrics, "_nearest_hamming", recording)
    train = random_dataset((3, 3, 3), n=240, seed=18)
    test = random_dataset((3, 3, 3), n=60, seed=19)
    synth = random_dataset((3, 3, 3), n=240, seed=20)
    adversarial_accuracy(train, test, synth, seed=3)
    assert len(scanned) == 8
    assert {size for pair in scanned for size in pair} == {60}


def test_equalize_rows_keeps_copies_aligned() -> None:
    train = random_dataset((4, 4), n=90, seed=21)
    test = random_dataset((4, 4), n=30, seed=22)
    a, b, c = equalize_rows([train, test, train], seed=4)
    assert a.n == b.n == c.n == 30
    assert b is test
    assert np.array_equal(a.rows, c.rows)
    assert np.array_equal(equalize_rows([train, test, train], seed=4)[0].rows, a.rows)
    aa_train, _, _ = adversarial_accuracy(train, test, train, seed=4)
    assert aa_train == 0.5


def test_duplicate_training_rows_have_zero_within_distance() -> None:
    base = dataset((4, 4, 4), [[k % 4, (k // 4) % 4, 0] for k in range(10)])
    train = base.subset(np.repeat(np.arange(10), 2))
    onehot = to_onehot(train).values
    assert (metrics._nearest_hamming(onehot, onehot, 3, exclude_self=True) == 0).all()
    synth = dataset((4, 4, 4), [[k % 4, (k // 4) % 4, 3] for k in range(20)])
    # every train row has a twin, so no synthetic row can be nearer
    assert adversarial_accuracy_score(train, synth) >= 0.5
