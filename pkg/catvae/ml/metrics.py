"""Statistical-similarity and privacy metrics for synthetic categorical data.

Marginal: KL, KS, Coverage, DimProb. Joint: PCD (Pearson and Kendall tau-b
on integer level codes), log-cluster, VarPred. Privacy: nearest-neighbour
adversarial accuracy under Hamming distance.
"""
import warnings
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import kendalltau, rankdata
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from catvae.core.errors import DataError
from catvae.ml.data import CategoricalDataset, marginal_pmf, schema_compatible, to_onehot
from catvae.schemas.config import MetricsConfig
from catvae.schemas.reports import METRIC_DIRECTIONS, PRIVACY_METRICS, MetricsReport, SystemMetrics

REPORT_NOTES = [
    "KS uses the schema's sorted level order as the CDF order.",
    "DimProb sums squared differences over all one-hot dimensions.",
    "Coverage is the fraction of real levels observed in the synthetic data.",
    "PCD correlations are computed on integer level codes; Kendall uses tau-b.",
    "AA values are reported but not ranked.",
]


def _check_schema(a: CategoricalDataset, b: CategoricalDataset) -> None:
    if not schema_compatible(a.schema, b.schema):
        raise DataError(f"Schema mismatch: {a.schema.names} vs {b.schema.names}")


def _pmfs(ds: CategoricalDataset) -> List[np.ndarray]:
    return [marginal_pmf(ds, j) for j in range(ds.schema.p)]


def kl_per_column(real: CategoricalDataset, synth: CategoricalDataset, smoothing: float = 1e-6) -> np.ndarray:
    """KL(real || synth) per column. Synthetic PMFs get additive smoothing and are renormalized
    unless they equal the real PMF, in which case the column scores exactly 0."""
    _check_schema(real, synth)
    out = []
    for p, q in zip(_pmfs(real), _pmfs(synth)):
        if np.array_equal(p, q):
            out.append(0.0)
            continue
        q = (q + smoothing) / (1.0 + smoothing * q.size)
        mask = p > 0
        out.append(float(np.sum(p[mask] * np.log(p[mask] / q[mask]))))
    return np.array(out)


def kl_marginal(real: CategoricalDataset, synth: CategoricalDataset, smoothing: float = 1e-6) -> float:
    return float(kl_per_column(real, synth, smoothing).mean())


def ks_per_column(real: CategoricalDataset, synth: CategoricalDataset) -> np.ndarray:
    _check_schema(real, synth)
    return np.array([np.abs(np.cumsum(p) - np.cumsum(q)).max() for p, q in zip(_pmfs(real), _pmfs(synth))])


def ks_marginal(real: CategoricalDataset, synth: CategoricalDataset) -> float:
    return float(ks_per_column(real, synth).mean())


def coverage_per_column(real: CategoricalDataset, synth: CategoricalDataset) -> np.ndarray:
    _check_schema(real, synth)
    out = []
    for p, q in zip(_pmfs(real), _pmfs(synth)):
        observed = p > 0
        out.append(np.count_nonzero(observed & (q > 0)) / np.count_nonzero(observed))
    return np.array(out)


def support_coverage(real: CategoricalDataset, synth: CategoricalDataset) -> float:
    return float(coverage_per_column(real, synth).mean())


def dim_prob_mse(real: CategoricalDataset, synth: CategoricalDataset) -> float:
    """Sum over one-hot dimensions of squared differences of the dimension-wise means."""
    _check_schema(real, synth)
    diff = to_onehot(real).values.mean(axis=0) - to_onehot(synth).values.mean(axis=0)
    return float(np.sum(diff**2))


def undefined_correlation_reason(real: CategoricalDataset, synth: CategoricalDataset) -> Optional[str]:
    for label, ds in (("real", real), ("synthetic", synth)):
        constant = [ds.schema.names[j] for j in range(ds.schema.p) if np.ptp(ds.rows[:, j]) == 0]
        if constant:
            return f"constant column(s) in {label} data: {constant}"
    return None


def correlation_matrix(ds: CategoricalDataset, kind: Literal["pearson", "kendall"]) -> np.ndarray:
    codes = ds.rows.astype(np.float64)
    if kind == "pearson":
        return np.corrcoef(codes, rowvar=False)
    p = ds.schema.p
    corr = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            corr[i, j] = corr[j, i] = kendalltau(codes[:, i], codes[:, j], variant="b").statistic
    return corr


def pcd(real: CategoricalDataset, synth: CategoricalDataset, kind: Literal["pearson", "kendall"] = "pearson") -> Optional[float]:
    """Frobenius norm of the correlation difference; None when a correlation is undefined."""
    _check_schema(real, synth)
    if real.schema.p < 2:
        raise DataError("PCD needs at least 2 columns")
    reason = undefined_correlation_reason(real, synth)
    if reason is not None:
        logger.warning(f"PCD({kind}) undefined: {reason}")
        return None
    return float(np.linalg.norm(correlation_matrix(real, kind) - correlation_matrix(synth, kind), ord="fro"))


def log_cluster(
    real: CategoricalDataset,
    synth: CategoricalDataset,
    groups: int = 20,
    seed: int = 0,
    max_iter: int = 50,
    floor: float = 1e-8,
) -> float:
    """log(mean over clusters of (n_real_i / n_i - 0.5)^2), k-means on the pooled one-hot rows."""
    _check_schema(real, synth)
    if real.n != synth.n:
        raise DataError(f"log-cluster needs equal row counts, got {real.n} and {synth.n}")
    pooled = np.vstack([to_onehot(real).values, to_onehot(synth).values])
    is_real = np.arange(pooled.shape[0]) < real.n
    k = min(groups, np.unique(pooled, axis=0).shape[0])
    labels = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=max_iter, random_state=seed).fit_predict(pooled)
    counts = np.bincount(labels, minlength=k)
    real_counts = np.bincount(labels[is_real], minlength=k)
    used = counts > 0
    value = np.mean((real_counts[used] / counts[used] - 0.5) ** 2)
    return float(np.log(max(value, floor)))


def _fit_predict(x: np.ndarray, y: np.ndarray, x_test: np.ndarray, cfg: MetricsConfig) -> np.ndarray:
    classes = np.unique(y)
    if classes.size < 2:
        return np.full(x_test.shape[0], classes[0])
    model = LogisticRegression(C=cfg.var_pred_c, max_iter=cfg.var_pred_max_iter, random_state=cfg.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        model.fit(x, y)
    return model.predict(x_test)


def prediction_accuracies(
    train: CategoricalDataset, test: CategoricalDataset, cfg: Optional[MetricsConfig] = None
) -> np.ndarray:
    """Test accuracy of predicting each column from the others, trained on `train`."""
    cfg = cfg or MetricsConfig()
    _check_schema(train, test)
    if train.schema.p < 2:
        raise DataError("Variable prediction needs at least 2 columns")
    x_train, x_test = to_onehot(train).values, to_onehot(test).values
    width = train.schema.onehot_width
    out = []
    for j, block in enumerate(train.schema.blocks):
        keep = np.r_[0 : block.start, block.stop : width]
        pred = _fit_predict(x_train[:, keep], train.rows[:, j], x_test[:, keep], cfg)
        out.append(np.mean(pred == test.rows[:, j]))
    return np.array(out)


def accuracy_mse(acc_real: Sequence[float], acc_synth: Sequence[float]) -> float:
    return float(np.mean((np.asarray(acc_real) - np.asarray(acc_synth)) ** 2))


def var_pred_mse(
    real_train: CategoricalDataset,
    synth: CategoricalDataset,
    real_test: CategoricalDataset,
    cfg: Optional[MetricsConfig] = None,
) -> float:
    _check_schema(real_train, synth)
    return accuracy_mse(prediction_accuracies(real_train, real_test, cfg), prediction_accuracies(synth, real_test, cfg))


def _nearest_hamming(a: np.ndarray, b: np.ndarray, p: int, exclude_self: bool, chunk: int = 1024) -> np.ndarray:
    """For each one-hot row of a, the smallest Hamming count to a row of b (j != i when exclude_self).

    Hamming(x, y) = p - <onehot(x), onehot(y)>; the products are exact small integers.
    """
    out = np.empty(a.shape[0], dtype=np.int64)
    for start in range(0, a.shape[0], chunk):
        d = p - np.rint(a[start : start + chunk] @ b.T).astype(np.int64)
        if exclude_self:
            idx = np.arange(d.shape[0])
            d[idx, start + idx] = np.iinfo(np.int64).max
        out[start : start + chunk] = d.min(axis=1)
    return out


def equalize_rows(datasets: Sequence[CategoricalDataset], seed: int) -> List[CategoricalDataset]:
    """Subsample every dataset to the smallest row count.

    One seeded index draw per original size, so datasets of equal size keep
    aligned rows and a copy stays a copy.
    """
    n = min(ds.n for ds in datasets)
    rng = np.random.default_rng(seed)
    draws = {size: np.sort(rng.choice(size, n, replace=False)) for size in sorted({ds.n for ds in datasets}) if size > n}
    return [ds if ds.n == n else ds.subset(draws[ds.n]) for ds in datasets]


def adversarial_accuracy_score(real: CategoricalDataset, synth: CategoricalDataset, seed: int = 0) -> float:
    """AA between two datasets; the larger is subsampled (seeded) to the smaller's size.

    Comparisons are strict, so a tie between the cross and within distances
    counts as a miss.
    """
    _check_schema(real, synth)
    real, synth = equalize_rows([real, synth], seed)
    if real.n < 2:
        raise DataError(f"Adversarial accuracy needs at least 2 rows, got {real.n}")
    p = real.schema.p
    r, s = to_onehot(real).values, to_onehot(synth).values
    d_rs = _nearest_hamming(r, s, p, exclude_self=False)
    d_rr = _nearest_hamming(r, r, p, exclude_self=True)
    d_sr = _nearest_hamming(s, r, p, exclude_self=False)
    d_ss = _nearest_hamming(s, s, p, exclude_self=True)
    return float(0.5 * (np.mean(d_rs > d_rr) + np.mean(d_sr > d_ss)))


def adversarial_accuracy(
    train: CategoricalDataset, test: CategoricalDataset, synth: CategoricalDataset, seed: int = 0
) -> Tuple[float, float, float]:
    """(|AA_TrS - 0.5|, |AA_TeS - 0.5|, |AA_TrS - AA_TeS|), all three sets cut to one shared n."""
    _check_schema(train, test)
    _check_schema(train, synth)
    train, test, synth = equalize_rows([train, test, synth], seed)
    aa_train = adversarial_accuracy_score(train, synth, seed)
    aa_test = adversarial_accuracy_score(test, synth, seed)
    return abs(aa_train - 0.5), abs(aa_test - 0.5), abs(aa_train - aa_test)


def evaluate_system(
    name: str,
    real_train: CategoricalDataset,
    real_test: CategoricalDataset,
    synth: CategoricalDataset,
    cfg: Optional[MetricsConfig] = None,
) -> SystemMetrics:
    cfg = cfg or MetricsConfig()
    _check_schema(real_train, real_test)
    _check_schema(real_train, synth)
    result = SystemMetrics(name=name)

    kl = kl_per_column(real_train, synth, cfg.kl_smoothing)
    ks = ks_per_column(real_train, synth)
    cov = coverage_per_column(real_train, synth)
    result.values.update(
        {"KL": float(kl.mean()), "KS": float(ks.mean()), "Coverage": float(cov.mean()), "DimProb": dim_prob_mse(real_train, synth)}
    )
    result.breakdowns.update({"KL": kl.tolist(), "KS": ks.tolist(), "Coverage": cov.tolist()})

    for metric, kind in (("PCD(P)", "pearson"), ("PCD(K)", "kendall")):
        if real_train.schema.p < 2:
            result.values[metric] = None
            result.missing[metric] = "fewer than 2 columns"
            continue
        result.values[metric] = pcd(real_train, synth, kind)
        if result.values[metric] is None:
            result.missing[metric] = undefined_correlation_reason(real_train, synth)

    if real_train.n == synth.n:
        result.values["log-cluster"] = log_cluster(
            real_train, synth, cfg.log_cluster_groups, cfg.seed, cfg.kmeans_max_iter, cfg.log_cluster_floor
        )
    else:
        result.values["log-cluster"] = None
        result.missing["log-cluster"] = f"row counts differ ({real_train.n} vs {synth.n})"

    if real_train.schema.p < 2:
        result.values["VarPred"] = None
        result.missing["VarPred"] = "fewer than 2 columns"
    else:
        acc_real = prediction_accuracies(real_train, real_test, cfg)
        acc_synth = prediction_accuracies(synth, real_test, cfg)
        result.values["VarPred"] = accuracy_mse(acc_real, acc_synth)
        result.breakdowns["VarPred(real)"] = acc_real.tolist()
        result.breakdowns["VarPred(synth)"] = acc_synth.tolist()

    result.privacy.update(zip(PRIVACY_METRICS, adversarial_accuracy(real_train, real_test, synth, cfg.seed)))
    logger.info(f"Evaluated '{name}': {result.values} privacy {result.privacy}")
    return result


def build_report(systems: List[SystemMetrics], notes: Optional[List[str]] = None) -> MetricsReport:
    """Rank systems per metric (1 = best, ties share the mean rank, missing ranks last)."""
    if not systems:
        raise DataError("build_report needs at least one system")
    ranks: Dict[str, Dict[str, float]] = {s.name: {} for s in systems}
    for metric, higher_is_better in METRIC_DIRECTIONS.items():
        scores = []
        for s in systems:
            value = s.values.get(metric)
            if value is None or not np.isfinite(value):
                scores.append(np.inf)
            else:
                scores.append(-value if higher_is_better else value)
        for s, r in zip(systems, rankdata(scores, method="average")):
            ranks[s.name][metric] = float(r)
    average = {name: float(np.mean(list(r.values()))) for name, r in ranks.items()}
    return MetricsReport(systems=systems, ranks=ranks, average_rank=average, notes=list(notes or REPORT_NOTES))


def report_frame(report: MetricsReport) -> pd.DataFrame:
    """One row per system: metric values, privacy values and the average rank."""
    rows = []
    for s in report.systems:
        row = {"system": s.name}
        row.update({m: s.values.get(m) for m in METRIC_DIRECTIONS})
        row.update(s.privacy)
        row["Rank"] = report.average_rank.get(s.name)
        rows.append(row)
    return pd.DataFrame(rows, columns=["system", *METRIC_DIRECTIONS, *PRIVACY_METRICS, "Rank"])
