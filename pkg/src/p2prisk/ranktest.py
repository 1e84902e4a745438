"""Two-sample Wilcoxon rank-sum (Mann-Whitney U) test.

Small samples (n_a + n_b <= 20) get the exact permutation distribution of U,
with midranks for ties; larger samples use the tie-corrected normal
approximation with a continuity correction.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError

EXACT_MAX_TOTAL = 20


class RankSumResult(NamedTuple):
    statistic: float
    pvalue: float


def midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    xs = x[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_u_distribution(ranks: np.ndarray, n_a: int) -> dict[int, int]:
    """Counts of 2*U_a over all C(n, n_a) assignments of pooled ranks to sample a.

    Doubled ranks are integers even with midranks, so the rank-sum distribution
    is tabulated by dynamic programming over (items chosen, doubled sum).
    """
    doubled = [int(round(2 * r)) for r in ranks]
    table: list[dict[int, int]] = [defaultdict(int) for _ in range(n_a + 1)]
    table[0][0] = 1
    for r2 in doubled:
        for k in range(n_a, 0, -1):
            prev = table[k - 1]
            cur = table[k]
            for s, c in list(prev.items()):
                cur[s + r2] += c
    offset = n_a * (n_a + 1)  # 2 * n_a(n_a+1)/2
    return {s - offset: c for s, c in table[n_a].items()}


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], exact: bool | None = None) -> RankSumResult:
    """U statistic of ``a`` and its two-sided p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise DataError("rank-sum test needs two nonempty samples")
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    u_a = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    mean_u = n_a * n_b / 2.0
    if exact is None:
        exact = n_a + n_b <= EXACT_MAX_TOTAL

    if exact:
        dist = _exact_u_distribution(ranks, n_a)
        total = sum(dist.values())
        dev2 = abs(2 * u_a - 2 * mean_u)
        # doubled-U values are integers; compare with a half-unit guard against rounding
        extreme = sum(c for u2, c in dist.items() if abs(u2 - 2 * mean_u) >= dev2 - 0.5e-9)
        return RankSumResult(u_a, min(1.0, extreme / total))

    n = n_a + n_b
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts))
    var_u = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var_u <= 0:
        return RankSumResult(u_a, 1.0)
    z = max(abs(u_a - mean_u) - 0.5, 0.0) / math.sqrt(var_u)
    return RankSumResult(u_a, min(1.0, math.erfc(z / math.sqrt(2.0))))


def pairwise_rank_tests(name: str, levels: Sequence[str | None], months, target: np.ndarray) -> list[dict]:
    """Rank-sum test of monthly default rates for every pair of category levels."""
    rates: dict[str, dict] = defaultdict(lambda: defaultdict(list))
    for lvl, m, y in zip(levels, months, target):
        if lvl is not None:
            rates[lvl][m].append(y)
    monthly = {lvl: np.array([np.mean(v) for _, v in sorted(by_month.items())]) for lvl, by_month in rates.items()}
    out = []
    for la, lb in itertools.combinations(sorted(monthly), 2):
        res = wilcoxon_rank_sum(monthly[la], monthly[lb])
        out.append({"feature": name, "level_a": la, "level_b": lb,
                    "statistic": res.statistic, "pvalue": res.pvalue})
    return out
