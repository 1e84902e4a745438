"""Deterministic synthetic Lending-Club-style fixtures.

Each loan defaults with probability

    logistic(base + macro_effect * (u_t - mean(u)) / 3 + loan terms + seasonal_t)

where u_t is the unemployment rate in percent (a slow mean-reverting random
walk), so ``macro_effect`` is the logit shift for a three-point rise in
unemployment.  The loan terms depend on interest rate, income and home
ownership, and the seasonal term has a 12-month period.  With
``macro_effect = 0`` the macro series is independent of every default.

Post-outcome payment fields (recoveries, total_pymnt, ...) are drawn
independently of the outcome so they do not leak the target.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ingest import Month
from .numerics import make_rng

HOME_LEVELS = ("MORTGAGE", "RENT", "OWN", "OTHER", "NONE", "ANY")
HOME_PROBS = (0.45, 0.40, 0.12, 0.01, 0.01, 0.01)
VERIFY_LEVELS = ("Not Verified", "Verified", "Source Verified")
VERIFY_PROBS = (0.35, 0.35, 0.30)
APP_LEVELS = ("Individual", "Joint App")
APP_PROBS = (0.95, 0.05)
MONTH_ABBR = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")

LOAN_COLUMNS = (
    "id", "issue_d", "loan_status", "loan_amnt", "int_rate", "installment", "annual_inc",
    "home_ownership", "verification_status", "application_type", "delinq_2yrs", "delinq_amnt",
    "open_acc", "total_acc", "pub_rec", "revol_bal", "total_pymnt", "last_pymnt_amnt",
    "recoveries", "collection_recovery_fee", "total_rec_late_fee",
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    n_loans: int = 30_000
    n_months: int = 120
    macro_effect: float = 3.0
    start: Month = Month(2007, 10)
    base_rate: float = 0.15
    seasonal_amplitude: float = 0.15
    ongoing_tail_months: int = 6


def _month_at(start: Month, offset: int) -> Month:
    o = start.ordinal + offset
    return Month(o // 12, o % 12 + 1)


def macro_path(rng, n: int) -> np.ndarray:
    """Monthly unemployment rate in percent: mean-reverting walk around 6%."""
    u = np.empty(n)
    u[0] = 5.0 + rng.uniform(None, 0.0, 2.0)
    shocks = rng.normal(n, 0.0, 0.22)
    for t in range(1, n):
        u[t] = u[t - 1] + 0.02 * (6.0 - u[t - 1]) + shocks[t]
    return np.clip(u, 2.5, 15.0)


def generate(config: SynthConfig) -> tuple[list[list[str]], list[list[str]], dict]:
    """Returns (loan rows incl. header, macro rows incl. header, truth dict)."""
    if not config.n_loans >= config.n_months >= 24:
        raise ValueError("need n_loans >= n_months >= 24")
    rng_macro, rng_loans, rng_outcome = make_rng(config.seed).spawn(3)
    n_m = config.n_months
    # two padding months either side so the macro file strictly covers the loans
    u = macro_path(rng_macro, n_m + 4)
    u_loans = u[2:2 + n_m]
    z = (u_loans - u_loans.mean()) / 3.0

    per_month = np.full(n_m, config.n_loans // n_m)
    per_month[: config.n_loans % n_m] += 1
    month_idx = np.repeat(np.arange(n_m), per_month)
    N = config.n_loans

    r = rng_loans
    loan_amnt = np.round(np.exp(r.normal(N, 9.3, 0.6)) / 25.0) * 25.0
    int_rate = np.clip(r.normal(N, 13.0, 4.0), 5.3, 28.99)
    monthly = int_rate / 1200.0
    installment = loan_amnt * monthly / (1.0 - (1.0 + monthly) ** -36)
    annual_inc = np.exp(r.normal(N, 11.0, 0.5))
    inc_missing = r.uniform(N) < 0.02
    home = r.choice(len(HOME_LEVELS), N, p=HOME_PROBS)
    home_missing = r.uniform(N) < 0.01
    verify = r.choice(len(VERIFY_LEVELS), N, p=VERIFY_PROBS)
    app = r.choice(len(APP_LEVELS), N, p=APP_PROBS)
    delinq = r.poisson(0.3, N)
    delinq_amnt = np.where(r.uniform(N) < 0.05, np.round(r.uniform(N, 0, 2000), 2), 0.0)
    delinq_amnt_missing = r.uniform(N) < 0.9
    open_acc = r.poisson(10.0, N)
    total_acc = open_acc + r.poisson(12.0, N)
    pub_rec = r.poisson(0.1, N)
    revol_bal = np.round(np.exp(r.normal(N, 9.3, 1.0)))
    pay_frac = r.uniform(N, 0.3, 1.2)
    total_pymnt = np.round(loan_amnt * pay_frac, 2)
    last_pymnt = np.round(installment * r.uniform(N, 0.5, 1.5), 2)
    recoveries = np.where(r.uniform(N) < 0.1, np.round(r.uniform(N, 0, 1500), 2), 0.0)
    recovery_fee = np.round(recoveries * 0.18, 2)
    late_fee = np.where(r.uniform(N) < 0.03, np.round(r.uniform(N, 0, 60), 2), 0.0)

    base = math.log(config.base_rate / (1.0 - config.base_rate))
    season = config.seasonal_amplitude * np.sin(2.0 * np.pi * (month_idx + config.start.month - 1) / 12.0)
    loan_terms = (
        0.35 * (int_rate - 13.0) / 4.0
        - 0.15 * (np.log(annual_inc) - 11.0) / 0.5
        + 0.15 * (home == HOME_LEVELS.index("RENT"))
    )
    logit = base + config.macro_effect * z[month_idx] + loan_terms + season
    prob = 1.0 / (1.0 + np.exp(-logit))
    o = rng_outcome
    defaulted = o.uniform(N) < prob
    charged_off = o.uniform(N) < 0.9
    ongoing = (month_idx >= n_m - config.ongoing_tail_months) & (o.uniform(N) < 0.3)

    rows = [list(LOAN_COLUMNS)]
    for i in range(N):
        m = _month_at(config.start, int(month_idx[i]))
        if ongoing[i]:
            status = "Current"
        elif defaulted[i]:
            status = "Charged Off" if charged_off[i] else "Default"
        else:
            status = "Fully Paid"
        rows.append([
            str(100000 + i),
            f"{MONTH_ABBR[m.month - 1]}-{m.year}",
            status,
            f"{loan_amnt[i]:.0f}",
            f"{int_rate[i]:.2f}%",
            f"{installment[i]:.2f}",
            "" if inc_missing[i] else f"{annual_inc[i]:.2f}",
            "" if home_missing[i] else HOME_LEVELS[home[i]],
            VERIFY_LEVELS[verify[i]],
            APP_LEVELS[app[i]],
            str(int(delinq[i])),
            "" if delinq_amnt_missing[i] else f"{delinq_amnt[i]:.2f}",
            str(int(open_acc[i])),
            str(int(total_acc[i])),
            str(int(pub_rec[i])),
            f"{revol_bal[i]:.0f}",
            f"{total_pymnt[i]:.2f}",
            f"{last_pymnt[i]:.2f}",
            f"{recoveries[i]:.2f}",
            f"{recovery_fee[i]:.2f}",
            f"{late_fee[i]:.2f}",
        ])

    macro_rows = [["month", "unemp_rate"]]
    for j in range(n_m + 4):
        macro_rows.append([str(_month_at(config.start, j - 2)), f"{u[j]:.4f}"])
    truth = {"macro": u_loans, "z": z, "prob": prob, "month_idx": month_idx, "defaulted": defaulted,
             "ongoing": ongoing}
    return rows, macro_rows, truth


def write_fixture(config: SynthConfig, loans_path, macro_path_out) -> dict:
    loans, macro, truth = generate(config)
    for path, rows in ((loans_path, loans), (macro_path_out, macro)):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    return truth
