"""Monthly P2P-lending default-rate forecasting.

Loan-level CSVs are aggregated to a monthly default-rate series
(:mod:`p2prisk.ingest`), forecast with a from-scratch LSTM
(:mod:`p2prisk.recurrent`) and compared with AR/VAR baselines
(:mod:`p2prisk.timeseries`, :mod:`p2prisk.evaluate`).
"""
__version__ = "0.1.0"
