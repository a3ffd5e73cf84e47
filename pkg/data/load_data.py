import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from estimators.errors import ValidationError

logger = logging.getLogger(__name__)

DATE_COLUMN_ALIASES = ["date", "dates", "day", "timestamp", "time"]


@dataclass
class ReturnPanel:
    dates: pd.DatetimeIndex
    tickers: List[str]
    returns: np.ndarray
    dropped: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.returns.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError(
                f"returns have shape {self.returns.shape}, expected ({len(self.dates)}, {len(self.tickers)})"
            )
        if self.dates.has_duplicates or (len(self.dates) > 1 and not self.dates.is_monotonic_increasing):
            raise ValidationError("panel dates must be strictly increasing")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.returns, index=self.dates, columns=self.tickers)


def _find_date_column(columns: Sequence[str], date_column: str) -> str:
    """
    The header matching date_column, case-insensitively; falls back to
    the usual aliases when the requested name is the default.
    """
    lowered = {c.strip().lower(): c for c in columns}
    wanted = date_column.strip().lower()
    if wanted in lowered:
        return lowered[wanted]
    if wanted == "date":
        for alias in DATE_COLUMN_ALIASES:
            if alias in lowered:
                return lowered[alias]
    raise ValidationError(f"Could not find date column {date_column!r}. Found: {list(columns)}")


def ingest_csv(path: str, date_column: str = "date", ticker_filter: Optional[Sequence[str]] = None) -> ReturnPanel:
    """
    Reads a wide CSV (one date column, one column of simple returns per
    ticker). Tickers with any blank cell are dropped and reported; any other
    unparseable cell is an error naming its row (the header is row 1).
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Returns file not found: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ValidationError(f"Empty CSV file: {path}")
    except pd.errors.ParserError as e:
        raise ValidationError(f"Cannot parse {path}: {e}") from e

    date_col = _find_date_column(list(raw.columns), date_column)
    tickers = [c for c in raw.columns if c != date_col]
    if ticker_filter is not None:
        wanted = [str(t) for t in ticker_filter]
        missing = [t for t in wanted if t not in tickers]
        if missing:
            logger.warning("requested tickers not in %s: %s", path, missing)
        tickers = [t for t in wanted if t in tickers]

    date_text = raw[date_col].str.strip()
    dates = pd.to_datetime(date_text, errors="coerce")
    bad = np.flatnonzero(dates.isna().to_numpy())
    if bad.size:
        row = int(bad[0]) + 2
        raise ValidationError(f"Row {row}: cannot parse date {raw[date_col].iloc[bad[0]]!r}")
    dates = pd.DatetimeIndex(dates)
    if dates.has_duplicates or not dates.is_monotonic_increasing:
        step = np.flatnonzero(np.diff(dates.asi8) <= 0)
        raise ValidationError(f"Row {int(step[0]) + 3}: dates are not strictly increasing")

    kept: List[str] = []
    dropped: List[str] = []
    columns = []
    for ticker in tickers:
        text = raw[ticker].str.strip()
        blank = text == ""
        values = pd.to_numeric(text.where(~blank), errors="coerce")
        bad = np.flatnonzero((values.isna() & ~blank).to_numpy())
        if bad.size:
            row = int(bad[0]) + 2
            raise ValidationError(f"Row {row}: cannot parse return {raw[ticker].iloc[bad[0]]!r} for {ticker}")
        if blank.any():
            dropped.append(ticker)
            continue
        kept.append(ticker)
        columns.append(values.to_numpy(dtype=float))

    if dropped:
        logger.info("dropped %d ticker(s) with missing values: %s", len(dropped), dropped)
    if not kept or len(dates) == 0:
        raise ValidationError(f"No complete return series in {path}")

    logger.info("loaded %d days x %d tickers from %s", len(dates), len(kept), path)
    return ReturnPanel(dates=dates, tickers=kept, returns=np.column_stack(columns), dropped=dropped)
