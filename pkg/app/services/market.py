"""Média móvel simples dos fechamentos e sua inclinação após a conclusão do ensaio."""

import logging
from datetime import date, timedelta
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.exceptions import InsufficientDataError
from app.models.schemas import StockSeries

logger = logging.getLogger(__name__)


def compute_sma(series: StockSeries, window: int = 5) -> List[Tuple[date, float]]:
    """
    SMA de `window` fechamentos, datada no último ponto de cada janela.

    Args:
        series: série com datas estritamente crescentes
        window: número de observações por média (>= 1)

    Returns:
        Lista (data, média) com n - window + 1 pontos
    """
    if window < 1:
        raise ValueError(f"janela deve ser >= 1, recebido {window}")
    n = len(series.observations)
    if n < window:
        raise InsufficientDataError(
            f"{series.ticker}: {n} observações para uma janela de {window}"
        )

    closes = pd.Series(
        [obs.close for obs in series.observations],
        index=[obs.date for obs in series.observations],
        dtype=float,
    )
    sma = closes.rolling(window=window, min_periods=window).mean().iloc[window - 1:]
    return [(day, float(value)) for day, value in sma.items()]


def ols_slope(offsets: Sequence[float], values: Sequence[float]) -> Optional[float]:
    """Inclinação de mínimos quadrados; None com menos de 2 pontos ou abscissa constante."""
    x = np.asarray(offsets, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 2:
        return None
    dx = x - x.mean()
    denominator = float(dx @ dx)
    if denominator == 0.0:
        return None
    return float(dx @ (y - y.mean()) / denominator)


def compute_sma_slope(
    series: StockSeries,
    completion_date: date,
    sma_window: int = 5,
    slope_window_days: int = 7,
) -> Optional[float]:
    """
    Inclinação (por dia corrido) da SMA entre a conclusão e `slope_window_days` dias depois.

    A abscissa é o deslocamento em dias corridos a partir da conclusão, então
    fins de semana ausentes não distorcem a inclinação.
    """
    try:
        sma = compute_sma(series, sma_window)
    except InsufficientDataError as e:
        logger.debug(f"sem inclinação: {e}")
        return None

    end = completion_date + timedelta(days=slope_window_days)
    points = [(day, value) for day, value in sma if completion_date <= day <= end]
    if len(points) < 2:
        return None
    return ols_slope([(day - completion_date).days for day, _ in points], [v for _, v in points])
