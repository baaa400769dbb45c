import logging
import re
from typing import List

import numpy as np

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = "INFO"):
    """
    Настраивает корневой логгер для CLI и HTTP-сервиса.
    """
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


def parse_float_list(text) -> List[float]:
    """
    Разбирает список чисел вида "1,1e-2,1e-4" (допускаются пробелы и ';').
    """
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    items = [t for t in re.split(r"[,;\s]+", str(text).strip()) if t]
    if not items:
        raise ValueError(f"Empty list: {text!r}")
    try:
        return [float(t) for t in items]
    except ValueError:
        logging.error(f"Cannot parse number list: {text!r}")
        raise


def parse_int_list(text) -> List[int]:
    values = parse_float_list(text)
    if any(v != int(v) for v in values):
        raise ValueError(f"Integer list expected: {text!r}")
    return [int(v) for v in values]


def project_mean_zero(v: np.ndarray) -> np.ndarray:
    """Евклидова проекция на векторы с нулевой суммой (ядро давления)."""
    v = np.asarray(v, dtype=float)
    return v - v.mean()


def make_run_id(method: str, precond: str, level: int, mu: float, lam: float) -> str:
    """
    Идентификатор запуска, пригодный для имени файла: method-precond-n16-mu0.01-lam1.
    """
    raw = f"{method}-{precond}-n{level}-mu{mu:g}-lam{lam:g}"
    return re.sub(r"[^A-Za-z0-9.+-]", "_", raw)
