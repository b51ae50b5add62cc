"""Finite-difference validation of analytic gradients."""

import logging
from typing import Callable, Iterable, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    closure: Callable[[], float],
    parameters: Iterable[Tuple[np.ndarray, np.ndarray]],
    step: float = 1e-5,
    skip: Callable[[np.ndarray, tuple], bool] = None,
    floor: float = 1e-8,
) -> float:
    """Compare analytic gradients with central differences.

    Args:
        closure: recomputes the scalar loss from the current parameter values;
            must be deterministic (reset any rng inside it).
        parameters: (parameter array, analytic gradient) pairs. Parameters are
            perturbed in place and restored.
        step: finite-difference step h.
        skip: optional predicate (param, index) -> True to leave an entry out.
        floor: smallest denominator of the relative error; entries whose
            gradients are both below it are compared absolutely.

    Returns:
        Maximum relative error |a - fd| / max(|a|, |fd|, floor).
    """
    worst = 0.0
    for param, analytic in parameters:
        analytic = np.asarray(analytic, dtype=np.float64)
        for idx in np.ndindex(param.shape):
            if skip is not None and skip(param, idx):
                continue
            original = param[idx]
            param[idx] = original + step
            plus = closure()
            param[idx] = original - step
            minus = closure()
            param[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            err = relative_error(float(analytic[idx]), numeric, floor)
            if err > worst:
                worst = err
    logger.debug(f"grad_check max relative error {worst:.3e}")
    return worst
