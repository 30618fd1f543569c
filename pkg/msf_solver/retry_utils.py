"""
Time-step rejection policy.

A step whose nonlinear solve fails is retried with the time step halved,
up to a fixed number of halvings, before the run is aborted.
"""

import logging

from .exceptions import AbortError

DEFAULT_MAX_HALVINGS = 10


def calculate_retry_tau(attempt: int, base_tau: float) -> float:
    """
    Time step for a retry.

    Args:
        attempt: Number of failed attempts so far (0 for the first try)
        base_tau: Nominal time step of the step

    Returns:
        base_tau / 2**attempt
    """
    return base_tau / (2 ** attempt)


def handle_step_retry(
    attempt: int,
    t: float,
    tau: float,
    max_halvings: int,
    logger: logging.Logger,
    cause: Exception,
) -> None:
    """
    Log a rejected step and decide whether another halving is allowed.

    Args:
        attempt: Failed attempts so far, including this one (1-indexed)
        t: Start time of the step
        tau: Time step that just failed
        max_halvings: Halving budget for one step
        logger: Logger instance for output
        cause: The failure that triggered the retry

    Raises:
        AbortError: If the halving budget is exhausted
    """
    if attempt > max_halvings:
        logger.error(f"Step at t={t:.6g} failed after {max_halvings} halvings: {cause}")
        raise AbortError(
            f"Step at t={t:.6g} did not converge with tau down to {tau:.3e}",
            t=t,
            reason=str(cause),
        ) from cause
    logger.info(f"Step at t={t:.6g} rejected ({cause}); retrying with tau={tau / 2:.3e} (halving {attempt})")
