"""
Expectation-maximization-entropy (EME) reconstruction

Update applied to every component n:

    P_n <- sum_m C_m D_mn P_n / (sum_j D_mj P_j) - alpha (ln P_n - S),
    S = sum_n P_n ln P_n

followed by clamping negatives to zero and renormalizing. Iteration starts
from the uniform distribution and stops when the Euclidean norm of the step
falls below epsilon.
"""

import logging
import time
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from spadrecon.core.distributions import NumberDistribution
from spadrecon.detmat.composition import DetectorMatrix
from spadrecon.eme.metrics import fit_poissonian, g2_reconstructed, delta_nbar
from spadrecon.eme.schemas import EmeConfig, ReconstructionResult
from spadrecon.errors import (
    AllZeroError,
    DimensionMismatchError,
    NotConvergedError,
    SingularDenominatorError,
    ZeroMeanError,
)
from spadrecon.utils.run_tracker import track_stage

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-300

MatrixLike = Union[DetectorMatrix, np.ndarray]


@dataclass
class EmeStep:
    """One EME iterate"""
    iteration: int
    probs: np.ndarray
    step_norm: float
    singular_rows: np.ndarray


def _as_arrays(C, D):
    clicks = C.probs if isinstance(C, NumberDistribution) else np.asarray(C, dtype=float)
    matrix = D.matrix if isinstance(D, DetectorMatrix) else np.asarray(D, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != clicks.size:
        raise DimensionMismatchError(f"Click vector of length {clicks.size} does not match matrix {matrix.shape}")
    return clicks, matrix


def log_likelihood(C, D, P) -> float:
    """sum_m C_m ln (D P)_m over observed click numbers"""
    clicks, matrix = _as_arrays(C, D)
    predicted = matrix @ np.asarray(P, dtype=float)
    observed = clicks > 0
    return float(np.dot(clicks[observed], np.log(np.maximum(predicted[observed], LOG_FLOOR))))


def iterate_eme(C, D, alpha: float = 1e-3) -> Iterator[EmeStep]:
    """
    Yield successive EME iterates, without end

    Args:
        C: Measured click distribution
        D: Detector matrix (click number x photon number)
        alpha: Entropy regularization strength
    """
    clicks, matrix = _as_arrays(C, D)
    size = matrix.shape[1]
    probs = np.full(size, 1.0 / size)
    iteration = 0
    while True:
        predicted = matrix @ probs
        valid = predicted > 0
        ratio = np.zeros_like(predicted)
        ratio[valid] = clicks[valid] / predicted[valid]
        singular = np.flatnonzero(~valid & (clicks > 0))

        logs = np.log(np.maximum(probs, LOG_FLOOR))
        entropy = float(np.sum(np.where(probs > 0, probs * logs, 0.0)))
        updated = probs * (matrix.T @ ratio) - alpha * (logs - entropy)
        updated = np.clip(updated, 0.0, None)
        total = updated.sum()
        if not total > 0:
            raise AllZeroError(f"EME iterate vanished at iteration {iteration + 1}")
        updated /= total

        iteration += 1
        step_norm = float(np.linalg.norm(updated - probs))
        probs = updated
        yield EmeStep(iteration=iteration, probs=probs, step_norm=step_norm, singular_rows=singular)


def eme_reconstruct(
    C,
    D: MatrixLike,
    cfg: Optional[EmeConfig] = None,
    nbar_exp: Optional[float] = None,
    fit_method: str = "least_squares",
) -> ReconstructionResult:
    """
    Reconstruct the photon-number distribution behind a click distribution

    Args:
        C: Click distribution (NumberDistribution or vector)
        D: Detector matrix
        cfg: Solver settings (defaults: alpha 1e-3, epsilon 1e-12, max_iter 1e6)
        nbar_exp: Calibrated mean photon number, enables delta_nbar
        fit_method: Poisson fit objective, "least_squares" or "likelihood"

    Returns:
        ReconstructionResult; non-convergence and singular rows are flagged

    Raises:
        DimensionMismatchError: If C and D do not match
        NotConvergedError: If cfg.raise_on_failure and max_iter is reached
        SingularDenominatorError: If cfg.raise_on_failure and a prediction vanished
    """
    cfg = cfg or EmeConfig()
    started = time.perf_counter()

    singular_rows = set()
    last: Optional[EmeStep] = None
    for step in iterate_eme(C, D, cfg.alpha):
        last = step
        singular_rows.update(int(m) for m in step.singular_rows)
        if step.step_norm < cfg.epsilon or step.iteration >= cfg.max_iter:
            break

    converged = last.step_norm < cfg.epsilon
    elapsed = time.perf_counter() - started
    track_stage("eme", f"alpha={cfg.alpha:g}", elapsed, iterations=last.iteration, converged=converged)

    if singular_rows:
        message = f"[EME] Zero predicted probability for observed click numbers {sorted(singular_rows)}"
        if cfg.raise_on_failure:
            raise SingularDenominatorError(message)
        logger.warning(message)
    if not converged:
        message = f"[EME] Not converged after {last.iteration} iterations (step {last.step_norm:.3g})"
        if cfg.raise_on_failure:
            raise NotConvergedError(message)
        logger.warning(message)
    else:
        logger.debug(f"[EME] Converged after {last.iteration} iterations in {elapsed:.2f}s")

    distribution = NumberDistribution(last.probs)
    nbar_fit, tvd = fit_poissonian(distribution, method=fit_method)
    try:
        g2 = g2_reconstructed(distribution)
    except ZeroMeanError:
        g2 = None

    return ReconstructionResult(
        distribution=last.probs.tolist(),
        iterations=last.iteration,
        converged=converged,
        g2_recon=g2,
        fitted_nbar=nbar_fit,
        tvd_to_fit=tvd,
        nbar_exp=nbar_exp,
        delta_nbar=delta_nbar(nbar_exp, nbar_fit) if nbar_exp is not None else None,
        singular_rows=sorted(singular_rows),
        log_likelihood=log_likelihood(C, D, last.probs),
        alpha=cfg.alpha,
    )
