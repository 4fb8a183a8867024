"""Two-term interface dielectric-loss model and its linear fits.

The inverse quality factor decomposes into participation-weighted loss
tangents, ``1/Q = sum_i P_i tan(delta_i)``.  With the capacitor's
substrate-metal participation ``p_sm`` and the lumped junction-region
participation ``p_j`` this yields two fit variants on the observable 1/Q:

* ``SM_PLUS_Q0``:  1/Q = p_sm * tan_d_sm + 1/Q0   (geometry-independent rest)
* ``SM_PLUS_J``:   1/Q = p_sm * tan_d_sm + p_j * tan_d_j

Both are linear least squares with optional inverse-variance weighting,
``var(1/Q) = q_std^2 / q_mean^4``; loss tangents are constrained
non-negative by a clamped active set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateFitError, InvalidInputError

#: Condition number of the weighted design above which a fit is refused.
CONDITION_LIMIT = 1e10


class LossModel(str, Enum):
    SM_ONLY = "sm"
    SM_PLUS_Q0 = "sm+q0"
    SM_PLUS_J = "sm+j"


class Weighting(str, Enum):
    NONE = "none"
    INVERSE_VARIANCE = "invvar"


@dataclass
class LossDataPoint:
    """One fit point: participations and the Purcell-subtracted quality factor."""

    p_sm: float
    p_j: float
    q_mean: float
    q_std: float | None = None
    group_id: str = ""
    n_devices: int = 1

    def __post_init__(self) -> None:
        if self.p_sm < 0 or self.p_j < 0:
            raise InvalidInputError("participation ratios must be >= 0")
        if self.q_mean <= 0:
            raise InvalidInputError("q_mean must be > 0")
        if self.q_std is not None and self.q_std < 0:
            raise InvalidInputError("q_std must be >= 0 when present")


@dataclass
class LossFitResult:
    """Fitted loss tangents (and/or Q0) with uncertainties and residuals."""

    model: LossModel
    tan_d_sm: float
    tan_d_j: float | None = None
    q0: float | None = None
    stderr: dict[str, float] = field(default_factory=dict)
    covariance: np.ndarray | None = None
    residuals: np.ndarray | None = None   # per point, in 1/Q
    predicted_inv_q: np.ndarray | None = None
    weighting: Weighting = Weighting.NONE
    n_points: int = 0
    condition_number: float = 0.0

    def relative_stderr(self, name: str) -> float:
        value = {"tan_d_sm": self.tan_d_sm, "tan_d_j": self.tan_d_j,
                 "inv_q0": None if self.q0 is None else 1.0 / self.q0}[name]
        if value in (None, 0.0):
            return math.inf
        return self.stderr[name] / abs(value)

    def to_json_dict(self) -> dict:
        params: dict[str, float | None] = {"tan_d_sm": self.tan_d_sm}
        if self.model is LossModel.SM_PLUS_J:
            params["tan_d_j"] = self.tan_d_j
        if self.model is LossModel.SM_PLUS_Q0:
            params["q0"] = self.q0
        return {
            "model": self.model.value,
            "parameters": params,
            "stderr": dict(self.stderr),
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "residuals_inv_q": None if self.residuals is None else self.residuals.tolist(),
            "weighting": self.weighting.value,
            "n_points": self.n_points,
            "condition_number": self.condition_number,
        }


def predict_inverse_q(
    p_sm: float, p_j: float, tan_d_sm: float, tan_d_j: float = 0.0
) -> float:
    """Modeled 1/Q for one device, ``p_sm*tan_d_sm + p_j*tan_d_j``."""
    if min(p_sm, p_j, tan_d_sm, tan_d_j) < 0:
        raise InvalidInputError("participations and loss tangents must be >= 0")
    return p_sm * tan_d_sm + p_j * tan_d_j


def normalized_pr(p_sm: float, p_j: float, tan_d_sm: float, tan_d_j: float) -> float:
    """Single abscissa collapsing the two-term model onto one line.

    ``p_sm + (tan_d_j / tan_d_sm) * p_j``; the modeled 1/Q is then
    ``tan_d_sm`` times this value.
    """
    if tan_d_sm <= 0:
        raise InvalidInputError("tan_d_sm must be > 0 to normalize")
    return p_sm + (tan_d_j / tan_d_sm) * p_j


def _weights(points: Sequence[LossDataPoint], weighting: Weighting) -> np.ndarray:
    if weighting is Weighting.NONE:
        return np.ones(len(points))
    w = np.empty(len(points))
    for i, p in enumerate(points):
        if p.q_std:
            w[i] = p.q_mean**4 / p.q_std**2   # 1 / var(1/Q)
        else:
            w[i] = 1.0  # no spread published: unit weight
    return w


def _clamped_weighted_lstsq(X: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted least squares with parameters clamped to be non-negative.

    Returns (beta, covariance, residuals).  A parameter whose unconstrained
    optimum is negative is fixed at zero and the rest refit; clamped
    parameters report zero variance.  The covariance of the free parameters
    is ``(X'WX)^-1`` scaled by the reduced chi-square (set to NaN when the
    system is exactly determined).
    """
    n, k = X.shape
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    yw = y * sw

    cond = np.linalg.cond(Xw)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateFitError(
            f"design matrix is rank deficient or nearly collinear "
            f"(condition number {cond:.3e})"
        )

    free = list(range(k))
    beta = np.zeros(k)
    while free:
        sol, *_ = np.linalg.lstsq(Xw[:, free], yw, rcond=None)
        if np.all(sol >= 0):
            for idx, val in zip(free, sol):
                beta[idx] = val
            break
        worst = free[int(np.argmin(sol))]
        free.remove(worst)

    residuals = y - X @ beta
    dof = n - len(free)
    cov = np.zeros((k, k))
    if free:
        gram_inv = np.linalg.inv(Xw[:, free].T @ Xw[:, free])
        chi2 = float(np.sum(w * residuals**2))
        scale = chi2 / dof if dof > 0 else np.nan
        sub = gram_inv * scale
        for a, ia in enumerate(free):
            for b, ib in enumerate(free):
                cov[ia, ib] = sub[a, b]
    return beta, cov, residuals, cond


def _prepare(points: Sequence[LossDataPoint], n_params: int,
             require_psm_range: bool = False):
    if len(points) < n_params:
        raise InvalidInputError(
            f"need at least {n_params} points for a {n_params}-parameter fit"
        )
    p_sm = np.array([p.p_sm for p in points])
    p_j = np.array([p.p_j for p in points])
    y = np.array([1.0 / p.q_mean for p in points])
    if require_psm_range and np.ptp(p_sm) == 0:
        raise DegenerateFitError("all points share the same p_sm; nothing to fit")
    return p_sm, p_j, y


def fit_sm_plus_q0(
    points: Sequence[LossDataPoint],
    weighting: Weighting | str = Weighting.INVERSE_VARIANCE,
) -> LossFitResult:
    """Fit ``1/Q = p_sm * tan_d_sm + 1/Q0`` by (weighted) linear least squares."""
    weighting = Weighting(weighting)
    p_sm, _, y = _prepare(points, 2, require_psm_range=True)
    X = np.column_stack([p_sm, np.ones_like(p_sm)])
    w = _weights(points, weighting)
    beta, cov, res, cond = _clamped_weighted_lstsq(X, y, w)
    tan_d_sm, inv_q0 = beta
    stderr = {
        "tan_d_sm": float(np.sqrt(cov[0, 0])),
        "inv_q0": float(np.sqrt(cov[1, 1])),
    }
    return LossFitResult(
        model=LossModel.SM_PLUS_Q0,
        tan_d_sm=float(tan_d_sm),
        q0=float(1.0 / inv_q0) if inv_q0 > 0 else math.inf,
        stderr=stderr,
        covariance=cov,
        residuals=res,
        predicted_inv_q=X @ beta,
        weighting=weighting,
        n_points=len(points),
        condition_number=float(cond),
    )


def fit_sm_plus_j(
    points: Sequence[LossDataPoint],
    weighting: Weighting | str = Weighting.INVERSE_VARIANCE,
) -> LossFitResult:
    """Fit ``1/Q = p_sm * tan_d_sm + p_j * tan_d_j``."""
    weighting = Weighting(weighting)
    p_sm, p_j, y = _prepare(points, 2)
    X = np.column_stack([p_sm, p_j])
    w = _weights(points, weighting)
    beta, cov, res, cond = _clamped_weighted_lstsq(X, y, w)
    stderr = {
        "tan_d_sm": float(np.sqrt(cov[0, 0])),
        "tan_d_j": float(np.sqrt(cov[1, 1])),
    }
    return LossFitResult(
        model=LossModel.SM_PLUS_J,
        tan_d_sm=float(beta[0]),
        tan_d_j=float(beta[1]),
        stderr=stderr,
        covariance=cov,
        residuals=res,
        predicted_inv_q=X @ beta,
        weighting=weighting,
        n_points=len(points),
        condition_number=float(cond),
    )


def fit_sm_only(
    points: Sequence[LossDataPoint],
    weighting: Weighting | str = Weighting.INVERSE_VARIANCE,
) -> LossFitResult:
    """Single-term fit ``1/Q = p_sm * tan_d_sm`` (the naive capacitor-only model)."""
    weighting = Weighting(weighting)
    p_sm, _, y = _prepare(points, 1)
    X = p_sm[:, None]
    w = _weights(points, weighting)
    beta, cov, res, cond = _clamped_weighted_lstsq(X, y, w)
    return LossFitResult(
        model=LossModel.SM_ONLY,
        tan_d_sm=float(beta[0]),
        stderr={"tan_d_sm": float(np.sqrt(cov[0, 0]))},
        covariance=cov,
        residuals=res,
        predicted_inv_q=X @ beta,
        weighting=weighting,
        n_points=len(points),
        condition_number=float(cond),
    )


FITTERS = {
    LossModel.SM_ONLY: fit_sm_only,
    LossModel.SM_PLUS_Q0: fit_sm_plus_q0,
    LossModel.SM_PLUS_J: fit_sm_plus_j,
}


def model_inverse_q(result: LossFitResult, p_sm: float, p_j: float) -> float:
    """Evaluate a fitted model's 1/Q prediction for one device."""
    if result.model is LossModel.SM_PLUS_Q0:
        return predict_inverse_q(p_sm, 0.0, result.tan_d_sm) + (
            0.0 if math.isinf(result.q0) else 1.0 / result.q0
        )
    if result.model is LossModel.SM_PLUS_J:
        return predict_inverse_q(p_sm, p_j, result.tan_d_sm, result.tan_d_j)
    return predict_inverse_q(p_sm, 0.0, result.tan_d_sm)
