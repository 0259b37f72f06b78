"""Budget allocation: subsample ratio, outer size B and inner size R.

The optimal configurations are only known up to order (R of order theta*n,
theta of order N^(1/3)/n below N = n^(3/2)); the hidden constants are the
explicit ``inner_multiplier`` and ``target_subsample`` knobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .errors import BudgetTooSmallError, InvalidParameterError


@dataclass(frozen=True)
class AllocationPlan:
    B: int
    R: int
    theta: float
    N_target: int
    n_bar: float
    rule_used: str = "manual"
    s: Optional[tuple] = None
    warnings: tuple = field(default=(), compare=False)

    @property
    def budget_used(self) -> int:
        return self.B * self.R

    @property
    def leftover(self) -> int:
        return self.N_target - self.B * self.R


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def practical_ratio(sizes: Sequence[int], target_subsample: int = 30) -> float:
    """Ratio that brings the smallest dataset's subsample to about ``target_subsample``."""
    if target_subsample < 2:
        raise InvalidParameterError(f"target subsample must be >= 2, got {target_subsample}")
    if not sizes or min(sizes) < 1:
        raise InvalidParameterError("data sizes must be >= 1")
    return min(1.0, target_subsample / min(sizes))


def theoretical_ratio(N: int, n_bar: float) -> float:
    """``min(N^(1/3), n_bar^(1/2)) / n_bar`` clamped to (0, 1]."""
    if N < 1 or n_bar < 1:
        raise InvalidParameterError(f"need N >= 1 and n_bar >= 1, got N={N}, n_bar={n_bar}")
    return min(1.0, min(N ** (1.0 / 3.0), math.sqrt(n_bar)) / n_bar)


def allocate(N: int, theta: float, n_bar: float, inner_multiplier: float = 1.0, rule: str = "manual") -> AllocationPlan:
    """R = clamp(round(inner_multiplier * theta * n_bar), 2, N // 2), B = N // R.

    Any remainder ``N - B*R`` is left unspent.
    """
    if N < 4:
        raise BudgetTooSmallError(f"need N >= 4 for B, R >= 2, got {N}")
    if not 0.0 < theta <= 1.0:
        raise InvalidParameterError(f"subsample ratio must lie in (0, 1], got {theta!r}")
    if inner_multiplier <= 0:
        raise InvalidParameterError("inner_multiplier must be positive")
    if theta * n_bar < 1 - 1e-9:
        raise InvalidParameterError(f"theta * n_bar = {theta * n_bar:g} < 1: empty subsamples")
    R = min(max(_round_half_up(inner_multiplier * theta * n_bar), 2), N // 2)
    B = N // R
    if B < 2:
        raise BudgetTooSmallError(f"N={N} leaves B={B} outer resamples at R={R}")
    return AllocationPlan(B=B, R=R, theta=theta, N_target=N, n_bar=n_bar, rule_used=rule,
                          warnings=tuple(validate_consistency_regime(B, R, theta, n_bar)))


def plan_budget(N: int, sizes: Sequence[int], rule: str = "practical", target_subsample: int = 30,
                inner_multiplier: float = 1.0, theta: Optional[float] = None) -> AllocationPlan:
    """Pick theta by ``rule`` (practical, theoretical or fixed) and allocate N."""
    n_bar = sum(sizes) / len(sizes)
    if rule == "practical":
        theta = practical_ratio(sizes, target_subsample)
    elif rule == "theoretical":
        theta = theoretical_ratio(N, n_bar)
    elif rule == "fixed":
        if theta is None:
            raise InvalidParameterError("fixed rule needs an explicit theta")
    else:
        raise InvalidParameterError(f"unknown theta rule {rule!r}")
    plan = allocate(N, theta, n_bar, inner_multiplier, rule)
    s = tuple(math.floor(theta * n) for n in sizes)
    return replace(plan, s=s)


def theoretical_inner_size(theta: float, tau2_pilot: float, input_var_pilot: float) -> float:
    """MSE-optimal inner size ``theta * tau^2 / sum_i sigma_i^2/n_i`` from pilot estimates.

    The pilot estimates' own error is not accounted for.
    """
    if not tau2_pilot > 0 or not input_var_pilot > 0:
        raise InvalidParameterError("pilot variance estimates must be positive")
    return theta * tau2_pilot / input_var_pilot


def validate_consistency_regime(B: int, R: int, theta: float, n_bar: float) -> list[str]:
    """Finite-sample heuristics for the relative-consistency conditions; never raises."""
    warnings = []
    sub = theta * n_bar
    if sub < 5:
        warnings.append(f"subsample too small: theta*n_bar = {sub:g} < 5")
    if B < 10:
        warnings.append(f"outer size small: B = {B} < 10")
    if B * R * R < sub * sub:
        warnings.append(f"inner budget below consistency scaling: B*R^2 = {B * R * R} < (theta*n_bar)^2 = {sub * sub:g}")
    return warnings
