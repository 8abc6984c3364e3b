"""Client utilities, behaviour indicators and best responses.

A client posted a unit reward ``r`` chooses between opting out, training on
its own data, or first buying generated samples to rebalance its dataset.
The three reward thresholds ``zeta1`` (break-even with local data),
``zeta2`` (break-even with AIGC data) and ``zeta3`` (local and AIGC data
equally profitable) determine the choice in closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ClassDistribution, ClientAttributes, QualityModel, synthesis_plan
from .errors import MechanismError, PreconditionError

# utilities closer than this (relative to the client's gross scale) count as equal
TIE_RTOL = 1e-12


class ClientStrategy(enum.Enum):
    OPT_OUT = (0, 0)
    LOCAL = (1, 0)
    AIGC = (1, 1)

    @property
    def participates(self) -> bool:
        return self is not ClientStrategy.OPT_OUT


class ClientType(enum.Enum):
    TYPE1 = 1
    TYPE2 = 2


@dataclass(frozen=True)
class Indicators:
    zeta1: float
    zeta2: float
    zeta3: float
    client_type: ClientType


def generated_fraction(client: ClientAttributes, q: QualityModel,
                       global_dist: Optional[ClassDistribution] = None) -> float:
    """Share of the dataset a client must generate to reach the global label mix.

    Without an explicit label distribution the share follows from the
    quality bound itself: half the EMD, with EMD = lambda_k / g_data.
    """
    if client.class_dist is None:
        return client.quality / (2.0 * q.g_data)
    ref = global_dist or ClassDistribution.uniform(client.class_dist.num_classes)
    return synthesis_plan(client.class_dist, ref).generated_fraction


def _aigc_charge(client, q, global_dist=None) -> float:
    # per-sample AIGC bill; equals delta * lambda_k on the default path
    if client.class_dist is None:
        return q.delta * client.quality
    return generated_fraction(client, q, global_dist) * q.s_ai


def indicators(client: ClientAttributes, q: QualityModel,
               global_dist: Optional[ClassDistribution] = None) -> Indicators:
    lam, lam_k, s_k, theta = q.lambda_max, client.quality, client.unit_cost, q.theta
    denom2 = lam - theta * lam_k
    if denom2 <= 0:
        raise MechanismError(f"lambda - theta*lambda_k = {denom2} must be positive")
    charge = _aigc_charge(client, q, global_dist)
    zeta1 = math.inf if lam_k >= lam else lam * s_k / (lam - lam_k)
    zeta2 = (lam * s_k + lam * charge) / denom2
    if client.class_dist is None:
        zeta3 = q.zeta3
    else:
        # the AIGC/local indifference point moves with the client's own bill
        zeta3 = lam * charge / ((1.0 - theta) * lam_k)
    kind = ClientType.TYPE1 if zeta1 <= zeta3 else ClientType.TYPE2
    return Indicators(zeta1, zeta2, zeta3, kind)


def utility(client: ClientAttributes, q: QualityModel, r: float,
            strategy: ClientStrategy,
            global_dist: Optional[ClassDistribution] = None) -> float:
    """Per-round utility of ``client`` playing ``strategy`` against reward ``r``."""
    if r < 0:
        raise PreconditionError(f"reward must be >= 0, got {r}")
    d, lam = client.datasize, q.lambda_max
    if strategy is ClientStrategy.OPT_OUT:
        return 0.0
    if strategy is ClientStrategy.LOCAL:
        return r * d * (1.0 - client.quality / lam) - d * client.unit_cost
    p_plus = generated_fraction(client, q, global_dist)
    return (r * d * (1.0 - q.theta * client.quality / lam)
            - d * client.unit_cost - d * p_plus * q.s_ai)


def best_response(client: ClientAttributes, q: QualityModel, r: float,
                  global_dist: Optional[ClassDistribution] = None) -> ClientStrategy:
    if r < 0:
        raise PreconditionError(f"reward must be >= 0, got {r}")
    ind = indicators(client, q, global_dist)
    if ind.client_type is ClientType.TYPE1:
        if r < ind.zeta1:
            return ClientStrategy.OPT_OUT
        if r < ind.zeta3:
            return ClientStrategy.LOCAL
        return ClientStrategy.AIGC
    if r < ind.zeta2:
        return ClientStrategy.OPT_OUT
    return ClientStrategy.AIGC


def brute_force_best_response(client: ClientAttributes, q: QualityModel, r: float,
                              global_dist: Optional[ClassDistribution] = None
                              ) -> ClientStrategy:
    """Evaluate all three utilities and take the argmax.

    Ties go to AIGC over local data and to participation over opting out,
    with ``TIE_RTOL`` absorbing round-off at exact threshold rewards.
    """
    if r < 0:
        raise PreconditionError(f"reward must be >= 0, got {r}")
    u_local = utility(client, q, r, ClientStrategy.LOCAL, global_dist)
    u_aigc = utility(client, q, r, ClientStrategy.AIGC, global_dist)
    scale = client.datasize * (r + client.unit_cost + q.s_ai) * TIE_RTOL
    best, best_u = ClientStrategy.AIGC, u_aigc
    if u_local > best_u + scale:
        best, best_u = ClientStrategy.LOCAL, u_local
    if 0.0 > best_u + scale:
        best = ClientStrategy.OPT_OUT
    return best


# Strategy codes used by the vectorised path
OPT_OUT, LOCAL, AIGC = 0, 1, 2


def best_response_codes(unit_cost, quality, q: QualityModel, r: float) -> np.ndarray:
    """Vectorised :func:`best_response` for clients without label distributions.

    Returns an integer array with values ``OPT_OUT``, ``LOCAL`` or ``AIGC``.
    """
    s = np.asarray(unit_cost, dtype=float)
    lam_k = np.asarray(quality, dtype=float)
    lam, theta, z3 = q.lambda_max, q.theta, q.zeta3
    with np.errstate(divide="ignore"):
        z1 = np.where(lam_k >= lam, np.inf, lam * s / np.where(lam_k >= lam, 1.0, lam - lam_k))
    z2 = (lam * s + lam * q.delta * lam_k) / (lam - theta * lam_k)
    type1 = z1 <= z3
    out = np.full(s.shape, OPT_OUT, dtype=np.int8)
    out[type1 & (r >= z1) & (r < z3)] = LOCAL
    out[type1 & (r >= z3)] = AIGC
    out[~type1 & (r >= z2)] = AIGC
    return out
