"""
flexsim Expansion

Exact (alpha, beta)-expander verification and the expansion parameter
formulas used to size expander architectures.
"""

import math
from dataclasses import dataclass, asdict
from typing import Dict, Optional

from ..errors import DomainError, VerificationTooLargeError
from .graph import BipartiteGraph


MAX_EXACT_QUEUES = 24


@dataclass(frozen=True)
class ExpanderParams:
    """
    Expansion parameters of an architecture.

    alpha = gamma / beta_n; `beta` is the expansion factor used in the
    (alpha, beta) query, equal to beta_n for the formula-derived families.
    `u_cap` is the largest fluctuation parameter the parameterisation covers.
    """
    alpha: float
    beta: float
    gamma: float
    beta_n: float
    rho_hat: float
    u_cap: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


# ========== VERIFICATION ==========

def verify_expander(
    g: BipartiteGraph,
    alpha: float,
    beta: float,
    max_subset_size: Optional[int] = None,
) -> bool:
    """
    True iff every nonempty S of queues with |S| <= alpha*n has |N(S)| >= beta*|S|.

    Exhaustive: refuses graphs with more than 24 queues unless the caller
    caps the subset size explicitly.
    """
    n = g.n_queues
    cap = math.floor(alpha * n + 1e-12)
    if max_subset_size is not None:
        cap = min(cap, max_subset_size)
    elif n > MAX_EXACT_QUEUES:
        raise VerificationTooLargeError(n, MAX_EXACT_QUEUES)
    if cap < 1:
        return True

    masks = g.neighbor_masks()

    # depth-first over subsets in increasing index order, carrying N(S)
    stack = [(0, 0, 0)]  # (next index, size, neighborhood mask)
    while stack:
        start, size, nbr = stack.pop()
        for i in range(start, n):
            union = nbr | masks[i]
            if union.bit_count() < beta * (size + 1) - 1e-12:
                return False
            if size + 1 < cap:
                stack.append((i + 1, size + 1, union))
    return True


# ========== PARAMETER FORMULAS ==========

def expander_degree_bound(alpha: float, beta: float) -> float:
    """Degree above which an (alpha, beta)-expander with that maximum degree exists."""
    if beta < 1:
        raise DomainError(f"beta must be >= 1, got {beta}")
    if alpha <= 0 or alpha * beta >= 1:
        raise DomainError(f"need 0 < alpha*beta < 1, got {alpha * beta}")
    numerator = 1 + math.log2(beta) + (beta + 1) * math.log2(math.e)
    return numerator / (-math.log2(alpha * beta)) + beta + 1


def _beta_n(rho: float, d: float) -> float:
    log_inv = math.log(1 / rho)
    return 0.5 * log_inv / (log_inv + 1) * d


def expansion_params(n: int, d: int, rho: float) -> ExpanderParams:
    """Expansion a random d-regular graph has w.h.p.: beta_n from ln(1/rho), gamma = sqrt(rho)."""
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    beta_n = _beta_n(rho, d)
    gamma = math.sqrt(rho)
    return ExpanderParams(
        alpha=gamma / beta_n,
        beta=beta_n,
        gamma=gamma,
        beta_n=beta_n,
        rho_hat=rho,
        u_cap=(1 - rho) * beta_n / 2,
    )


def theorem1_params(n: int, d: int, rho: float) -> ExpanderParams:
    """
    Expander architecture parameters.

    rho_hat = 1/(1 + (1-rho)/8), beta_n from ln(1/rho_hat), gamma =
    sqrt(rho_hat), alpha = gamma/beta_n, u cap (1-rho)*beta_n/2.
    """
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    rho_hat = 1 / (1 + (1 - rho) / 8)
    base = expansion_params(n, d, rho_hat)
    return ExpanderParams(
        alpha=base.alpha,
        beta=base.beta_n,
        gamma=base.gamma,
        beta_n=base.beta_n,
        rho_hat=rho_hat,
        u_cap=(1 - rho) * base.beta_n / 2,
    )


def expanded_modular_params(n: int, d_e: int, rho: float) -> ExpanderParams:
    """Cluster-level expander parameters; the u cap is (1+rho)/2 * beta_n."""
    base = expansion_params(n, d_e, rho)
    return ExpanderParams(
        alpha=base.alpha,
        beta=base.beta_n,
        gamma=base.gamma,
        beta_n=base.beta_n,
        rho_hat=rho,
        u_cap=(1 + rho) / 2 * base.beta_n,
    )


def erdos_renyi_expansion(n: int, d: float, gamma: float) -> ExpanderParams:
    """Expansion a random graph of average degree d has w.h.p.: beta_n = (1-gamma)/4 * d/ln n."""
    if n < 2:
        raise DomainError("n must be >= 2")
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must be in (0, 1), got {gamma}")
    beta_n = (1 - gamma) / 4 * d / math.log(n)
    return ExpanderParams(
        alpha=gamma / beta_n,
        beta=beta_n,
        gamma=gamma,
        beta_n=beta_n,
        rho_hat=gamma ** 2,
        u_cap=beta_n,
    )


def expansion_capacity_guarantee(params: ExpanderParams, rho: float, u: float) -> bool:
    """
    Sufficient condition for Lambda_n(u) inside R(g).

    Holds for a (gamma/beta_n, beta_n)-expander when gamma > rho and beta_n >= u.
    """
    return params.gamma > rho and params.beta_n >= u
