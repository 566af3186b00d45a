"""Biological source terms of the four-pool model and their estimates.

The source vector f(t, x, C) conserves nitrogen pointwise: its four
components sum to zero in both layers. In the euphotic layer primary
production moves N to P, grazing moves P and D to Z with egestion to D,
and mortality/excretion/remineralization close the loop back to N and
D. Below the euphotic depth everything decays to N at the recycling
rate tau.

All response functions are extended to negative arguments (absolute
values in the denominators, matching N/(k_n + |N|)) so that the growth
and Lipschitz estimates hold on all of R^4; on nonnegative states the
extensions agree with the standard forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GrazingVariant, ModelParams, MortalityVariant
from .optics import OpticalParams, lipschitz_K_I


def limit_nutrient(n, k_n: float):
    """Nutrient limitation N/(k_n + |N|), in (-1, 1)."""
    n = np.asarray(n, dtype=float)
    return n / (k_n + np.abs(n))


def graze(p, d, params: ModelParams):
    """Grazing rates (G_P, G_D) on phytoplankton and detritus.

    All variants return values in [0, g_z]. The squared Michaelis-Menten
    and shared-denominator forms are even in (P, D); the switching form
    uses |P|, |D| in its linear denominator terms.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    g_z, k_z = params.g_z, params.k_z
    p2, d2 = p * p, d * d
    if params.grazing is GrazingVariant.SQUARED_MM:
        return g_z * p2 / (k_z + p2), g_z * d2 / (k_z + d2)
    if params.grazing is GrazingVariant.SHARED_MM:
        denom = k_z + p2 + d2
        return g_z * p2 / denom, g_z * d2 / denom
    r = params.switch_r
    denom = k_z * (r * np.abs(p) + (1.0 - r) * np.abs(d)) + r * p2 + (1.0 - r) * d2
    safe = np.where(denom > 0.0, denom, 1.0)  # denom = 0 only at P = D = 0, where G = 0
    g_p = np.where(denom > 0.0, g_z * r * p2 / safe, 0.0)
    g_d = np.where(denom > 0.0, g_z * (1.0 - r) * d2 / safe, 0.0)
    return g_p, g_d


def zoo_mortality(z, params: ModelParams):
    """Zooplankton mortality flux (mmol N m^-3 d^-1), removed from Z and added to D.

    Linear: m_z * Z. Saturating: by default the rate m_z*Z/(k+Z) applied
    to Z, i.e. m_z*Z^2/(k+Z); with ``mortality_literal`` the expression
    m_z*Z/(k+Z) is the flux itself. Both keep the sign of Z and vanish
    at Z = 0.
    """
    z = np.asarray(z, dtype=float)
    if params.mortality is MortalityVariant.LINEAR:
        return params.m_z * z
    k = params.mortality_k
    if params.mortality_literal:
        return params.m_z * z / (k + np.abs(z))
    return params.m_z * z * np.abs(z) / (k + np.abs(z))


def eval_reaction(c, l_i, euphotic, params: ModelParams, lam: float = 0.0):
    """Source terms for a batch of states.

    c is a (4, m) (or (4,)) array in N, P, Z, D order, l_i the light
    limitation factor per column entry and euphotic the layer mask.
    Returns f + lam*c, the source of the shifted formulation; lam = 0
    gives the plain source. Components of f sum to zero.
    """
    c = np.asarray(c, dtype=float)
    n, p, z, d = c[0], c[1], c[2], c[3]
    l_i = np.asarray(l_i, dtype=float)
    eu = np.asarray(euphotic, dtype=bool)

    g_p, g_d = graze(p, d, params)
    production = params.mu_p * (1.0 - params.gamma) * l_i * limit_nutrient(n, params.k_n) * p
    mort = zoo_mortality(z, params)

    f_eu = np.stack([
        -production + params.mu_z * z + params.mu_d * d,
        production - g_p * z - params.m_p * p,
        (params.a_p * g_p + params.a_d * g_d - params.mu_z) * z - mort,
        ((1.0 - params.a_p) * g_p - params.a_d * g_d) * z + params.m_p * p + mort
        - params.mu_d * d,
    ])
    f_ap = np.stack([
        params.tau * (p + z + d),
        -params.tau * p,
        -params.tau * z,
        -params.tau * d,
    ])
    f = np.where(eu, f_eu, f_ap)
    if lam != 0.0:
        f = f + lam * c
    return f


def truncate(g, n):
    """Bounded surrogate g/(1 + |g|/n), elementwise; n = None is the identity.

    Odd and monotone in g with |result| < n; the perturbation |g - result|
    equals g^2/(n + |g|), so it vanishes as n grows.
    """
    g = np.asarray(g, dtype=float)
    if n is None:
        return g
    if not n > 0.0:
        raise ValueError(f"truncation level must be positive, got {n}")
    return g / (1.0 + np.abs(g) / n)


@dataclass
class BoundConstants:
    """Componentwise growth envelope |f_i| <= sum_j matrix[i, j] * |C_j|.

    m_f is the max row sum of the matrix and m_g = m_f + lam bounds the
    shifted source: ||f + lam*C|| <= m_g * ||C|| in any norm dominated
    by componentwise absolute values.
    """

    matrix: np.ndarray      # (4, 4), rows/cols in N, P, Z, D order
    row_sums: np.ndarray    # (4,)
    m_f: float
    lam: float
    m_g: float


def _mortality_coefficient(params: ModelParams) -> float:
    """Tightest linear-in-|Z| bound on the mortality flux."""
    if params.mortality is MortalityVariant.SATURATING and params.mortality_literal:
        return params.m_z / params.mortality_k
    return params.m_z


def bound_constants(params: ModelParams, lam: float = 0.0) -> BoundConstants:
    """Growth envelope of the source terms, valid on all of R^4.

    Grazing contributions are capped by g_z for every variant; the
    nutrient row has no |N| dependence because nutrient limitation is
    bounded by 1.
    """
    if lam < 0.0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    prod = params.mu_p * (1.0 - params.gamma)
    mz = _mortality_coefficient(params)
    g_z, tau = params.g_z, params.tau
    matrix = np.array([
        [0.0, prod + tau, params.mu_z + tau, params.mu_d + tau],
        [0.0, prod + params.m_p + tau, g_z, 0.0],
        [0.0, 0.0, (params.a_p + params.a_d) * g_z + mz + params.mu_z + tau, 0.0],
        [0.0, params.m_p, (1.0 - params.a_p + params.a_d) * g_z + mz,
         params.mu_d + tau],
    ])
    row_sums = matrix.sum(axis=1)
    m_f = float(row_sums.max())
    return BoundConstants(matrix=matrix, row_sums=row_sums, m_f=m_f,
                          lam=lam, m_g=m_f + lam)


def grazing_lipschitz(params: ModelParams) -> tuple[float, float, float, float]:
    """Derivative bounds (dGp/dP, dGp/dD, dGd/dP, dGd/dD) for the active variant.

    Conservative closed forms: the squared Michaelis-Menten response has
    sup |d/dx (g_z x^2/(k+x^2))| = g_z * 3*sqrt(3)/(8*sqrt(k)), cross
    terms are bounded through 2|x|/(k + x^2) <= 1/sqrt(k), and the
    switching form through term-by-term denominator minorants.
    """
    g_z, k_z = params.g_z, params.k_z
    own = g_z * 3.0 * np.sqrt(3.0) / (8.0 * np.sqrt(k_z))
    if params.grazing is GrazingVariant.SQUARED_MM:
        return own, 0.0, 0.0, own
    if params.grazing is GrazingVariant.SHARED_MM:
        cross = g_z / np.sqrt(k_z)
        return own, cross, cross, own
    r = params.switch_r
    own_sw = 5.0 * g_z / k_z
    return (own_sw, g_z * ((1.0 - r) / r + 2.0) / k_z,
            g_z * (r / (1.0 - r) + 2.0) / k_z, own_sw)


def mortality_lipschitz(params: ModelParams) -> float:
    """Derivative bound of the mortality flux in Z."""
    if params.mortality is MortalityVariant.SATURATING and params.mortality_literal:
        return params.m_z / params.mortality_k
    return params.m_z


def lipschitz_bound(c, c_hat, params: ModelParams, optics: OpticalParams,
                    q_sup: float, col_length: float, lam: float = 0.0):
    """State-dependent Lipschitz constants (K_N, K_P, K_Z, K_D).

    For any depth, any layer and any surface irradiance bounded by
    q_sup, |g_i(C) - g_i(C_hat)| <= K_i * sum_j |C_j - C_hat_j| where g
    is the shifted source f + lam*C. K_N depends on the pair only
    through max(P, P_hat); the grazing terms make K_P, K_Z and K_D scale
    with max(Z, Z_hat) as well. Vectorized over (4, m) state pairs.
    """
    c = np.asarray(c, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    pm = np.maximum(np.abs(c[1]), np.abs(c_hat[1]))
    zm = np.maximum(np.abs(c[2]), np.abs(c_hat[2]))
    k_i = lipschitz_K_I(c[1], c_hat[1], params, optics, q_sup, col_length)

    prod = params.mu_p * (1.0 - params.gamma)
    lip_pp, lip_pd, lip_dp, lip_dd = grazing_lipschitz(params)
    lip_mz = mortality_lipschitz(params)
    a_p, a_d, g_z, tau = params.a_p, params.a_d, params.g_z, params.tau
    prod_n = prod * pm / params.k_n           # production sensitivity to N

    def biggest(*terms):
        out = np.asarray(terms[0], dtype=float)
        for term in terms[1:]:
            out = np.maximum(out, term)
        return out

    k_n_ = biggest(lam + prod_n,
                   tau + prod * k_i,
                   params.mu_z + tau,
                   params.mu_d + tau)
    k_p = biggest(prod_n,
                  prod * k_i + lip_pp * zm + params.m_p + tau + lam,
                  g_z,
                  lip_pd * zm)
    k_z_ = biggest((a_p * lip_pp + a_d * lip_dp) * zm,
                   (a_p + a_d) * g_z + lip_mz + params.mu_z + tau + lam,
                   (a_p * lip_pd + a_d * lip_dd) * zm)
    k_d = biggest(((1.0 - a_p) * lip_pp + a_d * lip_dp) * zm + params.m_p,
                  (1.0 - a_p + a_d) * g_z + lip_mz,
                  ((1.0 - a_p) * lip_pd + a_d * lip_dd) * zm + params.mu_d + tau + lam)
    return k_n_, k_p, k_z_, k_d
