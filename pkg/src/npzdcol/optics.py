"""Photosynthetically available radiation and light limitation.

PAR carries the units of the surface irradiance Q; depths are m and
phytoplankton mmol N m^-3. The canonical attenuation splits surface
light into a green and a red band whose extinction coefficients depend
on the local pigment (chlorophyll-equivalent) concentration.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import LightVariant, ModelParams


class BandVariant(str, Enum):
    """Spectral resolution of the attenuation law."""

    TWO_BAND = "two_band"        # green + red bands, pigment-dependent exponents
    SINGLE_BAND = "single_band"  # exp(-(k1 + k2 * P) * x)


@dataclass
class OpticalParams:
    """Attenuation constants and light-response parameters.

    The pigment conversion turns P (mmol N m^-3) into a chlorophyll
    concentration via the carbon:nitrogen ratio r_d, the pigment:
    chlorophyll ratio r_pg and the carbon:chlorophyll ratio r_c.
    """

    r_d: float = 6.625      # C:N molar ratio of phytoplankton
    r_pg: float = 0.7       # chlorophyll fraction of total pigment
    r_c: float = 55.0       # carbon:chlorophyll mass ratio (mg C / mg Chl)
    k_ro: float = 0.225     # red-band clear-water extinction (m^-1)
    k_go: float = 0.0232    # green-band clear-water extinction (m^-1)
    k_rp: float = 0.037     # red-band pigment extinction factor
    k_gp: float = 0.074     # green-band pigment extinction factor
    l_r: float = 0.629      # red-band pigment exponent
    l_g: float = 0.674      # green-band pigment exponent
    k_par: float = 0.3      # saturation scale of the exponential light response (PAR units)
    band: BandVariant = BandVariant.TWO_BAND
    k1: float = 0.04        # single-band water extinction (m^-1)
    k2: float = 0.03        # single-band self-shading extinction (m^-1 per mmol N m^-3)
    alpha: float = 6.0      # initial slope of the rational light response (PAR^-1)
    vp: float = 2.0         # asymptote parameter of the rational light response
    # attenuate with the depth-integrated pigment burden instead of the
    # local value; kept out of the verified estimates
    integrate_attenuation: bool = False

    def __post_init__(self):
        self.band = BandVariant(self.band)
        for name in ("r_d", "r_pg", "r_c", "k_ro", "k_go", "k_rp", "k_gp",
                     "l_r", "l_g", "k_par", "k1", "k2", "alpha", "vp"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def pigment_factor(self) -> float:
        """Chlorophyll-equivalent concentration per unit P."""
        return 12.0 * self.r_d / (self.r_pg * self.r_c)


def chl_equiv(p, optics: OpticalParams):
    """Chlorophyll-equivalent pigment (mg Chl m^-3) from P (mmol N m^-3).

    Uses |P| so the optical formulas stay defined for the signed states
    that the sampling checks feed in; physical trajectories are
    nonnegative and unaffected.
    """
    return optics.pigment_factor * np.abs(p)


def par(x, p, q, optics: OpticalParams):
    """PAR at depth x for local phytoplankton p and surface irradiance q.

    Vectorized over x and p. At the surface the two-band form returns
    2*q because both bands start at full strength.
    """
    x = np.asarray(x, dtype=float)
    if optics.band is BandVariant.SINGLE_BAND:
        return q * np.exp(-(optics.k1 + optics.k2 * np.abs(p)) * x)
    chl = chl_equiv(p, optics)
    k_g = optics.k_go + optics.k_gp * chl ** optics.l_g
    k_r = optics.k_ro + optics.k_rp * chl ** optics.l_r
    return q * (np.exp(-k_g * x) + np.exp(-k_r * x))


def par_profile(grid_centers, cell_width, p_cells, q, optics: OpticalParams):
    """PAR at every cell center for a phytoplankton profile.

    By default this evaluates the pointwise law with the local P. With
    ``optics.integrate_attenuation`` the extinction coefficients are
    accumulated down the column (midpoint rule), so shading reflects the
    overlying water instead of the local cell only. For a uniform P
    profile the two coincide.
    """
    centers = np.asarray(grid_centers, dtype=float)
    p_cells = np.asarray(p_cells, dtype=float)
    if not optics.integrate_attenuation:
        return par(centers, p_cells, q, optics)

    def cumulative(kappa):
        # optical depth at cell centers: full cells above plus half the local cell
        below = np.concatenate(([0.0], np.cumsum(kappa[:-1]))) * cell_width
        return below + 0.5 * kappa * cell_width

    if optics.band is BandVariant.SINGLE_BAND:
        kappa = optics.k1 + optics.k2 * np.abs(p_cells)
        return q * np.exp(-cumulative(kappa))
    chl = chl_equiv(p_cells, optics)
    k_g = optics.k_go + optics.k_gp * chl ** optics.l_g
    k_r = optics.k_ro + optics.k_rp * chl ** optics.l_r
    return q * (np.exp(-cumulative(k_g)) + np.exp(-cumulative(k_r)))


def light_limit(par_value, params: ModelParams, optics: OpticalParams):
    """Light limitation factor in [0, 1) from a PAR value."""
    par_value = np.asarray(par_value, dtype=float)
    if params.light is LightVariant.RATIONAL_SATURATION:
        a = optics.alpha
        return a * par_value / np.sqrt(optics.vp ** 2 + (a * par_value) ** 2)
    return 1.0 - np.exp(-par_value / optics.k_par)


def saturation_scale(params: ModelParams, optics: OpticalParams) -> float:
    """Scale s with |d(light_limit)/d(PAR)| <= 1/s for the active response."""
    if params.light is LightVariant.RATIONAL_SATURATION:
        return optics.vp / optics.alpha
    return optics.k_par


def lipschitz_K_I(p, p_hat, params: ModelParams, optics: OpticalParams,
                  q_sup: float, col_length: float):
    """Lipschitz constant of p -> p * light_limit(par(x, p, q)) in p.

    Valid for any depth in [0, col_length] and any surface irradiance
    bounded by q_sup, for the pointwise attenuation law. Vectorized over
    (p, p_hat) pairs; equals 1 at p = p_hat = 0.
    """
    if q_sup < 0.0 or col_length <= 0.0:
        raise ValueError(f"need q_sup >= 0 and col_length > 0, got {q_sup}, {col_length}")
    pm = np.maximum(np.abs(np.asarray(p, dtype=float)), np.abs(np.asarray(p_hat, dtype=float)))
    s = saturation_scale(params, optics)
    if optics.band is BandVariant.SINGLE_BAND:
        bracket = optics.k2 * pm
    else:
        cc = optics.pigment_factor
        bracket = (optics.k_gp * optics.l_g * (cc * pm) ** optics.l_g
                   + optics.k_rp * optics.l_r * (cc * pm) ** optics.l_r)
    return 1.0 + q_sup * col_length / s * bracket
