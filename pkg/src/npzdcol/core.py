"""Core types for the 1-D NPZD water column.

Units are metres, days and mmol N m^-3 throughout unless a field says
otherwise. The vertical coordinate x runs from 0 at the surface down to
L at the bottom of the column. The euphotic layer is x in (0, l] and the
aphotic layer is everything below; mass budgets are per m^2 of surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class GrazingVariant(str, Enum):
    """Functional response of zooplankton grazing on P and D."""

    SQUARED_MM = "squared_mm"          # g_z X^2 / (k_z + X^2), independent denominators
    SHARED_MM = "shared_mm"            # g_z X^2 / (k_z + P^2 + D^2), shared denominator
    SWITCHING = "switching"            # preference-weighted switching response


class LightVariant(str, Enum):
    """Shape of the light limitation factor as a function of PAR."""

    EXP_SATURATION = "exp_saturation"  # 1 - exp(-PAR / k_par)
    RATIONAL_SATURATION = "rational_saturation"  # alpha*PAR / sqrt(vp^2 + alpha^2 PAR^2)


class MortalityVariant(str, Enum):
    """Closure for zooplankton mortality."""

    LINEAR = "linear"                  # loss m_z * Z
    SATURATING = "saturating"          # loss (m_z * Z / (k + Z)) * Z by default


@dataclass
class ModelParams:
    """Biological and physical constants of the column model.

    Defaults are a standard oligotrophic parameter set. Rates are per
    day, concentrations mmol N m^-3, depths m.
    """

    k_n: float = 0.5        # nutrient half-saturation (mmol N m^-3)
    g_z: float = 0.75       # max grazing rate (d^-1)
    k_z: float = 1.0        # grazing half-saturation (mmol N m^-3, squared forms use k_z + X^2)
    a_p: float = 0.7        # assimilated fraction of grazed phytoplankton
    a_d: float = 0.5        # assimilated fraction of grazed detritus
    mu_z: float = 0.1       # zooplankton excretion to nutrient (d^-1)
    m_p: float = 0.03       # phytoplankton mortality (d^-1)
    m_z: float = 0.03       # zooplankton mortality (d^-1)
    mu_d: float = 0.09      # detritus remineralization (d^-1)
    v_d: float = 5.0        # detritus sinking speed (m d^-1)
    mu_p: float = 2.0       # max phytoplankton growth rate (d^-1)
    gamma: float = 0.05     # exsudated fraction of primary production
    tau: float = 0.05       # deep-layer recycling rate to nutrient (d^-1)
    l_euphotic: float = 200.0  # euphotic depth (m), must sit above the column bottom

    grazing: GrazingVariant = GrazingVariant.SQUARED_MM
    light: LightVariant = LightVariant.EXP_SATURATION
    mortality: MortalityVariant = MortalityVariant.LINEAR

    switch_r: float = 0.7       # preference for P in the switching grazing response
    mortality_k: float = 1.0    # half-saturation of saturating mortality (mmol N m^-3)
    # when True, m_z*Z/(k+Z) is read as the whole mortality flux instead of a rate
    mortality_literal: bool = False

    def __post_init__(self):
        self.grazing = GrazingVariant(self.grazing)
        self.light = LightVariant(self.light)
        self.mortality = MortalityVariant(self.mortality)
        positive = {"k_n": self.k_n, "k_z": self.k_z, "l_euphotic": self.l_euphotic,
                    "mortality_k": self.mortality_k}
        for name, value in positive.items():
            if not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value}")
        nonneg = {"g_z": self.g_z, "mu_z": self.mu_z, "m_p": self.m_p, "m_z": self.m_z,
                  "mu_d": self.mu_d, "v_d": self.v_d, "mu_p": self.mu_p, "tau": self.tau}
        for name, value in nonneg.items():
            if not value >= 0.0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        for name, value in {"a_p": self.a_p, "a_d": self.a_d, "gamma": self.gamma}.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 < self.switch_r < 1.0:
            raise ValueError(f"switch_r must lie strictly in (0, 1), got {self.switch_r}")


def default_params() -> ModelParams:
    """Return the default parameter set."""
    return ModelParams()


@dataclass
class Grid:
    """Uniform cell-centered grid over the column [0, L].

    The euphotic boundary must coincide with a cell interface: the
    requested depth is snapped to the nearest interior interface and the
    snap distance is recorded. Cells with centers above the snapped
    depth form the euphotic layer.
    """

    length: float           # column length L (m)
    n_cells: int
    l_euphotic: float       # requested euphotic depth (m)

    cell_width: float = field(init=False)
    cell_centers: np.ndarray = field(init=False)   # shape (n_cells,)
    euphotic_face: int = field(init=False)         # interface index in [1, n_cells-1]
    l_snapped: float = field(init=False)           # euphotic depth actually used (m)
    snap_distance: float = field(init=False)       # |l_snapped - l_euphotic| (m)
    euphotic_mask: np.ndarray = field(init=False)  # bool per cell

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError(f"length must be positive, got {self.length}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        self.n_cells = int(self.n_cells)
        if not 0.0 < self.l_euphotic < self.length:
            raise ValueError(
                f"l_euphotic must lie strictly inside (0, {self.length}), got {self.l_euphotic}")
        self.cell_width = self.length / self.n_cells
        self.cell_centers = (np.arange(self.n_cells) + 0.5) * self.cell_width
        self.cell_centers.setflags(write=False)
        face = int(round(self.l_euphotic / self.cell_width))
        if not 1 <= face <= self.n_cells - 1:
            raise ValueError(
                f"euphotic depth {self.l_euphotic} m snaps to interface {face}, "
                f"which is not an interior interface of the {self.n_cells}-cell grid")
        self.euphotic_face = face
        self.l_snapped = face * self.cell_width
        self.snap_distance = abs(self.l_snapped - self.l_euphotic)
        self.euphotic_mask = self.cell_centers < self.l_snapped
        self.euphotic_mask.setflags(write=False)


@dataclass
class StateVector:
    """Concentrations of the four pools on the grid at one instant.

    Arrays are copied on construction and marked read-only; build a new
    StateVector instead of mutating one in place.
    """

    t: float                # time (day)
    N: np.ndarray           # nutrient (mmol N m^-3)
    P: np.ndarray           # phytoplankton
    Z: np.ndarray           # zooplankton
    D: np.ndarray           # detritus

    def __post_init__(self):
        arrays = {}
        length = None
        for name in ("N", "P", "Z", "D"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
            if length is None:
                length = arr.size
            elif arr.size != length:
                raise ValueError(f"{name} has length {arr.size}, expected {length}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            arrays[name] = arr
        for name, arr in arrays.items():
            setattr(self, name, arr)

    @property
    def n_cells(self) -> int:
        return self.N.size

    def stack(self) -> np.ndarray:
        """Return a fresh writable (4, n_cells) array in N, P, Z, D order."""
        return np.vstack([self.N, self.P, self.Z, self.D])

    @classmethod
    def from_stack(cls, t: float, c: np.ndarray) -> "StateVector":
        c = np.asarray(c, dtype=float)
        if c.shape[0] != 4:
            raise ValueError(f"expected a (4, n) array, got shape {c.shape}")
        return cls(t=t, N=c[0], P=c[1], Z=c[2], D=c[3])

    def min(self) -> float:
        return float(min(self.N.min(), self.P.min(), self.Z.min(), self.D.min()))

    def max_abs(self) -> float:
        return float(max(np.abs(self.N).max(), np.abs(self.P).max(),
                         np.abs(self.Z).max(), np.abs(self.D).max()))


class Trajectory:
    """Simulation output: snapshots plus per-step diagnostics.

    Diagnostics row k describes the state after step k (row 0 is the
    initial state). ``bottom_export[k]`` is the detritus mass per m^2
    advected out of the column bottom during step k.
    """

    def __init__(self, grid: Grid, mode: str, dt: float, lam: float,
                 truncation_n: float | None):
        self.grid = grid
        self.mode = mode
        self.dt = dt
        self.lam = lam
        self.truncation_n = truncation_n
        self.snapshots: list[StateVector] = []
        self.snapshot_times: list[float] = []
        self._diag: list[tuple[float, float, float, float, float, float, int]] = []
        self.initial_max_abs: float = 0.0
        self.initial_l2: float = 0.0
        self._finalized = False

    def _record(self, t, total_n, l2, h1, min_conc, export, picard_iters=0):
        self._diag.append((t, total_n, l2, h1, min_conc, export, picard_iters))

    def _finalize(self):
        diag = np.asarray([row[:6] for row in self._diag], dtype=float)
        self.diag_t = diag[:, 0]
        self.total_n = diag[:, 1]
        self.l2 = diag[:, 2]
        self.h1 = diag[:, 3]
        self.min_conc = diag[:, 4]
        self.bottom_export = diag[:, 5]
        self.picard_iterations = np.asarray([row[6] for row in self._diag], dtype=int)
        for arr in (self.diag_t, self.total_n, self.l2, self.h1, self.min_conc,
                    self.bottom_export, self.picard_iterations):
            arr.setflags(write=False)
        self._finalized = True

    @property
    def cumulative_export(self) -> np.ndarray:
        return np.cumsum(self.bottom_export)

    @property
    def final_state(self) -> StateVector:
        return self.snapshots[-1]

    def snapshot_at(self, t: float) -> StateVector:
        """Return the snapshot closest to time t (day)."""
        idx = int(np.argmin(np.abs(np.asarray(self.snapshot_times) - t)))
        return self.snapshots[idx]


def total_nitrogen(state: StateVector, grid: Grid) -> float:
    """Column-integrated nitrogen over all four pools (mmol N m^-2)."""
    return float(grid.cell_width * (state.N.sum() + state.P.sum()
                                    + state.Z.sum() + state.D.sum()))
