"""Time- and depth-dependent forcing: turbulent mixing and surface light.

Mixing fields expose ``at(t, x)`` (m^2 day^-1, strictly positive) plus
``d_floor``/``d_ceil`` bounds; irradiance series expose ``at(t)`` and a
``sup`` bound. File-backed variants read delimited text with a header
row; comma and whitespace delimiters are both accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIXING_COLUMNS = ("time_day", "depth_m", "d_m2_per_day")
IRRADIANCE_COLUMNS = ("time_day", "q")


@dataclass
class ConstantMixing:
    """Uniform diffusivity, mostly for analytic checks."""

    value: float  # m^2 day^-1

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError(f"mixing value must be positive, got {self.value}")

    @property
    def d_floor(self) -> float:
        return self.value

    @property
    def d_ceil(self) -> float:
        return self.value

    def at(self, t, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)


@dataclass
class SeasonalMixing:
    """Synthetic seasonal mixed layer over a quiet interior.

    The mixed-layer depth h(t) swings sinusoidally between h_min and
    h_max over one period, deepest at peak_day. Diffusivity is d_max
    above the mixed layer and relaxes to d_min across a cosine ramp of
    thickness transition_frac * h(t) centered on h(t).
    """

    d_min: float = 5.0          # interior diffusivity (m^2 day^-1)
    d_max: float = 500.0        # mixed-layer diffusivity (m^2 day^-1)
    h_min: float = 20.0         # shallowest mixed layer (m)
    h_max: float = 250.0        # deepest mixed layer (m)
    period_days: float = 365.0
    peak_day: float = 15.0      # day of deepest mixing
    transition_frac: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.d_min <= self.d_max:
            raise ValueError(f"need 0 < d_min <= d_max, got {self.d_min}, {self.d_max}")
        if not 0.0 < self.h_min <= self.h_max:
            raise ValueError(f"need 0 < h_min <= h_max, got {self.h_min}, {self.h_max}")
        if not self.period_days > 0.0:
            raise ValueError(f"period_days must be positive, got {self.period_days}")
        if not 0.0 < self.transition_frac < 1.0:
            raise ValueError(
                f"transition_frac must lie in (0, 1), got {self.transition_frac}")

    @property
    def d_floor(self) -> float:
        return self.d_min

    @property
    def d_ceil(self) -> float:
        return self.d_max

    def mixed_layer_depth(self, t) -> np.ndarray:
        phase = 2.0 * np.pi * (np.asarray(t, dtype=float) - self.peak_day) / self.period_days
        return self.h_min + (self.h_max - self.h_min) * 0.5 * (1.0 + np.cos(phase))

    def at(self, t, x):
        x = np.asarray(x, dtype=float)
        h = self.mixed_layer_depth(t)
        half = 0.5 * self.transition_frac * h
        ramp = np.clip((x - (h - half)) / (2.0 * half), 0.0, 1.0)
        blend = 0.5 * (1.0 + np.cos(np.pi * ramp))  # 1 above the layer, 0 below
        return self.d_min + (self.d_max - self.d_min) * blend


@dataclass
class FileMixing:
    """Tabulated diffusivity d(t, x), bilinear in time and depth.

    Queries outside the table's time span raise; depth queries are
    clamped to the tabulated hull so cell centers near the boundaries of
    a differently sampled grid stay usable.
    """

    times: np.ndarray    # (nt,), strictly increasing (day)
    depths: np.ndarray   # (nd,), strictly increasing (m)
    values: np.ndarray   # (nt, nd), positive (m^2 day^-1)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.depths = np.asarray(self.depths, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.depths.ndim != 1:
            raise ValueError("times and depths must be one-dimensional")
        if self.values.shape != (self.times.size, self.depths.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{self.times.size} times x {self.depths.size} depths")
        if np.any(np.diff(self.times) <= 0.0) or np.any(np.diff(self.depths) <= 0.0):
            raise ValueError("times and depths must be strictly increasing")
        if not np.all(self.values > 0.0):
            raise ValueError("tabulated diffusivities must be strictly positive")

    @property
    def d_floor(self) -> float:
        return float(self.values.min())

    @property
    def d_ceil(self) -> float:
        return float(self.values.max())

    def at(self, t, x):
        t = float(t)
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(
                f"time {t} outside tabulated range [{self.times[0]}, {self.times[-1]}]")
        x = np.asarray(x, dtype=float)
        if self.times.size == 1:  # single slice: static field, range check already passed
            return np.interp(x, self.depths, self.values[0])
        j = int(np.searchsorted(self.times, t, side="right"))
        j = min(max(j, 1), self.times.size - 1)
        t0, t1 = self.times[j - 1], self.times[j]
        w = (t - t0) / (t1 - t0)
        row = (1.0 - w) * self.values[j - 1] + w * self.values[j]
        return np.interp(x, self.depths, row)


@dataclass
class ConstantIrradiance:
    """Fixed surface irradiance."""

    value: float

    def __post_init__(self):
        if not self.value >= 0.0:
            raise ValueError(f"irradiance must be nonnegative, got {self.value}")

    @property
    def sup(self) -> float:
        return self.value

    def at(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)[()]


@dataclass
class DiurnalIrradiance:
    """Diurnal cycle under a seasonal envelope.

    Q(t) = q_ref * max(0, sin(2*pi*t)) * s(t) with t in days (midnight
    at integer t) and s(t) in [1 - seasonal_amp, 1], largest at
    peak_day. Nights are exactly zero.
    """

    q_ref: float = 1.0
    seasonal_amp: float = 0.5
    peak_day: float = 172.0
    period_days: float = 365.0

    def __post_init__(self):
        if not self.q_ref > 0.0:
            raise ValueError(f"q_ref must be positive, got {self.q_ref}")
        if not 0.0 <= self.seasonal_amp <= 1.0:
            raise ValueError(f"seasonal_amp must lie in [0, 1], got {self.seasonal_amp}")
        if not self.period_days > 0.0:
            raise ValueError(f"period_days must be positive, got {self.period_days}")

    @property
    def sup(self) -> float:
        return self.q_ref

    def envelope(self, t):
        phase = 2.0 * np.pi * (np.asarray(t, dtype=float) - self.peak_day) / self.period_days
        return (1.0 - self.seasonal_amp) + self.seasonal_amp * 0.5 * (1.0 + np.cos(phase))

    def at(self, t):
        t = np.asarray(t, dtype=float)
        diurnal = np.maximum(0.0, np.sin(2.0 * np.pi * t))
        return (self.q_ref * diurnal * self.envelope(t))[()]


@dataclass
class FileIrradiance:
    """Tabulated surface irradiance, linear in time; strict time range."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if not np.all(self.values >= 0.0):
            raise ValueError("irradiance samples must be nonnegative")

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def at(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise ValueError(
                f"time {t} outside tabulated range [{self.times[0]}, {self.times[-1]}]")
        return np.interp(t, self.times, self.values)[()]


def _read_table(path, expected_columns):
    """Read a delimited text table with a mandatory header row."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise ValueError(f"{path}: empty file, expected header {expected_columns}")
        delimiter = "," if "," in header else None
        names = tuple(col.strip() for col in
                      (header.split(",") if delimiter else header.split()))
        if names != tuple(expected_columns):
            raise ValueError(
                f"{path}: header {names} does not match expected columns {expected_columns}")
        data = np.loadtxt(fh, delimiter=delimiter, ndmin=2)
    if data.shape[1] != len(expected_columns):
        raise ValueError(
            f"{path}: expected {len(expected_columns)} columns, got {data.shape[1]}")
    return data


def load_mixing_file(path) -> FileMixing:
    """Load d(t, x) from columns time_day, depth_m, d_m2_per_day.

    Rows must be sorted by (time, depth) and every time slice must
    sample the same depths.
    """
    data = _read_table(path, MIXING_COLUMNS)
    times = np.unique(data[:, 0])
    depths = np.unique(data[:, 1])
    if data.shape[0] != times.size * depths.size:
        raise ValueError(
            f"{path}: expected a complete {times.size} x {depths.size} time-depth grid, "
            f"got {data.shape[0]} rows")
    expect_t = np.repeat(times, depths.size)
    expect_x = np.tile(depths, times.size)
    if not (np.array_equal(data[:, 0], expect_t) and np.array_equal(data[:, 1], expect_x)):
        raise ValueError(f"{path}: rows must be sorted by (time_day, depth_m)")
    values = data[:, 2].reshape(times.size, depths.size)
    return FileMixing(times=times, depths=depths, values=values)


def load_irradiance_file(path) -> FileIrradiance:
    """Load Q(t) from columns time_day, q."""
    data = _read_table(path, IRRADIANCE_COLUMNS)
    return FileIrradiance(times=data[:, 0], values=data[:, 1])
