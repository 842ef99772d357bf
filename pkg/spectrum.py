"""
Tabulated spectral densities with an explicit convention tag.

Two conventions travel through the code:

* ``FIELD``: one-sided magnetic-field PSD in T²/Hz against linear frequency,
  as produced by periodograms of synthesized traces.
* ``ANGULAR``: the sensing spectral density S(ω) for which a dynamical
  decoupling sequence of total time t sees χ = t·S(ω)/π, tabulated against
  the linear frequency f = ω/2π of the filter.

Conversion uses the main-lobe weight of the delta-filter approximation:
a resonant sequence integrates |Y(f)|² ≈ 4t/π² around its peak, giving
S(ω) = 8π·γ_e²·S_B(f).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import trapezoid

from errors import CoverageError, InvalidParameterError


class SpectrumConvention(str, Enum):
    FIELD = "field_T2_per_Hz"
    ANGULAR = "angular_chi"


@dataclass(frozen=True)
class Spectrum:

    frequencies: np.ndarray
    values: np.ndarray
    convention: SpectrumConvention = SpectrumConvention.FIELD

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if f.ndim != 1 or f.shape != v.shape:
            raise InvalidParameterError("frequencies and values must be 1-D arrays of equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise InvalidParameterError("frequencies must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidParameterError("spectral values must be finite and non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "convention", SpectrumConvention(self.convention))

    def __len__(self) -> int:
        return self.frequencies.size

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0]) if len(self) > 1 else 0.0

    def at(self, f):
        """Linear interpolation; frequencies outside the table are a coverage error."""
        f = np.asarray(f, dtype=float)
        lo, hi = self.frequencies[0], self.frequencies[-1]
        if np.any(f < lo) or np.any(f > hi):
            raise CoverageError(f"spectrum covers [{lo:g}, {hi:g}] Hz, asked for {f}")
        return np.interp(f, self.frequencies, self.values)

    def total_power(self) -> float:
        """Integral over frequency (T² for a field spectrum)."""
        return float(trapezoid(self.values, self.frequencies)) if len(self) > 1 else 0.0

    def to_angular(self, consts) -> Spectrum:
        if self.convention is SpectrumConvention.ANGULAR:
            return self
        return Spectrum(self.frequencies, 8.0 * np.pi * consts.gamma_e ** 2 * self.values,
                        SpectrumConvention.ANGULAR)

    def to_field(self, consts) -> Spectrum:
        if self.convention is SpectrumConvention.FIELD:
            return self
        return Spectrum(self.frequencies, self.values / (8.0 * np.pi * consts.gamma_e ** 2),
                        SpectrumConvention.FIELD)
