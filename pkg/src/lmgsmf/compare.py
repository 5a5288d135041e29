"""Side-by-side comparison of two time series (typically exact vs SMF)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

OBSERVABLES = ("Jx", "Jy", "Jz", "var_x", "var_y", "var_z")
GRID_TOL = 1e-12


def _columns(series):
    return {
        "Jx": series.mean_J[:, 0], "Jy": series.mean_J[:, 1], "Jz": series.mean_J[:, 2],
        "var_x": series.var_J[:, 0], "var_y": series.var_J[:, 1], "var_z": series.var_J[:, 2],
    }


def _window_mask(times, window, name):
    lo, hi = window
    if not lo < hi:
        raise ConfigError(f"{name} window [{lo}, {hi}] is empty")
    slack = GRID_TOL * max(1.0, abs(times[-1]))
    if lo < times[0] - slack or hi > times[-1] + slack:
        raise ConfigError(
            f"{name} window [{lo}, {hi}] lies outside the simulated range [{times[0]}, {times[-1]}]"
        )
    mask = (times >= lo - slack) & (times <= hi + slack)
    if mask.sum() < 2:
        raise ConfigError(f"{name} window [{lo}, {hi}] holds fewer than two grid points")
    return mask


def time_average(times, values):
    """Trapezoid-rule mean of ``values`` over the span of ``times``."""
    return float(np.trapezoid(values, times) / (times[-1] - times[0]))


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    reference: dict  # observable -> array (exact)
    candidate: dict  # observable -> array (smf)
    early_window: tuple | None
    late_window: tuple | None
    max_deviation: dict  # early window
    reference_average: dict  # late window
    candidate_average: dict
    average_deviation: dict

    def summary(self) -> dict:
        return {
            "early_window": list(self.early_window) if self.early_window else None,
            "late_window": list(self.late_window) if self.late_window else None,
            "max_deviation": self.max_deviation,
            "exact_time_average": self.reference_average,
            "smf_time_average": self.candidate_average,
            "time_average_deviation": self.average_deviation,
        }

    def rows(self):
        out = []
        for k, t in enumerate(self.times.tolist()):
            row = {"t": t}
            for name in OBSERVABLES:
                row[f"{name}_exact"] = float(self.reference[name][k])
                row[f"{name}_smf"] = float(self.candidate[name][k])
            out.append(row)
        return out


def compare_report(exact_series, smf_series, early=(0.0, 10.0), late=(10.0, 50.0)) -> ComparisonReport:
    """Early-window max deviations and late-window time-average deviations.

    Either window may be None to skip it. Both series must share a time grid.
    """
    t_ref = np.asarray(exact_series.times, dtype=float)
    t_cand = np.asarray(smf_series.times, dtype=float)
    if t_ref.shape != t_cand.shape or not np.allclose(t_ref, t_cand, rtol=0, atol=GRID_TOL):
        raise ConfigError("exact and SMF series are on different time grids")
    ref, cand = _columns(exact_series), _columns(smf_series)

    max_dev = {}
    if early is not None:
        mask = _window_mask(t_ref, early, "early")
        max_dev = {k: float(np.max(np.abs(ref[k][mask] - cand[k][mask]))) for k in OBSERVABLES}

    ref_avg, cand_avg, avg_dev = {}, {}, {}
    if late is not None:
        mask = _window_mask(t_ref, late, "late")
        for k in OBSERVABLES:
            ref_avg[k] = time_average(t_ref[mask], ref[k][mask])
            cand_avg[k] = time_average(t_ref[mask], cand[k][mask])
            avg_dev[k] = abs(ref_avg[k] - cand_avg[k])

    return ComparisonReport(
        times=t_ref,
        reference=ref,
        candidate=cand,
        early_window=tuple(early) if early is not None else None,
        late_window=tuple(late) if late is not None else None,
        max_deviation=max_dev,
        reference_average=ref_avg,
        candidate_average=cand_avg,
        average_deviation=avg_dev,
    )
