"""Per-step monitored quantities of a run."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .operator import apply_mass


def lumped_weights(mesh):
    """Row sums of the P1 mass matrix, i.e. M @ 1."""
    return apply_mass(mesh.h, np.ones(mesh.n))


def lp_norm(v, weights, p):
    """Mass-lumped discrete L^p norm along the last axis."""
    v = np.abs(np.asarray(v, dtype=float))
    if np.isinf(p):
        return v.max(axis=-1)
    return (v ** p @ weights) ** (1.0 / p)


@dataclass(frozen=True)
class RunReport:
    """Time series over every computed step (index 0 is the initial state)."""

    times: np.ndarray
    linf_norms: np.ndarray
    lp_norms: np.ndarray
    p: float
    weighted_mass: Optional[np.ndarray]
    min_values: np.ndarray
    fp_iters: np.ndarray
    contraction_ratios: np.ndarray
    status: str = "completed"
    blowup: Optional[tuple] = None
    failure_time: Optional[float] = None

    @property
    def steps(self):
        return len(self.times) - 1

    @property
    def completed(self):
        return self.status == "completed"

    def reversed_in_time(self, times):
        """Same series read backwards and relabelled with ``times``."""
        flip = lambda a: None if a is None else a[..., ::-1].copy()
        return replace(self, times=np.asarray(times, dtype=float),
                       linf_norms=flip(self.linf_norms), lp_norms=flip(self.lp_norms),
                       weighted_mass=flip(self.weighted_mass),
                       min_values=flip(self.min_values), fp_iters=flip(self.fp_iters),
                       contraction_ratios=flip(self.contraction_ratios))


class ReportBuilder:
    def __init__(self, mesh, m, mass_vector=None, p=2.0):
        if not p >= 1:
            raise ValueError(f"norm exponent must be >= 1, got {p}")
        self.weights = lumped_weights(mesh)
        self.a = mass_vector
        self.p = float(p)
        self._rows = []

    def record(self, t, U, iterations=0, contraction=np.nan):
        linf = np.abs(U).max(axis=1)
        lp = lp_norm(U, self.weights, self.p)
        wm = np.nan if self.a is None else float(self.a @ (U @ self.weights))
        self._rows.append((t, linf, lp, wm, U.min(axis=1), iterations, contraction))

    def build(self, status="completed", blowup=None, failure_time=None):
        t, linf, lp, wm, mins, its, ratios = zip(*self._rows)
        return RunReport(
            times=np.array(t),
            linf_norms=np.array(linf).T,
            lp_norms=np.array(lp).T,
            p=self.p,
            weighted_mass=None if self.a is None else np.array(wm),
            min_values=np.array(mins).T,
            fp_iters=np.array(its, dtype=int),
            contraction_ratios=np.array(ratios, dtype=float),
            status=status,
            blowup=blowup,
            failure_time=failure_time,
        )
