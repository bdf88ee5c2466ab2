import dataclasses
import math
import numpy as np
import pandas as pd
import qgrad.constants as constants
from qgrad.exceptions import ParameterError


@dataclasses.dataclass
class RunTrace:
    """
    Per-iteration record of one run, rows contiguous in t from 0

    Attributes:
    f, grad_norm, l_alpha, gamma : numpy.ndarray
        one value per recorded iteration; l_alpha is NaN off the orthant
    bits_per_iteration : int
        bits communicated by one step, bits(t) = t * bits_per_iteration
    xs : numpy.ndarray or None
        iterates, one row per iteration, when recording was requested
    x_final : numpy.ndarray
        the last recorded iterate
    hit_iteration : int or None
        first t at which a stopping rule held
    stop_reason : str
        name of the rule that stopped the run, or "max_iter"
    primal : dict or None
        primal recovery at x_final for dual problems
    primal_objective, primal_residual : numpy.ndarray or None
        per-iteration primal objective and constraint residual of the
        recovered primal point, for oracles with primal_values(x)
    """
    f: np.ndarray
    grad_norm: np.ndarray
    l_alpha: np.ndarray
    gamma: np.ndarray
    bits_per_iteration: int
    x_final: np.ndarray
    hit_iteration: object = None
    stop_reason: str = "max_iter"
    xs: object = None
    primal: object = None
    primal_objective: object = None
    primal_residual: object = None

    def __len__(self):
        return self.f.size

    @property
    def t(self):
        return np.arange(len(self), dtype=np.int64)

    @property
    def bits(self):
        return self.t * self.bits_per_iteration

    @property
    def iterations(self):
        """Number of steps taken."""
        return len(self) - 1

    def to_frame(self):
        """
        Summary:
        Trace as a DataFrame with the CSV columns

        Return:
        frame : pandas.DataFrame
            columns t, f, grad_norm, l_alpha, gamma, bits, followed by
            primal_objective and primal_residual when they were recorded
        """
        columns = {
            "t": self.t,
            "f": self.f,
            "grad_norm": self.grad_norm,
            "l_alpha": self.l_alpha,
            "gamma": self.gamma,
            "bits": self.bits,
        }
        names = list(constants.TRACE_COLUMNS)
        if self.primal_objective is not None:
            columns["primal_objective"] = self.primal_objective
            columns["primal_residual"] = self.primal_residual
            names += constants.PRIMAL_COLUMNS
        return pd.DataFrame(columns, columns=names)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format=constants.CSV_FLOAT_FORMAT, na_rep="")

    def floor(self, metric="l_alpha", fraction=constants.FLOOR_FRACTION):
        """
        Summary:
        Error floor of a metric, the mean over the final fraction of rows

        Parameters:
        metric : str
            "l_alpha", "grad_norm", "f", "primal_objective" or "primal_residual"
        fraction : float
            share of the trace in (0, 1]; at least one row is used

        Return:
        floor : float
            NaN when the metric was not recorded
        """
        if not 0.0 < fraction <= 1.0:
            raise ParameterError(f"Error: floor fraction must lie in (0, 1], got {fraction!r}")
        values = getattr(self, metric)
        if values is None:
            return float("nan")
        count = max(1, int(math.ceil(fraction * len(self))))
        tail = values[-count:]
        if np.all(np.isnan(tail)):
            return float("nan")
        return float(np.mean(tail))

    def min_grad_norm(self):
        return float(np.min(self.grad_norm))

    def ascent_steps(self):
        """Steps after which f went up."""
        return int(np.sum(np.diff(self.f) > 0.0))

    def summary(self):
        return {
            "iterations": self.iterations,
            "hit_iteration": self.hit_iteration,
            "stop_reason": self.stop_reason,
            "bits_per_iteration": self.bits_per_iteration,
            "bits_total": int(self.bits[-1]),
            "final_f": float(self.f[-1]),
            "final_grad_norm": float(self.grad_norm[-1]),
            "final_l_alpha": None if math.isnan(self.l_alpha[-1]) else float(self.l_alpha[-1]),
            "min_grad_norm": self.min_grad_norm(),
            "ascent_steps": self.ascent_steps(),
        }
