"""
Frequency-scaling time and power models.

Time:   T(f) = t_on * f_max / f + t_off
Power:  P(f) = P_s + k * n * f**3
Energy: E(f) = T(f) * P(f) + T(f) * P_mic

Both models are linear in a transformed regressor (f_max/f and f**3), so they
are fitted by ordinary least squares. A negative intercept is clamped to
zero and the slope refitted through the origin.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .types import BoundClass, FittedModel


class ModelFitError(ValueError):
    pass


@dataclass(frozen=True)
class SweepPoint:
    f: float
    T: float
    P_cpu: float
    P_mic: float = 0.0

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("f must be > 0")
        if self.T <= 0:
            raise ValueError("T must be > 0")
        if self.P_cpu < 0 or self.P_mic < 0:
            raise ValueError("powers must be >= 0")


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float
    residuals: tuple
    zero_variance: bool = False
    clamped: bool = False


@dataclass(frozen=True)
class Replicates:
    """Per-frequency means with the raw spread kept for reporting."""

    f: np.ndarray
    T: np.ndarray
    P_cpu: np.ndarray
    P_mic: np.ndarray
    T_std: np.ndarray
    P_cpu_std: np.ndarray
    counts: np.ndarray


def average_replicates(points) -> Replicates:
    """Average replicated sweep points that share a frequency.

    Output is ordered by ascending frequency, so any permutation of the input
    gives identical arrays.
    """
    groups = defaultdict(list)
    for p in points:
        groups[round(p.f, 9)].append(p)
    fs = sorted(groups)
    cols = {name: [] for name in ("T", "P_cpu", "P_mic", "T_std", "P_cpu_std", "counts")}
    for f in fs:
        g = sorted(groups[f], key=lambda p: (p.T, p.P_cpu, p.P_mic))
        T = np.array([p.T for p in g])
        P = np.array([p.P_cpu for p in g])
        cols["T"].append(math.fsum(T) / len(g))
        cols["P_cpu"].append(math.fsum(P) / len(g))
        cols["P_mic"].append(math.fsum(p.P_mic for p in g) / len(g))
        cols["T_std"].append(float(T.std(ddof=1)) if len(g) > 1 else 0.0)
        cols["P_cpu_std"].append(float(P.std(ddof=1)) if len(g) > 1 else 0.0)
        cols["counts"].append(len(g))
    return Replicates(f=np.array(fs, dtype=float),
                      **{k: np.array(v) for k, v in cols.items()})


def _r2(y, yhat):
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0, True
    return 1.0 - ss_res / ss_tot, False


def ols(x, y, clamp_intercept=True) -> LinearFit:
    """Least-squares line y = slope * x + intercept.

    With `clamp_intercept`, a negative intercept is replaced by 0 and the
    slope refitted through the origin. R^2 is reported for the final line.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ModelFitError("all regressor values are identical")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    intercept = float(ym - slope * xm)
    clamped = False
    if clamp_intercept and intercept < 0:
        slope = float(np.sum(x * y) / np.sum(x * x))
        intercept = 0.0
        clamped = True
    yhat = slope * x + intercept
    r2, flat = _r2(y, yhat)
    return LinearFit(slope, intercept, r2, tuple((y - yhat).tolist()), flat, clamped)


def _distinct(points, minimum=3):
    freqs = {round(p.f, 9) for p in points}
    if len(freqs) < minimum:
        raise ModelFitError(f"insufficient frequencies: {len(freqs)} distinct, need {minimum}")


@dataclass(frozen=True)
class TimeFit:
    t_on: float
    t_off: float
    r2_time: float
    zero_variance: bool = False
    clamped: bool = False
    residuals: tuple = ()
    flags: tuple = field(default=())


def fit_time_model(points, f_max: float, exclude_fmax: bool = False) -> TimeFit:
    """Regress reported execution time on f_max / f.

    The slope is t_on and the intercept t_off. A negative slope (time growing
    with frequency) is clamped to t_on = 0, t_off = mean time.
    """
    points = list(points)
    if exclude_fmax:
        points = [p for p in points if not math.isclose(p.f, f_max, abs_tol=1e-9)]
    _distinct(points)
    reps = average_replicates(points)
    x = f_max / reps.f
    fit = ols(x, reps.T)
    flags = []
    if fit.clamped:
        flags.append("t_off clamped to 0")
    if fit.slope < 0:
        mean = float(reps.T.mean())
        r2, flat = _r2(reps.T, np.full_like(reps.T, mean))
        flags.append("t_on clamped to 0")
        return TimeFit(0.0, mean, r2, flat, True, tuple((reps.T - mean).tolist()), tuple(flags))
    if fit.zero_variance:
        flags.append("zero variance in execution time")
    return TimeFit(fit.slope, fit.intercept, fit.r2, fit.zero_variance, fit.clamped,
                   fit.residuals, tuple(flags))


@dataclass(frozen=True)
class PowerFit:
    k: float
    P_s: float
    r2_power: float
    clamped: bool = False
    residuals: tuple = ()


def fit_power_model(points, n_cores: int) -> PowerFit:
    """Regress execution-phase CPU power on f**3; k = slope / n_cores."""
    if n_cores < 1:
        raise ModelFitError("n_cores must be >= 1")
    points = list(points)
    _distinct(points)
    reps = average_replicates(points)
    fit = ols(reps.f ** 3, reps.P_cpu)
    if fit.slope <= 0:
        raise ModelFitError("negative or zero slope: power does not grow with frequency")
    return PowerFit(fit.slope / n_cores, fit.intercept, fit.r2, fit.clamped, fit.residuals)


def boundedness(t_on: float, t_off: float):
    """Ratio t_off / t_on and its class.

    Above 1 the workload is latency bound, below 1 compute bound. t_on = 0
    gives an infinite ratio.
    """
    if t_on < 0 or t_off < 0:
        raise ValueError("t_on and t_off must be >= 0")
    if t_on == 0:
        return math.inf, BoundClass.LATENCY_BOUND
    ratio = t_off / t_on
    if ratio > 1:
        return ratio, BoundClass.LATENCY_BOUND
    if ratio < 1:
        return ratio, BoundClass.COMPUTE_BOUND
    return ratio, BoundClass.BALANCED


def fit_model(points, n_cores: int, f_max: float, config_label: str = "",
              exclude_fmax: bool = False) -> FittedModel:
    """Fit both models over a sweep and attach the mean measured MIC power."""
    points = list(points)
    tf = fit_time_model(points, f_max, exclude_fmax=exclude_fmax)
    pf = fit_power_model(points, n_cores)
    reps = average_replicates(points)
    flags = list(tf.flags)
    if pf.clamped:
        flags.append("P_s clamped to 0")
    return FittedModel(
        t_on=tf.t_on, t_off=tf.t_off, k=pf.k, P_s=pf.P_s, n_cores=n_cores, f_max=f_max,
        r2_time=tf.r2_time, r2_power=pf.r2_power,
        p_mic_avg=float(reps.P_mic.mean()), config_label=config_label, flags=tuple(flags),
    )


def _check_f(f):
    if not f > 0:
        raise ValueError(f"frequency must be > 0, got {f}")


def predict_time(m: FittedModel, f: float) -> float:
    _check_f(f)
    return m.t_on * m.f_max / f + m.t_off


def predict_power(m: FittedModel, f: float) -> float:
    _check_f(f)
    return m.P_s + m.k * m.n_cores * f ** 3


@dataclass(frozen=True)
class EnergyPrediction:
    e_cpu: float
    e_mic: float
    e_total: float


def predict_energy(m: FittedModel, f: float) -> EnergyPrediction:
    T = predict_time(m, f)
    e_cpu = T * predict_power(m, f)
    e_mic = T * m.p_mic_avg
    return EnergyPrediction(e_cpu, e_mic, e_cpu + e_mic)


def model_to_dict(m: FittedModel) -> dict:
    ratio, cls = boundedness(m.t_on, m.t_off)
    return {
        "config_label": m.config_label,
        "t_on": m.t_on, "t_off": m.t_off, "k": m.k, "P_s": m.P_s,
        "n_cores": m.n_cores, "f_max": m.f_max,
        "r2_time": m.r2_time, "r2_power": m.r2_power,
        "boundedness": None if math.isinf(ratio) else ratio,
        "boundedness_infinite": math.isinf(ratio),
        "bound_class": cls.value,
        "p_mic_avg": m.p_mic_avg,
        "flags": list(m.flags),
    }


def model_from_dict(d: dict) -> FittedModel:
    return FittedModel(
        t_on=float(d["t_on"]), t_off=float(d["t_off"]), k=float(d["k"]), P_s=float(d["P_s"]),
        n_cores=int(d["n_cores"]), f_max=float(d["f_max"]),
        r2_time=float(d.get("r2_time", 1.0)), r2_power=float(d.get("r2_power", 1.0)),
        p_mic_avg=float(d.get("p_mic_avg", 0.0)), config_label=d.get("config_label", ""),
        flags=tuple(d.get("flags", ())),
    )
