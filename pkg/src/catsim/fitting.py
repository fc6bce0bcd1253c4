"""Least-squares recovery of force and motional parameters from scan data.

The fitted model is the cat-state probability wrapped with a linearly
drifting contrast and baseline and a linear detuning drift across the
scan. Minimization runs a Nelder-Mead simplex and then a
Levenberg-Marquardt polish; uncertainties come from the finite-difference
Gauss-Newton normal matrix scaled by the residual variance.

All parameters are in SI units (rad/s, s, quanta/s).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .dynamics import cat_probability_grid
from .harness import ScanKind, ScanResult

NUISANCE_DEFAULTS = {
    "contrast0": 1.0,
    "contrast1": 0.0,
    "baseline0": 0.0,
    "baseline1": 0.0,
    "detuning_drift": 0.0,
}

MODEL_PARAMS = {
    ScanKind.TIME: ("omega_sb", "delta", "nbar", "nbar_dot"),
    ScanKind.DETUNING: ("omega_sb", "tau", "nbar", "nbar_dot"),
    ScanKind.PHASE: ("omega_sb", "delta", "tau", "nbar", "nbar_dot", "phi_s"),
}

# Fitted in log space unless explicit bounds are given.
POSITIVE = {"omega_sb", "nbar", "nbar_dot", "tau"}


def model_parameters(kind: ScanKind) -> tuple[str, ...]:
    return MODEL_PARAMS[ScanKind(kind)] + tuple(NUISANCE_DEFAULTS)


@dataclass(frozen=True)
class FitSpec:
    """Which parameters are free, their starting values, and fixed values for the rest."""

    model: ScanKind
    values: dict
    free: tuple = ()
    bounds: dict = field(default_factory=dict)
    max_iter: int = 4000

    def __post_init__(self):
        object.__setattr__(self, "model", ScanKind(self.model))
        names = model_parameters(self.model)
        values = {**NUISANCE_DEFAULTS, **self.values}
        unknown = set(values) - set(names)
        if unknown:
            raise ValueError(f"parameters {sorted(unknown)} do not belong to the {self.model.value} model")
        missing = set(names) - set(values)
        if missing:
            raise ValueError(f"no value given for {sorted(missing)}")
        free = tuple(self.free)
        bad = set(free) - set(names)
        if bad:
            raise ValueError(f"free parameters {sorted(bad)} do not belong to the model")
        if len(set(free)) != len(free):
            raise ValueError("duplicate free parameter")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        for name in set(self.bounds) - set(free):
            raise ValueError(f"bounds given for non-free parameter {name!r}")
        for name, (lo, hi) in self.bounds.items():
            if not lo < values[name] < hi:
                raise ValueError(f"initial value of {name!r} lies outside its bounds")
        object.__setattr__(self, "values", {k: float(values[k]) for k in names})
        object.__setattr__(self, "free", free)

    @property
    def fixed(self) -> tuple:
        return tuple(k for k in self.values if k not in self.free)


@dataclass
class FitResult:
    model: ScanKind
    values: dict
    uncertainties: dict
    residual_norm: float
    converged: bool
    iterations: int
    free: tuple = ()
    uncertainty_available: bool = True
    message: str = ""

    def to_json(self) -> str:
        def clean(x):
            return None if not math.isfinite(x) else x

        d = {
            "model": ScanKind(self.model).value,
            "free": list(self.free),
            "values": self.values,
            "uncertainties": {k: clean(v) for k, v in self.uncertainties.items()},
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "uncertainty_available": self.uncertainty_available,
            "message": self.message,
        }
        return json.dumps(d, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        d = json.loads(text)
        d["free"] = tuple(d["free"])
        d["uncertainties"] = {k: (math.nan if v is None else v) for k, v in d["uncertainties"].items()}
        return cls(**d)


def model_curve(kind: ScanKind, x, u, params: dict) -> np.ndarray:
    """Model spin-down probability at swept values ``x`` and drift coordinates ``u``."""
    kind = ScanKind(kind)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    p = params
    ddelta = p["detuning_drift"] * u
    if kind is ScanKind.TIME:
        core = cat_probability_grid(p["omega_sb"], p["delta"] + ddelta, p["nbar"], p["nbar_dot"], x)
    elif kind is ScanKind.DETUNING:
        core = cat_probability_grid(p["omega_sb"], x + ddelta, p["nbar"], p["nbar_dot"], p["tau"])
    else:
        pcat = cat_probability_grid(p["omega_sb"], p["delta"] + ddelta, p["nbar"], p["nbar_dot"], p["tau"])
        core = pcat * np.sin(x - p["phi_s"]) ** 2
    contrast = p["contrast0"] + p["contrast1"] * u
    baseline = p["baseline0"] + p["baseline1"] * u
    return baseline + contrast * core


def residuals(data: ScanResult, params: dict, kind: ScanKind | None = None, u=None) -> np.ndarray:
    """Estimate minus model at every point, in probability units."""
    kind = data.kind if kind is None else kind
    u = data.drift_coordinate() if u is None else np.asarray(u, dtype=float)
    if u.shape != data.estimate.shape:
        raise ValueError(f"drift coordinate length {u.shape} does not match data {data.estimate.shape}")
    return data.estimate - model_curve(kind, data.swept, u, params)


class _Transform:
    """Maps each free parameter to an unconstrained, order-one coordinate."""

    def __init__(self, spec: FitSpec):
        self.names = spec.free
        self.kinds = []
        self.scales = []
        for name in self.names:
            x0 = spec.values[name]
            if name in spec.bounds:
                self.kinds.append("logit")
                self.scales.append(spec.bounds[name])
            elif name in POSITIVE:
                if x0 <= 0:
                    raise ValueError(f"initial value of positive parameter {name!r} must be > 0")
                self.kinds.append("log")
                self.scales.append(x0)
            else:
                self.kinds.append("linear")
                self.scales.append(abs(x0) if x0 != 0 else 1.0)

    def forward(self, values: dict) -> np.ndarray:
        out = []
        for name, kind, s in zip(self.names, self.kinds, self.scales):
            x = values[name]
            if kind == "log":
                out.append(math.log(x / s))
            elif kind == "logit":
                lo, hi = s
                q = (x - lo) / (hi - lo)
                out.append(math.log(q / (1 - q)))
            else:
                out.append(x / s)
        return np.array(out)

    def inverse(self, y) -> dict:
        out = {}
        for name, kind, s, v in zip(self.names, self.kinds, self.scales, y):
            if kind == "log":
                out[name] = s * math.exp(min(v, 700.0))
            elif kind == "logit":
                lo, hi = s
                out[name] = lo + (hi - lo) / (1.0 + math.exp(-max(min(v, 700.0), -700.0)))
            else:
                out[name] = s * v
        return out


def _jacobian(fun, p: np.ndarray, scales: np.ndarray) -> np.ndarray:
    cols = []
    for j in range(p.size):
        h = 1e-6 * max(abs(p[j]), scales[j])
        up = p.copy()
        dn = p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((fun(up) - fun(dn)) / (2 * h))
    return np.column_stack(cols)


def fit(data: ScanResult, spec: FitSpec) -> FitResult:
    """Least-squares fit of ``spec.model`` to ``data.estimate``."""
    kind = spec.model
    u = data.drift_coordinate()
    base = dict(spec.values)
    y_obs = data.estimate

    def resid_for(values: dict) -> np.ndarray:
        with np.errstate(all="ignore"):
            r = y_obs - model_curve(kind, data.swept, u, values)
        return np.where(np.isfinite(r), r, 1e3)

    if not spec.free:
        r = resid_for(base)
        return FitResult(
            model=kind,
            values=base,
            uncertainties={k: 0.0 for k in base},
            residual_norm=float(np.sqrt(r @ r)),
            converged=True,
            iterations=0,
            free=(),
            message="all parameters fixed; residuals only",
        )

    n_points = y_obs.size
    n_free = len(spec.free)
    if n_points < 2 * n_free:
        raise ValueError(f"{n_points} points are too few for {n_free} free parameters (need >= {2 * n_free})")

    tr = _Transform(spec)

    def resid_y(y):
        try:
            vals = {**base, **tr.inverse(y)}
        except (OverflowError, ValueError):
            return np.full(n_points, 1e3)
        return resid_for(vals)

    def cost(y):
        r = resid_y(y)
        return float(r @ r)

    y0 = tr.forward(base)
    simplex = optimize.minimize(
        cost,
        y0,
        method="Nelder-Mead",
        options={"maxiter": spec.max_iter, "xatol": 1e-10, "fatol": 1e-16, "adaptive": True},
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        polish = optimize.least_squares(
            resid_y, simplex.x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=min(200 * (n_free + 1), spec.max_iter)
        )
    y_best = polish.x if polish.cost * 2 <= cost(simplex.x) else simplex.x
    best = {**base, **tr.inverse(y_best)}
    r = resid_for(best)
    ssr = float(r @ r)
    converged = bool(polish.status > 0)
    message = polish.message if converged else f"no convergence: {polish.message}"

    # uncertainties in physical coordinates
    p_best = np.array([best[k] for k in spec.free])
    scales = np.array([abs(spec.values[k]) or 1.0 for k in spec.free])

    def model_at(p):
        return model_curve(kind, data.swept, u, {**best, **dict(zip(spec.free, p))})

    unc = {k: 0.0 for k in spec.fixed}
    available = True
    dof = n_points - n_free
    try:
        jac = _jacobian(model_at, p_best, scales)
        normal = jac.T @ jac
        if not np.all(np.isfinite(normal)) or np.linalg.cond(normal) > 1e14:
            raise np.linalg.LinAlgError("singular normal matrix")
        cov = np.linalg.inv(normal) * (ssr / dof)
        sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        unc.update(dict(zip(spec.free, sig.tolist())))
    except np.linalg.LinAlgError:
        available = False
        unc.update({k: math.nan for k in spec.free})
        message += "; uncertainties unavailable (singular normal matrix)"

    return FitResult(
        model=kind,
        values=best,
        uncertainties=unc,
        residual_norm=math.sqrt(ssr),
        converged=converged,
        iterations=int(simplex.nit) + int(polish.nfev),
        free=spec.free,
        uncertainty_available=available,
        message=message,
    )


def two_stage_fit(cold: ScanResult, hot: ScanResult, cold_spec: FitSpec, hot_spec: FitSpec):
    """Fit cold data for omega_sb (nbar fixed), then fix that omega_sb and fit the hot data."""
    if "omega_sb" not in cold_spec.free:
        raise ValueError("the cold-ion fit must free omega_sb")
    if "omega_sb" in hot_spec.free:
        raise ValueError("the hot-ion fit must keep omega_sb fixed")
    first = fit(cold, cold_spec)
    hot_values = {**hot_spec.values, "omega_sb": first.values["omega_sb"]}
    second = fit(
        hot,
        FitSpec(hot_spec.model, hot_values, hot_spec.free, hot_spec.bounds, hot_spec.max_iter),
    )
    return first, second


def fit_line(x, y) -> tuple[float, float, float, float]:
    """Straight-line fit: (slope, intercept, slope sigma, intercept sigma)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    coef, cov = np.polyfit(x, y, 1, cov=True)
    return float(coef[0]), float(coef[1]), float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1]))
