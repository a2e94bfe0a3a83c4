"""Potential distributions described through their cumulant generating function.

A model exposes ``H(t) = log E exp(t xi)`` together with the de Haan data
``(gamma, rho, hscale)`` describing the large-``t`` behaviour

    (H(t y) - y H(t)) / hscale(t)  ->  rho * hat_H(y).

Four families are provided: ``double_exp``, ``power_tail``, ``bernoulli_pm``
and ``table_based``.
"""
from __future__ import annotations

import enum
import math
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

__all__ = [
    "Family",
    "EssSupClass",
    "CumulantModel",
    "HatH",
    "DomainOverflowError",
    "UnsupportedFamilyError",
    "NonPositiveValueError",
    "double_exp",
    "power_tail",
    "bernoulli_pm",
    "table_based",
    "eval_H",
    "eval_hat_H",
    "dehaan_residual",
    "rv_index_estimate",
    "sample_potential",
    "parse_model",
    "format_model",
]


class DomainOverflowError(ArithmeticError):
    """Raised when an empirical cumulant is requested outside its calibrated range."""


class UnsupportedFamilyError(ValueError):
    """Raised when a family has no sampling rule."""


class NonPositiveValueError(ValueError):
    """Raised by the regular-variation estimator on non-positive data."""


class Family(str, enum.Enum):
    DOUBLE_EXP = "double_exp"
    POWER_TAIL = "power_tail"
    BERNOULLI_PM = "bernoulli_pm"
    TABLE_BASED = "table_based"


class EssSupClass(str, enum.Enum):
    ZERO = "zero"
    INFINITE = "infinite"
    MEAN_ZERO = "mean_zero"


@dataclass(frozen=True)
class HatH:
    """Limit shape of the de Haan expansion, indexed by ``gamma``."""

    gamma: float

    def __call__(self, y):
        return eval_hat_H(self, y)


def _log_cosh(t):
    t = np.abs(np.asarray(t, dtype=float))
    return t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)


@dataclass(frozen=True, eq=False)
class CumulantModel:
    """A potential law given by its cumulant generating function.

    Use the constructors :func:`double_exp`, :func:`power_tail`,
    :func:`bernoulli_pm` and :func:`table_based` rather than building
    instances directly.

    Attributes
    ----------
    family : Family
    params : dict
        Family parameters (``rho`` for double_exp, ``c`` and ``gamma`` for
        power_tail).
    gamma, rho : float
        De Haan parameters.
    esssup_class : EssSupClass
        Which normalisation of the potential the model represents.
    samples : ndarray, optional
        Sorted samples for the table-based family.
    t_max : float
        Calibrated range of the table-based cumulant.
    """

    family: Family
    params: Mapping[str, float]
    gamma: float
    rho: float
    esssup_class: EssSupClass
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    t_max: float = math.inf
    source: str = ""

    # --- de Haan scale -------------------------------------------------
    def hscale(self, t):
        """The regularly varying scale ``hscale(t)`` of index ``gamma``."""
        t = np.asarray(t, dtype=float)
        if self.family is Family.DOUBLE_EXP:
            out = t
        elif self.family is Family.POWER_TAIL:
            out = t ** self.gamma
        else:
            out = np.ones_like(t)
        return out if out.ndim else float(out)

    @property
    def hat_H(self) -> HatH:
        return HatH(self.gamma)

    @property
    def esssup(self) -> float:
        """Essential supremum of the potential value."""
        if self.family is Family.BERNOULLI_PM:
            return 1.0
        if self.family is Family.TABLE_BASED:
            return float(self.samples[-1])
        if self.family is Family.POWER_TAIL and self.gamma < 1:
            return 0.0
        return math.inf

    @property
    def has_sampler(self) -> bool:
        return self.family is not Family.POWER_TAIL

    # --- cumulant and derivatives -------------------------------------
    def H(self, t):
        return eval_H(self, t)

    def dH(self, t):
        """First derivative of ``H``."""
        t = np.asarray(t, dtype=float)
        if self.family is Family.DOUBLE_EXP:
            with np.errstate(divide="ignore"):
                out = self.rho * (np.log(t) + 1.0)
        elif self.family is Family.POWER_TAIL:
            c, g = self.params["c"], self.gamma
            sign = -1.0 if g < 1 else 1.0
            if g == 0:
                out = np.zeros_like(t)
            else:
                with np.errstate(divide="ignore"):
                    out = sign * c * g * t ** (g - 1.0)
        elif self.family is Family.BERNOULLI_PM:
            out = np.tanh(t)
        else:
            w = self._table_weights(t)
            out = w @ self.samples
        return out if np.ndim(out) else float(out)

    def d2H(self, t):
        """Second derivative of ``H``."""
        t = np.asarray(t, dtype=float)
        if self.family is Family.DOUBLE_EXP:
            with np.errstate(divide="ignore"):
                out = self.rho / t
        elif self.family is Family.POWER_TAIL:
            c, g = self.params["c"], self.gamma
            sign = -1.0 if g < 1 else 1.0
            if g == 0:
                out = np.zeros_like(t)
            else:
                with np.errstate(divide="ignore"):
                    out = sign * c * g * (g - 1.0) * t ** (g - 2.0)
        elif self.family is Family.BERNOULLI_PM:
            out = 1.0 / np.cosh(np.minimum(np.abs(t), 350.0)) ** 2
        else:
            w = self._table_weights(t)
            m1 = w @ self.samples
            m2 = w @ self.samples**2
            out = m2 - m1**2
        return out if np.ndim(out) else float(out)

    def _table_weights(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(np.abs(t) > self.t_max):
            raise DomainOverflowError(
                f"table-based cumulant calibrated for |t| <= {self.t_max}"
            )
        rows = []
        for x in t:
            logits = x * self.samples
            w = np.exp(logits - logits.max())
            rows.append(w / w.sum())
        return rows[0] if len(rows) == 1 else np.array(rows)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.family is Family.BERNOULLI_PM:
            return rng.choice(np.array([-1.0, 1.0]), size=size)
        if self.family is Family.DOUBLE_EXP:
            # xi = rho log E with E ~ Exp(1); its cumulant is log Gamma(1 + rho t)
            return self.rho * np.log(rng.exponential(1.0, size=size))
        if self.family is Family.TABLE_BASED:
            return rng.choice(self.samples, size=size, replace=True)
        raise UnsupportedFamilyError(f"family {self.family.value} is defined only through H")

    def __repr__(self):
        return f"CumulantModel({format_model(self)})"


# ---------------------------------------------------------------------------
# constructors


def double_exp(rho: float = 1.0) -> CumulantModel:
    """Reference family with ``H(t) = rho t log t`` (gamma = 1, hscale(t) = t)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return CumulantModel(Family.DOUBLE_EXP, {"rho": float(rho)}, 1.0, float(rho), EssSupClass.INFINITE)


def power_tail(c: float, gamma: float) -> CumulantModel:
    """Pure power cumulant ``H(t) = -c t^gamma`` (gamma < 1) or ``+c t^gamma`` (gamma > 1).

    For ``gamma = 0`` the cumulant is ``-c`` for every ``t > 0``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if gamma < 0 or gamma == 1:
        raise ValueError("power_tail needs gamma >= 0 and gamma != 1")
    cls = EssSupClass.ZERO if gamma < 1 else EssSupClass.INFINITE
    return CumulantModel(
        Family.POWER_TAIL, {"c": float(c), "gamma": float(gamma)}, float(gamma), c * abs(1.0 - gamma), cls
    )


def bernoulli_pm() -> CumulantModel:
    """Symmetric +-1 potential, ``H(t) = log cosh t``."""
    return CumulantModel(Family.BERNOULLI_PM, {}, 0.0, math.log(2.0), EssSupClass.MEAN_ZERO)


def table_based(
    samples: Sequence[float],
    t_max: float = 50.0,
    esssup_class: EssSupClass = EssSupClass.MEAN_ZERO,
    source: str = "",
) -> CumulantModel:
    """Empirical cumulant from i.i.d. samples.

    The potential is treated as bounded, so ``gamma = 0``, ``hscale = 1`` and
    ``rho = -log P(xi = max)`` estimated from the sample frequencies.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("table_based needs at least one sample")
    top = np.count_nonzero(s == s[-1]) / s.size
    rho = -math.log(top) if top < 1 else 0.0
    return CumulantModel(
        Family.TABLE_BASED, {}, 0.0, rho, EssSupClass(esssup_class), samples=s, t_max=float(t_max), source=source
    )


# ---------------------------------------------------------------------------
# evaluations


def eval_H(model: CumulantModel, t):
    """Evaluate ``H(t)``; vectorised over ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    fam = model.family
    if fam is Family.DOUBLE_EXP:
        out = model.rho * xlogy(t, t)
    elif fam is Family.POWER_TAIL:
        c, g = model.params["c"], model.gamma
        if g == 0:
            out = np.where(t > 0, -c, 0.0)
        else:
            out = (-c if g < 1 else c) * t**g
    elif fam is Family.BERNOULLI_PM:
        out = _log_cosh(t)
    else:
        if np.any(np.abs(t) > model.t_max):
            raise DomainOverflowError(
                f"table-based cumulant calibrated for |t| <= {model.t_max}; got {np.max(np.abs(t))}"
            )
        flat = np.atleast_1d(t).ravel()
        # chunks of t keep the work array near 2^20 entries
        step = max(1, (1 << 20) // model.samples.size)
        out = np.concatenate(
            [logsumexp(np.outer(flat[i : i + step], model.samples), axis=1) for i in range(0, flat.size, step)]
        ) - math.log(model.samples.size)
        if not np.all(np.isfinite(out)):
            raise DomainOverflowError("log-sum-exp overflow in table-based cumulant")
        out = np.where(flat == 0, 0.0, out).reshape(t.shape)
    return out if np.ndim(out) else float(out)


def eval_hat_H(h: HatH, y):
    """Evaluate the de Haan limit shape.

    ``y log y`` for gamma = 1, ``(y - y^gamma)/(1 - gamma)`` otherwise, and
    ``y - 1{y > 0}`` for gamma = 0 so that sums reproduce support counting.
    """
    y = np.asarray(y, dtype=float)
    g = h.gamma
    if g == 1:
        out = xlogy(y, y)
    elif g == 0:
        out = y - (y > 0)
    else:
        out = (y - y**g) / (1.0 - g)
    return out if np.ndim(out) else float(out)


def dehaan_residual(model: CumulantModel, t: float, y):
    """Finite-``t`` distance from the de Haan limit, ``(H(ty) - yH(t))/hscale(t) - rho hat_H(y)``."""
    y = np.asarray(y, dtype=float)
    res = (eval_H(model, t * y) - y * eval_H(model, t)) / model.hscale(t) - model.rho * eval_hat_H(model.hat_H, y)
    return res if np.ndim(res) else float(res)


def rv_index_estimate(f: Callable[[np.ndarray], np.ndarray], t_grid: Sequence[float]) -> float:
    """Least-squares slope of ``log f`` against ``log t``."""
    t = np.asarray(t_grid, dtype=float)
    if t.size < 3 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be increasing with at least three points")
    vals = np.array([f(x) for x in t], dtype=float)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise NonPositiveValueError("f must be positive and finite on the grid")
    slope = np.polyfit(np.log(t), np.log(vals), 1)[0]
    return float(slope)


def sample_potential(model: CumulantModel, shape, seed: int) -> np.ndarray:
    """I.i.d. field of shape ``shape`` (e.g. ``(2R+1,)*d``), reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    return model.sample(tuple(np.atleast_1d(shape)), rng)


# ---------------------------------------------------------------------------
# text form


def parse_model(text: str, base_dir: Optional[Path] = None) -> CumulantModel:
    """Parse ``family=... key=value ...``.

    ``table_based`` accepts either ``file=<path>`` (one sample per line) or
    ``from=<family> n=<count> seed=<int>`` to tabulate draws of another model.
    """
    kv = {}
    for tok in shlex.split(text):
        if "=" not in tok:
            raise ValueError(f"malformed model token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k.strip()] = v.strip()
    return model_from_mapping(kv, base_dir=base_dir)


def model_from_mapping(kv: Mapping[str, str], base_dir: Optional[Path] = None) -> CumulantModel:
    fam = kv.get("family")
    try:
        fam = Family(fam)
    except ValueError:
        raise ValueError(f"unknown family {fam!r}") from None
    if fam is Family.DOUBLE_EXP:
        return double_exp(float(kv.get("rho", 1.0)))
    if fam is Family.POWER_TAIL:
        return power_tail(float(kv["c"]), float(kv["gamma"]))
    if fam is Family.BERNOULLI_PM:
        return bernoulli_pm()
    t_max = float(kv.get("t_max", 50.0))
    cls = EssSupClass(kv.get("esssup_class", EssSupClass.MEAN_ZERO.value))
    if "file" in kv:
        path = Path(kv["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return table_based(np.loadtxt(path, ndmin=1), t_max=t_max, esssup_class=cls, source=f"file={kv['file']}")
    if "from" in kv:
        inner = model_from_mapping({"family": kv["from"]})
        n, seed = int(kv.get("n", 10**6)), int(kv.get("seed", 0))
        draws = sample_potential(inner, (n,), seed)
        return table_based(draws, t_max=t_max, esssup_class=cls, source=f"from={kv['from']} n={n} seed={seed}")
    raise ValueError("table_based needs file=<path> or from=<family>")


def format_model(model: CumulantModel) -> str:
    fam = model.family
    if fam is Family.DOUBLE_EXP:
        return f"family=double_exp rho={model.rho!r}"
    if fam is Family.POWER_TAIL:
        return f"family=power_tail c={model.params['c']!r} gamma={model.gamma!r}"
    if fam is Family.BERNOULLI_PM:
        return "family=bernoulli_pm"
    extra = f" {model.source}" if model.source else f" n={model.samples.size}"
    return f"family=table_based{extra} t_max={model.t_max!r} esssup_class={model.esssup_class.value}"
