"""Diffusion speeds, the island scale alpha_t, and the five-phase classification."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .cumulant import CumulantModel

__all__ = [
    "DiffusionFunction",
    "TabulatedDiffusion",
    "PhaseReport",
    "NumericVerdict",
    "AssumptionViolatedError",
    "NoRootError",
    "UnsupportedPhaseError",
    "as_fraction",
    "solve_alpha",
    "alpha_closed_form",
    "alpha_sanity",
    "classify_phase",
    "classify_tabulated",
    "predicted_log_moment",
    "parse_kappa",
]

INF = math.inf


class AssumptionViolatedError(ValueError):
    """t * kappa(t) does not tend to infinity."""


class NoRootError(ValueError):
    """The fixed-point residual keeps its sign on the bracket."""


class UnsupportedPhaseError(ValueError):
    """No prediction is available for this phase."""


def as_fraction(x: Union[int, float, str, Fraction], max_den: int = 10**6) -> Fraction:
    """Exact rational from ints, ``"p/q"`` strings, or floats (via a bounded denominator)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(max_den)


def _frac_str(f: Optional[Fraction]) -> Optional[str]:
    if f is None:
        return None
    return f"{f.numerator}/{f.denominator}"


def _limit_json(x: float):
    return "inf" if x == INF else x


@dataclass(frozen=True)
class DiffusionFunction:
    """Power-law speed ``kappa(t) = c t^beta`` with a rational exponent."""

    c: float
    beta: Fraction

    def __init__(self, c: float = 1.0, beta: Union[int, float, str, Fraction] = 0):
        if not c > 0:
            raise ValueError("c must be positive")
        object.__setattr__(self, "c", float(c))
        object.__setattr__(self, "beta", as_fraction(beta))

    def __call__(self, t):
        return self.c * np.asarray(t, dtype=float) ** float(self.beta)

    def rescale_time(self, a: float) -> "DiffusionFunction":
        """``t -> kappa(a t)``."""
        return DiffusionFunction(self.c * a ** float(self.beta), self.beta)

    def describe(self) -> str:
        return f"c={self.c!r} beta={_frac_str(self.beta)}"


class TabulatedDiffusion:
    """Speed given by samples, interpolated linearly in log-log coordinates."""

    def __init__(self, t_values: Sequence[float], kappa_values: Sequence[float]):
        t = np.asarray(t_values, dtype=float)
        k = np.asarray(kappa_values, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or np.any(t <= 0) or np.any(k <= 0):
            raise ValueError("need increasing positive t and positive kappa samples")
        self.t = t
        self.kappa = k

    def __call__(self, t):
        return np.exp(np.interp(np.log(t), np.log(self.t), np.log(self.kappa)))

    def describe(self) -> str:
        return f"tabulated n={self.t.size}"


def parse_kappa(text: str):
    """``c=1 beta=1/2`` for power laws; ``table=t1:k1,t2:k2,...`` for tabulated speeds."""
    kv = dict(tok.split("=", 1) for tok in text.split())
    if "table" in kv:
        pairs = [p.split(":") for p in kv["table"].split(",")]
        return TabulatedDiffusion([float(a) for a, _ in pairs], [float(b) for _, b in pairs])
    return DiffusionFunction(float(kv.get("c", 1.0)), kv.get("beta", "0"))


# ---------------------------------------------------------------------------
# phases


@dataclass
class PhaseReport:
    phase: int
    kappa_star: float  # lim t kappa(t) / hscale(t)
    kappa_sup: float  # lim kappa(t) / t^(2/d)
    alpha_exponent: Optional[Fraction] = None
    notes: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "kappa_star": _limit_json(self.kappa_star),
            "kappa_sup": _limit_json(self.kappa_sup),
            "alpha_exponent": _frac_str(self.alpha_exponent),
            "notes": dict(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhaseReport":
        d = json.loads(text)
        lim = lambda v: INF if v == "inf" else float(v)
        ae = d.get("alpha_exponent")
        return cls(int(d["phase"]), lim(d["kappa_star"]), lim(d["kappa_sup"]), Fraction(ae) if ae else None, d.get("notes", {}))


def _power_limit(c: float, exponent: Fraction) -> float:
    if exponent < 0:
        return 0.0
    if exponent > 0:
        return INF
    return c


def _phase_from_limits(kappa_star: float, kappa_sup: float) -> int:
    if kappa_star == 0:
        return 1
    if kappa_star < INF:
        return 2
    if kappa_sup == 0:
        return 3
    if kappa_sup < INF:
        return 4
    return 5


def classify_phase(kappa: DiffusionFunction, model: Union[CumulantModel, float, Fraction], d: int) -> PhaseReport:
    """Phase of a power-law speed against ``hscale(t) = t^gamma`` by exact exponent comparison.

    ``model`` may be a :class:`CumulantModel` or the index ``gamma`` itself;
    all built-in families have ``hscale(t) = t^gamma`` with unit constant.
    """
    if not isinstance(kappa, DiffusionFunction):
        raise TypeError("symbolic classification needs a power-law DiffusionFunction; use classify_tabulated")
    gamma = as_fraction(model.gamma if isinstance(model, CumulantModel) else model)
    beta = kappa.beta
    if 1 + beta <= 0:
        raise AssumptionViolatedError("t kappa(t) must tend to infinity (need beta > -1)")
    kappa_star = _power_limit(kappa.c, 1 + beta - gamma)
    kappa_sup = _power_limit(kappa.c, beta - Fraction(2, d))
    phase = _phase_from_limits(kappa_star, kappa_sup)
    alpha = None
    notes = {}
    if phase == 3:
        alpha = (1 + beta - gamma) / (d + 2 - d * gamma)
        if not gamma < 2:
            notes["gamma"] = "gamma >= 2 lies outside the range where the phase-3 asymptotics are known"
    return PhaseReport(phase, kappa_star, kappa_sup, alpha, notes)


@dataclass
class NumericVerdict:
    phase: Optional[int]
    verdict: str
    ratios_star: Sequence[float]
    ratios_sup: Sequence[float]


def _trend(r: Sequence[float]) -> str:
    if r[-1] > 10 * r[0]:
        return "inf"
    if r[-1] < r[0] / 10:
        return "zero"
    return "inconclusive"


def classify_tabulated(kappa, hscale: Callable, d: int, t_end: float) -> NumericVerdict:
    """Estimate the limits from ratios at ``t_end/100, t_end/10, t_end``.

    A ratio that grows (shrinks) more than tenfold over the two decades is read
    as an infinite (zero) limit; anything in between is reported as
    inconclusive rather than guessed.
    """
    ts = np.array([t_end / 100, t_end / 10, t_end])
    rs = ts * kappa(ts) / np.array([hscale(t) for t in ts])
    rp = kappa(ts) / ts ** (2.0 / d)
    s, p = _trend(rs), _trend(rp)
    if s == "zero":
        return NumericVerdict(1, "phase 1", rs, rp)
    if s == "inconclusive":
        return NumericVerdict(None, "inconclusive: t kappa / hscale has no clear trend", rs, rp)
    if p == "zero":
        return NumericVerdict(3, "phase 3", rs, rp)
    if p == "inf":
        return NumericVerdict(5, "phase 5", rs, rp)
    return NumericVerdict(None, "inconclusive: kappa / t^(2/d) has no clear trend", rs, rp)


# ---------------------------------------------------------------------------
# alpha_t


def alpha_closed_form(t: float, kappa: DiffusionFunction, gamma: float, d: int) -> float:
    """``(c t^(1 + beta - gamma))^(1/(d + 2 - d gamma))`` for power inputs with unit hscale constant."""
    return (kappa.c * t ** (1 + float(kappa.beta) - gamma)) ** (1.0 / (d + 2 - d * gamma))


def _alpha_residual(t, tk, hscale, d):
    def F(x):
        return math.log(hscale(t * math.exp(-d * x))) - math.log(tk) + (d + 2) * x

    return F


def solve_alpha(t: float, kappa, hscale: Callable, d: int, method: str = "bracket") -> float:
    """Root ``alpha > 1`` of ``hscale(t / alpha^d) = t kappa(t) / alpha^(d+2)``.

    Solved in ``x = log alpha`` on ``[0, log(t kappa(t))]`` with Brent's
    bracketing method; ``method="fixed_point"`` first tries the damped
    iteration ``alpha <- (t kappa / hscale(t/alpha^d))^(1/(d+2))``.
    """
    tk = float(t * kappa(t))
    if not tk > 1:
        raise NoRootError("t kappa(t) <= 1 leaves an empty bracket")
    F = _alpha_residual(t, tk, hscale, d)
    if method == "fixed_point":
        x = math.log(tk) / (d + 2)
        for _ in range(500):
            nxt = (math.log(tk) - math.log(hscale(t * math.exp(-d * x)))) / (d + 2)
            nxt = 0.5 * x + 0.5 * nxt
            if abs(nxt - x) < 1e-15 * max(1.0, abs(x)):
                x = nxt
                break
            x = nxt
        if x > 0 and abs(math.expm1(F(x))) < 1e-10:
            return math.exp(x)
    lo, hi = 0.0, math.log(tk)
    flo, fhi = F(lo), F(hi)
    if flo > 0 or fhi < 0:
        raise NoRootError(f"residual does not change sign on [0, log(t kappa)] (F(0)={flo:.3g}, F(hi)={fhi:.3g})")
    x = brentq(F, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)
    return math.exp(x)


def alpha_residual(t, alpha, kappa, hscale, d) -> float:
    """Relative residual ``|hscale(t/alpha^d) - t kappa/alpha^(d+2)| / (t kappa/alpha^(d+2))``."""
    rhs = t * kappa(t) / alpha ** (d + 2)
    return abs(hscale(t / alpha**d) - rhs) / rhs


def alpha_sanity(t_grid: Sequence[float], kappa, hscale: Callable, d: int, x: Optional[float] = None) -> dict:
    """Monotonicity checks on ``alpha_t``, ``t / alpha_t^d`` and ``alpha_t^x / (t kappa)`` with ``x = d + 1.5``."""
    x = d + 1.5 if x is None else x
    ts = np.asarray(t_grid, dtype=float)
    alphas = np.array([solve_alpha(t, kappa, hscale, d) for t in ts])
    spread = ts / alphas**d
    ratio = alphas**x / (ts * np.asarray(kappa(ts), dtype=float))
    return {
        "t": ts.tolist(),
        "alpha": alphas.tolist(),
        "t_over_alpha_d": spread.tolist(),
        "alpha_x_over_tkappa": ratio.tolist(),
        "alpha_increasing": bool(np.all(np.diff(alphas) > 0)),
        "spread_increasing": bool(np.all(np.diff(spread) > 0)),
        "ratio_decreasing": bool(np.all(np.diff(ratio) < 0)),
    }


# ---------------------------------------------------------------------------
# predictions


def predicted_log_moment(
    report: PhaseReport,
    t: float,
    model: CumulantModel,
    kappa,
    d: int,
    chi: Optional[float] = None,
) -> float:
    """Leading-order prediction of ``log E U(t)``.

    Phase 1: ``H(t) - 2d t kappa(t)``.  Phase 2: ``H(t) - t kappa(t) chi`` with
    ``chi`` the discrete constant at ``rho / kappa_star``.  Phase 3:
    ``alpha^d H(t/alpha^d) - t kappa(t)/alpha^2 chi`` with ``chi`` the continuous
    constant.  Phase 4: ``-t kappa_sup chi`` with ``chi`` the RWRS constant at
    ``1/kappa_sup``.
    """
    tk = float(t * kappa(t))
    p = report.phase
    if p == 5:
        raise UnsupportedPhaseError("no prediction is made in phase 5")
    if p == 1:
        return float(model.H(t)) - 2 * d * tk
    if chi is None:
        raise ValueError(f"phase {p} needs the variational constant chi")
    if p == 2:
        return float(model.H(t)) - tk * chi
    if p == 3:
        a = solve_alpha(t, kappa, model.hscale, d)
        return a**d * float(model.H(t / a**d)) - tk / a**2 * chi
    return -t * report.kappa_sup * chi
