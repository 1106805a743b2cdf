"""Predicted exponents for each intersection bound, with hypothesis checks.

Hypothesis checks are advisory: a violated hypothesis is recorded in
``violations`` and ``hypotheses_ok`` is False, but a value is still returned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

THEOREMS = (
    "mattila",        # almost-every translate, Hausdorff version
    "translation",    # diffeomorphic translates, averaged box counts
    "rotation",       # O(d)-averaged translates
    "fourier",        # B with Fourier dimension beta
    "dilation",       # dilates t B, t in [1, 2], hyperplane condition of order h
    "operator",       # m-equation level sets with Sobolev gain s
    "levelset",       # one equation with rotational curvature
    "maximal",        # sup over t in [1, 2]
    "two-surface",    # two equations with rotational curvature
    "inverse",        # lower bound on dim E from slices
    "numbertheory",   # average lattice count exponent
)


@dataclass
class Thresholds:
    theorem: str
    inputs: dict
    predicted_intersection_dim: Optional[float] = None
    predicted_exceptional_dim: Optional[float] = None
    predicted_count_exponent: Optional[float] = None
    inverse_lower_bound: Optional[float] = None
    a: Optional[float] = None  # report-only split exponents
    b: Optional[float] = None
    violations: list = field(default_factory=list)

    @property
    def hypotheses_ok(self) -> bool:
        return not self.violations

    @property
    def status(self) -> str:
        return "ok" if self.hypotheses_ok else "hypothesis-violated"


def _need(inputs, *names):
    missing = [n for n in names if inputs.get(n) is None]
    if missing:
        raise ValueError(f"missing inputs: {', '.join(missing)}")
    return [float(inputs[n]) for n in names]


def predict(theorem: str, **inputs) -> Thresholds:
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}")
    th = Thresholds(theorem, dict(inputs))
    v = th.violations

    def check(cond, msg):
        if not cond:
            v.append(msg)

    if theorem == "numbertheory":
        d, s = _need(inputs, "d", "s")
        th.predicted_count_exponent = d - 2 * d / s
        check(s > (d + 1) / 2, "s > (d+1)/2")
        check(s < d, "s < d")
        return th
    if theorem == "inverse":
        d, g = _need(inputs, "d", "gamma")
        check(d >= 2, "d >= 2")
        check(g > 0, "gamma > 0")
        th.inverse_lower_bound = d * g / (d - 1) if d > 1 else float("inf")
        return th

    d = _need(inputs, "d")[0]
    if theorem in ("mattila", "translation", "rotation", "fourier", "dilation"):
        sA, sB = _need(inputs, "s_A", "s_B")
        th.predicted_intersection_dim = sA + sB - d
        check(sA + sB > d if theorem != "mattila" else sA + sB >= d, "s_A + s_B > d")
        if theorem == "mattila":
            check(sB > (d + 1) / 2, "s_B > (d+1)/2")
        if theorem == "rotation":
            (al,) = _need(inputs, "alpha")
            check(d >= 2, "d >= 2")
            check(al + sA > d + 1, "alpha + s_A > d + 1")
            th.predicted_exceptional_dim = d + 1 - sA
            th.a, th.b = inputs.get("a"), inputs.get("b")
        elif theorem == "fourier":
            al, beta = _need(inputs, "alpha", "beta")
            check(d >= 2, "d >= 2")
            check(beta > 0, "beta > 0")
            check((al + sA) / 2 > d - beta / 2, "(alpha + s_A)/2 > d - beta/2")
            th.predicted_exceptional_dim = 2 * d - beta - sA
            th.a, th.b = inputs.get("a"), inputs.get("b")
        elif theorem == "dilation":
            al, h = _need(inputs, "alpha", "h")
            check(d >= 2, "d >= 2")
            check((al + sA) / 2 > d - (sB - h), "(alpha + s_A)/2 > d - (s_B - h)")
            th.predicted_exceptional_dim = 2 * (d - (sB - h)) - sA
        return th

    (sA,) = _need(inputs, "s_A")
    check(d >= 2, "d >= 2")
    if theorem == "operator":
        al, s, m = _need(inputs, "alpha", "s", "m")
        th.predicted_intersection_dim = sA - m
        th.predicted_exceptional_dim = 2 * d - 2 * s - sA
        check((al + sA) / 2 > d - s, "(alpha + s_A)/2 > d - s")
        check(sA > m, "s_A > m")
    elif theorem == "levelset":
        (al,) = _need(inputs, "alpha")
        th.predicted_intersection_dim = sA - 1
        th.predicted_exceptional_dim = d + 1 - sA
        check(al + sA > d + 1, "alpha + s_A > d + 1")
    elif theorem == "maximal":
        (al,) = _need(inputs, "alpha")
        th.predicted_intersection_dim = sA - 1
        th.predicted_exceptional_dim = d + 2 - sA
        check(al + sA > d + 2, "alpha + s_A > d + 2")
    elif theorem == "two-surface":
        a1, a2 = _need(inputs, "alpha1", "alpha2")
        th.predicted_intersection_dim = sA - 2
        check(sA > 2, "s_A > 2")
        check(a1 + sA > d + 1, "alpha1 + s_A > d + 1")
        check(a2 + sA > d + 1, "alpha2 + s_A > d + 1")
    return th
