"""Stiff barotropic equations of state ``p_k(rho)`` with ``p_k'(1) = k``."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domain import ScalarField, sobolev_norm


class EosFamily(enum.Enum):
    LINEAR = "linear"
    GAMMA_LAW = "gamma"


class UnphysicalStateError(ValueError):
    pass


class AssumptionViolation(ValueError):
    def __init__(self, ell, ratio, a1):
        super().__init__(f"||p^({ell})(rho)|| / k = {ratio:.4g} exceeds a1 = {a1:.4g}")
        self.ell = ell
        self.ratio = ratio


@dataclass(frozen=True)
class Eos:
    k: float
    gamma: float = 1.4
    family: EosFamily = EosFamily.GAMMA_LAW

    def __post_init__(self):
        object.__setattr__(self, "family", EosFamily(self.family))
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be at least 1")

    def with_k(self, k):
        return Eos(k, self.gamma, self.family)

    def derivative(self, rho, order):
        """``d^order p / d rho^order`` evaluated pointwise on an array."""
        rho = np.asarray(rho, dtype=float)
        k, g = self.k, self.gamma
        if self.family is EosFamily.LINEAR:
            if order == 0:
                return k * (rho - 1.0)
            if order == 1:
                return np.full_like(rho, k)
            return np.zeros_like(rho)
        if order == 0:
            return (k / g) * (rho ** g - 1.0)
        coef = k
        for j in range(1, order):
            coef *= g - j
        return coef * rho ** (g - order)

    def pressure(self, rho):
        return self.derivative(rho, 0)

    def c2(self, rho):
        return self.derivative(rho, 1)


@dataclass(frozen=True)
class EosState:
    rho: ScalarField
    p: ScalarField
    c2: ScalarField
    q: ScalarField


def eos_eval(eos, f):
    """Density, pressure, sound speed squared and its reciprocal from ``f = log rho``."""
    rho = f.map(np.exp)
    c2v = eos.c2(rho.values)
    if not np.all(np.isfinite(c2v)) or c2v.min() <= 0:
        raise UnphysicalStateError("sound speed squared is not positive")
    p = rho.map(eos.pressure)
    c2 = rho._new(c2v)
    return EosState(rho, p, c2, rho._new(1.0 / c2v))


def sound_speed_squared(eos, f):
    c2v = eos.c2(np.exp(f.values))
    if c2v.min() <= 0:
        raise UnphysicalStateError("sound speed squared is not positive")
    return f._new(c2v)


@dataclass(frozen=True)
class MaterialChain:
    c2_dot: ScalarField
    c2_ddot: ScalarField
    c2_dddot: ScalarField
    q_dot: ScalarField
    q_ddot: ScalarField
    q_dddot: ScalarField


def c2_material_chain(eos, f, fdot, fddot, fdddot):
    """Material derivatives of ``c2 = p'(rho)`` and ``q = 1/c2``.

    With ``rho' = rho f'`` along particle paths:

        (c2)'   = p2 rho f'
        (c2)''  = p3 (rho f')^2 + p2 rho (f'' + f'^2)
        (c2)''' = p4 (rho f')^3 + 3 p3 rho^2 f' (f'' + f'^2)
                  + p2 rho (f''' + 3 f' f'' + f'^3)

    where ``pj`` is the j-th derivative of the pressure at ``rho``.
    """
    rho = np.exp(f.values)
    a, b, c = fdot.values, fddot.values, fdddot.values
    p2, p3, p4 = (eos.derivative(rho, j) for j in (2, 3, 4))
    c2 = eos.c2(rho)
    d1 = p2 * rho * a
    d2 = p3 * (rho * a) ** 2 + p2 * rho * (b + a * a)
    d3 = (p4 * (rho * a) ** 3 + 3 * p3 * rho ** 2 * a * (b + a * a)
          + p2 * rho * (c + 3 * a * b + a ** 3))
    q = 1.0 / c2
    q1 = -q ** 2 * d1
    q2 = -q ** 2 * d2 + 2 * q ** 3 * d1 ** 2
    q3 = -q ** 2 * d3 + 6 * q ** 3 * d1 * d2 - 6 * q ** 4 * d1 ** 3
    mk = f._new
    return MaterialChain(mk(d1), mk(d2), mk(d3), mk(q1), mk(q2), mk(q3))


@dataclass(frozen=True)
class AssumptionAudit:
    k: float
    ratios: dict
    a1: float


def audit_assumption(eos, f, s=3, a1=None, orders=range(1, 6)):
    """Ratios ``||p^(l)(rho)||_{s+1} / k`` for l = 1..5.

    With ``a1`` given, a ratio above it raises ``AssumptionViolation``.
    Otherwise the fitted constant is the largest ratio.
    """
    rho = np.exp(f.values)
    ratios = {}
    for ell in orders:
        g = f._new(eos.derivative(rho, ell))
        ratios[ell] = float(sobolev_norm(g, s + 1)) / eos.k
    if a1 is not None:
        for ell, r in ratios.items():
            if r > a1:
                raise AssumptionViolation(ell, r, a1)
    fitted = max(ratios.values())
    return AssumptionAudit(eos.k, ratios, fitted if a1 is None else a1)
