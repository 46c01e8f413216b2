"""Built-in problem families.

=============  ============================================================
name           system
=============  ============================================================
wave           constant symbol [[0, 1], [c^2, 0]] (does not read s)
kirchhoff      u_tt - (a0 + a1 s) Lap u = 0,  V = (|xi| u^, D_t u^)
spagnolo       u_tt - (1 + ||u||^2) Lap u = 0, V = (u^, |xi|^-1 D_t u^)
coupled        two Kirchhoff equations coupled through P1(D) v, P2(D) u
fourth_order   (D_t^2 - b1(1+s)|xi|^2)(D_t^2 - b2(1+s)|xi|^2) u = 0, companion form
=============  ============================================================

In every case s(t) = <|xi|^-k S V, V>; S picks the components that carry the
nonlocal quadratic form of the original equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import data as datamod
from .symbol import (
    HermitianWeight,
    SymbolModel,
    companion_symbol,
    coupled_symbol,
    quadratic_form,
)


@dataclass(frozen=True, eq=False)
class ProblemFamily:
    name: str
    symbol: SymbolModel
    weight: HermitianWeight
    data_family: str = "gaussian"
    params: dict = field(default_factory=dict)
    default_weights: tuple = None
    gauge: str = None  # "energy": V = (|xi| u^, D_t u^); "l2": V = (u^, |xi|^-1 D_t u^)

    @property
    def m(self):
        return self.symbol.m

    def default_data(self, **overrides):
        params = dict(weights=self.default_weights)
        params.update(overrides)
        return datamod.make_data(self.data_family, self.m, **params)


def wave(c=1.0, delta=1.0, dim=1):
    c2 = float(c) ** 2

    def func(s, omega):
        shape = np.broadcast_shapes(np.shape(s), omega.shape[:-1])
        A = np.zeros(shape + (2, 2), dtype=complex)
        A[..., 0, 1] = 1.0
        A[..., 1, 0] = c2
        return A

    sym = SymbolModel(2, func, float(delta), 0.0, "wave", depends_on_s=False)
    return ProblemFamily("wave", sym, HermitianWeight(np.diag([1.0, 0.0])),
                         params=dict(c=c, delta=delta), default_weights=(1.0, 0.5j), gauge="energy")


def kirchhoff(a0=1.0, a1=1.0, delta=1.0, radial_exponent=0, dim=1):
    sym = companion_symbol(
        [lambda s, w: 0.0, lambda s, w: -(a0 + a1 * np.asarray(s))],
        delta=delta, lip_bound=abs(a1), name="kirchhoff", dim=dim,
    )
    weight = HermitianWeight(np.diag([1.0, 0.0]), radial_exponent)
    return ProblemFamily("kirchhoff", sym, weight,
                         params=dict(a0=a0, a1=a1, delta=delta, radial_exponent=radial_exponent),
                         default_weights=(1.0, 0.0), gauge="energy")


def spagnolo(delta=1.0, dim=1):
    sym = companion_symbol(
        [lambda s, w: 0.0, lambda s, w: -(1.0 + np.asarray(s))],
        delta=delta, lip_bound=1.0, name="spagnolo", dim=dim,
    )
    return ProblemFamily("spagnolo", sym, HermitianWeight(np.diag([1.0, 0.0])),
                         params=dict(delta=delta), default_weights=(1.0, 0.0), gauge="l2")


def coupled(a1=1.0, a2=2.0, p1=0.1, p2=0.1, delta=1.0, dim=1):
    P1 = quadratic_form(p1 * np.eye(dim))
    P2 = quadratic_form(p2 * np.eye(dim))
    sym = coupled_symbol(a1, a2, P1, P2, delta=delta)
    return ProblemFamily("coupled", sym, HermitianWeight(np.diag([1.0, 0.0, 1.0, 0.0])),
                         params=dict(a1=a1, a2=a2, p1=p1, p2=p2, delta=delta),
                         default_weights=(1.0, 0.0, 0.5, 0.0))


def fourth_order(b1=1.0, b2=4.0, delta=1.0, dim=1):
    def c2sum(s, w):
        return -(b1 + b2) * (1.0 + np.asarray(s))

    def c2prod(s, w):
        return b1 * b2 * (1.0 + np.asarray(s)) ** 2

    sym = companion_symbol(
        [lambda s, w: 0.0, c2sum, lambda s, w: 0.0, c2prod],
        delta=delta, name="fourth_order", dim=dim,
    )
    return ProblemFamily("fourth_order", sym, HermitianWeight(np.diag([1.0, 0.0, 0.0, 0.0])),
                         params=dict(b1=b1, b2=b2, delta=delta),
                         default_weights=(1.0, 0.0, 0.0, 0.0))


FAMILIES = {
    "wave": wave,
    "kirchhoff": kirchhoff,
    "spagnolo": spagnolo,
    "coupled": coupled,
    "fourth_order": fourth_order,
}


def build_problem(name, **params):
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown problem family {name!r}; known: {sorted(FAMILIES)}") from None
    return factory(**params)
