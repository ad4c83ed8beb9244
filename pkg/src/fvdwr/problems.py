"""Coefficient sets, model splits, goal functionals and the problem catalog.

Coefficient callbacks take coordinates ``x, y`` and a state ``u`` (arrays
of equal shape) and must be vectorized.  Diffusion ``A`` returns either a
scalar per point or, when ``matrix`` is set, a (..., 2, 2) array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError

PI = np.pi


@dataclass(frozen=True)
class Coefficients:
    A: Callable
    dA: Callable
    b: Callable
    db: Callable
    div_b: Callable  # divergence of b in x at frozen state
    c: Callable
    dc: Callable
    matrix: bool = False
    name: str = ""

    def total_div_b(self, x, y, u, grad_u):
        """Divergence of x -> b(x, u(x)) including the chain rule through u."""
        return self.div_b(x, y, u) + np.einsum("...d,...d->...", self.db(x, y, u), grad_u)


def _zeros(x, y, u):
    return np.zeros(np.shape(u))


def _vec(bx, by):
    def b(x, y, u):
        shape = np.shape(u)
        return np.stack([np.full(shape, float(bx)), np.full(shape, float(by))], axis=-1)

    return b


def _vec_zero(x, y, u):
    return np.zeros(np.shape(u) + (2,))


def constant_coefficients(a=1.0, b=(0.0, 0.0), c=0.0, name="constant") -> Coefficients:
    """State-independent coefficients; ``a`` may be a scalar or a 2x2 matrix."""
    a_arr = np.asarray(a, dtype=float)
    if a_arr.ndim == 0:
        A = lambda x, y, u: np.full(np.shape(u), float(a_arr))  # noqa: E731
        matrix = False
    else:
        A = lambda x, y, u: np.broadcast_to(a_arr, np.shape(u) + (2, 2)).copy()  # noqa: E731
        matrix = True
    dA = (lambda x, y, u: np.zeros(np.shape(u) + (2, 2))) if matrix else _zeros
    return Coefficients(
        A=A,
        dA=dA,
        b=_vec(*b),
        db=_vec_zero,
        div_b=_zeros,
        c=lambda x, y, u: np.full(np.shape(u), float(c)),
        dc=_zeros,
        matrix=matrix,
        name=name,
    )


@dataclass(frozen=True)
class ModelSplit:
    """Reduced model ``a`` and accurate model ``a + a_delta``."""

    reduced: Coefficients
    accurate: Coefficients | None = None

    @property
    def trivial(self) -> bool:
        return self.accurate is None


@dataclass(frozen=True)
class GoalFunctional:
    """j(u) = integral of ``density(x, y, u)``; ``derivative`` is d density / du."""

    name: str
    density: Callable
    derivative: Callable
    linear: bool = False
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Problem:
    name: str
    split: ModelSplit
    f: Callable
    exact: Callable | None = None
    exact_gradient: Callable | None = None
    div_free: bool = False
    state_range: tuple = (-1.0, 1.0)
    params: dict = field(default_factory=dict)

    @property
    def coefficients(self) -> Coefficients:
        return self.split.reduced

    @property
    def linear(self) -> bool:
        return bool(self.params.get("linear", False))


# -- catalog ----------------------------------------------------------------------


def _sin_u(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def _sin_grad(x, y):
    return PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)


def p1_poisson() -> Problem:
    coeffs = constant_coefficients(1.0, name="poisson")
    return Problem(
        name="p1_poisson",
        split=ModelSplit(coeffs),
        f=lambda x, y: 2.0 * PI**2 * _sin_u(x, y),
        exact=_sin_u,
        exact_gradient=_sin_grad,
        div_free=True,
        state_range=(-1.5, 1.5),
        params={"linear": True},
    )


def p2_convdiff(eps: float = 1.0, bx: float = 1.0, by: float = 0.0) -> Problem:
    if eps <= 0:
        raise ConfigError("eps must be positive", "problem.eps")
    coeffs = constant_coefficients(eps, b=(bx, by), name="convdiff")

    def f(x, y):
        gx, gy = _sin_grad(x, y)
        return eps * 2.0 * PI**2 * _sin_u(x, y) + bx * gx + by * gy

    return Problem(
        name="p2_convdiff",
        split=ModelSplit(coeffs),
        f=f,
        exact=_sin_u,
        exact_gradient=_sin_grad,
        div_free=True,
        state_range=(-1.5, 1.5),
        params={"linear": True, "eps": eps, "bx": bx, "by": by},
    )


def _bracket(u):
    # smooth positive stand-in for |u|, so the zero state is admissible
    return np.sqrt(1.0 + u * u)


def _quasilinear(eps, gamma, dgamma, b0, c0, name):
    """A = eps <u>^g(x) I, b = b0 <u>^(g(x)/2), c = c0 with <u> = sqrt(1 + u^2)."""
    bx0, by0 = b0

    def A(x, y, u):
        return eps * _bracket(u) ** gamma(x, y)

    def dA(x, y, u):
        return A(x, y, u) * gamma(x, y) * u / (1.0 + u * u)

    def b(x, y, u):
        s = _bracket(u) ** (0.5 * gamma(x, y))
        return np.stack([bx0 * s, by0 * s], axis=-1)

    def db(x, y, u):
        ds = _bracket(u) ** (0.5 * gamma(x, y)) * 0.5 * gamma(x, y) * u / (1.0 + u * u)
        return np.stack([bx0 * ds, by0 * ds], axis=-1)

    def div_b(x, y, u):
        gx, gy = dgamma(x, y)
        s = _bracket(u) ** (0.5 * gamma(x, y)) * 0.5 * np.log(_bracket(u))
        return s * (bx0 * gx + by0 * gy)

    return Coefficients(
        A=A,
        dA=dA,
        b=b,
        db=db,
        div_b=div_b,
        c=lambda x, y, u: np.full(np.shape(u), float(c0)),
        dc=_zeros,
        name=name,
    )


def _frozen_state(eps, gamma0, b0, c0, w0):
    s = float(_bracket(w0))
    return constant_coefficients(eps * s**gamma0, b=(b0[0] * s ** (0.5 * gamma0), b0[1] * s ** (0.5 * gamma0)), c=c0,
                                 name="frozen_state")


def p3_quasilinear(
    eps: float = 1.0,
    gamma0: float = 1.0,
    gamma1: float = 0.5,
    bx: float = 1.0,
    by: float = 0.0,
    c0: float = 1.0,
    w0: float | None = None,
) -> Problem:
    """Quasilinear diffusion-convection with a state-dependent exponent.

    The accurate model uses the exponent ``gamma0 + gamma1 * x``.  The
    reduced model freezes the exponent at ``gamma0``; if ``w0`` is given it
    also freezes the state, which makes the reduced model linear.
    Restricted to eps > 0, c0 >= 0 and gamma0 > -1.
    """
    if eps <= 0 or c0 < 0 or gamma0 <= -1:
        raise ConfigError("p3_quasilinear requires eps > 0, c0 >= 0, gamma0 > -1", "problem")
    b0 = (bx, by)

    def gamma(x, y):
        return gamma0 + gamma1 * np.asarray(x)

    def dgamma(x, y):
        return np.full(np.shape(x), gamma1), np.zeros(np.shape(x))

    accurate = _quasilinear(eps, gamma, dgamma, b0, c0, "accurate")
    if w0 is None:
        reduced = _quasilinear(
            eps,
            lambda x, y: np.full(np.shape(x), float(gamma0)),
            lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x))),
            b0,
            c0,
            "frozen_exponent",
        )
    else:
        reduced = _frozen_state(eps, gamma0, b0, c0, w0)

    def f(x, y):
        u = _sin_u(x, y)
        ux, uy = _sin_grad(x, y)
        g = gamma(x, y)
        gx, gy = dgamma(x, y)
        br = _bracket(u)
        a = eps * br**g
        dlog = np.log(br)
        grad_a_x = a * (dlog * gx + g * u / (1.0 + u * u) * ux)
        grad_a_y = a * (dlog * gy + g * u / (1.0 + u * u) * uy)
        lap = -2.0 * PI**2 * u
        s = br ** (0.5 * g)
        return -(a * lap + grad_a_x * ux + grad_a_y * uy) + s * (bx * ux + by * uy) + c0 * u

    same = gamma1 == 0 and w0 is None
    return Problem(
        name="p3_quasilinear",
        split=ModelSplit(reduced, None if same else accurate),
        f=f,
        exact=_sin_u,
        exact_gradient=_sin_grad,
        div_free=False,
        state_range=(-2.0, 2.0),
        params={"linear": w0 is not None, "eps": eps, "gamma0": gamma0, "gamma1": gamma1,
                "bx": bx, "by": by, "c0": c0, "w0": w0},
    )


PROBLEMS = {
    "p1_poisson": p1_poisson,
    "p2_convdiff": p2_convdiff,
    "p3_quasilinear": p3_quasilinear,
}


def get_problem(name: str, **params) -> Problem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ConfigError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}", "problem.name") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(str(exc), "problem") from None


# -- goals ------------------------------------------------------------------------


def mean_value() -> GoalFunctional:
    return GoalFunctional(
        "mean_value",
        density=lambda x, y, u: np.asarray(u, dtype=float),
        derivative=lambda x, y, u: np.ones(np.shape(u)),
        linear=True,
    )


def weighted_mean(weight: str = "sine", x0: float = 0.75, y0: float = 0.75, width: float = 0.1) -> GoalFunctional:
    """j(u) = integral of psi u.

    ``weight="sine"`` uses psi = 2 pi^2 sin(pi x) sin(pi y), whose Poisson dual
    solution is sin(pi x) sin(pi y); ``"gaussian"`` is a bump at (x0, y0).
    """
    if weight == "sine":
        def psi(x, y):
            return 2.0 * PI**2 * _sin_u(x, y)
    elif weight == "gaussian":
        def psi(x, y):
            return np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / width**2)
    else:
        raise ConfigError(f"unknown weight {weight!r}", "goal.weight")
    return GoalFunctional(
        "weighted_mean",
        density=lambda x, y, u: psi(x, y) * u,
        derivative=lambda x, y, u: psi(x, y) * np.ones(np.shape(u)),
        linear=True,
        params={"weight": weight, "x0": x0, "y0": y0, "width": width},
    )


def quadratic() -> GoalFunctional:
    return GoalFunctional(
        "quadratic",
        density=lambda x, y, u: np.asarray(u, dtype=float) ** 2,
        derivative=lambda x, y, u: 2.0 * np.asarray(u, dtype=float),
    )


def zero_goal() -> GoalFunctional:
    return GoalFunctional("zero", density=lambda x, y, u: np.zeros(np.shape(u)),
                          derivative=lambda x, y, u: np.zeros(np.shape(u)), linear=True)


GOALS = {"mean_value": mean_value, "weighted_mean": weighted_mean, "quadratic": quadratic, "zero": zero_goal}


def get_goal(name: str, **params) -> GoalFunctional:
    try:
        factory = GOALS[name]
    except KeyError:
        raise ConfigError(f"unknown goal {name!r}; choose from {sorted(GOALS)}", "goal.name") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(str(exc), "goal") from None
