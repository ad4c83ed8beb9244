"""Upwind weighting functions r(z) and their scaling functions
K(z) = 1 - (1 - r(z)) z.

Every catalog entry has the form r(z) = 1/2 + sign(z) s(|z|) with s >= 0, so
r(z) + r(-z) = 1 holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _langevin(x):
    """coth(x) - 1/x, odd, with a series branch near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.1
    xs = x[small]
    x2 = xs * xs
    out[small] = xs * (1 / 3 - x2 * (1 / 45 - x2 * (2 / 945 - x2 / 4725)))
    xl = x[~small]
    out[~small] = 1.0 / np.tanh(xl) - 1.0 / xl
    return out


def _langevin_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.1
    x2 = x[small] ** 2
    out[small] = 1 / 3 - x2 * (1 / 15 - x2 * (2 / 189 - x2 / 675))
    xl = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = 1.0 / xl**2 - 1.0 / np.sinh(xl) ** 2
    return out


def bernoulli(z):
    """z / (e^z - 1) evaluated without overflow or cancellation."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    zp = np.where(nz & (z > 0), z, 1.0)
    zn = np.where(nz & (z < 0), z, -1.0)
    pos = zp * np.exp(-zp) / (-np.expm1(-zp))
    neg = zn / np.expm1(zn)
    out = np.where(z > 0, pos, np.where(z < 0, neg, out))
    return out


# half-offsets s(|z|) and their derivatives, each for |z| >= 0


def _s_exponential(a, m):
    return 0.5 * _langevin(0.5 * a)


def _ds_exponential(a, m):
    return 0.25 * _langevin_prime(0.5 * a)


def _s_full(a, m):
    return np.where(a > 0, 0.5, 0.0)


def _ds_zero(a, m):
    return np.zeros_like(a)


def _s_linear(a, m):
    return np.minimum(a / (2.0 * m), 0.5)


def _ds_linear(a, m):
    return np.where(a < m, 1.0 / (2.0 * m), 0.0)


def _s_step(a, m):
    return np.where(a > m, 0.5, 0.0)


def _s_samarskij(a, m):
    return 0.5 * a / (2.0 + a)


def _ds_samarskij(a, m):
    return 1.0 / (2.0 + a) ** 2


def _s_tanh(a, m):
    return 0.5 * np.tanh(a)


def _ds_tanh(a, m):
    return 0.5 / np.cosh(np.minimum(a, 350.0)) ** 2


def _s_ikeda(a, m):
    # sigma = max(0, 1 - 2/|z|) vanishes for |z| <= 2
    safe = np.where(a > 2.0, a, 2.0)
    return 0.5 * (1.0 - 2.0 / safe)


def _ds_ikeda(a, m):
    safe = np.where(a > 2.0, a, 1.0)
    return np.where(a > 2.0, 1.0 / safe**2, 0.0)


def _s_central(a, m):
    return np.zeros_like(a)


_CATALOG = {
    "exponential": (_s_exponential, _ds_exponential, (), None),
    "full_upwind": (_s_full, _ds_zero, (0.0,), None),
    "piecewise_linear": (_s_linear, _ds_linear, (), 2.0),
    "step": (_s_step, _ds_zero, (), 1.0),
    "samarskij": (_s_samarskij, _ds_samarskij, (), None),
    "tanh": (_s_tanh, _ds_tanh, (), None),
    "ikeda": (_s_ikeda, _ds_ikeda, (2.0,), None),
    # r == 1/2; not an admissible upwind scheme, used as a reference
    "central": (_s_central, _ds_zero, (), None),
}

SCHEME_NAMES = tuple(_CATALOG)


@dataclass(frozen=True)
class UpwindScheme:
    """A named weighting function with optional parameter ``m``."""

    name: str = "exponential"
    m: float | None = None
    _s: Callable = field(init=False, repr=False, compare=False)
    _ds: Callable = field(init=False, repr=False, compare=False)
    kinks: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            s, ds, kinks, default_m = _CATALOG[self.name]
        except KeyError:
            raise ValueError(f"unknown upwind scheme {self.name!r}; choose from {SCHEME_NAMES}") from None
        m = self.m if self.m is not None else default_m
        if self.name == "piecewise_linear" and not 0 < m <= 8:
            raise ValueError("piecewise_linear requires 0 < m <= 8")
        if self.name == "step" and not 0 <= m <= 2:
            raise ValueError("step requires 0 <= m <= 2")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_ds", ds)
        if self.name in ("piecewise_linear", "step"):
            kinks = (float(m),)
        object.__setattr__(self, "kinks", tuple(kinks))

    @property
    def label(self) -> str:
        return self.name if self.m is None else f"{self.name}(m={self.m:g})"

    def r(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 + np.sign(z) * self._s(np.abs(z), self.m)

    def K(self, z):
        z = np.asarray(z, dtype=float)
        if self.name == "exponential":
            return bernoulli(z)
        return 1.0 - (1.0 - self.r(z)) * z

    def dr(self, z):
        """dr/dz; central differences (step 1e-6) at the kinks of piecewise schemes."""
        z = np.asarray(z, dtype=float)
        a = np.abs(z)
        out = np.asarray(self._ds(a, self.m), dtype=float)
        if self.name in ("piecewise_linear", "ikeda"):
            at_kink = np.zeros(a.shape, dtype=bool)
            for k in self.kinks:
                at_kink |= a == k
            if at_kink.any():
                zk = z[at_kink]
                out = np.array(out, copy=True)
                out[at_kink] = (self.r(zk + 1e-6) - self.r(zk - 1e-6)) / 2e-6
        return out

    def limit(self, sign):
        """lim r(z) for z -> sign * infinity."""
        return 1.0 if sign > 0 else 0.0


def eval_r(scheme: UpwindScheme, z):
    return scheme.r(z)


def eval_K(scheme: UpwindScheme, z):
    return scheme.K(z)


def get_scheme(name: str, m: float | None = None) -> UpwindScheme:
    return UpwindScheme(name, m)


# -- property verification --------------------------------------------------------

PROPERTIES = ("monot", "bnds", "mmatr", "sym", "possdef", "cont")

GRID = np.round(np.arange(-5000, 5001) * 0.01, 12)
TOL = 1e-12


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class PropertyReport:
    scheme: str
    results: tuple

    def __getitem__(self, name) -> PropertyResult:
        for res in self.results:
            if res.name == name:
                return res
        raise KeyError(name)

    @property
    def passed(self) -> dict:
        return {res.name: res.passed for res in self.results}

    @property
    def failures(self) -> list:
        return [res.name for res in self.results if not res.passed]


def _sample_points(seed):
    rng = np.random.default_rng(seed)
    extra = rng.uniform(-50.0, 50.0, 2000)
    return np.unique(np.concatenate([GRID, extra, [0.0]]))


def _first(z, mask):
    idx = np.flatnonzero(mask)
    return float(z[idx[0]]) if len(idx) else None


def verify_scheme_properties(scheme: UpwindScheme, seed: int = 0) -> PropertyReport:
    """Check the six admissibility properties by dense sampling on [-50, 50].

    The grid has step 0.01, augmented by 2000 seeded uniform points.  The
    Lipschitz test compares the largest difference quotient of z r(z) on
    nested grids (steps 1e-2 and 1e-4): a jump makes the quotient grow like
    the inverse step, a Lipschitz function keeps it bounded.
    """
    z = _sample_points(seed)
    r = scheme.r(z)
    out = []

    bad = np.diff(r) < -TOL
    out.append(PropertyResult("monot", not bad.any(), _first(z[:-1], bad)))

    far = 10.0 ** np.arange(2, 9)
    lo, hi = scheme.r(-far), scheme.r(far)
    ok = abs(lo[-1]) <= 1e-6 and abs(1.0 - hi[-1]) <= 1e-6
    ok &= bool(np.all(np.diff(lo) <= TOL) and np.all(np.diff(hi) >= -TOL))
    out.append(
        PropertyResult("bnds", ok, None if ok else float(far[-1]), f"r(-1e8)={lo[-1]:.3g}, r(1e8)={hi[-1]:.3g}")
    )

    bad = 1.0 + z * r < -TOL
    out.append(PropertyResult("mmatr", not bad.any(), _first(z, bad)))

    defect = np.abs((1.0 - r - scheme.r(-z)) * z)
    bad = defect > TOL * np.maximum(1.0, np.abs(z))
    out.append(PropertyResult("sym", not bad.any(), _first(z, bad)))

    bad = (r - 0.5) * z < -TOL
    out.append(PropertyResult("possdef", not bad.any(), _first(z, bad)))

    q = []
    witness = None
    for step in (1e-2, 1e-4):
        zz = np.linspace(-50.0, 50.0, int(round(100 / step)) + 1)
        g = zz * scheme.r(zz)
        quot = np.abs(np.diff(g)) / np.diff(zz)
        k = int(np.argmax(quot))
        q.append(quot[k])
        witness = 0.5 * (zz[k] + zz[k + 1])
    ok = q[1] <= 1.5 * q[0] + 1e-9
    out.append(
        PropertyResult(
            "cont", bool(ok), None if ok else float(witness), f"max quotient {q[0]:.4g} (h=1e-2), {q[1]:.4g} (h=1e-4)"
        )
    )
    return PropertyReport(scheme.label, tuple(out))


def check_k_relation(scheme: UpwindScheme, z=None) -> float:
    """Largest scaled defect of 1 + z r(z) = K(-z) on the sample grid."""
    z = GRID if z is None else np.asarray(z, dtype=float)
    lhs = 1.0 + z * scheme.r(z)
    rhs = scheme.K(-z)
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
