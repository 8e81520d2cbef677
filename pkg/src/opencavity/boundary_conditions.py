"""Open-boundary condition catalog.

Velocity: ``dn`` (do-nothing) or ``ddn`` (directional do-nothing, which adds
backflow damping where fluid re-enters).  Temperature: ``n`` (homogeneous
Neumann) or ``n_beta1`` / ``n_beta2`` (heat-transfer condition coupling the
normal flux to ``u beta(v.n) (v.n)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DN = "dn"
DDN = "ddn"
VELOCITY_CONDITIONS = (DN, DDN)
TEMPERATURE_CONDITIONS = ("n", "n_beta1", "n_beta2")


def beta1(s):
    """Smoothed switch: close to 1 for inflow, close to 0 for outflow."""
    return 0.5 - np.arctan(100.0 * np.asarray(s, dtype=float)) / np.pi


def beta2(s):
    """Step switch: 1/2 on inflow (s < 0), 0 otherwise."""
    return np.where(np.asarray(s, dtype=float) < 0.0, 0.5, 0.0)


@dataclass(frozen=True)
class BetaSpec:
    """A bounded weight function for the heat-transfer condition.

    ``bound`` is the user-declared sup norm; it is spot-checked on a sample
    grid at construction, nothing more.
    """

    kind: str
    func: Callable
    bound: float
    lipschitz: bool = False

    def __post_init__(self):
        if not np.isfinite(self.bound) or self.bound < 0:
            raise ValueError(f"beta bound must be finite and non-negative, got {self.bound}")
        s = np.concatenate([-np.logspace(-6, 3, 200), [0.0], np.logspace(-6, 3, 200)])
        vals = np.asarray(self.func(s), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"beta {self.kind!r} is not finite on the sample grid")
        if np.max(np.abs(vals)) > self.bound * (1 + 1e-12):
            raise ValueError(f"beta {self.kind!r} exceeds its declared bound {self.bound}")

    def __call__(self, s):
        return self.func(s)

    @classmethod
    def custom(cls, func, bound, lipschitz=False):
        return cls("custom", func, float(bound), lipschitz)


BETA1 = BetaSpec("beta1", beta1, 1.0, lipschitz=True)
BETA2 = BetaSpec("beta2", beta2, 0.5, lipschitz=False)
BETA_ZERO = BetaSpec.custom(lambda s: np.zeros_like(np.asarray(s, dtype=float)), 0.0, lipschitz=True)

_BUILTIN_BETAS = {"n_beta1": BETA1, "n_beta2": BETA2}


@dataclass(frozen=True)
class BcCombo:
    """Velocity condition paired with a temperature condition on the open boundary."""

    velocity: str
    temperature: str
    beta: Optional[BetaSpec] = None

    def __post_init__(self):
        if self.velocity not in VELOCITY_CONDITIONS:
            raise ValueError(f"velocity condition must be one of {VELOCITY_CONDITIONS}, got {self.velocity!r}")
        if self.temperature == "n":
            if self.beta is not None:
                raise ValueError("the Neumann condition takes no beta")
        elif self.temperature in _BUILTIN_BETAS:
            if self.beta is None:
                object.__setattr__(self, "beta", _BUILTIN_BETAS[self.temperature])
        elif self.temperature == "n_beta":
            if self.beta is None:
                raise ValueError("temperature condition 'n_beta' requires a beta specification")
        else:
            raise ValueError(f"unknown temperature condition {self.temperature!r}")

    @classmethod
    def parse(cls, text: str) -> "BcCombo":
        """Parse labels such as ``"ddn-n_beta1"`` (case-insensitive)."""
        try:
            v, t = text.strip().lower().replace("β", "beta").split("-", 1)
        except ValueError:
            raise ValueError(f"cannot parse boundary combination {text!r}") from None
        return cls(v, t.replace("nbeta", "n_beta"))

    @property
    def label(self) -> str:
        v = self.velocity.upper()
        if self.temperature == "n":
            return f"{v}-N"
        return f"{v}-N_{self.beta.kind}"

    @property
    def key(self) -> str:
        return f"{self.velocity}-{self.temperature}"


# Column order of the result tables.
BENCHMARK_COMBOS = (
    BcCombo(DN, "n"),
    BcCombo(DDN, "n"),
    BcCombo(DN, "n_beta1"),
    BcCombo(DDN, "n_beta1"),
    BcCombo(DN, "n_beta2"),
    BcCombo(DDN, "n_beta2"),
)


def heat_flux_integrand(u_val, v_normal, beta: Optional[BetaSpec]):
    """Boundary heat flux density ``u beta(v.n) (v.n)``; zero for Neumann."""
    u_val = np.asarray(u_val, dtype=float)
    v_normal = np.asarray(v_normal, dtype=float)
    if beta is None:
        return np.zeros(np.broadcast(u_val, v_normal).shape)
    return u_val * beta(v_normal) * v_normal


def negative_part(s):
    """``(s)_- = min(s, 0)``."""
    return np.minimum(np.asarray(s, dtype=float), 0.0)
