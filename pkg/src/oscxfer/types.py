"""Core parameter, grid, and profile types shared across the package.

Everything downstream (closed-form references, the ODE simulator, the profile
optimizer, the CLI) builds on the small value types defined here.  All rates
are angular (1/time) and all coefficient dynamics are real: the carrier
frequency is rotated away and the remaining phase freedom is fixed so that
the transfer amplitudes stay real-valued.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "SystemParams",
    "TimeGrid",
    "ProfileKind",
    "CouplingProfile",
    "TransferState",
    "ValidityWindows",
    "FidelityReport",
    "ParamIssue",
    "ProfileSingularityError",
    "validate_params",
    "profile_value",
    "profile_values",
    "DAMPING_CAP_FACTOR",
]

# Fraction of the grid step beyond which the integrator refuses a single
# step and halves instead: gamma1 * h <= DAMPING_CAP_FACTOR.
DAMPING_CAP_FACTOR = 0.05


class ProfileSingularityError(ValueError):
    """Raised when an untruncated closed-form profile is evaluated at its pole."""


@dataclass(frozen=True)
class SystemParams:
    """Physical rates of the two-oscillator cascade.

    Parameters
    ----------
    gamma : float
        Line coupling rate of the receiving oscillator (rate units).  The
        sending oscillator's coupling is the time-dependent control and lives
        in :class:`CouplingProfile`.
    transfer_time : float
        Total protocol duration T.
    gamma_loss : float, optional
        Uniform parasitic damping rate applied to both oscillators.
    eta : float, optional
        Power transmission of the connecting line, in (0, 1].
    omega0 : float, optional
        Carrier frequency (rad/time); only consulted by validity checks,
        never by the rotating-frame dynamics.

    Construction never raises: feed instances to :func:`validate_params`
    for a report of violated invariants.
    """

    gamma: float
    transfer_time: float
    gamma_loss: float = 0.0
    eta: float = 1.0
    omega0: float = 1.0e6


class ParamIssue(NamedTuple):
    severity: str  # "error" | "warning"
    message: str


def validate_params(p: SystemParams, margin: float = 10.0) -> list[ParamIssue]:
    """Report violated parameter invariants without raising.

    Hard violations come back with severity ``"error"``; soft conditions
    (currently only weak damping, ``gamma * margin <= omega0``) come back as
    ``"warning"``.  An empty list means every hard invariant holds and no
    warning fired.
    """
    issues: list[ParamIssue] = []

    def err(msg: str) -> None:
        issues.append(ParamIssue("error", msg))

    if not math.isfinite(p.gamma) or p.gamma <= 0:
        err("gamma must be positive and finite")
    if not math.isfinite(p.transfer_time) or p.transfer_time <= 0:
        err("transfer_time must be positive and finite")
    if not math.isfinite(p.gamma_loss) or p.gamma_loss < 0:
        err("gamma_loss must be >= 0")
    elif p.gamma_loss > 0 and p.gamma_loss >= p.gamma:
        err("gamma_loss < gamma required for lossy oracle")
    if not (0.0 < p.eta <= 1.0):
        err("eta must lie in (0, 1]")
    if not math.isfinite(p.omega0) or p.omega0 <= 0:
        err("omega0 must be positive and finite")
    elif p.gamma > 0 and p.gamma * margin > p.omega0:
        issues.append(
            ParamIssue(
                "warning",
                f"weak damping violated: gamma*{margin:g} exceeds omega0 "
                "(rotating-frame treatment marginal)",
            )
        )
    return issues


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with nodes ``t_j = j * dt``, ``dt = T / n_steps``."""

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.t_end <= 0 or not math.isfinite(self.t_end):
            raise ValueError("t_end must be positive and finite")
        if self.n_steps < 2:
            raise ValueError("n_steps must be at least 2")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def nodes(self) -> np.ndarray:
        """All node times, computed as j*dt (not accumulated)."""
        return np.arange(self.n_nodes) * self.dt


class ProfileKind(enum.Enum):
    CONSTANT = "constant"
    OPTIMAL_CLOSED_FORM = "optimal_closed_form"
    SAMPLED_GRID = "sampled_grid"


@dataclass(frozen=True)
class CouplingProfile:
    """Time-dependent coupling rate gamma1(t) of the sending oscillator.

    Three kinds are supported:

    * ``CONSTANT`` — fixed value ``gamma1``.
    * ``OPTIMAL_CLOSED_FORM`` — the variational optimum
      ``gamma1(t) = gamma / (exp(2*gamma*(T - t)) - 1)``, which diverges at
      ``t = T`` and therefore is normally truncated.
    * ``SAMPLED_GRID`` — node values on a :class:`TimeGrid`, interpreted as
      piecewise-constant from the left node of each cell (the same
      convention the quadrature and the simulator use, so the two agree
      bit-for-bit).

    ``truncation`` holds the profile at ``gamma1_max`` on the final window
    ``[T - truncation, T]``; when unset, ``gamma1_max`` defaults to
    ``1 / (2 * truncation)``, the rate whose drain time matches the window.
    """

    kind: ProfileKind
    gamma1: Optional[float] = None
    grid: Optional[TimeGrid] = None
    values: Optional[np.ndarray] = None
    truncation: Optional[float] = None
    gamma1_max: Optional[float] = None

    def __post_init__(self) -> None:
        if self.truncation is not None:
            if self.truncation == 0.0:
                raise ValueError(
                    "truncation = 0 is rejected: the closed-form profile is "
                    "singular at t = T; pass None to leave it untruncated"
                )
            if self.truncation < 0 or not math.isfinite(self.truncation):
                raise ValueError("truncation must be positive")
            if self.gamma1_max is None:
                object.__setattr__(self, "gamma1_max", 1.0 / (2.0 * self.truncation))
        if self.gamma1_max is not None and self.gamma1_max < 0:
            raise ValueError("gamma1_max must be >= 0")

        if self.kind is ProfileKind.CONSTANT:
            if self.gamma1 is None or self.gamma1 < 0 or not math.isfinite(self.gamma1):
                raise ValueError("constant profile needs gamma1 >= 0")
        elif self.kind is ProfileKind.SAMPLED_GRID:
            if self.grid is None or self.values is None:
                raise ValueError("sampled profile needs a grid and node values")
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (self.grid.n_nodes,):
                raise ValueError(
                    f"expected {self.grid.n_nodes} node values, got {vals.shape}"
                )
            if not np.all(np.isfinite(vals)) or np.any(vals < 0):
                raise ValueError("profile values must be finite and >= 0")
            object.__setattr__(self, "values", vals)

    @classmethod
    def constant(
        cls,
        gamma1: float,
        truncation: Optional[float] = None,
        gamma1_max: Optional[float] = None,
    ) -> "CouplingProfile":
        return cls(ProfileKind.CONSTANT, gamma1=gamma1, truncation=truncation,
                   gamma1_max=gamma1_max)

    @classmethod
    def optimal(
        cls,
        truncation: Optional[float],
        gamma1_max: Optional[float] = None,
    ) -> "CouplingProfile":
        return cls(ProfileKind.OPTIMAL_CLOSED_FORM, truncation=truncation,
                   gamma1_max=gamma1_max)

    @classmethod
    def sampled(
        cls,
        grid: TimeGrid,
        values: np.ndarray,
        truncation: Optional[float] = None,
        gamma1_max: Optional[float] = None,
    ) -> "CouplingProfile":
        return cls(ProfileKind.SAMPLED_GRID, grid=grid, values=values,
                   truncation=truncation, gamma1_max=gamma1_max)


def _optimal_closed_form(gamma: float, t_remaining: float) -> float:
    """gamma / (exp(2*gamma*t_remaining) - 1), safe against overflow."""
    x = 2.0 * gamma * t_remaining
    if x <= 0.0:
        raise ProfileSingularityError(
            "closed-form coupling profile diverges at t = T; apply a truncation"
        )
    if x > 700.0:  # expm1 would overflow; the value has long underflowed
        return gamma * math.exp(-x)
    return gamma / math.expm1(x)


def profile_value(c: CouplingProfile, p: SystemParams, t: float) -> float:
    """Evaluate the coupling rate gamma1 at time ``t``.

    Inside the truncation window ``[T - truncation, T]`` every profile kind
    returns the hold value ``gamma1_max``.  Sampled profiles return the value
    at the left node of the enclosing cell (exact on the nodes themselves).
    """
    T = p.transfer_time
    if c.truncation is not None and t >= T - c.truncation:
        return float(c.gamma1_max)  # type: ignore[arg-type]

    if c.kind is ProfileKind.CONSTANT:
        return float(c.gamma1)  # type: ignore[arg-type]
    if c.kind is ProfileKind.OPTIMAL_CLOSED_FORM:
        return _optimal_closed_form(p.gamma, T - t)
    # SAMPLED_GRID: left-endpoint lookup with node snapping
    grid = c.grid
    assert grid is not None and c.values is not None
    s = t / grid.dt
    j = math.floor(s)
    if s - j > 1.0 - 1e-9:  # within float fuzz of the next node
        j += 1
    j = min(max(j, 0), grid.n_nodes - 1)
    return float(c.values[j])


def profile_values(c: CouplingProfile, p: SystemParams, ts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`profile_value` over an array of times."""
    return np.array([profile_value(c, p, float(t)) for t in np.asarray(ts)])


@dataclass
class TransferState:
    """Result of integrating the cascade's coefficient equations.

    The receiving oscillator's annihilation operator is expanded as::

        a2(t) = a21(t) a1(0) + a22(t) a2(0) + noise-kernel terms

    so ``a21`` is the state-independent transfer amplitude; there is no
    initial-state input anywhere by construction.  Kernels are stored as
    lower-triangular arrays ``k[i, j] = k(t_i, t_j)`` when kernel tracking
    is enabled (O(n^2) memory) and are ``None`` otherwise.

    Lossy runs carry the additional vacuum-channel kernels needed for the
    commutator sum rule to close: ``kl1`` (oscillator-1 loss port into a1),
    ``kl12`` (oscillator-1 loss port forwarded into a2), ``kl2``
    (oscillator-2 loss port into a2) and ``kv2`` (the line's beam-splitter
    port carrying the discarded 1 - eta flux into a2).
    """

    params: SystemParams
    grid: TimeGrid
    a11: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    k1: Optional[np.ndarray] = None
    k2: Optional[np.ndarray] = None
    kl1: Optional[np.ndarray] = None
    kl12: Optional[np.ndarray] = None
    kl2: Optional[np.ndarray] = None
    kv2: Optional[np.ndarray] = None

    @property
    def fidelity(self) -> float:
        """Transfer amplitude at the end of the protocol, a21(T)."""
        return float(self.a21[-1])

    def fidelity_curve(self) -> tuple[np.ndarray, np.ndarray]:
        """(times, a21) series over the whole grid."""
        return self.grid.nodes(), self.a21.copy()


@dataclass(frozen=True)
class ValidityWindows:
    """Scale-separation checks for the physical validity of the rate model.

    Both windows restate the same requirements; they are reported in rate
    form and in quality-factor form because hardware specs quote either.
    ``margin`` operationalizes "much greater than" as a ratio.
    """

    margin: float
    q2: float                      # omega0 / gamma of the receiver
    q1_min: float                  # omega0 / gamma1_max of the sender
    carrier_above_coupling: bool   # omega0 >= margin * gamma1_max
    coupling_above_drain: bool     # gamma1_max >= margin * gamma / (1 - F)
    q_separation: bool             # (1 - F) * q2 >= margin * q1_min
    q_floor: bool                  # q1_min >= margin

    @property
    def all_ok(self) -> bool:
        return (self.carrier_above_coupling and self.coupling_above_drain
                and self.q_separation and self.q_floor)

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "q2": self.q2,
            "q1_min": self.q1_min,
            "carrier_above_coupling": self.carrier_above_coupling,
            "coupling_above_drain": self.coupling_above_drain,
            "q_separation": self.q_separation,
            "q_floor": self.q_floor,
            "all_ok": self.all_ok,
        }


@dataclass(frozen=True)
class FidelityReport:
    """Predicted fidelity with its infidelity budget broken out by mechanism.

    Terms: ``exponential`` is the finite-duration term ``exp(-2*gamma*T)/2``,
    ``truncation`` is the profile-cutoff term ``gamma*dt_cut``, and the two
    loss terms are ``1 - sqrt(eta)`` (line) and ``1 - exp(-gamma_loss*T)``
    (oscillators).
    """

    fidelity: float
    exponential: float
    truncation: float
    loss_line: float = 0.0
    loss_oscillator: float = 0.0
    validity: Optional[ValidityWindows] = None
    warnings: tuple[str, ...] = field(default=())

    @property
    def infidelity_total(self) -> float:
        return (self.exponential + self.truncation
                + self.loss_line + self.loss_oscillator)

    def to_dict(self) -> dict:
        out = {
            "fidelity": self.fidelity,
            "infidelity_terms": {
                "exponential": self.exponential,
                "truncation": self.truncation,
                "loss_line": self.loss_line,
                "loss_oscillator": self.loss_oscillator,
            },
            "infidelity_total": self.infidelity_total,
            "warnings": list(self.warnings),
        }
        if self.validity is not None:
            out["validity"] = self.validity.to_dict()
        return out
