"""Mapping lumped-element LC resonators onto the cascade's rate parameters.

A series RLC damps the charge coordinate at gamma = R / (2L); a parallel RLC
damps the voltage coordinate at gamma = 1 / (2RC).  Both share
omega0 = 1 / sqrt(LC).  The ground-state spread of the damped coordinate
(charge for series, voltage for parallel) sets the scale on which quantum
effects live and is reported alongside the rates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .oracles import validity_windows
from .types import SystemParams, ValidityWindows

__all__ = [
    "Topology",
    "CircuitSpec",
    "CircuitRates",
    "circuit_to_rates",
    "rates_to_validity",
    "HBAR_SI",
]

HBAR_SI = 1.054571817e-34  # J*s


class Topology(enum.Enum):
    SERIES_LC = "series"
    PARALLEL_LC = "parallel"


@dataclass(frozen=True)
class CircuitSpec:
    """R, L, C of one oscillator (SI units unless you rescale consistently)."""

    topology: Topology
    resistance: float
    inductance: float
    capacitance: float

    def __post_init__(self) -> None:
        for name in ("resistance", "inductance", "capacitance"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite")


@dataclass(frozen=True)
class CircuitRates:
    """Rates and scales derived from a circuit spec.

    ``ground_state_scale`` is the zero-point spread of the damped coordinate:
    charge (coulomb) for a series circuit, voltage (volt) for a parallel one,
    as named by ``scale_coordinate``.
    """

    gamma: float
    omega0: float
    ground_state_scale: float
    q_factor: float
    scale_coordinate: str


def circuit_to_rates(spec: CircuitSpec, hbar: float = HBAR_SI) -> CircuitRates:
    """Damping rate, resonance frequency, zero-point scale and Q of a circuit."""
    omega0 = 1.0 / math.sqrt(spec.inductance * spec.capacitance)
    if spec.topology is Topology.SERIES_LC:
        gamma = spec.resistance / (2.0 * spec.inductance)
        scale = math.sqrt(hbar / (2.0 * omega0 * spec.inductance))
        coord = "charge"
    else:
        gamma = 1.0 / (2.0 * spec.resistance * spec.capacitance)
        scale = math.sqrt(hbar * omega0 / (2.0 * spec.capacitance))
        coord = "voltage"
    return CircuitRates(
        gamma=gamma,
        omega0=omega0,
        ground_state_scale=scale,
        q_factor=omega0 / gamma,
        scale_coordinate=coord,
    )


def rates_to_validity(gamma1_max: float, sender: CircuitSpec,
                      receiver: CircuitSpec, target_fidelity: float,
                      margin: float = 10.0,
                      hbar: float = HBAR_SI) -> ValidityWindows:
    """Scale-separation check for a transfer between two physical circuits.

    The model assumes identical oscillators: resonance frequencies that
    disagree by more than one part per million are refused rather than
    extrapolated.  The receiver's damping sets the drain rate; the sender's
    coupling is assumed tunable up to ``gamma1_max``.
    """
    r_send = circuit_to_rates(sender, hbar=hbar)
    r_recv = circuit_to_rates(receiver, hbar=hbar)
    w_ref = 0.5 * (r_send.omega0 + r_recv.omega0)
    if abs(r_send.omega0 - r_recv.omega0) > 1e-6 * w_ref:
        raise ValueError(
            "non-identical oscillators: resonance frequencies differ by more "
            f"than 1 ppm ({r_send.omega0:.9e} vs {r_recv.omega0:.9e})"
        )
    p = SystemParams(
        gamma=r_recv.gamma,
        transfer_time=1.0,  # not consulted by the windows
        omega0=w_ref,
    )
    return validity_windows(p, gamma1_max, target_fidelity, margin=margin)
