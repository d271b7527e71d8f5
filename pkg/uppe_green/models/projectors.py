from dataclasses import dataclass
from enum import Enum

import numpy as np

from uppe_green.models.errors import ContractError
from uppe_green.models.spectral_core import (
    PHYSICAL, SPECTRAL, Field, GridSpec, ZModes, to_rep,
)
from uppe_green.utils.general import stable_sum
from uppe_green.utils.logging import logger


class ProjectorKind(str, Enum):
    P00 = "P00"
    P01 = "P01"
    P10 = "P10"
    P11 = "P11"
    Pplus = "Pplus"
    Pminus = "Pminus"
    Pzplus = "Pzplus"
    Pzminus = "Pzminus"
    Identity = "Identity"


# quadrants summed by each kind, as (l, m): l flips omega, m flips k_z
_QUADRANTS = {
    ProjectorKind.P00: ((0, 0),),
    ProjectorKind.P01: ((0, 1),),
    ProjectorKind.P10: ((1, 0),),
    ProjectorKind.P11: ((1, 1),),
    ProjectorKind.Pplus: ((0, 0), (1, 1)),
    ProjectorKind.Pminus: ((0, 1), (1, 0)),
    ProjectorKind.Pzplus: ((0, 0), (1, 0)),
    ProjectorKind.Pzminus: ((0, 1), (1, 1)),
}


def heaviside(x):
    """Theta(x) = (1 + sign(x)) / 2, so Theta(0) = 1/2. Works on scalars and arrays."""
    out = 0.5 * (1.0 + np.sign(x))
    return float(out) if np.ndim(out) == 0 else out


def weights_at(kind, k_z, omega):
    """Projector weight at arbitrary (k_z, omega) values (broadcasting)."""
    kind = ProjectorKind(kind)
    k_z = np.asarray(k_z, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if kind == ProjectorKind.Identity:
        return np.ones(np.broadcast(k_z, omega).shape)
    total = 0.0
    for l, m in _QUADRANTS[kind]:
        total = total + heaviside((-1) ** l * omega) * heaviside((-1) ** m * k_z)
    return total


@dataclass(frozen=True, eq=False)
class ProjectorMask:
    """Weights over the (k_z, omega) lattice, shaped (1, 1, n_z, n_t)."""
    weights: np.ndarray
    kind: ProjectorKind
    grid: GridSpec

    def __add__(self, other):
        return ProjectorMask(self.weights + other.weights, self.kind, self.grid)

    def __mul__(self, other):
        return ProjectorMask(self.weights * other.weights, self.kind, self.grid)


def make_mask(kind, grid: GridSpec) -> ProjectorMask:
    kind = ProjectorKind(kind)
    k_z = grid.freqs("z").reshape(1, 1, -1, 1)
    omega = grid.freqs("t").reshape(1, 1, 1, -1)
    weights = np.broadcast_to(weights_at(kind, k_z, omega), (1, 1, grid.n_z, grid.n_t)).copy()
    return ProjectorMask(weights, kind, grid)


def apply(mask: ProjectorMask, f: Field) -> Field:
    """Multiply the (k_z, omega) spectrum of ``f`` by the mask; the input representation is restored."""
    rep = f.rep
    target = (rep[0], rep[1], SPECTRAL, SPECTRAL)
    spec = to_rep(f, target)
    out = spec.with_data(spec.data * mask.weights)
    return to_rep(out, rep)


def apply_modes(kind, modes: ZModes) -> ZModes:
    """Projector acting on a plane-wave-in-z expansion.

    Up modes carry k_z = +Re(beta_z), down modes k_z = -Re(beta_z); evanescent
    modes have no real k_z and get the Theta(0) weight.
    """
    table = modes.table
    omega = table.grid.freqs("t").reshape(1, 1, -1)
    k_z = np.real(table.values)
    up = modes.up * weights_at(kind, k_z, omega)
    down = modes.down * weights_at(kind, -k_z, omega)
    return ZModes(up, down, table)


def decompose(f: Field):
    """(forward, backward) = (Pplus f, Pminus f)."""
    forward = apply(make_mask(ProjectorKind.Pplus, f.grid), f)
    backward = f.with_data(f.data - forward.data)
    return forward, backward


@dataclass(frozen=True)
class CausalityStats:
    """Energies per (sign z, sign t) quadrant; ``total`` includes the z=0 and t=0 slices."""
    energy_pp: float
    energy_pm: float
    energy_mp: float
    energy_mm: float
    total: float

    @property
    def axis_energy(self) -> float:
        return self.total - (self.energy_pp + self.energy_pm + self.energy_mp + self.energy_mm)

    def fraction(self, quadrant: str) -> float:
        if self.total == 0.0:
            return 0.0
        return getattr(self, f"energy_{quadrant}") / self.total

    def as_dict(self):
        return {
            "energy_pp": self.energy_pp,
            "energy_pm": self.energy_pm,
            "energy_mp": self.energy_mp,
            "energy_mm": self.energy_mm,
            "total": self.total,
        }


def causality_stats(f: Field) -> CausalityStats:
    if f.rep != (PHYSICAL,) * 4:
        raise ContractError(f"causality_stats needs a fully physical field, got {f.rep}")
    grid = f.grid
    density = np.abs(f.data) ** 2
    z = grid.coords("z").reshape(1, 1, -1, 1)
    t = grid.coords("t").reshape(1, 1, 1, -1)
    measure = grid.measure()

    def quadrant(sz, st):
        sel = np.broadcast_to((np.sign(z) == sz) & (np.sign(t) == st), density.shape)
        return stable_sum(density[sel]) * measure

    stats = CausalityStats(
        energy_pp=quadrant(1, 1),
        energy_pm=quadrant(1, -1),
        energy_mp=quadrant(-1, 1),
        energy_mm=quadrant(-1, -1),
        total=stable_sum(density) * measure,
    )
    logger.debug(f"Causality stats: {stats}")
    return stats
