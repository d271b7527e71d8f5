from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from uppe_green.models.errors import ContractError, GridError, StepError
from uppe_green.models.green import GreenSpec
from uppe_green.models.projectors import ProjectorKind, apply, make_mask
from uppe_green.models.spectral_core import (
    PHYSICAL, SPECTRAL, AXES, BetaZTable, Field, GridSpec,
    forward_slice, forward_transform, inverse_slice, inverse_transform,
)
from uppe_green.utils.general import energy
from uppe_green.utils.logging import logger


class SourceKind(str, Enum):
    POINT_MOLLIFIED = "point_mollified"
    GAUSSIAN_PULSE = "gaussian_pulse"
    PLANE_WAVE_PACKET = "plane_wave_packet"
    CUSTOM_GRID = "custom_grid"


class DirectionFilter(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Prescribed right-hand side Q(x, y, z, t).

    ``carrier`` is (k0, omega0) for the pulse kinds: gaussian_pulse is the real
    pulse envelope * cos(k0 z - omega0 t), plane_wave_packet the complex packet
    envelope(z, t) * exp(i k0 z - i omega0 t), uniform in x and y.
    """
    kind: SourceKind = SourceKind.POINT_MOLLIFIED
    center: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    widths: Tuple[float, float, float, float] = (2.0, 2.0, 2.0, 2.0)
    amplitude: float = 1.0
    direction_filter: DirectionFilter = DirectionFilter.NONE
    carrier: Tuple[float, float] = (0.0, 0.0)
    data: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        object.__setattr__(self, "direction_filter", DirectionFilter(self.direction_filter))

    def validate(self, grid: GridSpec):
        if self.kind == SourceKind.CUSTOM_GRID:
            if self.data is None or np.shape(self.data) != grid.shape:
                raise GridError(f"custom_grid source must have shape {grid.shape}")
            return
        for name, width, step in zip(AXES, self.widths, grid.steps):
            if self.kind == SourceKind.PLANE_WAVE_PACKET and name in "xy":
                continue
            if width < 2.0 * step * (1 - 1e-12):
                raise GridError(f"source width along {name} must be >= 2 steps ({2 * step}), got {width}")

    def _envelope_factor(self, axis: int, values):
        u = (values - self.center[axis]) / self.widths[axis]
        if self.kind == SourceKind.POINT_MOLLIFIED:
            return np.exp(-0.5 * u ** 2) / (self.widths[axis] * np.sqrt(2.0 * np.pi))
        return np.exp(-0.5 * u ** 2)

    def _analytic(self, x, y, z, t):
        k0, omega0 = self.carrier
        phase = k0 * (z - self.center[2]) - omega0 * (t - self.center[3])
        if self.kind == SourceKind.PLANE_WAVE_PACKET:
            return self.amplitude * self._envelope_factor(2, z) * self._envelope_factor(3, t) * np.exp(1j * phase)
        value = self.amplitude
        for axis, coords in enumerate((x, y, z, t)):
            value = value * self._envelope_factor(axis, coords)
        if self.kind == SourceKind.GAUSSIAN_PULSE:
            value = value * np.cos(phase)
        return value

    def slice(self, grid: GridSpec, z: float) -> np.ndarray:
        """Physical (x, y, t) values at an arbitrary z."""
        return SourceSampler(self, grid).physical(z)


def make_source_field(source: SourceSpec, grid: GridSpec) -> Field:
    source.validate(grid)
    if source.kind == SourceKind.CUSTOM_GRID:
        q = Field.physical(grid, source.data)
    else:
        x, y, z, t = np.meshgrid(*(grid.coords(a) for a in AXES), indexing="ij")
        q = Field.physical(grid, source._analytic(x, y, z, t) * np.ones(grid.shape))
    if source.direction_filter == DirectionFilter.FORWARD:
        q = apply(make_mask(ProjectorKind.Pplus, grid), q)
    elif source.direction_filter == DirectionFilter.BACKWARD:
        q = apply(make_mask(ProjectorKind.Pminus, grid), q)
    return q


class SourceSampler:
    """Source slices at arbitrary z for one grid.

    Analytic sources are evaluated directly. Filtered and custom sources are
    built and transformed once, then interpolated trigonometrically in z.
    """

    def __init__(self, source: SourceSpec, grid: GridSpec):
        source.validate(grid)
        self.source = source
        self.grid = grid
        self._mesh = None
        self._spectrum = None
        if source.kind != SourceKind.CUSTOM_GRID and source.direction_filter == DirectionFilter.NONE:
            self._mesh = np.meshgrid(grid.coords("x"), grid.coords("y"), grid.coords("t"), indexing="ij")
        else:
            self._spectrum = forward_transform(make_source_field(source, grid), AXES).data
            self._k_z = grid.freqs("z").reshape(1, 1, -1, 1)

    def physical(self, z: float) -> np.ndarray:
        if self._mesh is None:
            return inverse_slice(self.spectral(z), self.grid)
        x, y, t = self._mesh
        return np.asarray(self.source._analytic(x, y, z, t), dtype=np.complex128) * np.ones_like(x)

    def spectral(self, z: float) -> np.ndarray:
        """(k_x, k_y, omega) values at z."""
        if self._mesh is not None:
            return forward_slice(self.physical(z), self.grid)
        values = np.sum(self._spectrum * np.exp(1j * self._k_z * z), axis=2)
        return values / (self.grid.n_z * self.grid.d_z)


@dataclass(frozen=True, eq=False)
class FieldSlice:
    """Field at one z, spectral in (k_x, k_y, omega)."""
    z: float
    data: np.ndarray
    grid: GridSpec

    def physical(self) -> np.ndarray:
        return inverse_slice(self.data, self.grid)


def zero_slice(grid: GridSpec, z: float = 0.0) -> FieldSlice:
    return FieldSlice(z, np.zeros((grid.n_x, grid.n_y, grid.n_t), dtype=np.complex128), grid)


def step(fieldslice: FieldSlice, source_slice: np.ndarray, dz: float, table: BetaZTable) -> FieldSlice:
    """Exponential-integrator step with the source held constant over the step.

    E(z+dz) = exp(i b dz) E(z) + (exp(i b dz) - 1)/(i b) * Q/(2 i b), per mode.
    """
    if not dz > 0:
        raise StepError(f"dz must be positive, got {dz}")
    phase = table.phase(dz)
    inv = table.inverse()
    # (p - 1)/(i b) * Q/(2 i b) = -(p - 1) Q / (2 b^2)
    forced = -0.5 * (phase - 1.0) * source_slice * inv ** 2
    return FieldSlice(fieldslice.z + dz, phase * fieldslice.data + forced, fieldslice.grid)


def march(initial: Optional[FieldSlice], source: Optional[SourceSpec], z_final: float, dz: float,
          table: BetaZTable, decimate: int = 1,
          on_slice: Optional[Callable[[int, FieldSlice], None]] = None) -> List[FieldSlice]:
    """Step from ``initial.z`` to ``z_final``; returns every ``decimate``-th slice (first and last always kept)."""
    grid = table.grid
    if initial is None:
        initial = zero_slice(grid)
    if not dz > 0:
        raise StepError(f"dz must be positive, got {dz}")
    span = z_final - initial.z
    n_steps = int(round(span / dz))
    if n_steps <= 0 or abs(n_steps * dz - span) > 1e-9 * max(abs(span), dz):
        raise StepError(f"dz = {dz} does not divide the march length {span}")
    if decimate < 1:
        raise StepError(f"decimate must be >= 1, got {decimate}")
    sampler = SourceSampler(source, grid) if source is not None else None

    logger.info(f"Marching {n_steps} steps of dz={dz:g} from z={initial.z:g}")
    current = initial
    kept = [current]
    if on_slice:
        on_slice(0, current)
    for n in range(n_steps):
        # source sampled mid-step
        z_mid = initial.z + (n + 0.5) * dz
        q = sampler.spectral(z_mid) if sampler is not None else 0.0
        current = step(current, q, dz, table)
        # pin the coordinate against accumulated rounding
        current = FieldSlice(initial.z + (n + 1) * dz, current.data, grid)
        if (n + 1) % decimate == 0 or n + 1 == n_steps:
            kept.append(current)
            if on_slice:
                on_slice(n + 1, current)
    return kept


def solve_convolution(q: Field, spec: GreenSpec, periodic_z: bool = False) -> Field:
    """Convolve q with the Theta(z)-gated UPPE kernel.

    (x, y, t) are handled spectrally; z is a direct sum over slices with the
    Theta(0) = 1/2 kernel weight at zero separation. With ``periodic_z`` the sum
    wraps around the z window.
    """
    if q.rep != (PHYSICAL,) * 4:
        raise ContractError(f"solve_convolution needs a fully physical source, got {q.rep}")
    grid = q.grid
    table = spec.table
    source = forward_transform(q, "xyt").data
    weights = np.sum(np.abs(source) ** 2, axis=2)
    logger.debug(f"Convolution: excluded source mass {table.excluded_fraction(np.sqrt(weights)):.3e}")

    base = table.inverse() / 2j
    out = np.zeros(grid.shape, dtype=np.complex128)
    n_z = grid.n_z
    if periodic_z:
        # kernel sampled on the centered z window; negative separations are gated off
        for j, zeta in enumerate(grid.coords("z")):
            if zeta < 0:
                continue
            m = j - grid.origin_index("z")
            kernel = base * table.phase(zeta) * (0.5 if m == 0 else 1.0)
            out += kernel[:, :, None, :] * np.roll(source, m, axis=2)
    else:
        for m in range(n_z):
            kernel = base * table.phase(m * grid.d_z) * (0.5 if m == 0 else 1.0)
            out[:, :, m:, :] += kernel[:, :, None, :] * source[:, :, :n_z - m, :]
    out *= grid.d_z
    return inverse_transform(Field(out, (SPECTRAL, SPECTRAL, PHYSICAL, SPECTRAL), grid), "xyt")


def source_direction_report(q: Field) -> Tuple[float, float]:
    """(forward, backward) energy fractions of q under Pplus and Pminus."""
    forward = apply(make_mask(ProjectorKind.Pplus, q.grid), q)
    backward = apply(make_mask(ProjectorKind.Pminus, q.grid), q)
    e_f = energy(forward.data)
    e_b = energy(backward.data)
    total = e_f + e_b
    if total == 0.0:
        return 0.0, 0.0
    return e_f / total, e_b / total
