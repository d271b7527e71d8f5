"""Grids, the measure-weighted mixed-sign Fourier engine and the beta_z table.

Transform conventions (continuum limits of the discrete sums below)::

    F[u](k, w)  = Int u(r, t) exp(-i k.r + i w t) dx dy dz dt
    F^-1[U](r, t) = (2 pi)^-4 Int U(k, w) exp(+i k.r - i w t) dkx dky dkz dw

Every axis is centered: bin ``j`` sits at ``(j - n/2) * step`` in physical
space and at ``(j - n/2) * dk`` in spectral space.
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft

from uppe_green import config
from uppe_green.models.errors import ContractError, GridError
from uppe_green.utils.general import get_workers
from uppe_green.utils.logging import logger

AXES = ("x", "y", "z", "t")
PHYSICAL = "physical"
SPECTRAL = "spectral"

_fft_workers = None


def set_fft_workers(threads: int):
    """Set the worker count used by every transform in this process (0 = auto)."""
    global _fft_workers
    _fft_workers = get_workers(threads)
    logger.debug(f"FFT workers set to {_fft_workers}")


def fft_workers():
    return _fft_workers if _fft_workers is not None else get_workers(config.DEFAULT_THREADS)


@dataclass(frozen=True)
class GridSpec:
    n_x: int
    n_y: int
    n_z: int
    n_t: int
    d_x: float
    d_y: float
    d_z: float
    d_t: float
    c: float = config.DEFAULT_C

    def __post_init__(self):
        for name, n in zip(AXES, self.counts):
            if int(n) != n or n < 2 or n % 2:
                raise GridError(f"counts must be even and >= 2, got n_{name} = {n}")
        for name, d in zip(AXES, self.steps):
            if not d > 0:
                raise GridError(f"steps must be positive, got d_{name} = {d}")
        if not self.c > 0:
            raise GridError(f"wave speed must be positive, got c = {self.c}")

    @property
    def counts(self) -> Tuple[int, int, int, int]:
        return (self.n_x, self.n_y, self.n_z, self.n_t)

    @property
    def steps(self) -> Tuple[float, float, float, float]:
        return (self.d_x, self.d_y, self.d_z, self.d_t)

    @property
    def shape(self):
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def dk(self, axis) -> float:
        """Spectral step of an axis: 2 pi / (n d); for t this is d_omega."""
        a = axis_index(axis)
        return 2.0 * np.pi / (self.counts[a] * self.steps[a])

    @property
    def d_omega(self) -> float:
        return self.dk("t")

    def coords(self, axis) -> np.ndarray:
        a = axis_index(axis)
        n = self.counts[a]
        return (np.arange(n) - n // 2) * self.steps[a]

    def freqs(self, axis) -> np.ndarray:
        a = axis_index(axis)
        n = self.counts[a]
        return (np.arange(n) - n // 2) * self.dk(a)

    def origin_index(self, axis) -> int:
        return self.counts[axis_index(axis)] // 2

    def measure(self, axes="xyzt") -> float:
        """Riemann-sum weight of one physical cell over ``axes``."""
        return float(np.prod([self.steps[a] for a in resolve_axes(axes)]))

    def spectral_measure(self, axes="xyzt") -> float:
        """Spectral cell weight including the (2 pi)^-1 per axis."""
        return float(np.prod([self.dk(a) / (2.0 * np.pi) for a in resolve_axes(axes)]))

    def spatial_wavenumbers(self):
        """k_x, k_y, k_z and |k| on the (n_x, n_y, n_z) spectral lattice."""
        kx, ky, kz = np.meshgrid(self.freqs("x"), self.freqs("y"), self.freqs("z"), indexing="ij")
        return kx, ky, kz, np.sqrt(kx ** 2 + ky ** 2 + kz ** 2)

    def transverse_frequency_mesh(self):
        """k_x, k_y, omega on the (n_x, n_y, n_t) spectral lattice."""
        return np.meshgrid(self.freqs("x"), self.freqs("y"), self.freqs("t"), indexing="ij")

    def refined(self, factor: int):
        """Same physical box and window, ``factor`` times more bins per axis."""
        return replace(
            self,
            n_x=self.n_x * factor, n_y=self.n_y * factor,
            n_z=self.n_z * factor, n_t=self.n_t * factor,
            d_x=self.d_x / factor, d_y=self.d_y / factor,
            d_z=self.d_z / factor, d_t=self.d_t / factor,
        )


def make_grid(counts: Sequence[int], steps: Sequence[float], c: float = config.DEFAULT_C) -> GridSpec:
    if len(counts) != 4 or len(steps) != 4:
        raise GridError("a grid needs 4 counts and 4 steps (x, y, z, t)")
    grid = GridSpec(*[int(n) if int(n) == n else n for n in counts], *[float(d) for d in steps], c=float(c))
    logger.debug(f"Created grid counts={grid.counts} steps={grid.steps} c={grid.c}")
    return grid


def axis_index(axis) -> int:
    if isinstance(axis, (int, np.integer)):
        if not 0 <= axis < 4:
            raise ContractError(f"axis index out of range: {axis}")
        return int(axis)
    if axis not in AXES:
        raise ContractError(f"unknown axis {axis!r}, expected one of {AXES}")
    return AXES.index(axis)


def resolve_axes(axes: Union[str, Iterable]) -> Tuple[int, ...]:
    """'xyt', ('x', 'y'), (0, 3) -> sorted unique axis indices."""
    return tuple(sorted({axis_index(a) for a in axes}))


@dataclass(frozen=True, eq=False)
class Field:
    data: np.ndarray
    rep: Tuple[str, str, str, str]
    grid: GridSpec

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "rep", tuple(self.rep))
        if data.shape != self.grid.shape:
            raise ContractError(f"field shape {data.shape} does not match grid {self.grid.shape}")
        if len(self.rep) != 4 or any(r not in (PHYSICAL, SPECTRAL) for r in self.rep):
            raise ContractError(f"invalid representation tags {self.rep}")

    @classmethod
    def physical(cls, grid: GridSpec, data) -> "Field":
        return cls(data, (PHYSICAL,) * 4, grid)

    @classmethod
    def spectral(cls, grid: GridSpec, data) -> "Field":
        return cls(data, (SPECTRAL,) * 4, grid)

    @classmethod
    def zeros(cls, grid: GridSpec, rep=(PHYSICAL,) * 4) -> "Field":
        return cls(np.zeros(grid.shape, dtype=np.complex128), rep, grid)

    def with_data(self, data, rep=None) -> "Field":
        return Field(data, self.rep if rep is None else rep, self.grid)

    def axes_in(self, tag: str) -> Tuple[int, ...]:
        return tuple(a for a, r in enumerate(self.rep) if r == tag)

    @property
    def is_physical(self) -> bool:
        return all(r == PHYSICAL for r in self.rep)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2)))


def _require(f: Field, axes, tag: str, op: str):
    wrong = [AXES[a] for a in axes if f.rep[a] != tag]
    if wrong:
        raise ContractError(f"{op}: axes {wrong} are not {tag}")


def _with_tags(rep, axes, tag):
    rep = list(rep)
    for a in axes:
        rep[a] = tag
    return tuple(rep)


def _forward_data(data: np.ndarray, idx, grid: GridSpec) -> np.ndarray:
    workers = fft_workers()
    space = tuple(a for a in idx if a < 3)
    if space:
        data = sfft.fftshift(
            sfft.fftn(sfft.ifftshift(data, axes=space), axes=space, workers=workers), axes=space)
    if 3 in idx:
        # unscaled sum with exp(+i w t)
        data = sfft.fftshift(
            sfft.ifft(sfft.ifftshift(data, axes=3), axis=3, norm="forward", workers=workers), axes=3)
    return data * grid.measure(idx)


def _inverse_data(data: np.ndarray, idx, grid: GridSpec) -> np.ndarray:
    workers = fft_workers()
    space = tuple(a for a in idx if a < 3)
    if space:
        data = sfft.fftshift(
            sfft.ifftn(sfft.ifftshift(data, axes=space), axes=space, workers=workers), axes=space)
    if 3 in idx:
        data = sfft.fftshift(
            sfft.fft(sfft.ifftshift(data, axes=3), axis=3, norm="forward", workers=workers), axes=3)
    return data / grid.measure(idx)


def forward_transform(f: Field, axes="xyzt") -> Field:
    """Measure-weighted transform: exp(-i k x) on space axes, exp(+i w t) on t."""
    idx = resolve_axes(axes)
    _require(f, idx, PHYSICAL, "forward_transform")
    return Field(_forward_data(f.data, idx, f.grid), _with_tags(f.rep, idx, SPECTRAL), f.grid)


def inverse_transform(f: Field, axes="xyzt") -> Field:
    """Inverse of :func:`forward_transform`; carries (2 pi)^-1 per axis via the spectral measure."""
    idx = resolve_axes(axes)
    _require(f, idx, SPECTRAL, "inverse_transform")
    return Field(_inverse_data(f.data, idx, f.grid), _with_tags(f.rep, idx, PHYSICAL), f.grid)


def _check_slice(data, grid: GridSpec):
    data = np.asarray(data, dtype=np.complex128)
    expected = (grid.n_x, grid.n_y, grid.n_t)
    if data.shape != expected:
        raise ContractError(f"slice shape {data.shape} does not match (n_x, n_y, n_t) = {expected}")
    return data[:, :, None, :]


def forward_slice(data, grid: GridSpec) -> np.ndarray:
    """(x, y, t) -> (k_x, k_y, omega) for a single z slice."""
    return _forward_data(_check_slice(data, grid), (0, 1, 3), grid)[:, :, 0, :]


def inverse_slice(data, grid: GridSpec) -> np.ndarray:
    return _inverse_data(_check_slice(data, grid), (0, 1, 3), grid)[:, :, 0, :]


def to_rep(f: Field, rep) -> Field:
    """Transform whichever axes differ from ``rep``."""
    to_spec = [a for a in range(4) if f.rep[a] == PHYSICAL and rep[a] == SPECTRAL]
    to_phys = [a for a in range(4) if f.rep[a] == SPECTRAL and rep[a] == PHYSICAL]
    if to_spec:
        f = forward_transform(f, to_spec)
    if to_phys:
        f = inverse_transform(f, to_phys)
    return f


def inner_product(u: Field, v: Field) -> complex:
    """<u, v> = sum u conj(v) times the cell measure of u's representation."""
    if u.rep != v.rep:
        raise ContractError("inner product of fields in different representations")
    weight = 1.0
    for a, r in enumerate(u.rep):
        weight *= u.grid.steps[a] if r == PHYSICAL else u.grid.dk(a) / (2.0 * np.pi)
    return complex(np.vdot(v.data, u.data)) * weight


def mollifier_spectrum(grid: GridSpec, sigmas: dict) -> np.ndarray:
    """Product of exp(-sigma^2 k^2 / 2) over the axes in ``sigmas``.

    The result broadcasts against a 4D field; axes not listed get factor 1.
    This is the transform of a unit-mass Gaussian of width sigma.
    """
    out = np.ones((1, 1, 1, 1))
    for axis, sigma in sigmas.items():
        a = axis_index(axis)
        k = grid.freqs(a)
        shape = [1, 1, 1, 1]
        shape[a] = k.size
        out = out * np.exp(-0.5 * (sigma * k) ** 2).reshape(shape)
    return out


class BranchPolicy(str, Enum):
    EVANESCENT_DECAY = "evanescent_decay"
    EVANESCENT_ZERO = "evanescent_zero"


@dataclass(frozen=True, eq=False)
class BetaZTable:
    """beta_z(k_x, k_y, omega) on the (n_x, n_y, n_t) spectral lattice."""
    values: np.ndarray
    branch_policy: BranchPolicy
    light_line_epsilon: float
    singular: np.ndarray
    evanescent: np.ndarray
    grid: GridSpec

    @property
    def valid(self) -> np.ndarray:
        """Bins entering 1/beta_z products."""
        keep = ~self.singular
        if self.branch_policy == BranchPolicy.EVANESCENT_ZERO:
            keep &= ~self.evanescent
        return keep

    @property
    def propagating(self) -> np.ndarray:
        return ~self.evanescent & ~self.singular

    def inverse(self) -> np.ndarray:
        """1/beta_z on valid bins, 0 elsewhere."""
        out = np.zeros_like(self.values)
        keep = self.valid
        out[keep] = 1.0 / self.values[keep]
        return out

    def phase(self, z: float) -> np.ndarray:
        """exp(i beta_z z); dropped evanescent bins propagate nothing."""
        out = np.exp(1j * self.values * z)
        if self.branch_policy == BranchPolicy.EVANESCENT_ZERO:
            out[self.evanescent] = 0.0
        return out

    def excluded_fraction(self, weights) -> float:
        """Share of sum |weights|^2 sitting on excluded bins."""
        w = np.broadcast_to(np.abs(weights) ** 2, self.values.shape)
        total = float(np.sum(w))
        if total == 0.0:
            return 0.0
        return float(np.sum(w[~self.valid])) / total


def build_beta_z(grid: GridSpec, policy=config.DEFAULT_BRANCH_POLICY, epsilon: float = None) -> BetaZTable:
    policy = BranchPolicy(policy)
    if epsilon is None:
        epsilon = config.DEFAULT_EPSILON_FACTOR * grid.d_omega / grid.c
    if epsilon < 0:
        raise GridError(f"light-line epsilon must be >= 0, got {epsilon}")

    kx, ky, w = grid.transverse_frequency_mesh()
    beta2 = (w / grid.c) ** 2 - (kx ** 2 + ky ** 2)
    evanescent = beta2 < 0
    values = np.zeros(beta2.shape, dtype=np.complex128)
    values[~evanescent] = np.sqrt(beta2[~evanescent])
    if policy == BranchPolicy.EVANESCENT_DECAY:
        values[evanescent] = 1j * np.sqrt(-beta2[evanescent])
    singular = np.abs(beta2) <= epsilon ** 2

    logger.debug(
        f"beta_z table: {int(np.sum(~evanescent))} propagating, {int(np.sum(evanescent))} evanescent, "
        f"{int(np.sum(singular))} singular bins (policy={policy.value}, epsilon={epsilon:.3e})")
    return BetaZTable(values, policy, float(epsilon), singular, evanescent, grid)


@dataclass(frozen=True, eq=False)
class ZModes:
    """A (k_x, k_y, z, omega) field written as up * e^{+i beta_z z} + down * e^{-i beta_z z}.

    Each (k_x, k_y, omega) bin is a pair of plane waves in z whose k_z is
    exactly +beta_z and -beta_z, so k_z projectors act on it without the
    z-lattice.
    """
    up: np.ndarray
    down: np.ndarray
    table: BetaZTable

    def __add__(self, other: "ZModes") -> "ZModes":
        return ZModes(self.up + other.up, self.down + other.down, self.table)

    def __sub__(self, other: "ZModes") -> "ZModes":
        return ZModes(self.up - other.up, self.down - other.down, self.table)

    def scaled(self, factor) -> "ZModes":
        return ZModes(self.up * factor, self.down * factor, self.table)

    def synthesize(self) -> Field:
        """Evaluate on the z grid; result is spectral in x, y, t and physical in z."""
        grid = self.table.grid
        data = np.empty(grid.shape, dtype=np.complex128)
        for j, z in enumerate(grid.coords("z")):
            up = self.table.phase(z)
            down = self.table.phase(-z)
            data[:, :, j, :] = self.up * up + self.down * down
        return Field(data, (SPECTRAL, SPECTRAL, PHYSICAL, SPECTRAL), grid)
