"""Fundamental solutions of the wave equation, the UPPE and its paraxial variant.

Two families of constructions live here:

* mixed form, spectral in (x, y, t) and physical in z, built from
  ``exp(i beta_z z)`` modes (UPPE kernel, Weyl form of the wave-equation
  solutions, mixed paraxial kernel). The z-delta stays exact and only
  (x, y, t) are mollified;
* per-time-slice form, spectral in (x, y, z) and physical in t (retarded and
  advanced wave-equation solutions, the k_z-split UPPE pair, the paraxial pair).
  These mollify all spatial axes; time is mollified per mode.
"""
import itertools
from dataclasses import dataclass, field as dataclass_field
from functools import cached_property
from typing import Dict, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from uppe_green import config
from uppe_green.models.errors import ContractError, GridError
from uppe_green.models.projectors import ProjectorKind, causality_stats, heaviside
from uppe_green.models.spectral_core import (
    PHYSICAL, SPECTRAL, BetaZTable, BranchPolicy, Field, GridSpec, ZModes,
    build_beta_z, forward_transform, inverse_transform, mollifier_spectrum,
)
from uppe_green.models.utils.transforms import (
    Compose, FrequencySign, ProjectModes, Synthesize, ToPhysical, ZGate,
)
from uppe_green.utils.general import energy, relative_l2
from uppe_green.utils.logging import logger

# (k_x, k_y, z, omega)
MIXED_REP = (SPECTRAL, SPECTRAL, PHYSICAL, SPECTRAL)
# (k_x, k_y, k_z, t)
SLICE_REP = (SPECTRAL, SPECTRAL, SPECTRAL, PHYSICAL)

# Gauss-Legendre nodes per axis for the origin-cell average
_ORIGIN_NODES = 12


@dataclass(frozen=True)
class GreenSpec:
    grid: GridSpec
    mollifier_sigma_r: float
    mollifier_sigma_t: float
    light_line_epsilon: float
    branch_policy: BranchPolicy = BranchPolicy(config.DEFAULT_BRANCH_POLICY)

    def __post_init__(self):
        object.__setattr__(self, "branch_policy", BranchPolicy(self.branch_policy))
        if self.light_line_epsilon < 0:
            raise GridError(f"light-line epsilon must be >= 0, got {self.light_line_epsilon}")
        min_r = 2.0 * max(self.grid.d_x, self.grid.d_y, self.grid.d_z)
        min_t = 2.0 * self.grid.d_t
        # sigma = 0 means "not mollified"; anything else must be resolvable
        if self.mollifier_sigma_r < 0 or 0 < self.mollifier_sigma_r < min_r * (1 - 1e-12):
            raise GridError(f"mollifier_sigma_r must be 0 or >= {min_r}, got {self.mollifier_sigma_r}")
        if self.mollifier_sigma_t < 0 or 0 < self.mollifier_sigma_t < min_t * (1 - 1e-12):
            raise GridError(f"mollifier_sigma_t must be 0 or >= {min_t}, got {self.mollifier_sigma_t}")

    @cached_property
    def table(self) -> BetaZTable:
        return build_beta_z(self.grid, self.branch_policy, self.light_line_epsilon)

    def transverse_mollifier(self) -> np.ndarray:
        """Mollifier spectrum on (k_x, k_y, omega)."""
        m = mollifier_spectrum(self.grid, {
            "x": self.mollifier_sigma_r, "y": self.mollifier_sigma_r, "t": self.mollifier_sigma_t})
        return m[:, :, 0, :]

    def spatial_mollifier(self) -> np.ndarray:
        """Mollifier spectrum on (k_x, k_y, k_z)."""
        s = self.mollifier_sigma_r
        return mollifier_spectrum(self.grid, {"x": s, "y": s, "z": s})[:, :, :, 0]


def make_green_spec(grid: GridSpec, sigma_r: float = None, sigma_t: float = None,
                    epsilon: float = None, branch_policy=config.DEFAULT_BRANCH_POLICY) -> GreenSpec:
    if sigma_r is None:
        sigma_r = config.DEFAULT_SIGMA_STEPS * max(grid.d_x, grid.d_y, grid.d_z)
    if sigma_t is None:
        sigma_t = config.DEFAULT_SIGMA_STEPS * grid.d_t
    if epsilon is None:
        epsilon = config.DEFAULT_EPSILON_FACTOR * grid.d_omega / grid.c
    return GreenSpec(grid, float(sigma_r), float(sigma_t), float(epsilon), branch_policy)


@dataclass(frozen=True)
class GreenPair:
    e_plus: Field
    e_minus: Field

    def __post_init__(self):
        if self.e_plus.grid != self.e_minus.grid:
            raise ContractError("GreenPair members live on different grids")

    def combined(self) -> Field:
        """Theta(z) (e_plus + e_minus)."""
        total = self.e_plus.with_data(self.e_plus.data + self.e_minus.data)
        return ZGate()(field=total)["field"]


def _sign(sign) -> int:
    if sign in (1, "+", "plus", "retarded"):
        return 1
    if sign in (-1, "-", "minus", "advanced"):
        return -1
    raise ContractError(f"sign must be + or -, got {sign!r}")


def excluded_mass(spec: GreenSpec) -> float:
    """Share of the mollified source's (k_x, k_y, omega) energy dropped from 1/beta_z products."""
    return spec.table.excluded_fraction(spec.transverse_mollifier())


def mollified_delta(spec: GreenSpec, axes="xyt") -> Field:
    """Band-limited delta at the origin whose spectrum is exactly the mollifier on ``axes``.

    Axes not listed carry a Kronecker delta of height 1/step.
    """
    sigmas = {a: (spec.mollifier_sigma_t if a == "t" else spec.mollifier_sigma_r) for a in axes}
    spectrum = np.broadcast_to(mollifier_spectrum(spec.grid, sigmas), spec.grid.shape)
    return inverse_transform(Field.spectral(spec.grid, spectrum))


def _mollify_time(f: Field, sigma_t: float) -> Field:
    if sigma_t <= 0:
        return f
    spec = forward_transform(f, "t")
    damped = spec.with_data(spec.data * mollifier_spectrum(f.grid, {"t": sigma_t}))
    return inverse_transform(damped, "t")


def wave_green_spectral(sign, spec: GreenSpec) -> Field:
    """-c Theta(+-t) sin(c k |t|)/k per time slice, mollified in space and (spectrally) in time."""
    s = _sign(sign)
    grid = spec.grid
    c = grid.c
    k = grid.spatial_wavenumbers()[3]
    safe_k = np.where(k > 0, k, 1.0)
    m = spec.spatial_mollifier()

    data = np.zeros(grid.shape, dtype=np.complex128)
    for j, t in enumerate(grid.coords("t")):
        theta = heaviside(s * t)
        if theta == 0.0:
            continue
        tau = abs(t)
        # sin(c k tau)/k -> c tau at k = 0
        kernel = np.where(k > 0, np.sin(c * safe_k * tau) / safe_k, c * tau)
        data[:, :, :, j] = -c * theta * kernel * m

    out = inverse_transform(Field(data, SLICE_REP, grid), "xyz")
    return _mollify_time(out, spec.mollifier_sigma_t)


def _gaussian(tau, sigma):
    return np.exp(-0.5 * (tau / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))


def _origin_cell_mean(grid: GridSpec, s: int, sigma_t: float) -> np.ndarray:
    """Cell average of -g(t -+ rho/c)/(4 pi rho) over the origin cell, for every t."""
    nodes, weights = np.polynomial.legendre.leggauss(_ORIGIN_NODES)
    # map [-1, 1] onto [0, d/2]: the integrand depends on rho only, so one octant suffices
    halves = (grid.d_x / 2, grid.d_y / 2, grid.d_z / 2)
    px, py, pz = [(nodes + 1) * h / 2 for h in halves]
    wx, wy, wz = [weights * h / 2 for h in halves]
    rho = np.sqrt(px[:, None, None] ** 2 + py[None, :, None] ** 2 + pz[None, None, :] ** 2).ravel()
    w = (wx[:, None, None] * wy[None, :, None] * wz[None, None, :]).ravel()
    volume = halves[0] * halves[1] * halves[2]

    t = grid.coords("t")[:, None]
    values = -_gaussian(t - s * rho[None, :] / grid.c, sigma_t) / (4.0 * np.pi * rho[None, :])
    return values @ w / volume


def _smoothed_shells(s: int, spec: GreenSpec) -> np.ndarray:
    """-(c/4 pi r) [g(r - c|t|) - g(r + c|t|)] on the Theta(s t) half, summed over periodic images.

    This is -delta(t -+ r/c)/(4 pi r) convolved with the 3D Gaussian of width
    sigma_r; g is the 1D Gaussian of the same width.
    """
    grid = spec.grid
    c = grid.c
    sigma = spec.mollifier_sigma_r
    t = grid.coords("t")
    reach = c * np.abs(t)
    theta = heaviside(s * t)
    lengths = np.array([grid.n_x * grid.d_x, grid.n_y * grid.d_y, grid.n_z * grid.d_z])
    x, y, z = np.meshgrid(grid.coords("x"), grid.coords("y"), grid.coords("z"), indexing="ij")
    # images further than this never touch the box
    cutoff = reach.max() + 10.0 * sigma + 0.5 * float(np.linalg.norm(lengths))
    counts = np.ceil(cutoff / lengths).astype(int)

    data = np.zeros(grid.shape, dtype=np.float64)
    for n in itertools.product(*(range(-m, m + 1) for m in counts)):
        shift = np.asarray(n) * lengths
        if np.linalg.norm(shift) > cutoff:
            continue
        r = np.sqrt((x + shift[0]) ** 2 + (y + shift[1]) ** 2 + (z + shift[2]) ** 2)[..., None]
        safe_r = np.where(r > 0, r, 1.0)
        shell = (_gaussian(r - reach, sigma) - _gaussian(r + reach, sigma)) / safe_r
        # r -> 0 limit of the bracket over r
        shell = np.where(r > 0, shell, 2.0 * reach / sigma ** 2 * _gaussian(reach, sigma))
        data += shell
    return -c / (4.0 * np.pi) * theta * data


def wave_green_analytic(sign, spec: GreenSpec) -> Field:
    """Closed-form retarded (+) or advanced (-) solution.

    With sigma_r > 0 the spherical shell is smoothed by the spatial Gaussian,
    summed over the periodic images of the box and mollified in time like
    :func:`wave_green_spectral`. With sigma_r = 0 it is -(1/4 pi r) g(t -+ r/c)
    with a Gaussian g of width sigma_t and the origin cell averaged.
    """
    s = _sign(sign)
    if spec.mollifier_sigma_r > 0:
        shells = Field.physical(spec.grid, _smoothed_shells(s, spec))
        return _mollify_time(shells, spec.mollifier_sigma_t)

    sigma_t = spec.mollifier_sigma_t
    if sigma_t <= 0:
        raise ContractError("wave_green_analytic needs mollifier_sigma_r > 0 or mollifier_sigma_t > 0")
    grid = spec.grid
    x, y, z = np.meshgrid(grid.coords("x"), grid.coords("y"), grid.coords("z"), indexing="ij")
    r = np.sqrt(x ** 2 + y ** 2 + z ** 2)[..., None]
    t = grid.coords("t").reshape(1, 1, 1, -1)

    with np.errstate(divide="ignore", invalid="ignore"):
        data = -_gaussian(t - s * r / grid.c, sigma_t) / (4.0 * np.pi * r)
    ox, oy, oz = (grid.origin_index(a) for a in "xyz")
    data[ox, oy, oz, :] = _origin_cell_mean(grid, s, sigma_t)
    return Field.physical(grid, data)


def uppe_modes(spec: GreenSpec) -> ZModes:
    """exp(i beta_z z)/(2 i beta_z) times the mollifier, as up-going modes."""
    table = spec.table
    up = table.inverse() / 2j * spec.transverse_mollifier()
    return ZModes(up, np.zeros_like(up), table)


def _to_physical_gated():
    return Compose({"synthesize": Synthesize(), "gate": ZGate(), "to_physical": ToPhysical()})


def uppe_green(spec: GreenSpec) -> Field:
    logger.debug(f"UPPE Green's function on {spec.grid.shape}, excluded mass {excluded_mass(spec):.3e}")
    return _to_physical_gated()(modes=uppe_modes(spec))["field"]


def weyl_modes(sign, spec: GreenSpec) -> Tuple[ZModes, ZModes]:
    """Weyl form exp(i b |z|)/(2 i b) as mode expansions valid for z >= 0 and for z <= 0.

    Propagating bins use b = +-sign(omega) |beta_z| for the retarded (+) and
    advanced (-) solution; evanescent bins decay away from z = 0 for both.
    """
    s = _sign(sign)
    table = spec.table
    omega = table.grid.freqs("t").reshape(1, 1, -1)
    outgoing_up = table.evanescent | (s * np.sign(omega) > 0)
    b = np.where(table.evanescent, table.values, s * np.sign(omega) * table.values.real)
    keep = table.valid
    amplitude = np.zeros_like(b)
    amplitude[keep] = 1.0 / (2j * b[keep])
    amplitude *= spec.transverse_mollifier()

    up = np.where(outgoing_up, amplitude, 0.0)
    down = np.where(outgoing_up, 0.0, amplitude)
    return ZModes(up, down, table), ZModes(down, up, table)


def wave_green_modes(sign, spec: GreenSpec) -> Field:
    """Weyl form of the retarded (+) or advanced (-) solution in the (k_x, k_y, z, omega) representation."""
    upper, lower = weyl_modes(sign, spec)
    z = spec.grid.coords("z").reshape(1, 1, -1, 1)
    data = np.where(z >= 0, upper.synthesize().data, lower.synthesize().data)
    return Field(data, MIXED_REP, spec.grid)


def homogeneous_modes(spec: GreenSpec) -> Tuple[ZModes, float]:
    """Retarded minus advanced Weyl solution, and how far it is from one expansion for all z.

    The difference solves the homogeneous equation, so its z >= 0 and z <= 0
    expansions agree; the second value is their relative L2 mismatch.
    """
    ret_upper, ret_lower = weyl_modes("+", spec)
    adv_upper, adv_lower = weyl_modes("-", spec)
    upper = ret_upper - adv_upper
    lower = ret_lower - adv_lower
    mismatch = relative_l2(np.stack([upper.up, upper.down]), np.stack([lower.up, lower.down]))
    return upper, mismatch


def fundamental_identity_chain() -> Compose:
    """Theta(z) P_z+ sign(omega) acting on modes, ending in the physical representation."""
    return Compose({
        "sign": FrequencySign(),
        "project": ProjectModes(ProjectorKind.Pzplus),
        "synthesize": Synthesize(),
        "gate": ZGate(),
        "to_physical": ToPhysical(),
    })


@dataclass(frozen=True)
class Theorem1Result:
    residual: float
    quadrants: Dict[str, float]
    evanescent_fraction: float
    excluded_mass: float
    homogeneity: float = 0.0
    omitted: tuple = dataclass_field(default=())


def theorem1_residual(spec: GreenSpec, omit=()) -> Theorem1Result:
    """Relative L2 distance between the UPPE kernel and Theta(z) P_z+ sign(omega) (G_ret - G_adv).

    G_ret and G_adv are the Weyl forms; ``homogeneity`` reports how well their
    difference solves the homogeneous equation across z = 0.

    ``omit`` drops steps ("sign", "project", "gate") from the projection chain.
    """
    omit = tuple(omit)
    unknown = set(omit) - {"sign", "project", "gate"}
    if unknown:
        raise ContractError(f"cannot omit {sorted(unknown)}")

    reference = uppe_green(spec)
    difference, homogeneity = homogeneous_modes(spec)
    candidate = fundamental_identity_chain().without(*omit)(modes=difference)["field"]
    residual = relative_l2(candidate.data, reference.data)

    ref_energy = energy(reference.data, spec.grid.measure())
    stats = causality_stats(reference.with_data(candidate.data - reference.data))
    quadrants = {
        q: (getattr(stats, f"energy_{q}") / ref_energy if ref_energy else 0.0)
        for q in ("pp", "pm", "mp", "mm")
    }
    quadrants["axes"] = stats.axis_energy / ref_energy if ref_energy else 0.0

    mixed = uppe_modes(spec).synthesize().data
    evanescent = np.broadcast_to(spec.table.evanescent[:, :, None, :], mixed.shape)
    gate = heaviside(spec.grid.coords("z")).reshape(1, 1, -1, 1)
    gated = mixed * gate
    total = energy(gated)
    evanescent_fraction = float(np.sqrt(energy(gated[evanescent]) / total)) if total else 0.0

    logger.info(f"Fundamental-solution identity residual {residual:.3e} (omitted: {omit or 'none'})")
    return Theorem1Result(residual, quadrants, evanescent_fraction, excluded_mass(spec), homogeneity, omit)


def _split_spectrum(spec: GreenSpec, sign: int, paraxial: bool = False) -> np.ndarray:
    """-(i c/2) Theta(k_z) w(k) exp(-+ i c k t) on the (k_x, k_y, k_z, t) lattice.

    w = 1/k for the full pair and k_z/k^2 for the paraxial pair; k = 0 is excluded.
    The time mollifier acts per mode as exp(-(sigma_t c k)^2 / 2).
    """
    grid = spec.grid
    c = grid.c
    _, _, k_z, k = grid.spatial_wavenumbers()
    safe_k = np.where(k > 0, k, 1.0)
    weight = np.where(k > 0, (k_z / safe_k ** 2) if paraxial else (1.0 / safe_k), 0.0)
    damping = spec.spatial_mollifier() * np.exp(-0.5 * (spec.mollifier_sigma_t * c * k) ** 2)
    base = -0.5j * c * heaviside(k_z) * weight * damping
    t = grid.coords("t").reshape(1, 1, 1, -1)
    return base[..., None] * np.exp(-1j * sign * c * k[..., None] * t)


def _split_pair(spec: GreenSpec, paraxial: bool) -> GreenPair:
    fields = [
        inverse_transform(Field(_split_spectrum(spec, s, paraxial), SLICE_REP, spec.grid), "xyz")
        for s in (1, -1)
    ]
    return GreenPair(*fields)


def uppe_green_split(spec: GreenSpec, form: str = "modes") -> GreenPair:
    """The pair whose Theta(z)-gated sum is the UPPE kernel.

    ``form="modes"`` (default) splits the UPPE modes by the sign of omega, so
    ``combined()`` reproduces :func:`uppe_green` with the same mollifier.
    ``form="slices"`` is -(i c/2) F^-1[Theta(k_z) exp(-+ i c k t)/k] per time
    slice, mollified in all spatial axes.
    """
    if form == "slices":
        logger.debug("k = 0 bin excluded from the split pair")
        return _split_pair(spec, paraxial=False)
    if form != "modes":
        raise ContractError(f"form must be 'modes' or 'slices', got {form!r}")
    modes = uppe_modes(spec)
    omega = spec.grid.freqs("t").reshape(1, 1, -1)
    ungated = Compose({"synthesize": Synthesize(), "to_physical": ToPhysical()})
    plus, minus = (ungated(modes=modes.scaled(heaviside(s * omega)))["field"] for s in (1, -1))
    return GreenPair(plus, minus)


def paraxial_pair(spec: GreenSpec) -> GreenPair:
    return _split_pair(spec, paraxial=True)


def paraxial_green(spec: GreenSpec) -> Field:
    """Theta(z) (E_p+ + E_p-) with E_p+- = -(i c/2) F^-1[Theta(k_z) (k_z/k^2) exp(-+ i c k t)]."""
    return paraxial_pair(spec).combined()


def paraxial_green_mixed(spec: GreenSpec) -> Field:
    """Theta(z) F^-1[exp(i beta_z z) c/(2 i |omega|)], omega = 0 excluded."""
    table = spec.table
    grid = spec.grid
    omega = np.broadcast_to(grid.freqs("t").reshape(1, 1, -1), table.values.shape)
    up = np.zeros_like(table.values)
    keep = omega != 0
    up[keep] = grid.c / (2j * np.abs(omega[keep]))
    up *= spec.transverse_mollifier()
    modes = ZModes(up, np.zeros_like(up), table)
    return _to_physical_gated()(modes=modes)["field"]


@dataclass(frozen=True)
class Theorem2Result:
    spectral: float
    physical: float
    spectral_by_sign: Dict[str, float]
    physical_by_sign: Dict[str, float]


def _time_mean_removed(data):
    return data - data.mean(axis=3, keepdims=True)


# centered first-derivative weights for offsets 1..4
_DIFF_WEIGHTS = (4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0)


def _z_derivative(data, d_z):
    """Eighth-order centered difference along z, periodic over the window."""
    out = np.zeros_like(data)
    for m, w in enumerate(_DIFF_WEIGHTS, start=1):
        out += w * (np.roll(data, -m, axis=2) - np.roll(data, m, axis=2))
    return out / d_z


def theorem2_residual(spec: GreenSpec) -> Theorem2Result:
    """Paraxial pair against -+c times the time integral of d/dz of the full pair.

    Spectral route: per mode, i k_z multiplication and division by -i Omega with
    Omega = +-c k. Physical route: eighth-order centered z difference and a
    cumulative trapezoid in t; both sides are compared with their time means
    removed, which fixes the integration constant.
    """
    grid = spec.grid
    c = grid.c
    _, _, k_z, k = grid.spatial_wavenumbers()
    spectral = {}
    for s, name in ((1, "plus"), (-1, "minus")):
        full = _split_spectrum(spec, s)
        reference = _split_spectrum(spec, s, paraxial=True)
        big_omega = (s * c * k)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            integrated = np.where(big_omega != 0, full / (-1j * big_omega), 0.0)
        route = -s * c * (1j * k_z[..., None]) * integrated
        spectral[name] = relative_l2(route, reference)

    full_pair = uppe_green_split(spec, form="slices")
    paraxial = paraxial_pair(spec)
    physical = {}
    for s, name, e, ep in ((1, "plus", full_pair.e_plus, paraxial.e_plus),
                           (-1, "minus", full_pair.e_minus, paraxial.e_minus)):
        integrated = cumulative_trapezoid(_z_derivative(e.data, grid.d_z), dx=grid.d_t, axis=3, initial=0)
        route = _time_mean_removed(-s * c * integrated)
        physical[name] = relative_l2(route, _time_mean_removed(ep.data))

    result = Theorem2Result(max(spectral.values()), max(physical.values()), spectral, physical)
    logger.info(f"Paraxial identity residuals: spectral {result.spectral:.3e}, physical {result.physical:.3e}")
    return result
