"""Experiment configuration and the named experiment runners behind the CLI.

Config files are flat TOML-like text::

    experiment = theorem1
    seed = 1234

    [grid]
    n_x = 16        # counts must be even
    d_t = 0.5

Values are TOML literals; a bare word is read as a string.
"""
import re
import time
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from uppe_green import config
from uppe_green.models.errors import ConfigError, UppeGreenError
from uppe_green.models.export import SliceWriterThread, write_csv, write_field, write_summary
from uppe_green.models.green import (
    make_green_spec, excluded_mass, paraxial_green, paraxial_green_mixed, paraxial_pair,
    uppe_green, wave_green_analytic, wave_green_spectral,
)
from uppe_green.models.projectors import causality_stats
from uppe_green.models.propagator import (
    DirectionFilter, SourceKind, SourceSpec, make_source_field, march, solve_convolution,
    source_direction_report, zero_slice,
)
from uppe_green.models.spectral_core import (
    AXES, BranchPolicy, forward_transform, make_grid, set_fft_workers,
)
from uppe_green.models.verification import OracleReport, run_all_checks
from uppe_green.utils.general import energy, generate_output_dir, relative_l2
from uppe_green.utils.logging import configure_logging, logger

EXPERIMENTS = ("fundamental", "paraxial", "theorem1", "theorem2", "propagate", "causality", "checks")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3


@dataclass
class GridConfig:
    n_x: int = 16
    n_y: int = 16
    n_z: int = 16
    n_t: int = 32
    d_x: float = 1.0
    d_y: float = 1.0
    d_z: float = 1.0
    d_t: float = 1.0
    c: float = config.DEFAULT_C


@dataclass
class GreenConfig:
    sigma_r: Optional[float] = None
    sigma_t: Optional[float] = None
    epsilon: Optional[float] = None
    branch_policy: str = config.DEFAULT_BRANCH_POLICY


@dataclass
class SourceConfig:
    kind: str = SourceKind.POINT_MOLLIFIED.value
    center: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    widths: Optional[Tuple[float, ...]] = None
    amplitude: float = 1.0
    direction_filter: str = DirectionFilter.NONE.value
    carrier: Tuple[float, ...] = (0.0, 0.0)


@dataclass
class PropagateConfig:
    z_start: Optional[float] = None
    z_final: Optional[float] = None
    dz: Optional[float] = None
    decimate: int = 1


@dataclass
class OutputConfig:
    write_fields: bool = True
    write_csv: bool = True


@dataclass
class ExperimentConfig:
    experiment: str = "checks"
    seed: int = config.DEFAULT_SEED
    threads: int = config.DEFAULT_THREADS
    out_dir: Optional[str] = None
    grid: GridConfig = field(default_factory=GridConfig)
    green: GreenConfig = field(default_factory=GreenConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    propagate: PropagateConfig = field(default_factory=PropagateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = ("grid", "green", "source", "propagate", "output")
_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]\s*(#.*)?$")
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_BARE_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")


def _parse_value(raw: str, line: int):
    raw = raw.strip()
    if not raw:
        raise ConfigError("missing value", line)
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        bare = raw.split("#", 1)[0].strip()
        if _BARE_RE.match(bare):
            return bare
        raise ConfigError(f"malformed value {raw!r}", line)


def _coerce(name, value, default_type, line):
    """Check a parsed value against the dataclass field's type."""
    if default_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false", line)
        return value
    if default_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer", line)
        return value
    if default_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number", line)
        return float(value)
    if default_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string", line)
        return value
    if default_type is tuple:
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{name} must be an array of numbers", line)
        return tuple(float(v) for v in value)
    return value


_FIELD_TYPES = {
    None: {"experiment": str, "seed": int, "threads": int, "out_dir": str},
    "grid": {f.name: (int if f.name.startswith("n_") else float) for f in fields(GridConfig)},
    "green": {"sigma_r": float, "sigma_t": float, "epsilon": float, "branch_policy": str},
    "source": {"kind": str, "center": tuple, "widths": tuple, "amplitude": float,
               "direction_filter": str, "carrier": tuple},
    "propagate": {"z_start": float, "z_final": float, "dz": float, "decimate": int},
    "output": {"write_fields": bool, "write_csv": bool},
}


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    lines: Dict[str, int] = {}
    section = None
    for number, raw_line in enumerate(text.splitlines(), start=1):
        stripped = raw_line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = m.group(1)
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", number)
            continue
        m = _KEY_RE.match(stripped)
        if not m:
            raise ConfigError(f"malformed line {stripped!r}", number)
        key, raw = m.groups()
        types = _FIELD_TYPES[section]
        if key not in types:
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"unknown key {key!r} in {where}", number)
        value = _coerce(key, _parse_value(raw, number), types[key], number)
        target = cfg if section is None else getattr(cfg, section)
        setattr(target, key, value)
        lines[f"{section}.{key}" if section else key] = number

    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines: Dict[str, int]):
    def fail(key, message):
        raise ConfigError(message, lines.get(key))

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {cfg.experiment!r}, expected one of {EXPERIMENTS}")
    if cfg.threads < 0:
        fail("threads", "threads must be >= 0")
    g = cfg.grid
    for a in AXES:
        n = getattr(g, f"n_{a}")
        if n < 2 or n % 2:
            fail(f"grid.n_{a}", f"counts must be even and >= 2 (n_{a} = {n})")
        if not getattr(g, f"d_{a}") > 0:
            fail(f"grid.d_{a}", f"steps must be positive (d_{a})")
    if not g.c > 0:
        fail("grid.c", "c must be positive")

    gr = cfg.green
    if gr.branch_policy not in [p.value for p in BranchPolicy]:
        fail("green.branch_policy", f"unknown branch policy {gr.branch_policy!r}")
    if gr.epsilon is not None and gr.epsilon < 0:
        fail("green.epsilon", "epsilon must be >= 0")
    if gr.sigma_r is not None and gr.sigma_r < 2 * max(g.d_x, g.d_y, g.d_z) * (1 - 1e-12):
        fail("green.sigma_r", "sigma_r must be at least 2 spatial steps")
    if gr.sigma_t is not None and gr.sigma_t < 2 * g.d_t * (1 - 1e-12):
        fail("green.sigma_t", "sigma_t must be at least 2 time steps")

    s = cfg.source
    if s.kind not in [k.value for k in SourceKind] or s.kind == SourceKind.CUSTOM_GRID.value:
        fail("source.kind", f"unsupported source kind {s.kind!r}")
    if s.direction_filter not in [d.value for d in DirectionFilter]:
        fail("source.direction_filter", f"unknown direction filter {s.direction_filter!r}")
    if len(s.center) != 4:
        fail("source.center", "center needs 4 values (x, y, z, t)")
    if s.widths is not None:
        if len(s.widths) != 4:
            fail("source.widths", "widths needs 4 values (x, y, z, t)")
        for a, w, d in zip(AXES, s.widths, (g.d_x, g.d_y, g.d_z, g.d_t)):
            if w < 2 * d * (1 - 1e-12):
                fail("source.widths", f"source width along {a} must be at least 2 steps")
    if len(s.carrier) != 2:
        fail("source.carrier", "carrier needs 2 values (k0, omega0)")

    p = cfg.propagate
    if p.dz is not None and not p.dz > 0:
        fail("propagate.dz", "dz must be positive")
    if p.decimate < 1:
        fail("propagate.decimate", "decimate must be >= 1")


def config_to_text(cfg: ExperimentConfig) -> str:
    """Effective configuration in the input format (None values are omitted)."""

    def literal(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (tuple, list)):
            return "[" + ", ".join(literal(x) for x in v) + "]"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    out = []
    for key in ("experiment", "seed", "threads", "out_dir"):
        value = getattr(cfg, key)
        if value is not None:
            out.append(f"{key} = {literal(value)}")
    for section in _SECTIONS:
        out.append(f"\n[{section}]")
        for key, value in asdict(getattr(cfg, section)).items():
            if value is not None:
                out.append(f"{key} = {literal(value)}")
    return "\n".join(out) + "\n"


def _grid_and_spec(cfg: ExperimentConfig):
    g = cfg.grid
    grid = make_grid((g.n_x, g.n_y, g.n_z, g.n_t), (g.d_x, g.d_y, g.d_z, g.d_t), g.c)
    gr = cfg.green
    spec = make_green_spec(grid, gr.sigma_r, gr.sigma_t, gr.epsilon, gr.branch_policy)
    return grid, spec


def _source_spec(cfg: ExperimentConfig, grid) -> SourceSpec:
    s = cfg.source
    widths = s.widths or tuple(config.DEFAULT_SIGMA_STEPS * d for d in grid.steps)
    return SourceSpec(kind=s.kind, center=tuple(s.center), widths=tuple(widths), amplitude=s.amplitude,
                      direction_filter=s.direction_filter, carrier=tuple(s.carrier))


class _Run:
    """State shared by one experiment run: output dir, summary and timings."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.grid, self.spec = _grid_and_spec(cfg)
        self.checks = []
        self.diagnostics = {}
        self.runtimes = {}
        self.files = []

    def timed(self, name, fn, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        self.runtimes[name] = time.perf_counter() - start
        return result

    def field(self, name, f):
        if self.cfg.output.write_fields:
            path = write_field(self.out_dir / name, f.data, f.rep, f.grid.steps, c=f.grid.c)
            self.files.append(path.name)

    def csv(self, name, header, rows):
        if self.cfg.output.write_csv:
            write_csv(self.out_dir / name, header, rows)
            self.files.append(name)

    def add_checks(self, reports):
        self.checks.extend(reports)
        for r in reports:
            self.runtimes[f"check.{r.name}"] = r.runtime

    def axis_cuts(self, name, f):
        """Cuts through (0, 0, d_z, 0) along each axis."""
        g = f.grid
        anchor = [g.origin_index(a) for a in AXES]
        anchor[2] += 1
        rows = []
        for a, axis in enumerate(AXES):
            index = list(anchor)
            for j, coord in enumerate(g.coords(axis)):
                index[a] = j
                value = f.data[tuple(index)]
                rows.append((axis, coord, value.real, value.imag))
        self.csv(name, ("axis", "coordinate", "real", "imag"), rows)


def _imag_fraction(f):
    total = energy(f.data)
    return float(np.sqrt(energy(f.data.imag) / total)) if total else 0.0


def _support_report(name, f):
    z = f.grid.coords("z")
    leak = float(np.max(np.abs(f.data[:, :, z < 0, :]), initial=0.0))
    return OracleReport(name, leak, 0.0, {"max_abs_z_negative": leak})


def _run_fundamental(run: _Run):
    spec = run.spec
    g = run.timed("uppe_green", uppe_green, spec)
    run.field("uppe_green", g)
    run.axis_cuts("uppe_green_cuts.csv", g)
    run.diagnostics["uppe_green"] = {"imag_fraction": _imag_fraction(g), "excluded_mass": excluded_mass(spec)}
    run.add_checks([_support_report("uppe_green_support", g)])

    spectral = run.timed("wave_green_spectral", wave_green_spectral, "+", spec)
    analytic = run.timed("wave_green_analytic", wave_green_analytic, "+", spec)
    run.field("wave_green_retarded", analytic)
    run.diagnostics["wave_green_cross_validation"] = relative_l2(spectral.data, analytic.data)


def _run_paraxial(run: _Run):
    spec = run.spec
    g = run.timed("paraxial_green", paraxial_green, spec)
    mixed = run.timed("paraxial_green_mixed", paraxial_green_mixed, spec)
    run.field("paraxial_green", g)
    run.field("paraxial_green_mixed", mixed)
    run.axis_cuts("paraxial_green_cuts.csv", g)

    pair = paraxial_pair(spec)
    k_z = run.grid.freqs("z")
    worst = 0.0
    for f in (pair.e_plus, pair.e_minus):
        spectrum = np.abs(forward_transform(f, "xyz").data)
        worst = max(worst, float(spectrum[:, :, k_z <= 0, :].max() / spectrum.max()))
    run.add_checks([
        _support_report("paraxial_green_support", g),
        OracleReport("paraxial_spectral_support", worst, 1e-12, {"max_relative_kz_nonpositive": worst}),
    ])


def _run_theorem1(run: _Run):
    reports = run_all_checks(run.spec, run.cfg.seed, names=["theorem1"])
    run.add_checks(reports)
    details = reports[0].details
    rows = [(k[len("quadrant_"):], v) for k, v in details.items() if k.startswith("quadrant_")]
    run.csv("theorem1_quadrants.csv", ("quadrant", "relative_energy"), rows)


def _run_theorem2(run: _Run):
    run.add_checks(run_all_checks(run.spec, run.cfg.seed, names=["theorem2_spectral", "theorem2_physical"]))


def _run_causality(run: _Run):
    g = run.timed("uppe_green", uppe_green, run.spec)
    stats = causality_stats(g)
    rows = [
        ("z>0", "t>0", stats.energy_pp), ("z>0", "t<0", stats.energy_pm),
        ("z<0", "t>0", stats.energy_mp), ("z<0", "t<0", stats.energy_mm),
        ("axes", "axes", stats.axis_energy), ("all", "all", stats.total),
    ]
    run.csv("quadrant_energies.csv", ("z", "t", "energy"), rows)
    run.add_checks(run_all_checks(run.spec, run.cfg.seed, names=["noncausality"]))


def _run_propagate(run: _Run):
    grid, spec, p = run.grid, run.spec, run.cfg.propagate
    source = _source_spec(run.cfg, grid)
    z = grid.coords("z")
    z_start = z[0] if p.z_start is None else p.z_start
    z_final = z[-1] if p.z_final is None else p.z_final
    dz = grid.d_z / 4 if p.dz is None else p.dz

    q = make_source_field(source, grid)
    forward, backward = source_direction_report(q)
    run.diagnostics["source_direction"] = {"forward": forward, "backward": backward}

    writer = SliceWriterThread(run.out_dir / "slices") if run.cfg.output.write_fields else None
    energies = []

    def on_slice(index, field_slice):
        energies.append((index, field_slice.z, energy(field_slice.data)))
        if writer:
            writer.submit(index, field_slice)

    if writer:
        writer.start()
    try:
        slices = run.timed("march", march, zero_slice(grid, z_start), source, z_final, dz,
                           spec.table, p.decimate, on_slice)
    finally:
        if writer:
            run.files.extend(str(Path(w).relative_to(run.out_dir)) for w in writer.close())
    run.csv("slice_energy.csv", ("index", "z", "spectral_energy"), energies)

    on_lattice = np.isclose(z, z_final, rtol=0.0, atol=1e-9 * grid.d_z)
    if z_start <= z[0] and on_lattice.any():
        convolution = run.timed("solve_convolution", solve_convolution, q, spec)
        reference = forward_transform(convolution, "xyt").data[:, :, int(np.argmax(on_lattice)), :]
        run.diagnostics["march_vs_convolution"] = relative_l2(slices[-1].data, reference)


def _run_checks(run: _Run):
    reports = run_all_checks(run.spec, run.cfg.seed)
    run.add_checks(reports)
    run.csv("checks.csv", ("name", "residual", "tolerance", "passed"),
            [(r.name, r.residual, r.tolerance, str(r.passed).lower()) for r in reports])


_RUNNERS = {
    "fundamental": _run_fundamental,
    "paraxial": _run_paraxial,
    "theorem1": _run_theorem1,
    "theorem2": _run_theorem2,
    "propagate": _run_propagate,
    "causality": _run_causality,
    "checks": _run_checks,
}


def _clean(value):
    """Make nested diagnostics JSON-safe (no NaN/inf, no numpy scalars)."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def run(cfg: ExperimentConfig, out_dir=None) -> int:
    """Execute one experiment and write its artifacts; returns the exit status."""
    out = Path(out_dir or cfg.out_dir or generate_output_dir())
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Cannot create output directory {out}: {e}")
        return EXIT_IO_ERROR
    configure_logging(run_dir=str(out))
    set_fft_workers(cfg.threads)
    logger.info(f"Running experiment {cfg.experiment} into {out}")

    try:
        (out / "config.echo.toml").write_text(config_to_text(cfg), encoding="utf-8")
        state = _Run(cfg, out)
        _RUNNERS[cfg.experiment](state)

        passed = all(r.passed for r in state.checks)
        summary = {
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "grid": {"counts": list(state.grid.counts), "steps": list(state.grid.steps), "c": state.grid.c},
            "green": {
                "sigma_r": state.spec.mollifier_sigma_r,
                "sigma_t": state.spec.mollifier_sigma_t,
                "epsilon": state.spec.light_line_epsilon,
                "branch_policy": state.spec.branch_policy.value,
                "excluded_mass": excluded_mass(state.spec),
            },
            "checks": [r.to_dict() for r in state.checks],
            "diagnostics": _clean(state.diagnostics),
            "files": sorted(state.files),
            "passed": passed,
        }
        write_summary(out / "summary.json", summary)
        write_summary(out / "runtime.json", _clean(state.runtimes))
    except OSError as e:
        logger.error(f"IO failure: {e}")
        return EXIT_IO_ERROR
    except UppeGreenError as e:
        logger.error(f"Invalid parameters: {e}")
        return EXIT_CONFIG_ERROR

    for r in state.checks:
        if not r.passed:
            logger.warning(f"Check {r.name} failed: residual {r.residual:.3e} > {r.tolerance:g}")
    logger.info(f"Experiment {cfg.experiment} {'passed' if passed else 'failed'}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED
