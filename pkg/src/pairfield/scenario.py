"""Scenario configuration, execution and artifact emission.

A scenario is a JSON document declaring a grid, physical constants, a
potential, an initial state, an evolution window and a set of analysis
tasks.  parse_config validates the whole document and reports every
problem at once (with field paths); run_scenario executes the evolution,
emits one file per task plus a manifest listing every artifact with a
content hash, and saves the final state as a reloadable checkpoint
whenever the main evolution ran.

Task outputs: charges.csv (sampled charge records), compare.json (L2
deviation of the evolved pair field from an independently run Schrodinger
solver), ehrenfest.json (momentum balance report), beta_scan.json (the
balance residual as the charge normalization is varied), dispersion.csv
(measured per-mode frequencies against the analytic quadratic root).
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import time
from dataclasses import dataclass

import numpy as np
import scipy
import scipy.linalg

from . import io as pfio
from .charges import compute_charge_record, write_charges_csv
from .dynamics import (
    DT_STIFFNESS_BOUND,
    FieldState,
    PhysicalConstants,
    Potential,
    Stepper,
    init_adiabatic,
)
from .lattice import ComplexLattice, Grid, RealLattice, make_grid
from .quantum import (
    SchrodingerStepper,
    Wavefunction,
    ehrenfest_check,
    from_wavefunction,
    gaussian_packet,
    l2_distance,
    plane_wave,
    state_to_wavefunction,
)

VERSION = "0.1.0"

TASK_NAMES = ("charges", "compare_schrodinger", "ehrenfest", "dispersion_scan", "beta_scan")
POTENTIAL_KINDS = ("zero", "harmonic", "linear", "gaussian_well", "tabulated")
INITIAL_KINDS = ("plane_wave", "gaussian_packet", "checkpoint")
TOLERANCE_KEYS = ("dispersion_relative", "ehrenfest_residual", "beta_scan_factor", "compare_l2")

DISPERSION_MAX_MODE = 8
DISPERSION_MAX_SAMPLES = 512


class ConfigError(ValueError):
    """Carries every validation failure of a config document."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class ScenarioError(RuntimeError):
    """Runtime failure of a scenario (numerical blow-up and the like)."""


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    omega: float | None = None
    g: tuple[float, ...] | None = None
    depth: float | None = None
    width: float | None = None
    path: str | None = None

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        for key in ("omega", "depth", "width", "path"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        if self.g is not None:
            out["g"] = list(self.g)
        return out


@dataclass(frozen=True)
class InitialStateSpec:
    kind: str
    k: tuple[float, ...] | None = None
    amplitude: float | None = None
    center: tuple[float, ...] | None = None
    width: float | None = None
    carrier: tuple[float, ...] | None = None
    path: str | None = None

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        for key in ("amplitude", "width", "path"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        for key in ("k", "center", "carrier"):
            v = getattr(self, key)
            if v is not None:
                out[key] = list(v)
        return out


@dataclass(frozen=True)
class EvolutionSpec:
    dt: float
    steps: int
    sample_every: int
    allow_large_dt: bool = False

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "steps": self.steps,
            "sample_every": self.sample_every,
            "allow_large_dt": self.allow_large_dt,
        }


@dataclass(frozen=True)
class ScenarioConfig:
    axes: tuple[tuple[int, float], ...]
    constants: PhysicalConstants
    potential: PotentialSpec
    initial_state: InitialStateSpec
    evolution: EvolutionSpec
    tasks: tuple[str, ...]
    output_dir: str
    tolerances: dict

    def to_dict(self) -> dict:
        return {
            "grid": {"axes": [{"points": p, "length": le} for p, le in self.axes]},
            "constants": {"h": self.constants.h, "m": self.constants.m, "c": self.constants.c},
            "potential": self.potential.to_dict(),
            "initial_state": self.initial_state.to_dict(),
            "evolution": self.evolution.to_dict(),
            "tasks": list(self.tasks),
            "output_dir": self.output_dir,
            "tolerances": dict(sorted(self.tolerances.items())),
        }


def _expect_mapping(raw, path, errors, known_keys) -> dict | None:
    if not isinstance(raw, dict):
        errors.append(f"{path}: expected an object, got {type(raw).__name__}")
        return None
    for key in raw:
        if key not in known_keys:
            errors.append(f"{path}.{key}: unknown key (known: {', '.join(known_keys)})")
    return raw


def _number(raw, path, errors, positive=False) -> float | None:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        errors.append(f"{path}: expected a number, got {type(raw).__name__}")
        return None
    v = float(raw)
    if not np.isfinite(v):
        errors.append(f"{path}: must be finite, got {v}")
        return None
    if positive and v <= 0:
        errors.append(f"{path}: must be positive, got {v}")
        return None
    return v


def _integer(raw, path, errors, minimum=None) -> int | None:
    if isinstance(raw, bool) or not isinstance(raw, int):
        errors.append(f"{path}: expected an integer, got {type(raw).__name__}")
        return None
    if minimum is not None and raw < minimum:
        errors.append(f"{path}: must be at least {minimum}, got {raw}")
        return None
    return raw


def _vector(raw, path, errors, ndim) -> tuple[float, ...] | None:
    if not isinstance(raw, list):
        errors.append(f"{path}: expected an array, got {type(raw).__name__}")
        return None
    vals = []
    for i, item in enumerate(raw):
        v = _number(item, f"{path}[{i}]", errors)
        if v is None:
            return None
        vals.append(v)
    if ndim is not None and len(vals) != ndim:
        errors.append(f"{path}: expected {ndim} components (one per grid axis), got {len(vals)}")
        return None
    return tuple(vals)


def _string(raw, path, errors) -> str | None:
    if not isinstance(raw, str):
        errors.append(f"{path}: expected a string, got {type(raw).__name__}")
        return None
    return raw


def _parse_axes(raw, errors) -> tuple[tuple[int, float], ...] | None:
    grid = _expect_mapping(raw, "grid", errors, ("axes",))
    if grid is None:
        return None
    axes_raw = grid.get("axes")
    if axes_raw is None:
        errors.append("grid.axes: required")
        return None
    if not isinstance(axes_raw, list) or not axes_raw:
        errors.append("grid.axes: expected a non-empty array of axis objects")
        return None
    if len(axes_raw) > 3:
        errors.append(f"grid.axes: at most 3 axes supported, got {len(axes_raw)}")
        return None
    axes = []
    ok = True
    for i, entry in enumerate(axes_raw):
        path = f"grid.axes[{i}]"
        m = _expect_mapping(entry, path, errors, ("points", "length"))
        if m is None:
            ok = False
            continue
        pts = _integer(m.get("points"), f"{path}.points", errors, minimum=4)
        if pts is not None and pts % 2 != 0:
            errors.append(f"{path}.points: must be even, got {pts}")
            pts = None
        length = _number(m.get("length"), f"{path}.length", errors, positive=True)
        if pts is None or length is None:
            ok = False
        else:
            axes.append((pts, length))
    return tuple(axes) if ok else None


def _parse_constants(raw, errors) -> PhysicalConstants | None:
    if raw is None:
        return PhysicalConstants()
    m = _expect_mapping(raw, "constants", errors, ("h", "m", "c"))
    if m is None:
        return None
    vals = {}
    ok = True
    for key in ("h", "m", "c"):
        v = _number(m.get(key, 1.0), f"constants.{key}", errors, positive=True)
        if v is None:
            ok = False
        else:
            vals[key] = v
    return PhysicalConstants(**vals) if ok else None


def _parse_potential(raw, errors, ndim) -> PotentialSpec | None:
    if raw is None:
        return PotentialSpec("zero")
    if not isinstance(raw, dict):
        errors.append(f"potential: expected an object, got {type(raw).__name__}")
        return None
    kind = raw.get("type")
    if kind not in POTENTIAL_KINDS:
        errors.append(f"potential.type: expected one of {POTENTIAL_KINDS}, got {kind!r}")
        return None
    known = {
        "zero": ("type",),
        "harmonic": ("type", "omega"),
        "linear": ("type", "g"),
        "gaussian_well": ("type", "depth", "width"),
        "tabulated": ("type", "path"),
    }[kind]
    if _expect_mapping(raw, "potential", errors, known) is None:
        return None
    if kind == "zero":
        return PotentialSpec("zero")
    if kind == "harmonic":
        omega = _number(raw.get("omega"), "potential.omega", errors, positive=True)
        return PotentialSpec("harmonic", omega=omega) if omega is not None else None
    if kind == "linear":
        g = _vector(raw.get("g"), "potential.g", errors, ndim)
        return PotentialSpec("linear", g=g) if g is not None else None
    if kind == "gaussian_well":
        depth = _number(raw.get("depth"), "potential.depth", errors)
        width = _number(raw.get("width"), "potential.width", errors, positive=True)
        if depth is None or width is None:
            return None
        return PotentialSpec("gaussian_well", depth=depth, width=width)
    path = _string(raw.get("path"), "potential.path", errors)
    return PotentialSpec("tabulated", path=path) if path is not None else None


def _parse_initial(raw, errors, ndim, axes) -> InitialStateSpec | None:
    if raw is None:
        errors.append("initial_state: required")
        return None
    if not isinstance(raw, dict):
        errors.append(f"initial_state: expected an object, got {type(raw).__name__}")
        return None
    kind = raw.get("type")
    if kind not in INITIAL_KINDS:
        errors.append(f"initial_state.type: expected one of {INITIAL_KINDS}, got {kind!r}")
        return None
    known = {
        "plane_wave": ("type", "k", "amplitude"),
        "gaussian_packet": ("type", "center", "width", "carrier"),
        "checkpoint": ("type", "path"),
    }[kind]
    if _expect_mapping(raw, "initial_state", errors, known) is None:
        return None
    if kind == "plane_wave":
        k = _vector(raw.get("k"), "initial_state.k", errors, ndim)
        amp = _number(raw.get("amplitude", 1.0), "initial_state.amplitude", errors, positive=True)
        if k is None or amp is None:
            return None
        if axes is not None:
            for ax, (kj, (_, length)) in enumerate(zip(k, axes)):
                cycles = kj * length / (2.0 * np.pi)
                if abs(cycles - round(cycles)) > 1e-9:
                    errors.append(
                        f"initial_state.k[{ax}]: {kj} is not a harmonic of the box "
                        f"(needs an integer multiple of 2*pi/{length})"
                    )
                    return None
        return InitialStateSpec("plane_wave", k=k, amplitude=amp)
    if kind == "gaussian_packet":
        center = _vector(raw.get("center"), "initial_state.center", errors, ndim)
        width = _number(raw.get("width"), "initial_state.width", errors, positive=True)
        carrier_raw = raw.get("carrier")
        if carrier_raw is None and ndim is not None:
            carrier = (0.0,) * ndim
        else:
            carrier = _vector(carrier_raw, "initial_state.carrier", errors, ndim)
        if center is None or width is None or carrier is None:
            return None
        return InitialStateSpec("gaussian_packet", center=center, width=width, carrier=carrier)
    path = _string(raw.get("path"), "initial_state.path", errors)
    return InitialStateSpec("checkpoint", path=path) if path is not None else None


def _parse_evolution(raw, errors, constants) -> EvolutionSpec | None:
    if raw is None:
        errors.append("evolution: required")
        return None
    m = _expect_mapping(raw, "evolution", errors, ("dt", "steps", "sample_every", "allow_large_dt"))
    if m is None:
        return None
    dt = _number(m.get("dt"), "evolution.dt", errors, positive=True)
    steps = _integer(m.get("steps"), "evolution.steps", errors, minimum=1)
    sample_every = _integer(m.get("sample_every", 1), "evolution.sample_every", errors, minimum=1)
    allow = m.get("allow_large_dt", False)
    if not isinstance(allow, bool):
        errors.append(f"evolution.allow_large_dt: expected a boolean, got {type(allow).__name__}")
        allow = None
    if dt is None or steps is None or sample_every is None or allow is None:
        return None
    if steps % sample_every != 0:
        errors.append(
            f"evolution.sample_every: must divide steps ({steps} % {sample_every} != 0)"
        )
        return None
    if constants is not None and not allow:
        product = dt * constants.planck_frequency
        if product > DT_STIFFNESS_BOUND:
            errors.append(
                f"evolution.dt: dt*(m*c^2/h) = {product:.6g} exceeds the bound "
                f"{DT_STIFFNESS_BOUND}; set evolution.allow_large_dt to override"
            )
            return None
    return EvolutionSpec(dt=dt, steps=steps, sample_every=sample_every, allow_large_dt=allow)


def _parse_tasks(raw, errors) -> tuple[str, ...] | None:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        errors.append(f"tasks: expected an array, got {type(raw).__name__}")
        return None
    seen = set()
    for i, item in enumerate(raw):
        if item not in TASK_NAMES:
            errors.append(f"tasks[{i}]: expected one of {TASK_NAMES}, got {item!r}")
            return None
        seen.add(item)
    return tuple(t for t in TASK_NAMES if t in seen)


def _parse_tolerances(raw, errors) -> dict | None:
    if raw is None:
        return {}
    m = _expect_mapping(raw, "tolerances", errors, TOLERANCE_KEYS)
    if m is None:
        return None
    out = {}
    ok = True
    for key, value in m.items():
        if key not in TOLERANCE_KEYS:
            ok = False
            continue
        v = _number(value, f"tolerances.{key}", errors, positive=True)
        if v is None:
            ok = False
        else:
            out[key] = v
    return out if ok else None


def parse_config_dict(raw: dict) -> ScenarioConfig:
    """Validate a parsed JSON object; raises ConfigError listing every problem."""
    errors: list[str] = []
    top_keys = (
        "grid", "constants", "potential", "initial_state",
        "evolution", "tasks", "output_dir", "tolerances",
    )
    if _expect_mapping(raw, "config", errors, top_keys) is None:
        raise ConfigError(errors)

    if "grid" not in raw:
        errors.append("grid: required")
        axes = None
    else:
        axes = _parse_axes(raw["grid"], errors)
    ndim = len(axes) if axes else None

    constants = _parse_constants(raw.get("constants"), errors)
    potential = _parse_potential(raw.get("potential"), errors, ndim)
    initial = _parse_initial(raw.get("initial_state"), errors, ndim, axes)
    evolution = _parse_evolution(raw.get("evolution"), errors, constants)
    tasks = _parse_tasks(raw.get("tasks"), errors)
    tolerances = _parse_tolerances(raw.get("tolerances"), errors)

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        errors.append("output_dir: expected a non-empty string")
        output_dir = None

    if (
        tasks is not None
        and "dispersion_scan" in tasks
        and potential is not None
        and potential.kind != "zero"
    ):
        errors.append(
            "tasks: dispersion_scan measures the free-mode law and requires potential.type zero"
        )

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        axes=axes,
        constants=constants,
        potential=potential,
        initial_state=initial,
        evolution=evolution,
        tasks=tasks,
        output_dir=output_dir,
        tolerances=tolerances,
    )


def potential_spec_from_dict(raw: dict, ndim: int) -> PotentialSpec:
    """Validate a bare potential descriptor (as stored in checkpoints)."""
    errors: list[str] = []
    spec = _parse_potential(raw, errors, ndim)
    if spec is None:
        raise ConfigError(errors)
    return spec


def parse_config(text: str, allow_large_dt: bool = False) -> ScenarioConfig:
    """Parse and validate a JSON config document.

    allow_large_dt=True forces evolution.allow_large_dt on before
    validation (the command-line override).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<json>: {exc}"]) from exc
    if allow_large_dt and isinstance(raw, dict) and isinstance(raw.get("evolution"), dict):
        raw = dict(raw)
        raw["evolution"] = {**raw["evolution"], "allow_large_dt": True}
    return parse_config_dict(raw)


def load_config(path, allow_large_dt: bool = False) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), allow_large_dt=allow_large_dt)


def build_potential(spec: PotentialSpec, grid: Grid, constants: PhysicalConstants) -> Potential:
    if spec.kind == "zero":
        return Potential.zero(grid)
    if spec.kind == "harmonic":
        return Potential.harmonic(grid, constants.m, spec.omega)
    if spec.kind == "linear":
        return Potential.linear(grid, list(spec.g))
    if spec.kind == "gaussian_well":
        return Potential.gaussian_well(grid, spec.depth, spec.width)
    lat = pfio.load_lattice(spec.path)
    if not isinstance(lat, RealLattice):
        raise ConfigError(["potential.path: tabulated potential must be a real lattice"])
    if lat.grid != grid:
        raise ConfigError([
            f"potential.path: tabulated samples are for grid {lat.grid.points}/"
            f"{lat.grid.lengths}, expected {grid.points}/{grid.lengths}"
        ])
    return Potential(grid, lat)


def build_initial_state(
    spec: InitialStateSpec, grid: Grid, constants: PhysicalConstants
) -> FieldState:
    if spec.kind == "plane_wave":
        w = plane_wave(grid, spec.k, spec.amplitude)
    elif spec.kind == "gaussian_packet":
        w = gaussian_packet(grid, spec.center, spec.width, spec.carrier)
    else:
        state, saved_constants, _ = pfio.load_state(spec.path)
        if state.grid != grid:
            raise ConfigError([
                f"initial_state.path: checkpoint grid {state.grid.points}/"
                f"{state.grid.lengths} does not match the declared grid "
                f"{grid.points}/{grid.lengths}"
            ])
        for name in ("h", "m", "c"):
            a, b = getattr(saved_constants, name), getattr(constants, name)
            if abs(a - b) > 1e-12 * max(abs(a), abs(b)):
                raise ConfigError([
                    f"initial_state.path: checkpoint constant {name}={a} conflicts "
                    f"with configured {name}={b}"
                ])
        return state
    p, q = from_wavefunction(w)
    return init_adiabatic(p, q, constants)


def estimate_frequencies(series, dt: float, order: int = 6):
    """Fit complex exponentials to a uniformly sampled series.

    Matrix-pencil estimate: returns (frequencies, amplitudes) sorted by
    descending |amplitude|, with the convention series(t) ~ sum_i a_i
    exp(-i w_i t).  order bounds the number of fitted poles.
    """
    y = np.asarray(series, dtype=np.complex128)
    M = y.shape[0]
    if M < 8:
        raise ValueError("need at least 8 samples")
    if dt <= 0 or not np.isfinite(dt):
        raise ValueError("dt must be positive and finite")
    L = M // 2
    H = scipy.linalg.hankel(y[:L], y[L - 1 :])
    X0, X1 = H[:, :-1], H[:, 1:]
    U, s, Vh = np.linalg.svd(X0, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-12)) if s[0] > 0 else 0
    r = max(1, min(order, rank))
    Ur, sr, Vr = U[:, :r], s[:r], Vh[:r].conj().T
    core = Ur.conj().T @ X1 @ Vr / sr
    poles = np.linalg.eigvals(core)
    poles = poles[np.abs(poles) > 1e-12]
    times = np.arange(M)
    basis = poles[None, :] ** times[:, None]
    amps, *_ = np.linalg.lstsq(basis, y, rcond=None)
    idx = np.argsort(-np.abs(amps))
    freqs = -np.angle(poles[idx]) / dt
    return freqs, amps[idx]


def dominant_frequency(series, dt: float, order: int = 6) -> float:
    """Frequency of the largest-amplitude exponential in the series."""
    freqs, _ = estimate_frequencies(series, dt, order)
    return float(freqs[0])


def slow_mode_frequency(k_norm: float, constants: PhysicalConstants) -> float:
    """Positive root of w^2 + w_P w - k^2 c^2 / 2 = 0."""
    wp = constants.planck_frequency
    return 0.5 * (-wp + np.sqrt(wp**2 + 2.0 * (k_norm * constants.c) ** 2))


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _dump_json(path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_dispersion(cfg: ScenarioConfig, grid: Grid, constants: PhysicalConstants, path):
    """Measure slow-mode frequencies for axis-0 harmonics against the quadratic root.

    Seeds one state superposing every scanned harmonic (the dynamics is
    linear, so modes evolve independently), records each mode's complex
    amplitude psi_hat(k) every step, and pencil-fits the dominant tone.
    """
    n_modes = min(DISPERSION_MAX_MODE, grid.points[0] // 2 - 1)
    if n_modes < 1:
        raise ScenarioError("grid too small for a dispersion scan")
    base = 2.0 * np.pi / grid.lengths[0]
    zero_tail = (0.0,) * (grid.ndim - 1)
    values = np.zeros(grid.shape, dtype=np.complex128)
    for j in range(1, n_modes + 1):
        values += plane_wave(grid, (j * base, *zero_tail)).values
    psi0 = Wavefunction(ComplexLattice(grid, values / np.sqrt(n_modes)))
    p, q = from_wavefunction(psi0)
    state = init_adiabatic(p, q, constants)

    pot = Potential.zero(grid)
    dt = cfg.evolution.dt
    steps = min(cfg.evolution.steps, DISPERSION_MAX_SAMPLES)
    stepper = Stepper(grid, pot, constants, dt, cfg.evolution.allow_large_dt)

    series = np.empty((steps + 1, n_modes), dtype=np.complex128)

    def record(row, s):
        psi = state_to_wavefunction(s).values
        psih = np.fft.fftn(psi)
        for j in range(1, n_modes + 1):
            series[row, j - 1] = psih[(j,) + (0,) * (grid.ndim - 1)]

    record(0, state)
    for i in range(steps):
        try:
            state = stepper.step(state)
        except ValueError as exc:
            raise ScenarioError(f"numerical blow-up at step {i + 1}: {exc}") from exc
        record(i + 1, state)

    tol = cfg.tolerances.get("dispersion_relative")
    rows = []
    max_rel = 0.0
    for j in range(1, n_modes + 1):
        k_norm = j * base
        measured = dominant_frequency(series[:, j - 1], dt)
        analytic = slow_mode_frequency(k_norm, constants)
        rel = abs(measured - analytic) / abs(analytic)
        max_rel = max(max_rel, rel)
        rows.append((k_norm, measured, analytic, rel))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,measured_omega,analytic_omega,relative_error\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    summary = {"modes": n_modes, "max_relative_error": max_rel}
    if tol is not None:
        summary["tolerance"] = tol
        summary["pass"] = bool(max_rel <= tol)
    return summary


def run_scenario(cfg: ScenarioConfig, output_dir=None, seed=None) -> dict:
    """Execute a validated config; returns the manifest written alongside artifacts.

    seed is recorded in the manifest for reproducibility bookkeeping; none
    of the built-in tasks draws randomness.
    """
    started = time.perf_counter()
    outdir = output_dir if output_dir is not None else cfg.output_dir
    os.makedirs(outdir, exist_ok=True)

    grid = make_grid(list(cfg.axes))
    constants = cfg.constants
    pot = build_potential(cfg.potential, grid, constants)

    emitted: list[str] = []
    task_summaries: dict[str, dict] = {}
    timings: dict[str, float] = {}

    def emit(name):
        emitted.append(name)
        return os.path.join(outdir, name)

    evolution_tasks = {"charges", "compare_schrodinger", "ehrenfest", "beta_scan"}
    need_evolution = bool(evolution_tasks & set(cfg.tasks))

    if need_evolution:
        t0 = time.perf_counter()
        state = build_initial_state(cfg.initial_state, grid, constants)
        ev = cfg.evolution
        stepper = Stepper(grid, pot, constants, ev.dt, ev.allow_large_dt)

        compare = "compare_schrodinger" in cfg.tasks
        if compare:
            oracle = state_to_wavefunction(state)
            oracle_stepper = SchrodingerStepper(grid, pot, constants, ev.dt)
            deviations = [l2_distance(state_to_wavefunction(state), oracle)]

        samples = [state]
        for i in range(ev.steps):
            try:
                state = stepper.step(state)
            except ValueError as exc:
                raise ScenarioError(f"numerical blow-up at step {i + 1}: {exc}") from exc
            if compare:
                oracle = oracle_stepper.step(oracle)
            if (i + 1) % ev.sample_every == 0:
                samples.append(state)
                if compare:
                    deviations.append(l2_distance(state_to_wavefunction(state), oracle))
        timings["evolution"] = time.perf_counter() - t0

        if "charges" in cfg.tasks:
            t0 = time.perf_counter()
            records = [compute_charge_record(s, pot, constants) for s in samples]
            write_charges_csv(emit("charges.csv"), records)
            timings["charges"] = time.perf_counter() - t0
            task_summaries["charges"] = {"samples": len(records)}

        if compare:
            tol = cfg.tolerances.get("compare_l2")
            payload = {
                "times": [s.time for s in samples],
                "l2_deviation": deviations,
                "final_deviation": deviations[-1],
                "max_deviation": max(deviations),
            }
            if tol is not None:
                payload["tolerance"] = tol
                payload["pass"] = bool(max(deviations) <= tol)
            _dump_json(emit("compare.json"), payload)
            task_summaries["compare_schrodinger"] = {
                "final_deviation": deviations[-1],
                "max_deviation": max(deviations),
            }

        if "ehrenfest" in cfg.tasks or "beta_scan" in cfg.tasks:
            if len(samples) < 3:
                raise ScenarioError(
                    "ehrenfest and beta_scan need at least 3 samples; lower sample_every"
                )
            t0 = time.perf_counter()
            report = ehrenfest_check(samples, pot, constants)
            timings["ehrenfest_analysis"] = time.perf_counter() - t0
            if "ehrenfest" in cfg.tasks:
                tol = cfg.tolerances.get("ehrenfest_residual")
                payload = report.to_json_dict()
                if tol is not None:
                    payload["tolerance"] = tol
                    payload["pass"] = bool(report.max_abs_residual <= tol)
                _dump_json(emit("ehrenfest.json"), payload)
                task_summaries["ehrenfest"] = {
                    "max_abs_residual": report.max_abs_residual,
                    "order_estimate": report.order_estimate,
                }
            if "beta_scan" in cfg.tasks:
                betas = [b for b, _ in report.beta_scan]
                residuals = [r for _, r in report.beta_scan]
                at_h = dict(report.beta_scan)[report.hbar]
                others = [r for b, r in report.beta_scan if b != report.hbar]
                factor = cfg.tolerances.get("beta_scan_factor")
                payload = {
                    "betas": betas,
                    "residuals": residuals,
                    "hbar": report.hbar,
                    "min_at_hbar": bool(at_h <= min(residuals)),
                }
                if factor is not None and others:
                    payload["factor"] = factor
                    payload["pass"] = bool(at_h * factor <= min(others))
                _dump_json(emit("beta_scan.json"), payload)
                task_summaries["beta_scan"] = {"residuals": dict(zip(map(str, betas), residuals))}

        pfio.save_state(
            os.path.join(outdir, "final_state.pfld"),
            state,
            constants,
            cfg.potential.to_dict(),
        )
        emitted.append("final_state.pfld")

    if "dispersion_scan" in cfg.tasks:
        t0 = time.perf_counter()
        task_summaries["dispersion_scan"] = _run_dispersion(
            cfg, grid, constants, emit("dispersion.csv")
        )
        timings["dispersion_scan"] = time.perf_counter() - t0

    config_blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    timings["total"] = time.perf_counter() - started
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": hashlib.sha256(config_blob.encode("utf-8")).hexdigest(),
        "versions": {
            "pairfield": VERSION,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "files": {name: _sha256(os.path.join(outdir, name)) for name in sorted(emitted)},
        "tasks": task_summaries,
        "seed": seed,
        "timings": timings,
    }
    _dump_json(os.path.join(outdir, "manifest.json"), manifest)
    return manifest
