"""Batch command line front end.

Usage::

    python3 -m penning_ising --config run.json --out results/ [--threads 4] [--seed 7]

The JSON file selects one experiment and its parameters. Frequencies at this
boundary are in Hz, rates in 1/s, times in s and angles as named by the key
suffix. Every run writes one or more CSV files plus ``metadata.json``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InvariantViolation, PhysicsDomainError

EXPERIMENTS = ("crystal", "dynamics", "squeezing-scan", "counting", "fisher",
               "noise-budget", "validate-oracle")

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_INVARIANT = 0, 2, 3, 4


@dataclass
class RunConfig:
    experiment: str
    seed: int = 0
    # spin ensemble
    n_ions: int = 127
    j_bar_over_h_hz: float | None = None
    j_bar_rad_per_s: float | None = None
    gamma_el: float = 0.0
    gamma_ud: float = 0.0
    gamma_du: float = 0.0
    tau_s: float = 3e-3
    # scans
    tau_grid_s: list | None = None
    psi_deg: list | None = None
    n_list: list | None = None
    theta_grid_rad: list | None = None
    decoupling_locked: bool = False
    # noise
    bfield: bool = False
    bfield_var: float | None = None
    shot_sigma: float = 0.0
    trials: int = 0
    # crystal
    omega_z_hz: float = 1.58e6
    omega_r_hz: float = 180e3
    b_field_t: float = 4.4588
    omega_q_hz: float = 28e3
    detuning_hz: float | None = None
    f0_n: float | None = None
    temperature_k: float = 5e-4
    lattice_period_m: float = 0.90e-6
    seed_layout: list | None = None
    # noise budget
    k_photons: float = 15.0
    classical_noise_fraction: float = 0.0
    heating_quanta: float = 0.1
    epsilon: float = 0.5
    t_pi_s: float = 60e-6
    nbar_com: float = 12.0
    radius_m: float = 125e-6
    misalignment_deg: float = 0.01
    budget_force_n: float = 30e-24
    budget_detuning_hz: float = 1e3
    budget_omega_z_hz: float = 1.6e6
    # oracle validation
    oracle_n: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    oracle_draws: int = 25
    oracle_tol: float = 1e-6

    # --- validation ----------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        if "experiment" not in raw:
            raise ConfigError("missing required key 'experiment'")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.n_ions, int) or self.n_ions < 1:
            raise ConfigError("n_ions must be a positive integer")
        if self.j_bar_over_h_hz is not None and self.j_bar_rad_per_s is not None:
            raise ConfigError("give the coupling as j_bar_over_h_hz or j_bar_rad_per_s, not both")
        for name in ("gamma_el", "gamma_ud", "gamma_du", "tau_s", "shot_sigma",
                     "temperature_k", "k_photons", "heating_quanta", "t_pi_s", "nbar_com"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite number >= 0")
        for name in ("tau_grid_s", "psi_deg", "n_list", "theta_grid_rad", "oracle_n"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, list) or len(value) == 0):
                raise ConfigError(f"{name} must be a non-empty list")
        if self.tau_grid_s is not None and min(self.tau_grid_s) < 0:
            raise ConfigError("tau_grid_s entries must be >= 0")
        if self.n_list is not None and any(not isinstance(n, int) or n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be positive integers")
        if self.experiment == "dynamics" and self.tau_grid_s is None:
            raise ConfigError("dynamics needs tau_grid_s")
        if self.experiment == "squeezing-scan" and self.n_list is None:
            raise ConfigError("squeezing-scan needs n_list")
        if self.experiment in ("dynamics", "squeezing-scan", "counting", "fisher"):
            if self.j_bar_over_h_hz is None and self.j_bar_rad_per_s is None:
                raise ConfigError("this experiment needs j_bar_over_h_hz or j_bar_rad_per_s")
        if self.decoupling_locked and any(t <= 0 for t in self.tau_grid_s or []):
            raise ConfigError("decoupling-locked scans need tau > 0")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")

    @property
    def j_bar(self) -> float:
        """Coupling in rad/s."""
        if self.j_bar_rad_per_s is not None:
            return float(self.j_bar_rad_per_s)
        return 2.0 * math.pi * float(self.j_bar_over_h_hz)

    def params(self, n=None, tau=None, j_bar=None):
        from .model import SpinEnsembleParams
        return SpinEnsembleParams(n_ions=self.n_ions if n is None else n,
                                  j_bar=self.j_bar if j_bar is None else j_bar,
                                  gamma_el=self.gamma_el, gamma_ud=self.gamma_ud,
                                  gamma_du=self.gamma_du,
                                  tau=self.tau_s if tau is None else tau)

    def field_variance(self, tau=None) -> float:
        from .counting import dephasing_variance
        if not self.bfield:
            return 0.0
        if self.bfield_var is not None:
            return float(self.bfield_var)
        return float(dephasing_variance(self.tau_s if tau is None else tau))


@dataclass
class Table:
    name: str
    columns: list
    rows: list


# --- experiments ---------------------------------------------------------------

def _run_crystal(cfg: RunConfig, pool):
    from . import crystal
    from .model import DriveConfig, TrapConfig

    tp = 2.0 * math.pi
    trap = TrapConfig.from_magnetic_field(tp * cfg.omega_z_hz, tp * cfg.omega_r_hz,
                                          cfg.b_field_t, omega_q=tp * cfg.omega_q_hz)
    layout = None if cfg.seed_layout is None else np.asarray(cfg.seed_layout, float)
    state = crystal.equilibrium_positions(trap, cfg.n_ions, seed_layout=layout, seed=cfg.seed)
    modes = crystal.axial_modes(state)
    delta_k = tp / cfg.lattice_period_m
    detuning = tp * (cfg.detuning_hz if cfg.detuning_hz is not None else 2.0 / cfg.tau_s)
    mu = trap.omega_z + detuning
    if cfg.f0_n is not None:
        drive = DriveConfig(cfg.f0_n, mu, delta_k)
    elif cfg.j_bar_over_h_hz is not None or cfg.j_bar_rad_per_s is not None:
        drive = crystal.force_for_mean_coupling(modes, mu, cfg.j_bar, trap.ion_mass, delta_k)
    else:
        drive = DriveConfig(30e-24, mu, delta_k)
    coupling = crystal.coupling_matrix(modes, drive, trap.ion_mass)
    z_rms, dwf = crystal.thermal_extent(modes, cfg.temperature_k, delta_k, trap.ion_mass)
    summary = {"radius_m": state.radius, "potential_energy_j": state.potential_energy,
               "gradient_norm": state.gradient_norm, "f0_n": drive.f0,
               "j_bar_effective_rad_per_s": coupling.j_bar_effective,
               "com_gap_hz": float((modes.frequencies[0] - modes.frequencies[-1 if
                                    modes.n_modes == 1 else 1]) / tp)}
    if cfg.n_ions >= 3 and np.all(coupling.j[np.triu_indices(cfg.n_ions, 1)] > 0):
        summary["power_law_prefactor"], summary["power_law_alpha"] = \
            crystal.power_law_fit(coupling, state)
    n = cfg.n_ions
    iu = np.triu_indices(n, 1)
    tables = [
        Table("positions", ["ion_index", "x_m", "y_m"],
              [[i, *state.positions[i]] for i in range(n)]),
        Table("modes", ["mode_index", "freq_hz"],
              [[m, modes.frequencies[m] / tp] for m in range(n)]),
        Table("couplings", ["i", "j", "J_over_h_hz"],
              [[int(i), int(j), coupling.j[i, j] / tp] for i, j in zip(*iu)]),
        Table("extents", ["ion_index", "radius_m", "z_rms_m", "dwf"],
              [[i, float(np.hypot(*state.positions[i])), z_rms[i], dwf[i]] for i in range(n)]),
    ]
    return tables, summary


def _locked_coupling(cfg: RunConfig, tau):
    """J_bar at tau when delta = 4 pi / tau; J scales as 1/delta, referenced to cfg.tau_s."""
    return cfg.j_bar * tau / cfg.tau_s


def _run_dynamics(cfg: RunConfig, pool):
    from . import dynamics

    def point(tau):
        j_bar = _locked_coupling(cfg, tau) if cfg.decoupling_locked else cfg.j_bar
        p = cfg.params(tau=tau, j_bar=j_bar)
        c = dynamics.contrast(p)
        vzz, vyy, cyz = dynamics.variance_quadratic_form(p)
        eig = np.linalg.eigvalsh(np.array([[vzz, cyz], [cyz, vyy]]))
        try:
            xi2, psi_min = dynamics.squeezing_parameter(p)
        except PhysicsDomainError:
            xi2, psi_min = math.inf, math.nan
        delta_hz = 2.0 / tau if cfg.decoupling_locked else math.nan
        return [tau, delta_hz, j_bar, c, 0.5 * p.n_ions * math.exp(-p.gamma * tau),
                eig[0], eig[1], xi2, math.degrees(psi_min)]

    rows = list(pool.map(point, [float(t) for t in cfg.tau_grid_s]))
    cols = ["tau_s", "delta_hz", "j_bar_rad_per_s", "contrast", "gamma_only_contrast",
            "var_min", "var_max", "xi2", "psi_min_deg"]
    return [Table("dynamics", cols, rows)], {}


def _run_squeezing(cfg: RunConfig, pool):
    from . import dynamics

    def point(n):
        p = cfg.params(n=n)
        xi2, tau, psi_min = dynamics.optimal_squeezing(p)
        xi2_c, tau_c, _ = dynamics.optimal_squeezing(p.coherent())
        return [n, xi2, tau, math.degrees(psi_min), xi2_c, tau_c]

    rows = list(pool.map(point, cfg.n_list))
    cols = ["n_ions", "xi2_opt", "tau_opt_s", "psi_opt_deg", "xi2_opt_coherent",
            "tau_opt_coherent_s"]
    return [Table("squeezing_scan", cols, rows)], {}


def _run_counting(cfg: RunConfig, pool):
    from . import counting, oracle
    from .model import MeasurementDirection

    angles = cfg.psi_deg if cfg.psi_deg is not None else [88.0, 174.6]
    p = cfg.params()
    var = cfg.field_variance()
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(angles))

    def one(k):
        direction = MeasurementDirection.tomography(math.radians(angles[k]))
        dist = counting.counting_distribution(direction, p, bfield_var=var)
        shot = counting.convolve_shot_noise(dist, cfg.shot_sigma)
        cols = ["n_up", "s", "probability", "probability_shot"]
        data = np.column_stack([np.arange(p.n_ions + 1), dist.s_values,
                                dist.probabilities, shot.probabilities])
        if cfg.trials > 0:
            counts = oracle.sample_distribution(shot, cfg.trials, seeds[k])
            cols.append("sampled_counts")
            data = np.column_stack([data, counts])
        rows = [[int(r[0]), *r[1:4], *[int(x) for x in r[4:]]] for r in data]
        return Table(f"counting_psi_{angles[k]:g}", cols, rows)

    tables = list(pool.map(one, range(len(angles))))
    return tables, {"bfield_var": var}


def _run_fisher(cfg: RunConfig, pool):
    from . import fisher

    p = cfg.params()
    var = cfg.field_variance()
    psi_ref = math.radians(cfg.psi_deg[0]) if cfg.psi_deg else None
    grid = None if cfg.theta_grid_rad is None else np.asarray(cfg.theta_grid_rad, float)
    scan = fisher.fisher_information(p, psi_ref, grid, bfield_var=var,
                                     shot_sigma=cfg.shot_sigma, map_fn=pool.map)
    rows = [[t, d] for t, d in zip(scan.thetas, scan.distances)]
    return [Table("fisher_scan", ["theta_rad", "hellinger_sq"], rows)], scan.summary()


def _run_noise_budget(cfg: RunConfig, pool):
    from . import noisebudget as nb

    tp = 2.0 * math.pi
    psi = math.radians(cfg.psi_deg[0]) if cfg.psi_deg else math.pi / 2
    rows = nb.budget_table(
        n=cfg.n_ions, tau=cfg.tau_s, psi=psi,
        detection=nb.DetectionConfig(cfg.k_photons, cfg.classical_noise_fraction),
        f0=cfg.budget_force_n, delta=tp * cfg.budget_detuning_hz,
        omega_z=tp * cfg.budget_omega_z_hz, delta_n=cfg.heating_quanta,
        epsilon=cfg.epsilon, t_pi=cfg.t_pi_s, nbar=cfg.nbar_com, radius=cfg.radius_m,
        misalignment=math.radians(cfg.misalignment_deg))
    width = max(len(r[0]) for r in rows)
    for name, value, unit in rows:
        print(f"{name:<{width}}  {value:.6g} {unit}")
    return [Table("noise_budget", ["quantity", "value", "unit"], [list(r) for r in rows])], {}


def _run_validate_oracle(cfg: RunConfig, pool):
    from . import oracle

    jobs = []
    streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.oracle_n))
    for n, ss in zip(cfg.oracle_n, streams):
        rng = np.random.default_rng(ss)
        jobs.extend((n, *oracle.random_draw(n, rng)) for _ in range(cfg.oracle_draws))

    def one(job):
        n, params, psi_angle = job
        err = oracle.compare_to_oracle(params, psi_angle)
        return [n, params.j_bar, params.gamma_el, params.gamma_ud, params.gamma_du,
                params.tau, psi_angle, *err.values()], list(err)

    results = list(pool.map(one, jobs))
    keys = results[0][1]
    rows = [r for r, _ in results]
    worst = {k: max(r[7 + i] for r in rows) for i, k in enumerate(keys)}
    cols = ["n_ions", "j_bar", "gamma_el", "gamma_ud", "gamma_du", "t", "psi_rad",
            *[f"err_{k}" for k in keys]]
    summary = {"worst": worst, "tolerance": cfg.oracle_tol,
               "passed": all(v < cfg.oracle_tol for v in worst.values())}
    return [Table("oracle_validation", cols, rows)], summary


RUNNERS = {"crystal": _run_crystal, "dynamics": _run_dynamics,
           "squeezing-scan": _run_squeezing, "counting": _run_counting,
           "fisher": _run_fisher, "noise-budget": _run_noise_budget,
           "validate-oracle": _run_validate_oracle}


# --- output --------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_table(table: Table, out_dir: Path) -> Path:
    path = out_dir / f"{table.name}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path) -> tuple[list, np.ndarray]:
    """Header and float array of a numeric CSV written by :func:`write_table`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def run(cfg: RunConfig, out_dir, threads=1):
    """Run one experiment and write its outputs; returns the summary dict."""
    out_dir = Path(out_dir)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        tables, summary = RUNNERS[cfg.experiment](cfg, pool)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [write_table(t, out_dir).name for t in tables]
    meta = {"artifact_version": __version__, "config": dataclasses.asdict(cfg),
            "outputs": files, "summary": summary}
    (out_dir / "metadata.json").write_text(json.dumps(_jsonable(meta), indent=2) + "\n")
    return summary


def build_parser():
    parser = argparse.ArgumentParser(prog="penning-ising", description=__doc__.split("\n")[0])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if args.seed is not None:
            if isinstance(raw, dict):
                raw["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = RunConfig.from_dict(raw)
        summary = run(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsDomainError as exc:
        print(f"physics error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    if cfg.experiment == "validate-oracle" and not summary["passed"]:
        print(f"oracle disagreement: {summary['worst']}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
