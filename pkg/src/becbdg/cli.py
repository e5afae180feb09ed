"""Command-line pipeline: ground state -> excitation spectrum -> analysis.

Subcommands
-----------
groundstate   minimize the energy, write the field + metadata + density
bdg           compute the excitation spectrum, write CSV and mode fields
perturb       write perturbed-density snapshots for one excitation mode
validate      run the oracle/invariant/convergence suite, exit 0 iff green
timing        wall-time scaling study over a ladder of grid sizes

All commands read an optional UTF-8 ``key=value`` config file (``#``
comments allowed) via ``--config``, write into ``--out`` (default ``out``)
and take ``--seed`` for reproducible solver starts.  Physics defaults are
the standard benchmark set: beta11=100, beta12=94, beta22=97 with a unit
Rabi junction, or alpha=0.2 mass split without one.

Exit codes: 0 success, 2 usage or config error, 3 convergence failure,
4 invariant violation, 5 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as _an
from . import bdg as _bdg
from . import eigensolver as _es
from . import fileio as _io
from . import groundstate as _gs
from .exceptions import (
    ConvergenceError,
    IndefiniteOperatorError,
    NullspaceVerificationError,
    StructureViolationError,
)
from .spectral import make_grid

__all__ = ["main", "RunConfig", "parse_config"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_INVARIANT = 4
EXIT_IO = 5


@dataclass
class RunConfig:
    """One run's physics, grid, solver and command options."""

    mode: str = _gs.JJ
    dim: int = 1
    half_width: float | None = None
    points: int = 128
    beta11: float = 100.0
    beta12: float = 94.0
    beta22: float = 97.0
    omega_rabi: float | None = None
    delta: float = 0.0
    alpha: float = 0.2
    gamma: tuple = ()
    n_ev: int = 10
    tol: float = 1e-9
    inner_tol: float = 1e-11
    max_outer: int = 200
    block_size: int | None = None
    ground_tol: float = 1e-13
    seed: int = 0
    ell: int = 1
    epsilon: float = 0.1
    times: tuple = (7.4, 9.2)
    sweep_sizes: tuple = (32, 64, 128)
    flip_pairing_sign: bool = False  # validation fault-injection hook
    out_dir: Path = field(default_factory=lambda: Path("out"))

    def __post_init__(self):
        self.mode = str(self.mode).lower()
        if self.mode not in (_gs.JJ, _gs.NOJJ):
            raise ValueError(f"mode must be jj or nojj, got {self.mode!r}")
        if self.omega_rabi is None:
            self.omega_rabi = 1.0 if self.mode == _gs.JJ else 0.0
        if not self.gamma:
            self.gamma = (1.0,) * self.dim
        if len(self.gamma) != self.dim:
            raise ValueError(
                f"gamma needs {self.dim} entries, got {len(self.gamma)}"
            )
        if self.half_width is None:
            self.half_width = _an.default_half_width(self.dim)
        if self.n_ev < 1:
            raise ValueError("n_ev must be at least 1")

    @property
    def physics(self) -> _gs.PhysParams:
        return _gs.PhysParams(
            beta11=self.beta11, beta12=self.beta12, beta22=self.beta22,
            rabi=self.omega_rabi, raman=self.delta, gamma=self.gamma,
            alpha=self.alpha,
        )

    @property
    def solver(self) -> _es.SolverOptions:
        return _es.SolverOptions(
            n_ev=self.n_ev, tol=self.tol, max_outer=self.max_outer,
            block_size=self.block_size, inner_tol=self.inner_tol,
            seed=self.seed,
        )

    def grid(self):
        return make_grid(self.dim, self.half_width, self.points)


_INT_KEYS = {"dim", "N", "n_ev", "max_outer", "block_size", "seed", "ell"}
_FLOAT_KEYS = {"L", "beta11", "beta12", "beta22", "omega_rabi", "delta",
               "alpha", "tol", "inner_tol", "ground_tol", "epsilon"}
_TUPLE_KEYS = {"gamma", "times", "sweep_sizes"}
_BOOL_KEYS = {"flip_pairing_sign"}
_KEY_ALIASES = {"N": "points", "L": "half_width"}


def parse_config(path) -> dict:
    """Parse a key=value config file into typed values."""
    raw = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _INT_KEYS:
            parsed = int(value)
        elif key in _FLOAT_KEYS:
            parsed = float(value)
        elif key in _TUPLE_KEYS:
            items = [v for v in value.split(",") if v.strip()]
            parsed = tuple(
                int(v) if key == "sweep_sizes" else float(v) for v in items
            )
        elif key in _BOOL_KEYS:
            parsed = value.lower() in ("1", "true", "yes", "on")
        elif key == "mode":
            parsed = value.lower()
        else:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        raw[_KEY_ALIASES.get(key, key)] = parsed
    return raw


def _load_config(args) -> RunConfig:
    overrides = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config not found: {path}")
        overrides.update(parse_config(path))
    cfg = RunConfig(**overrides)
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _compute_ground(cfg: RunConfig):
    return _gs.minimize_ground_state(
        cfg.grid(), cfg.physics, cfg.mode, tol=cfg.ground_tol
    )


def _print_ground(ground):
    print(f"energy    = {ground.energy:.15g}")
    if ground.mode == _gs.JJ:
        print(f"mu        = {ground.mu:.15g}")
    else:
        print(f"mu1       = {ground.mu1:.15g}")
        print(f"mu2       = {ground.mu2:.15g}")
    print(f"residual  = {ground.residual:.3e}")
    print(f"iterations= {ground.iterations}")


def cmd_groundstate(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ground = _compute_ground(cfg)
    base = cfg.out_dir / "ground"
    _io.write_ground_state(base, ground)
    _io.write_field(cfg.out_dir / "density.bdg1", ground.grid, ground.phi**2)
    _print_ground(ground)
    print(f"wrote {base}.bdg1, {base}.meta, {cfg.out_dir / 'density.bdg1'}")
    return EXIT_OK


def _ground_for(cfg: RunConfig):
    """Resume from files when present and consistent, else compute inline."""
    base = cfg.out_dir / "ground"
    if base.with_suffix(".bdg1").exists() and base.with_suffix(".meta").exists():
        ground = _io.read_ground_state(base)
        stored = ground.grid
        if (stored.dim, stored.points_per_dim, stored.half_width) != (
            cfg.dim, cfg.points, cfg.half_width
        ) or ground.mode != cfg.mode:
            raise NullspaceVerificationError(
                f"stored ground state ({stored.dim}D N={stored.points_per_dim} "
                f"L={stored.half_width} mode={ground.mode}) is inconsistent with "
                f"the configured grid ({cfg.dim}D N={cfg.points} L={cfg.half_width} "
                f"mode={cfg.mode})"
            )
        return ground
    return _compute_ground(cfg)


def cmd_bdg(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ground = _ground_for(cfg)
    ctx = _bdg.build_context(ground, b_sign=-1.0 if cfg.flip_pairing_sign else 1.0)
    nullspace = _bdg.build_nullspace(ctx, inverse_tol=cfg.inner_tol)
    spectrum = _es.solve_spectrum(ctx, nullspace, cfg.solver)
    _io.write_spectrum_csv(cfg.out_dir / "spectrum.csv", spectrum.modes)
    for i, mode in enumerate(spectrum.modes, start=1):
        _io.write_field(cfg.out_dir / f"mode_{i:03d}_u.bdg1", ground.grid, mode.u)
        _io.write_field(cfg.out_dir / f"mode_{i:03d}_v.bdg1", ground.grid, mode.v)
    print("index  omega                  residual    biorth_defect")
    for i, mode in enumerate(spectrum.modes, start=1):
        print(f"{i:5d}  {mode.omega:<21.15g}  {mode.residual:.3e}  {mode.biorth_defect:.3e}")
    print(f"iterations={spectrum.iterations} matvecs={spectrum.matvec_count} "
          f"wall={spectrum.wall_time:.2f}s")
    return EXIT_OK


def cmd_perturb(cfg: RunConfig) -> int:
    base = cfg.out_dir / "ground"
    csv = cfg.out_dir / "spectrum.csv"
    if not base.with_suffix(".bdg1").exists() or not csv.exists():
        raise FileNotFoundError(
            f"perturb needs ground state and spectrum files in {cfg.out_dir}; "
            "run groundstate and bdg first"
        )
    ground = _io.read_ground_state(base)
    rows = _io.read_spectrum_csv(csv)
    if not 1 <= cfg.ell <= len(rows):
        raise ValueError(
            f"mode index ell={cfg.ell} out of range 1..{len(rows)}"
        )
    _, u = _io.read_field(cfg.out_dir / f"mode_{cfg.ell:03d}_u.bdg1")
    _, v = _io.read_field(cfg.out_dir / f"mode_{cfg.ell:03d}_v.bdg1")
    mode = _es.ModePair(
        omega=rows[cfg.ell - 1]["omega"], f=0.5 * (u + v), g=0.5 * (u - v),
        u=np.real(u), v=np.real(v),
        residual=rows[cfg.ell - 1]["residual"],
        biorth_defect=rows[cfg.ell - 1]["biorth_defect"],
    )
    for t in cfg.times:
        n1, n2 = _an.perturbed_density(ground, mode, cfg.epsilon, t)
        path = cfg.out_dir / f"perturb_l{cfg.ell:03d}_t{t:g}.bdg1"
        _io.write_field(path, ground.grid, np.stack([n1, n2]))
        print(f"wrote {path}")
    return EXIT_OK


def _check(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}{(': ' + detail) if detail else ''}")
    return bool(ok)


def cmd_validate(cfg: RunConfig) -> int:
    """Oracle equivalence, structural invariants and the convergence sweep."""
    if len(cfg.sweep_sizes) < 2:
        print("validate: need >=2 grid sizes in sweep_sizes", file=sys.stderr)
        return EXIT_USAGE
    if sorted(cfg.sweep_sizes) != list(cfg.sweep_sizes):
        print("validate: sweep_sizes must be ascending", file=sys.stderr)
        return EXIT_USAGE
    all_ok = True
    b_sign = -1.0 if cfg.flip_pairing_sign else 1.0

    # Small-grid oracle comparison (1D only; dense assembly must stay small).
    if cfg.dim == 1:
        grid = make_grid(1, cfg.half_width, 32)
        ground = _gs.minimize_ground_state(grid, cfg.physics, cfg.mode,
                                           tol=cfg.ground_tol)
        ctx = _bdg.build_context(ground, b_sign=b_sign)
        nullspace = _bdg.build_nullspace(ctx, inverse_tol=cfg.inner_tol)
        opts = cfg.solver
        spectrum = _es.solve_spectrum(ctx, nullspace, opts)
        oracle = _es.dense_oracle_solve(ctx)
        count = min(opts.n_ev, len(oracle))
        gap = float(np.max(np.abs(
            spectrum.omegas[:count] - np.array([m[0] for m in oracle[:count]])
        )))
        all_ok &= _check("oracle equivalence (N=32)", gap <= 1e-8, f"max gap {gap:.2e}")
        full = _es.dense_full_spectrum(ctx)
        expected_zero = 2 * nullspace.size
        zmult = _es.zero_multiplicity(full)
        all_ok &= _check("zero multiplicity", zmult == expected_zero,
                         f"{zmult} (expected {expected_zero})")
        defect, _ = _es.check_biorthogonality(grid, spectrum.modes)
        all_ok &= _check("biorthogonality defect", defect <= 1e-9, f"{defect:.2e}")
        pairing = [
            abs(4.0 * float(np.real(
                grid.quadrature_weight() * np.vdot(m.g, m.f))) - 1.0)
            for m in spectrum.modes
        ]
        all_ok &= _check("pair normalization", max(pairing) <= 1e-9,
                         f"max defect {max(pairing):.2e}")
        residual_ok = all(
            m.residual <= cfg.tol * max(1.0, m.omega) for m in spectrum.modes
        )
        all_ok &= _check("mode residuals", residual_ok)

    # Convergence sweep against the analytic trap modes.
    try:
        reports = _an.convergence_sweep(
            cfg.physics, cfg.mode, list(cfg.sweep_sizes),
            half_width=cfg.half_width, n_ev=cfg.n_ev,
            solver_opts=cfg.solver, ground_tol=cfg.ground_tol,
        )
    except (ConvergenceError, NullspaceVerificationError, ValueError) as exc:
        all_ok &= _check("convergence sweep", False, str(exc))
    else:
        worst = [r.worst_eigenvalue_error() for r in reports]
        decreasing = all(
            b <= a or b <= 1e-11 for a, b in zip(worst, worst[1:])
        )
        all_ok &= _check(
            "convergence sweep",
            decreasing,
            " -> ".join(f"{e:.2e}" for e in worst),
        )
    return EXIT_OK if all_ok else EXIT_INVARIANT


def cmd_timing(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if len(cfg.sweep_sizes) < 3:
        print("timing: need >=3 grid sizes in sweep_sizes", file=sys.stderr)
        return EXIT_USAGE
    samples = _an.timing_study(
        cfg.physics, list(cfg.sweep_sizes), cfg.n_ev, mode=cfg.mode,
        half_width=cfg.half_width, solver_opts=cfg.solver,
        ground_tol=cfg.ground_tol,
    )
    path = cfg.out_dir / "timing.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("total_points,seconds,matvecs,iterations\n")
        for s in samples:
            fh.write(f"{s.total_points},{s.seconds:.17g},{s.matvecs},{s.iterations}\n")
    slope = _an.loglog_slope(samples)
    for s in samples:
        print(f"Nt={s.total_points:<9d} t={s.seconds:8.2f}s matvecs={s.matvecs}")
    print(f"log-log slope vs Nt*log(Nt): {slope:.3f}")
    print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "groundstate": cmd_groundstate,
    "bdg": cmd_bdg,
    "perturb": cmd_perturb,
    "validate": cmd_validate,
    "timing": cmd_timing,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="becbdg",
        description="Ground states and Bogoliubov-de Gennes excitations of "
                    "two-component condensates",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", type=str, default=None,
                       help="key=value config file")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None,
                       help="solver RNG seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](cfg)
    except (ConvergenceError,) as exc:
        print(f"becbdg {args.command}: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NullspaceVerificationError, IndefiniteOperatorError,
            StructureViolationError) as exc:
        print(f"becbdg {args.command}: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (FileNotFoundError, OSError) as exc:
        print(f"becbdg {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        print(f"becbdg {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
