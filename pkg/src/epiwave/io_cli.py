"""Configuration ingestion, CSV persistence and the command-line surface.

Configs are strict-schema JSON (unknown keys rejected); results are CSV
with 17-significant-digit decimals, which round-trip float64 exactly.
The CLI exposes run / sweep / compare / validate; exit code 2 flags a
configuration problem, 1 a solver failure, 0 success.

Set EPIWAVE_THREADS to run the independent sweep members in parallel.
"""

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import study
from .birth import BirthLaws
from .errors import ConfigError, EpiwaveError, IoError
from .fields import age_integral, diff_norms
from .mesh import Mesh, build_mesh
from .operators import KernelSet, LinearPart
from .parabolic_model import run_parabolic
from .relaxed_model import (
    ModelSpec,
    Run,
    SolverConfig,
    residual_check,
    run_relaxed,
)
from .svir import COMPARTMENTS, SvirParams, build_svir

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# configuration


@dataclass
class MeshBlock:
    t_max: float = 1.0
    a_max: float = 1.0
    na: int = 20
    nx: int = 21


@dataclass
class ModelBlock:
    kind: str = "svir"
    params: dict = field(default_factory=dict)
    path: Optional[str] = None


@dataclass
class SolverBlock:
    tau: float = 0.0
    picard_tol: float = 1e-10
    picard_max: int = 100
    store_every: int = 1


@dataclass
class StudyBlock:
    taus: List[float] = field(default_factory=lambda: [1e-4, 1e-3, 1e-2])
    q1: Optional[float] = None
    q2: Optional[float] = None
    threshold: Optional[float] = None


@dataclass
class OutputBlock:
    directory: str = "out"
    formats: List[str] = field(default_factory=lambda: ["csv"])


@dataclass
class RunConfig:
    mesh: MeshBlock = field(default_factory=MeshBlock)
    model: ModelBlock = field(default_factory=ModelBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    study: StudyBlock = field(default_factory=StudyBlock)
    output: OutputBlock = field(default_factory=OutputBlock)


_SVIR_SCALARS = (
    "c",
    "phi1",
    "phi2",
    "delta_d",
    "gamma",
    "total_S0",
    "I0",
    "alpha",
)


def _fill(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")
    return cls(**data)


def parse_config_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be an object")
    unknown = set(raw) - {"mesh", "model", "solver", "study", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    cfg = RunConfig(
        mesh=_fill(MeshBlock, raw.get("mesh", {}), "mesh"),
        model=_fill(ModelBlock, raw.get("model", {}), "model"),
        solver=_fill(SolverBlock, raw.get("solver", {}), "solver"),
        study=_fill(StudyBlock, raw.get("study", {}), "study"),
        output=_fill(OutputBlock, raw.get("output", {}), "output"),
    )
    if cfg.model.kind == "svir":
        unknown = set(cfg.model.params) - set(_SVIR_SCALARS)
        if unknown:
            raise ConfigError(f"unknown model.params key(s) {sorted(unknown)}")
    elif cfg.model.kind == "tables":
        if not cfg.model.path:
            raise ConfigError("model.kind 'tables' needs model.path")
    else:
        raise ConfigError(f"unknown model.kind {cfg.model.kind!r}")
    return cfg


def parse_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return parse_config_dict(raw)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True)


def svir_params_from(cfg: RunConfig, tau: float) -> SvirParams:
    return SvirParams(tau=tau, **cfg.model.params)


def _spec_from_tables(path: str, m: Mesh, tau: float) -> ModelSpec:
    """Generic model loaded from an .npz of sampled tables."""
    try:
        data = np.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read model tables: {exc}") from None
    Ltab = data["L"]
    n = Ltab.shape[-1]
    linear = LinearPart(
        L=Ltab,
        L_a=data["L_a"] if "L_a" in data else np.gradient(Ltab, m.da, axis=0, edge_order=2),
        sigma=data["sigma"],
    )
    kernels = (
        KernelSet.from_dense(data["kernels"]) if "kernels" in data else KernelSet.empty(n)
    )
    zeros = np.zeros((m.na + 1, m.nx, n, n))
    births = BirthLaws(
        beta0=data["beta0"] if "beta0" in data else zeros.copy(),
        beta1=data["beta1"] if "beta1" in data else zeros.copy(),
        betaL=data["betaL"] if "betaL" in data else zeros.copy(),
        beta_grad=data["beta_grad"] if "beta_grad" in data else zeros.copy(),
        g0=data["g0"] if "g0" in data else None,
        g1=data["g1"] if "g1" in data else None,
    )
    return ModelSpec(
        n=n,
        linear=linear,
        kernels=kernels,
        births=births,
        y0=data["y0"],
        y1=data["y1"] if "y1" in data else None,
        f=data["f"] if "f" in data else None,
        tau=tau,
    )


def build_problem(cfg: RunConfig, tau: Optional[float] = None):
    """Mesh, spec and solver settings realized from a parsed config."""
    m = build_mesh(cfg.mesh.t_max, cfg.mesh.a_max, cfg.mesh.na, cfg.mesh.nx)
    t = cfg.solver.tau if tau is None else tau
    if cfg.model.kind == "svir":
        spec = build_svir(svir_params_from(cfg, t), m)
    else:
        spec = _spec_from_tables(cfg.model.path, m, t)
    solver = SolverConfig(
        picard_tol=cfg.solver.picard_tol,
        picard_max=cfg.solver.picard_max,
        store_every=cfg.solver.store_every,
    )
    return m, spec, solver


# ---------------------------------------------------------------------------
# writers


def _names_for(n: int, names=None):
    if names is not None:
        return list(names)
    return list(COMPARTMENTS) if n == 4 else [f"y{k + 1}" for k in range(n)]


def _writerows(path: Path, header: str, rows) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(_FMT % v for v in row) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from None


def write_slices(
    run: Run,
    m: Mesh,
    out_dir,
    names=None,
    front_threshold: Optional[float] = None,
    front_compartment: Optional[int] = None,
) -> List[Path]:
    """Persist a run: per-slice CSVs, the x=0 boundary series, fronts.

    slice_{t_index}.csv holds rows (a, x, y1..yn) row-major over (a, x);
    boundary_x0.csv the age-integrated compartments at x = 0 over time;
    fronts.csv the front trajectory of the tracked compartment (index 2
    when present) at the given threshold, defaulting to 1e-6 times the
    initial sup of its age-integrated density.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(str(exc)) from None
    n = run[0].values.shape[0]
    names = _names_for(n, names)
    ages = m.ages()
    xs = m.xs()
    written = []
    for k, sl in enumerate(run):
        idx = run.indices[k] if hasattr(run, "indices") else k
        path = out / f"slice_{idx}.csv"
        rows = (
            [ages[a], xs[x]] + [sl.values[c, a, x] for c in range(n)]
            for a in range(m.na + 1)
            for x in range(m.nx)
        )
        _writerows(path, "a,x," + ",".join(names), rows)
        written.append(path)

    times = run.times if hasattr(run, "times") else list(range(len(run)))
    bpath = out / "boundary_x0.csv"
    rows = (
        [times[k]] + list(age_integral(sl.values, m)[:, 0])
        for k, sl in enumerate(run)
    )
    _writerows(bpath, "t," + ",".join(names), rows)
    written.append(bpath)

    comp = front_compartment if front_compartment is not None else (2 if n >= 3 else 0)
    init_sup = float(np.max(age_integral(run[0].values, m)[comp]))
    thr = front_threshold if front_threshold is not None else 1e-6 * init_sup
    fronts = study.front_tracker(run, thr, m, compartment=comp)
    fpath = out / "fronts.csv"
    _writerows(fpath, "t,front_x", fronts)
    written.append(fpath)
    return written


def load_slice(path) -> np.ndarray:
    """Read back a slice CSV as a plain float array (rows x columns)."""
    with open(path) as fh:
        next(fh)
        return np.array(
            [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
        )


def write_sweep(result: study.SweepResult, out_dir) -> List[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(str(exc)) from None
    written = []
    spath = out / "sweep.csv"
    rows = []
    for k, tau in enumerate(result.taus):
        rep = result.energy_diffs[k]
        rows.append(
            [
                tau,
                result.sup_diffs[k],
                study.energy_diff(rep, tau),
                rep.sup_t_V,
                rep.sup_t_H_slope,
                1.0 if result.asymptotic_mask[k] else 0.0,
            ]
        )
    _writerows(
        spath, "tau,sup_diff,energy_diff,sup_t_V,sup_t_H_slope,asymptotic", rows
    )
    written.append(spath)

    rpath = out / "ratefit.dat"
    try:
        with open(rpath, "w") as fh:
            fh.write(f"# fitted_rate {_FMT % result.fitted_rate}\n")
            if result.fitted_rate_energy is not None:
                fh.write(f"# fitted_rate_energy {_FMT % result.fitted_rate_energy}\n")
            if result.floor is not None:
                fh.write(f"# floor {_FMT % result.floor}\n")
            fh.write("# log10_tau log10_sup_diff\n")
            for tau, d in zip(result.taus, result.sup_diffs):
                if d > 0:
                    fh.write(f"{_FMT % np.log10(tau)} {_FMT % np.log10(d)}\n")
    except OSError as exc:
        raise IoError(str(exc)) from None
    written.append(rpath)

    for k, tau in enumerate(result.taus):
        sub = out / f"tau_{tau:.3e}"
        sub.mkdir(parents=True, exist_ok=True)
        fpath = sub / "fronts.csv"
        _writerows(fpath, "t,front_x", result.front_positions[k])
        written.append(fpath)
    return written


# ---------------------------------------------------------------------------
# built-in oracle suite


def validation_cases() -> List[tuple]:
    """(name, passed, measured, bound) for each built-in oracle check."""
    from .reference import (
        damped_mode_solution,
        heat_mode_decay,
        renewal_reference,
    )

    cases = []

    def eigenmode_setup(m, tau, g0=None, g1=None, y1=None):
        A, X = m.na + 1, m.nx
        sig = 0.1
        linear = LinearPart(
            L=np.zeros((A, X, 1, 1)),
            L_a=np.zeros((A, X, 1, 1)),
            sigma=np.full((A, 1), sig),
        )
        shape = (A, X, 1, 1)
        births = BirthLaws(
            beta0=np.zeros(shape),
            beta1=np.zeros(shape),
            betaL=np.zeros(shape),
            beta_grad=np.zeros(shape),
            g0=g0,
            g1=g1,
        )
        mode = np.cos(np.pi * m.xs())
        y0 = np.broadcast_to(mode, (1, A, X)).copy()
        return (
            ModelSpec(
                n=1,
                linear=linear,
                kernels=KernelSet.empty(1),
                births=births,
                y0=y0,
                y1=y1,
                tau=tau,
            ),
            sig,
            mode,
        )

    # Heat mode: parabolic solver against exp(-sigma pi^2 t).
    m = build_mesh(0.5, 1.0, 40, 41)
    times = m.times()
    mode1 = np.cos(np.pi * m.xs())
    sig = 0.1
    g0 = (heat_mode_decay(sig, times)[:, None] * mode1)[:, None, :]
    spec, sig, mode = eigenmode_setup(m, 0.0, g0=g0)
    run = run_parabolic(spec, SolverConfig(), m)
    exact = heat_mode_decay(sig, 0.5)
    err = float(np.max(np.abs(run[-1].values - exact * mode))) / exact
    cases.append(("heat-eigenmode", err < 0.05, err, 0.05))

    # Damped-wave mode against high-accuracy ODE integration.
    tau = 0.1
    q, qp = damped_mode_solution(tau, sig * np.pi**2, 0.5)
    g0 = (q(times)[:, None] * mode1)[:, None, :]
    g1 = (qp(times)[:, None] * mode1)[:, None, :]
    spec, sig, mode = eigenmode_setup(m, tau, g0=g0, g1=g1)
    run = run_relaxed(spec, SolverConfig(), m)
    ref = float(q(0.5))
    err = float(np.max(np.abs(run[-1].values - ref * mode))) / abs(ref)
    cases.append(("damped-wave-eigenmode", err < 0.05, err, 0.05))

    # Age-only renewal against fine-grid integral marching.
    mu = 0.3
    beta_fn = lambda a: 1.2 + 0.0 * np.asarray(a)
    y0_fn = lambda a: 1.0 + 0.5 * np.cos(np.pi * np.asarray(a))
    mr = build_mesh(1.0, 1.0, 40, 3)
    A, X = mr.na + 1, mr.nx
    linear = LinearPart(
        L=np.broadcast_to(mu * np.eye(1), (A, X, 1, 1)).copy(),
        L_a=np.zeros((A, X, 1, 1)),
        sigma=np.zeros((A, 1)),
    )
    shape = (A, X, 1, 1)
    births = BirthLaws(
        beta0=np.broadcast_to(beta_fn(mr.ages())[:, None, None, None], shape).copy(),
        beta1=np.zeros(shape),
        betaL=np.zeros(shape),
        beta_grad=np.zeros(shape),
    )
    spec = ModelSpec(
        n=1,
        linear=linear,
        kernels=KernelSet.empty(1),
        births=births,
        y0=np.broadcast_to(y0_fn(mr.ages())[None, :, None], (1, A, X)).copy(),
    )
    run = run_parabolic(spec, SolverConfig(), mr)
    b_series = np.array([sl.values[0, 0, 0] for sl in run])
    tw = np.full(len(b_series), mr.dt)
    tw[0] = tw[-1] = 0.5 * mr.dt
    total = float(np.dot(tw, b_series))
    _, _, total_ref = renewal_reference(beta_fn, mu, y0_fn, 1.0, 1.0)
    err = abs(total - total_ref) / abs(total_ref)
    cases.append(("renewal", err < 0.05, err, 0.05))

    # Manufactured solution for the relaxed equation.
    mm = build_mesh(0.5, 1.0, 20, 21)
    tau = 0.05
    sig = 0.1
    A, X = mm.na + 1, mm.nx
    ages = mm.ages()[None, :, None]
    xsm = np.cos(np.pi * mm.xs())[None, None, :]
    tt = mm.times()

    def exact_field(t):
        return np.exp(-t) * (1.0 + ages) * xsm

    f = np.stack(
        [
            np.exp(-t)
            * xsm
            * (tau * (ages - 1.0) - ages + sig * np.pi**2 * (1.0 + ages))
            for t in tt
        ]
    )
    g0 = np.stack([np.exp(-t) * xsm[:, 0, :] for t in tt])
    g1 = np.zeros_like(g0)
    linear = LinearPart(
        L=np.zeros((A, X, 1, 1)),
        L_a=np.zeros((A, X, 1, 1)),
        sigma=np.full((A, 1), sig),
    )
    shape = (A, X, 1, 1)
    births = BirthLaws(
        beta0=np.zeros(shape),
        beta1=np.zeros(shape),
        betaL=np.zeros(shape),
        beta_grad=np.zeros(shape),
        g0=g0,
        g1=g1,
    )
    spec = ModelSpec(
        n=1,
        linear=linear,
        kernels=KernelSet.empty(1),
        births=births,
        y0=exact_field(0.0),
        y1=-ages * xsm * np.ones_like(ages),
        f=f,
        tau=tau,
    )
    run = run_relaxed(spec, SolverConfig(), mm)
    err = float(np.max(np.abs(run[-1].values - exact_field(0.5))))
    res = residual_check(run, spec, mm)
    ok = err < 0.05 and np.isfinite(res)
    cases.append(("manufactured-solution", ok, err, 0.05))
    return cases


# ---------------------------------------------------------------------------
# CLI


def _add_common(p):
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", default=None, help="output directory override")


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="epiwave",
        description="Age- and space-structured epidemic solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one solver and write slices")
    _add_common(p_run)
    p_run.add_argument("--tau", type=float, default=None)

    p_sweep = sub.add_parser("sweep", help="tau sweep with rate fit")
    _add_common(p_sweep)
    p_sweep.add_argument("--taus", default=None, help="comma-separated list")
    p_sweep.add_argument("--q1", type=float, default=None)
    p_sweep.add_argument("--q2", type=float, default=None)

    p_cmp = sub.add_parser("compare", help="relaxed vs parabolic diff norms")
    _add_common(p_cmp)
    p_cmp.add_argument("--tau", type=float, default=None)

    sub.add_parser("validate", help="run the built-in oracle suite")

    args = parser.parse_args(argv)

    if args.command == "validate":
        ok = True
        for name, passed, measured, bound in validation_cases():
            ok &= passed
            print(
                f"{'PASS' if passed else 'FAIL'} {name}: "
                f"measured {measured:.3e} (bound {bound:g})"
            )
        return 0 if ok else 1

    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or cfg.output.directory
    try:
        if args.command == "run":
            m, spec, solver = build_problem(cfg, tau=args.tau)
            run = (
                run_relaxed(spec, solver, m)
                if spec.tau > 0
                else run_parabolic(spec, solver, m)
            )
            files = write_slices(
                run, m, out_dir, front_threshold=cfg.study.threshold
            )
            print(f"wrote {len(files)} files to {out_dir}")
            return 0

        if args.command == "compare":
            m, spec, solver = build_problem(cfg, tau=args.tau)
            rel = run_relaxed(spec, solver, m)
            par = run_parabolic(spec, solver, m)
            rep = diff_norms(rel, par, m)
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            _writerows(
                Path(out_dir) / "diffs.csv",
                "sup_abs,sup_t_V,sup_t_H_slope,l2_H,h1_V",
                [[rep.sup_abs, rep.sup_t_V, rep.sup_t_H_slope, rep.l2_H, rep.h1_V]],
            )
            print(f"sup|y_tau - y| = {rep.sup_abs:.6e}")
            return 0

        # sweep
        if cfg.model.kind != "svir":
            raise ConfigError("sweep requires an svir model")
        m = build_mesh(cfg.mesh.t_max, cfg.mesh.a_max, cfg.mesh.na, cfg.mesh.nx)
        solver = SolverConfig(
            picard_tol=cfg.solver.picard_tol,
            picard_max=cfg.solver.picard_max,
            store_every=cfg.solver.store_every,
        )
        taus = (
            [float(tok) for tok in args.taus.split(",")]
            if args.taus
            else list(cfg.study.taus)
        )
        params = svir_params_from(cfg, 0.0)
        q1 = args.q1 if args.q1 is not None else cfg.study.q1
        q2 = args.q2 if args.q2 is not None else cfg.study.q2
        spec_for_tau = None
        if q1 is not None or q2 is not None:
            q1 = 1.0 if q1 is None else q1
            q2 = 1.0 if q2 is None else q2
            trace_baseline = None
            if q1 != 1.0 or q2 != 1.0:
                # boundary traces need every step stored
                trace_baseline = run_parabolic(
                    build_svir(params, m), replace(solver, store_every=1), m
                )
            template = study.compatibility_setup(params, q1, q2, trace_baseline, m)
            spec_for_tau = lambda tau: dataclasses.replace(template, tau=tau)
        result = study.tau_sweep(
            params,
            taus,
            solver,
            m,
            threshold=cfg.study.threshold,
            spec_for_tau=spec_for_tau,
        )
        files = write_sweep(result, out_dir)
        print(
            f"fitted rate {result.fitted_rate:.4f} "
            f"(energy {result.fitted_rate_energy}), wrote {len(files)} files"
        )
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EpiwaveError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
