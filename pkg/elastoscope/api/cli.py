"""
Command-line subcommands: forward, reconstruct, certify, stability.

Every run writes ``manifest.json`` and ``run.log`` into the output directory; failures write
``error.json`` (also printed on stdout) and exit with status 2 for domain
errors, 1 for anything unexpected.
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd
import pydantic
import scipy

from elastoscope import __version__
from elastoscope.api.schemas import ErrorReport, RunConfig, RunManifest, load_config
from elastoscope.config import CLI_LOG_LEVEL, KERNEL_MAX_NODES, RUN_LOG_NAME, WARNING
from elastoscope.core.errors import (
    ElastoscopeError,
    HalfPlaneSplitViolation,
    InvalidProblem,
    ReconstructionAborted,
    StalledStep,
    ZeroCoefficient,
)
from elastoscope.core.factory import FieldFactory
from elastoscope.core.grid import Grid
from elastoscope.interfaces.problems import (
    ElasticityProblem,
    InverseProblem,
    MeasurementChannel,
    StokesProblem,
)
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.trace import TRACE_COLUMNS, ReconstructionTrace
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.certificates import cert_2d, cert_3d
from elastoscope.methods.differential import sym_grad
from elastoscope.methods.landweber import landweber_run, project
from elastoscope.methods.norms import NormSpec
from elastoscope.methods.phantoms import (
    bump_pairs,
    make_excitation,
    make_phantom,
    synthesize_measurements,
)
from elastoscope.methods.residual import build_map, g_bound_family, kernel_probe
from elastoscope.methods.stability import certificate_pass_rate, stability_experiment
from elastoscope.methods.stokes import solve_elasticity_full, solve_stokes, verify_stokes_limit
from elastoscope.methods.symbols import root_conditions, sl_check_2d, sl_check_3d
from elastoscope.utils.field_io import (
    read_vtk_field,
    write_field_csv,
    write_json,
    write_table,
    write_vtk,
)
from elastoscope.utils.log_handler import attach_run_log, detach_run_log, get_logger, set_log_level

logger = get_logger(__name__, source_file=__file__)


@dataclass
class RunContext:
    """Collects artifacts and metadata while a subcommand runs."""

    cfg: RunConfig
    out: Path
    factory: Optional[FieldFactory] = None
    outputs: list[str] = field(default_factory=list)
    residuals: dict[str, float] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    def artifact(self, path: Path) -> Path:
        self.outputs.append(str(Path(path).relative_to(self.out)))
        return path

    def grid(self) -> Grid:
        grid = self.cfg.grid.build()
        self.factory = FieldFactory(grid)
        return grid

    def register(self, obj):
        return self.factory.register(obj) if self.factory is not None else obj


def _versions() -> dict[str, str]:
    return {
        "elastoscope": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "pandas": pd.__version__,
    }


def _mu(ctx: RunContext, grid: Grid) -> ScalarField:
    return ctx.register(make_phantom(ctx.cfg.phantom, grid))


def _boundaries(ctx: RunContext, grid: Grid) -> list[VectorField]:
    out = []
    for i, spec in enumerate(ctx.cfg.excitations):
        f = make_excitation(spec, grid)
        out.append(ctx.factory.vector(f.values, name=spec.label or f"F{i}"))
    return out


def _affine_field(ctx: RunContext, strain: np.ndarray, name: str) -> VectorField:
    """``u = S (x - center)``, whose symmetric gradient is the constant ``S``."""
    grid = ctx.factory.grid
    s = np.asarray(strain, dtype=float)
    if s.shape != (grid.dim, grid.dim):
        raise InvalidProblem(f"strain of shape {s.shape} does not match a {grid.dim}D grid")
    s = 0.5 * (s + s.T)
    c = grid.center

    def sample(*xs: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(sum(s[i, j] * (xs[j] - c[j]) for j in range(grid.dim)) for i in range(grid.dim))

    return ctx.factory.vector_from(sample, name=name)


# ------------------------------------------------------------------
# forward
# ------------------------------------------------------------------


def cmd_forward(ctx: RunContext) -> None:
    """Solve the forward problem for every configured excitation."""
    cfg = ctx.cfg
    grid = ctx.grid()
    mu = _mu(ctx, grid)
    for i, boundary in enumerate(_boundaries(ctx, grid)):
        if cfg.forward.lam is not None:
            lam = ctx.factory.constant(cfg.forward.lam, name="lambda")
            prob = ElasticityProblem(
                mu=mu, omega=cfg.physics.omega, boundary=boundary, mu_min=cfg.phantom.mu_min, lam=lam
            )
            if not prob.satisfies_limit_precondition():
                logger.warning("[!!] 2 max(mu) >= 3 min(lambda): far from the incompressible limit")
            sol = solve_elasticity_full(prob)
        else:
            prob = StokesProblem(
                mu=mu, omega=cfg.physics.omega, boundary=boundary, mu_min=cfg.phantom.mu_min
            )
            sol = solve_stokes(prob)
        u = ctx.factory.vector(sol.u.values, name="u")
        p = sol.p
        ctx.artifact(write_vtk(ctx.out / f"solution_{i}.vtk", [u, p, mu]))
        if cfg.forward.write_csv:
            ctx.artifact(write_field_csv(ctx.out / f"solution_{i}.csv", [u, p]))
        ctx.residuals[f"channel_{i}"] = sol.residual_norm
        ctx.details[f"channel_{i}"] = {
            "divergence_l2": sol.divergence_norm,
            "condition_estimate": sol.condition_estimate,
            "near_resonance": sol.near_resonance,
        }
        logger.info(f"[*] Forward channel {i}: residual {sol.residual_norm:.2e}")


# ------------------------------------------------------------------
# reconstruct
# ------------------------------------------------------------------


def _inverse_problem(ctx: RunContext, grid: Grid) -> InverseProblem:
    cfg = ctx.cfg
    inv = cfg.inverse
    if inv.measurements is None:
        return synthesize_measurements(
            cfg.phantom,
            cfg.excitations,
            grid,
            omega=cfg.physics.omega,
            refine=inv.refine_factor if inv.refine_data else 1,
            noise_level=inv.noise_level,
            noise_seed=cfg.seed,
            mu_max=cfg.physics.mu_max,
        )
    if len(inv.measurements) != len(cfg.excitations):
        raise InvalidProblem(
            f"{len(inv.measurements)} measurement files for {len(cfg.excitations)} excitations"
        )
    mu = make_phantom(cfg.phantom, grid)
    channels = []
    for path, boundary in zip(inv.measurements, _boundaries(ctx, grid)):
        measured = read_vtk_field(Path(path), "u")
        if measured.grid != grid:
            raise InvalidProblem(f"{path} is on grid {measured.grid.cells}, expected {grid.cells}")
        channels.append(MeasurementChannel(boundary=boundary, measured=measured))
    return InverseProblem(
        grid=grid,
        channels=tuple(channels),
        mu_trace=mu,
        omega=cfg.physics.omega,
        mu_min=cfg.phantom.mu_min,
        mu_max=cfg.physics.mu_max,
        two_channel=grid.dim == 3 and len(channels) == 2,
    )


def _write_trace(ctx: RunContext, trace: ReconstructionTrace) -> None:
    frame = pd.DataFrame([r.as_row() for r in trace.records], columns=list(TRACE_COLUMNS))
    ctx.artifact(write_table(ctx.out / "trace.csv", frame))
    for n, snap in sorted(trace.snapshots.items()):
        ctx.artifact(write_vtk(ctx.out / "snapshots" / f"mu_{n:04d}.vtk", [snap]))


def _probe(ctx: RunContext, fields: Sequence[VectorField], k: int, threshold: Optional[float] = None) -> None:
    grid = fields[0].grid
    if grid.node_count > KERNEL_MAX_NODES:
        logger.warning(f"[!!] Kernel probe skipped: {grid.node_count} nodes exceed {KERNEL_MAX_NODES}")
        return
    maps = [build_map(u, ctx.cfg.physics.omega) for u in fields]
    kwargs = {} if threshold is None else {"threshold": threshold}
    probe = kernel_probe(maps, k=k, **kwargs)
    ctx.artifact(write_json(ctx.out / "kernel_probe.json", probe.report))
    ctx.details["kernel_trivial"] = probe.report.trivial


def cmd_reconstruct(ctx: RunContext) -> None:
    """Landweber reconstruction of mu from measured or synthesized displacements."""
    cfg = ctx.cfg
    inv = cfg.inverse
    grid = ctx.grid()
    ip = _inverse_problem(ctx, grid)
    if inv.mu0 == "truth" and ip.mu_true is not None:
        mu0 = ip.mu_true
    else:
        mu0 = project(np.full(grid.shape, cfg.phantom.background), ip)
    mu0 = ctx.factory.scalar(mu0.values, name="mu0")

    try:
        trace = landweber_run(
            ip,
            mu0,
            sigma=inv.sigma,
            n_max=inv.n_max,
            stop_tol=inv.stop_tol,
            snapshot_stride=inv.snapshot_stride,
            eps=inv.eps,
            discrepancy_tol=inv.discrepancy_tol,
            raise_on_stall=inv.raise_on_stall,
        )
    except (StalledStep, ReconstructionAborted) as exc:
        if exc.trace is not None and len(exc.trace):
            _write_trace(ctx, exc.trace)
        raise

    _write_trace(ctx, trace)
    final = trace.final_mu
    fields = [final.with_values(final.values, name="mu")]
    if ip.mu_true is not None:
        fields.append(ip.mu_true.with_values(ip.mu_true.values, name="mu_true"))
    ctx.artifact(write_vtk(ctx.out / "mu_final.vtk", fields))
    ctx.factory.scalar(final.values, name="mu_final")

    first, last = trace.records[0], trace.last
    ctx.details.update(
        {
            "status": trace.status,
            "iterations": last.n,
            "sigma0": trace.sigma0,
            "J_initial": first.J,
            "J_final": last.J,
            "rel_err_initial": first.rel_err_l2,
            "rel_err_final": last.rel_err_l2,
            "data": ip.metadata,
        }
    )
    ctx.residuals["J_final"] = last.J
    if inv.kernel_probe:
        _probe(ctx, [ch.measured for ch in ip.channels], inv.kernel_k)


# ------------------------------------------------------------------
# certify
# ------------------------------------------------------------------


def _certified_fields(ctx: RunContext, grid: Grid) -> list[VectorField]:
    cfg = ctx.cfg
    if cfg.certify.source == "strains":
        return [_affine_field(ctx, s, f"u{i}") for i, s in enumerate(cfg.certify.strains)]
    mu = _mu(ctx, grid)
    return [
        solve_stokes(StokesProblem(mu=mu, omega=cfg.physics.omega, boundary=b, mu_min=cfg.phantom.mu_min)).u
        for b in _boundaries(ctx, grid)
    ]


def _symbol_checks_2d(u: VectorField) -> list[dict[str, Any]]:
    strain = sym_grad(u).entry(0, 0)
    mask = u.grid.boundary_mask
    node = np.unravel_index(int(np.argmin(np.where(mask, np.abs(strain), np.inf))), u.grid.shape)
    coefficient = float(strain[node])
    try:
        report = sl_check_2d(coefficient)
    except ZeroCoefficient as exc:
        return [{"node": [int(i) for i in node], "error": exc.to_dict()}]
    return [{"node": [int(i) for i in node], "report": report.to_dict()}]


def _symbol_checks_3d(u1: VectorField, u2: VectorField, node, points, eps) -> list[dict[str, Any]]:
    s1 = sym_grad(u1).full()[(slice(None), slice(None), *node)]
    s2 = sym_grad(u2).full()[(slice(None), slice(None), *node)]
    entries = []
    for xi in points:
        try:
            report = sl_check_3d(s1, s2, xi)
        except HalfPlaneSplitViolation as exc:
            entry = {"xi_prime": xi, "error": exc.to_dict()}
            if exc.report is not None:
                entry["report"] = exc.report.to_dict()
            entries.append(entry)
            continue
        roots = [complex(re, im) for re, im in report.roots]
        entries.append(
            {
                "xi_prime": xi,
                "report": report.to_dict(),
                "root_conditions": root_conditions(roots, eps).to_dict(),
            }
        )
    return entries


def cmd_certify(ctx: RunContext) -> None:
    """Strain-symbol certificates and boundary-symbol checks."""
    cfg = ctx.cfg.certify
    grid = ctx.grid()
    fields = _certified_fields(ctx, grid)
    if grid.dim == 2:
        report = cert_2d(fields[0], cfg.threshold)
        symbols = _symbol_checks_2d(fields[0])
    else:
        if len(fields) < 2:
            raise InvalidProblem("3D certification needs two excitations or two strains")
        report = cert_3d(fields[0], fields[1], cfg.threshold, samples=cfg.samples)
        points = cfg.sl_points or [[1.0, 0.0], [0.0, 1.0]]
        symbols = _symbol_checks_3d(fields[0], fields[1], report.worst_node, points, cfg.root_eps)
    ctx.artifact(write_json(ctx.out / "certificate.json", report))
    ctx.artifact(write_json(ctx.out / "boundary_symbol.json", {"checks": symbols}))
    ctx.details.update({"pass": report.passed, "inf": report.inf, "worst_node": report.worst_node})
    if cfg.pass_rate_draws:
        rate = certificate_pass_rate(
            grid,
            _mu(ctx, grid),
            omega=ctx.cfg.physics.omega,
            draws=cfg.pass_rate_draws,
            seed=ctx.cfg.seed,
            threshold=cfg.threshold,
        )
        ctx.artifact(write_json(ctx.out / "pass_rate.json", rate))
        ctx.details["pass_rate"] = rate.rate


# ------------------------------------------------------------------
# stability
# ------------------------------------------------------------------


def cmd_stability(ctx: RunContext) -> None:
    """Empirical stability ratios over bump pairs sharing their boundary trace."""
    cfg = ctx.cfg
    st = cfg.stability
    grid = ctx.grid()
    omega = cfg.physics.omega
    boundaries = _boundaries(ctx, grid)
    labelled = bump_pairs(
        grid, cfg.phantom.background, st.amplitudes, st.pairs_per_amplitude, cfg.seed, st.bump_radius
    )
    pairs = [(mu1, mu2) for _, mu1, mu2 in labelled]
    spec = NormSpec.theorem(st.eps, st.weight_power)
    rows, summary = stability_experiment(
        pairs, boundaries, omega, spec, amplitudes=[a for a, _, _ in labelled]
    )
    ctx.artifact(write_table(ctx.out / "stability.csv", [r.to_dict() for r in rows]))
    ctx.artifact(write_json(ctx.out / "stability_summary.json", summary))
    ctx.details["max_ratio"] = summary.max_ratio
    ctx.details["spread"] = summary.spread

    mu2 = pairs[0][1]
    background = [
        solve_stokes(StokesProblem(mu=mu2, omega=omega, boundary=b)).u for b in boundaries
    ]
    if st.kernel_probe:
        _probe(ctx, background, 4, st.kernel_threshold)
    if st.stokes_limit_lambdas:
        limit = verify_stokes_limit(st.stokes_limit_lambdas, mu2, omega, boundaries[0])
        ctx.artifact(write_json(ctx.out / "stokes_limit.json", limit))
        ctx.details["stokes_limit_slope"] = limit.slope
    if st.g_bound_order is not None:
        ws = []
        for mu1, _ in pairs[:10]:
            u1 = solve_stokes(StokesProblem(mu=mu1, omega=omega, boundary=boundaries[0])).u
            ws.append(u1 - background[0])
        bound = g_bound_family(ws, mu2, st.g_bound_order, omega)
        ctx.artifact(write_json(ctx.out / "g_bound.json", bound))


# ------------------------------------------------------------------
# entry point
# ------------------------------------------------------------------

COMMANDS: dict[str, Callable[[RunContext], None]] = {
    "forward": cmd_forward,
    "reconstruct": cmd_reconstruct,
    "certify": cmd_certify,
    "stability": cmd_stability,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elastoscope",
        description="Shear-modulus reconstruction and stability certification from Stokes data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        p = sub.add_parser(name, help=(handler.__doc__ or name).strip().splitlines()[0])
        p.add_argument("--config", required=True, type=Path, help="TOML run descriptor")
        p.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
        p.add_argument("--seed", type=int, default=None, help="Override every seed in the config")
        p.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    return parser


def _fail(out: Path, exc: BaseException, command: str, code: int) -> int:
    payload = (
        exc.to_dict()
        if isinstance(exc, ElastoscopeError)
        else {"kind": type(exc).__name__, "message": str(exc), "details": {}}
    )
    payload["details"] = json.loads(json.dumps(payload["details"], default=str))
    report = ErrorReport.from_payload(payload, command, code)
    try:
        write_json(out / "error.json", report)
    except OSError as write_exc:
        logger.error(f"[!!] Could not write error.json: {write_exc}")
    print(report.model_dump_json(indent=2))
    return code


def _execute(args: argparse.Namespace) -> int:
    out: Path = args.out
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, args.seed)
        ctx = RunContext(cfg=cfg, out=out)
        logger.info(f"[*] {args.command} started with {args.config}")
        COMMANDS[args.command](ctx)
    except ElastoscopeError as exc:
        logger.error(f"[!!] {args.command} failed: {exc.kind}: {exc.message}")
        return _fail(out, exc, args.command, 2)
    except Exception as exc:
        logger.exception(f"[!!] {args.command} crashed: {exc}")
        return _fail(out, exc, args.command, 1)

    manifest = RunManifest(
        command=args.command,
        config_path=str(args.config),
        config=cfg.model_dump(mode="json"),
        seed=cfg.seed,
        versions=_versions(),
        started_utc=started.isoformat(),
        elapsed_s=time.perf_counter() - t0,
        outputs=ctx.outputs,
        fingerprints=dict(ctx.factory.registry) if ctx.factory else {},
        residuals=ctx.residuals,
        details=json.loads(json.dumps(ctx.details, default=float)),
    )
    manifest.outputs.append(RUN_LOG_NAME)
    write_json(out / "manifest.json", manifest)
    if not args.quiet:
        print(f"{args.command}: ok ({len(ctx.outputs)} artifact(s) in {out})", file=sys.stderr)
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_log_level(WARNING if args.quiet else CLI_LOG_LEVEL)
    try:
        handler = attach_run_log(args.out)
    except OSError as exc:
        return _fail(args.out, exc, args.command, 1)
    try:
        return _execute(args)
    finally:
        detach_run_log(handler)


def main() -> None:
    sys.exit(run())
