"""Command-line front end: ``python3 -m pwave_vortex <verb> [flags]``.

Every run writes its data files, one JSON report per pipeline and a
``manifest.json`` into ``--out``.  Exit status is 0 when the run succeeded
and its asserted invariants hold, 1 on solver failure (the report is still
written) and 2 when the configuration does not validate.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import IllPosedBoundaryData, InvalidArgument, PWaveError, SolverFailure
from .radial import ProfilePair, build_grid, energy_radial, write_json

log = logging.getLogger("pwave_vortex")

VERBS = ("classical", "solve", "continue", "extend", "asym", "pohozaev", "stability", "planar", "sweep")
BOUNDARY_KINDS = ("vortex", "constant", "affine")


class ConfigError(Exception):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"invalid {field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    verb: str
    R: float = 60.0
    N: int = 6000
    t: float = 1.0
    t_range: str | None = None
    tol: float = 1e-10
    dt: float = 0.05
    bc: str = "asymptotic"
    R_new: float | None = None
    N_new: int | None = None
    R_list: str | None = None
    window: str | None = None
    init: str | None = None
    N_r: int = 100
    N_theta: int = 64
    nu: float = 0.0
    kappa: float = 1.0
    boundary: str = "vortex"
    c_minus: float = 0.3
    c_plus: float = 0.7
    planar_tol: float = 1e-6
    max_iter: int = 50000
    out: str = "out"
    jobs: int = 1
    seed: int = 0

    # -- validation -----------------------------------------------------------

    def validate(self) -> "RunConfig":
        if self.verb not in VERBS:
            raise ConfigError("verb", f"must be one of {VERBS}")
        _positive("R", self.R)
        _count("N", self.N, 16)
        if not 0.0 <= self.t <= 1.0:
            raise ConfigError("t", "must lie in [0, 1]")
        _positive("tol", self.tol)
        _positive("dt", self.dt)
        if self.bc not in ("asymptotic", "sharp"):
            raise ConfigError("bc", "must be 'asymptotic' or 'sharp'")
        if self.t_range is not None:
            self.t_values()
        if self.R_new is not None:
            _positive("R_new", self.R_new)
            if self.R_new <= self.R:
                raise ConfigError("R_new", "must exceed R")
        if self.N_new is not None:
            _count("N_new", self.N_new, 16)
        if self.R_list is not None:
            self.radii()
        if self.window is not None:
            lo, hi = self.fit_window()
            if not 0 < lo < hi <= self.R:
                raise ConfigError("window", "need 0 < lo < hi <= R")
        if self.init is not None and not Path(self.init).is_file():
            raise ConfigError("init", f"no such file {self.init!r}")
        _count("N_r", self.N_r, 16)
        _count("N_theta", self.N_theta, 32)
        if self.N_theta % 2:
            raise ConfigError("N_theta", "must be even")
        if not -1.0 < self.nu < 1.0:
            raise ConfigError("nu", "must lie in (-1, 1)")
        _positive("kappa", self.kappa)
        if self.boundary not in BOUNDARY_KINDS:
            raise ConfigError("boundary", f"must be one of {BOUNDARY_KINDS}")
        _positive("planar_tol", self.planar_tol)
        _count("max_iter", self.max_iter, 1)
        _count("jobs", self.jobs, 1)
        if int(self.seed) != self.seed:
            raise ConfigError("seed", "must be an integer")
        return self

    def t_values(self) -> list[float]:
        try:
            a, b, c = (float(x) for x in self.t_range.split(":"))
        except (AttributeError, ValueError):
            raise ConfigError("t_range", "expected start:stop:step") from None
        if not (0.0 <= a <= b <= 1.0 and c > 0):
            raise ConfigError("t_range", "need 0 <= start <= stop <= 1 and step > 0")
        n = int(math.floor((b - a) / c + 1e-9))
        vals = [round(a + k * c, 12) for k in range(n + 1)]
        if vals[-1] < b - 1e-12:
            vals.append(b)
        return vals

    def radii(self) -> list[float]:
        try:
            vals = [float(x) for x in self.R_list.split(",")]
        except (AttributeError, ValueError):
            raise ConfigError("R_list", "expected comma-separated radii") from None
        if not vals or any(not v > 0 for v in vals):
            raise ConfigError("R_list", "radii must be positive")
        return vals

    def fit_window(self) -> tuple[float, float]:
        if self.window is None:
            return 0.4 * self.R, 0.9 * self.R
        try:
            lo, hi = (float(x) for x in self.window.split(":"))
        except ValueError:
            raise ConfigError("window", "expected lo:hi") from None
        return lo, hi

    def canonical(self) -> dict:
        """Settings that determine the outputs (``out`` and ``jobs`` do not)."""
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.pop("out")
        d.pop("jobs")
        return d


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(name, f"must be a positive number, got {value!r}")


def _count(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < minimum:
        raise ConfigError(name, f"must be an integer >= {minimum}, got {value!r}")


def blob_hash(data: bytes) -> str:
    """Git-style blob id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def config_bytes(cfg: RunConfig) -> bytes:
    return (json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":")) + "\n").encode()


# -- argument parsing -----------------------------------------------------------

_FLAGS = [
    ("--R", float), ("--N", int), ("--t", float), ("--t-range", str), ("--tol", float),
    ("--dt", float), ("--R-new", float), ("--N-new", int), ("--R-list", str), ("--window", str),
    ("--init", str), ("--N-r", int), ("--N-theta", int), ("--nu", float), ("--kappa", float),
    ("--c-minus", float), ("--c-plus", float), ("--planar-tol", float), ("--max-iter", int),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flat keys mirroring the flags")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes for sweep")
    common.add_argument("--seed", type=int, help="seed for randomized checks")
    common.add_argument("-v", "--verbose", action="store_true")
    for flag, typ in _FLAGS:
        common.add_argument(flag, type=typ, default=None)
    common.add_argument("--bc", choices=("asymptotic", "sharp"), default=None)
    common.add_argument("--boundary", choices=BOUNDARY_KINDS, default=None)

    parser = argparse.ArgumentParser(prog="pwave-vortex", description="Equivariant p-wave vortex solver")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        sub.add_parser(verb, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, dict]:
    """Defaults, then the config file, then explicit flags."""
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    inputs: dict = {}
    if args.config:
        path = Path(args.config)
        try:
            raw = path.read_bytes()
            data = json.loads(raw)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        for key, val in data.items():
            name = key.lstrip("-").replace("-", "_")
            if name not in known or name == "verb":
                raise ConfigError(key, "unknown configuration key")
            values[name] = val
        inputs["config_file"] = {"path": str(path), "blob": blob_hash(raw)}
    for name in known - {"verb"}:
        val = getattr(args, name, None)
        if val is not None:
            values[name] = val
    cfg = RunConfig(verb=args.verb, **values)
    cfg.validate()
    if cfg.init:
        inputs["init"] = {"path": cfg.init, "blob": blob_hash(Path(cfg.init).read_bytes())}
    return cfg, inputs


# -- pipelines --------------------------------------------------------------------


class Run:
    """Collects outputs of one invocation; every report gets the config hash."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = blob_hash(config_bytes(cfg))
        self.files: list[str] = []
        self.ok = True

    def report(self, name: str, payload: dict) -> None:
        write_json(self.out / name, {**payload, "config_hash": self.hash})
        self.files.append(name)

    def text(self, name: str, content: str) -> None:
        (self.out / name).write_text(content)
        self.files.append(name)

    def check(self, label: str, passed: bool) -> bool:
        if not passed:
            log.warning("invariant failed: %s", label)
            self.ok = False
        return bool(passed)


def _cont_cfg(cfg: RunConfig, t_end: float, t_start: float = 0.0):
    from .solver import ContinuationConfig

    return ContinuationConfig(
        t_start=t_start, t_end=t_end, dt_init=cfg.dt, dt_min=min(1e-4, cfg.dt), newton_tol=cfg.tol, bc=cfg.bc
    )


def _family(cfg: RunConfig, R: float, N: int, t_end: float):
    from .classical import solve_classical
    from .solver import continue_in_t

    grid = build_grid(R, N)
    base = solve_classical(grid, tol=cfg.tol)
    return continue_in_t(grid, _cont_cfg(cfg, t_end), base)


def _solution(cfg: RunConfig, t: float | None = None):
    """Solution at ``t`` from ``--init`` (polished) or by continuation from t=0."""
    from .solver import solve_pwave

    t = cfg.t if t is None else t
    if cfg.init:
        p = ProfilePair.from_csv(cfg.init, t)
        return solve_pwave(p.grid, t, p, _cont_cfg(cfg, t))
    _, p, rep = _family(cfg, cfg.R, cfg.N, t)[-1]
    return p, rep


def _profile_report(p: ProfilePair, rep) -> dict:
    return {"solve": rep.to_dict(), "energy": energy_radial(p).to_dict()}


def cmd_classical(run: Run) -> None:
    from .classical import solve_classical

    cfg = run.cfg
    prof = solve_classical(build_grid(cfg.R, cfg.N), tol=cfg.tol)
    lines = ["r,f"] + [f"{float(r)!r},{float(f)!r}" for r, f in zip(prof.grid.r, prof.f)]
    run.text("classical.csv", "\n".join(lines) + "\n")
    run.check("classical profile bounded by 1", prof.report.extras.get("bounded", True))
    run.report("classical_report.json", {"solve": prof.report.to_dict()})


def cmd_solve(run: Run) -> None:
    p, rep = _solution(run.cfg)
    p.to_csv(run.out / "profile.csv")
    run.files.append("profile.csv")
    run.report("solve_report.json", _profile_report(p, rep))


def cmd_continue(run: Run) -> None:
    cfg = run.cfg
    ts = cfg.t_values() if cfg.t_range else [0.0, cfg.t]
    from .classical import solve_classical
    from .solver import continue_in_t

    grid = build_grid(cfg.R, cfg.N)
    base = solve_classical(grid, tol=cfg.tol)
    step = ts[1] - ts[0] if len(ts) > 1 else cfg.dt
    ccfg = replace(_cont_cfg(cfg, ts[-1], ts[0]), dt_init=step, dt_min=min(1e-4, step))
    family = continue_in_t(grid, ccfg, base)
    members = []
    for t, p, rep in family:
        name = f"profile_t{t:.4f}.csv"
        p.to_csv(run.out / name)
        run.files.append(name)
        d = rep.extras
        bounds = d["max_modulus_sq"] <= 1 + 1e-3 and d["twice_potential"] <= 1 + 1e-3
        run.check(f"a-priori bounds at t={t}", bounds)
        signs = d["fp_negative"] and d["fm_in_unit_interval"]
        if 0 < t <= 0.2:
            run.check(f"sign structure at t={t}", signs)
        members.append({"t": t, "file": name, "a_priori_bounds": bounds, "signs": signs, **_profile_report(p, rep)})
    run.report("family_report.json", {"members": members, "t_values": family.ts})


def cmd_extend(run: Run) -> None:
    from .solver import extend_domain

    cfg = run.cfg
    p, _ = _solution(cfg)
    R_new = cfg.R_new if cfg.R_new is not None else 2.0 * p.grid.R
    N_new = cfg.N_new if cfg.N_new is not None else int(round(p.grid.N * R_new / p.grid.R))
    new, rep = extend_domain(p, R_new, N_new, _cont_cfg(cfg, p.t))
    new.to_csv(run.out / "profile.csv")
    run.files.append("profile.csv")
    run.report("extend_report.json", _profile_report(new, rep))


def cmd_asym(run: Run) -> None:
    from .asymptotics import expansion_coefficients, fit_tail

    cfg = run.cfg
    p, rep = _solution(cfg)
    model = expansion_coefficients(cfg.t)
    fit = fit_tail(p, cfg.fit_window())
    run.report(
        "asym_report.json",
        {
            "t": cfg.t,
            "a_minus": model.a_minus,
            "a_plus": model.a_plus,
            "b_minus": model.b_minus,
            "b_plus": model.b_plus,
            **fit.to_dict(),
            "solve": rep.to_dict(),
        },
    )


def cmd_pohozaev(run: Run) -> None:
    from .asymptotics import derivative_tail_check, pohozaev_residual

    cfg = run.cfg
    p, rep = _solution(cfg, 1.0)
    poho = pohozaev_residual(p)
    run.report(
        "pohozaev_report.json",
        {"pohozaev": poho.to_dict(), "derivative_tail": derivative_tail_check(p).to_dict(), "solve": rep.to_dict()},
    )


def cmd_stability(run: Run) -> None:
    from .classical import solve_classical
    from .linearization import build_operator, g_curvature, smallest_eigenvalue, solve_h

    cfg = run.cfg
    prof = solve_classical(build_grid(cfg.R, cfg.N), tol=cfg.tol)
    lm = smallest_eigenvalue(build_operator(prof, "minus"))
    lp = smallest_eigenvalue(build_operator(prof, "plus"))
    hs = solve_h(prof)
    g0, curv = g_curvature(hs, prof)
    run.check("L- positive", lm.value > 1e-6)
    run.check("L+ positive", lp.value > 1e-6)
    run.check("h negative in the interior", hs.report.extras["h_max_interior"] < 0)
    run.report(
        "stability_report.json",
        {
            "lambda_min_Lminus": lm.value,
            "lambda_min_Lplus": lp.value,
            "h_min": hs.report.extras["h_min"],
            "h_max_interior": hs.report.extras["h_max_interior"],
            "h_prime_0": hs.h_prime_0,
            "g2_estimate": curv,
            "g0": g0,
        },
    )


def _boundary(cfg: RunConfig, grid):
    th = grid.theta
    if cfg.boundary == "vortex":
        return np.exp(-1j * th), np.zeros_like(th, dtype=complex)
    if cfg.boundary == "constant":
        return np.full(th.size, cfg.c_minus, dtype=complex), np.full(th.size, cfg.c_plus, dtype=complex)
    z = grid.R * np.exp(1j * th)
    return cfg.c_minus - np.conj(z), cfg.c_plus + z


def cmd_planar(run: Run) -> None:
    from .planar import DiskGrid, PlanarConfig, minimize_planar, planar_energy

    cfg = run.cfg
    grid = DiskGrid(cfg.R, cfg.N_r, cfg.N_theta)
    gm, gp = _boundary(cfg, grid)
    pcfg = PlanarConfig(tol=cfg.planar_tol, max_iter=cfg.max_iter)
    field_, rep = minimize_planar(grid, gm, gp, cfg.nu, cfg.kappa, pcfg)
    trace = rep.extras["energy_trace"]
    run.check("energy non-increasing", all(b <= a for a, b in zip(trace, trace[1:])))
    run.text("field.csv", field_.to_csv())
    E = planar_energy(field_, cfg.nu, cfg.kappa)
    run.report("planar_report.json", {"solve": rep.to_dict(), "energy": {"kinetic": E.kinetic, "potential": E.potential, "total": E.total}})


def _sweep_point(args):
    cfg, t, R = args
    N = int(round(cfg.N * R / cfg.R))
    try:
        _, p, rep = _family(cfg, R, N, t)[-1]
    except SolverFailure as exc:
        return {"t": t, "R": R, "N": N, "converged": False, "error": str(exc)}, None
    return {"t": t, "R": R, "N": N, "converged": True, "energy": energy_radial(p).total, **rep.extras}, p.to_csv()


def cmd_sweep(run: Run) -> None:
    cfg = run.cfg
    ts = cfg.t_values() if cfg.t_range else [cfg.t]
    Rs = cfg.radii() if cfg.R_list else [cfg.R]
    points = [(cfg, t, R) for R in Rs for t in ts]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]
    rows = []
    for summary, csv_text in results:
        if csv_text is not None:
            name = f"profile_R{summary['R']:g}_t{summary['t']:.4f}.csv"
            run.text(name, csv_text)
            summary["file"] = name
        run.check(f"sweep point t={summary['t']} R={summary['R']}", summary["converged"])
        rows.append(summary)
    run.report("sweep_report.json", {"points": rows})


COMMANDS = {
    "classical": cmd_classical,
    "solve": cmd_solve,
    "continue": cmd_continue,
    "extend": cmd_extend,
    "asym": cmd_asym,
    "pohozaev": cmd_pohozaev,
    "stability": cmd_stability,
    "planar": cmd_planar,
    "sweep": cmd_sweep,
}


def run(cfg: RunConfig, inputs: dict | None = None) -> int:
    start = time.perf_counter()
    job = Run(cfg)
    status = 0
    try:
        COMMANDS[cfg.verb](job)
        status = 0 if job.ok else 1
    except (IllPosedBoundaryData, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        payload = {"error": str(exc), "kind": type(exc).__name__}
        if exc.report is not None:
            payload["solve"] = exc.report.to_dict()
        job.report("failure_report.json", payload)
        status = 1
    except PWaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = 1
    manifest = {
        "verb": cfg.verb,
        "config": cfg.canonical(),
        "config_hash": job.hash,
        "inputs": inputs or {},
        "outputs": sorted(job.files),
        "exit_status": status,
        "wall_clock_seconds": time.perf_counter() - start,
    }
    write_json(job.out / "manifest.json", manifest)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg, inputs = resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TypeError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    return run(cfg, inputs)


if __name__ == "__main__":
    sys.exit(main())
