"""Benchmark runs of the model problems and their CSV/SVG outputs."""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import problems
from .errors import ConfigurationError
from .nitsche import VARIANTS, NitscheConfig
from .pipeline import SOLVERS, cells_at_level, discretize

log = logging.getLogger(__name__)

EXAMPLES = ("example1", "example2", "example3", "multi")
INTERFACE_COUNTS = (1, 2, 4, 6, 8, 10)
DESK_MAX_LEVEL = 3
MAX_LEVEL = 5


@dataclass(frozen=True)
class RunConfig:
    """One benchmark configuration; list-valued fields are swept."""

    example: str = "example1"
    variants: tuple = ("N-GP",)
    alpha1: tuple = (1.0,)
    alpha2: tuple = (1.0,)
    finest: tuple = (3,)
    levels: int = 3
    solvers: tuple = ("cg-smg",)
    n_coarse: int | None = None
    interfaces: tuple = (1,)
    out: str = "bench_out"
    tol: float = 1e-12
    kappa: bool = False
    errors: bool = True
    l5: bool = False

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigurationError(f"unknown example {self.example!r}; choose from {EXAMPLES}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigurationError(f"unknown variant {v!r}")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigurationError(f"unknown solver {s!r}")
        if min(self.alpha1 + self.alpha2) <= 0.0:
            raise ConfigurationError("coefficients must be positive")
        top = MAX_LEVEL if self.l5 else DESK_MAX_LEVEL
        if any(not 1 <= f <= top for f in self.finest):
            raise ConfigurationError(f"finest level must lie in 1..{top} (use --l5 for larger runs)")
        if self.levels < 1:
            raise ConfigurationError("hierarchy depth must be positive")
        if self.n_coarse is not None and self.n_coarse < 1:
            raise ConfigurationError("ncoarse must be positive")
        if self.example == "multi":
            bad = [k for k in self.interfaces if k not in INTERFACE_COUNTS]
            if bad:
                raise ConfigurationError(f"interface counts must be among {INTERFACE_COUNTS}")
        if not 0.0 < self.tol < 1.0:
            raise ConfigurationError("tolerance must lie in (0, 1)")


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


@dataclass
class BenchmarkRow:
    example: str
    variant: str
    alpha1: float
    alpha2: float
    finest: int | str
    levels: int
    solver: str
    n_coarse: int | str
    interfaces: int
    tol: float
    dofs: int = 0
    elements: int = 0
    l2_error: float | None = None
    energy_error: float | None = None
    kappa: float | None = None
    iterations: int | None = None
    rho_star: float | None = None
    wall_time: float = field(default=0.0)


ROW_FIELDS = tuple(f.name for f in dataclasses.fields(BenchmarkRow))


def _problem(example: str, alpha1: float, alpha2: float, interfaces: int):
    if example == "example1":
        return problems.example1()
    if example == "example2":
        return problems.example2(alpha1, alpha2)
    if example == "example3":
        return problems.example3(alpha2, alpha1)
    return problems.multi_interface(interfaces)


def _coefficient_pairs(cfg: RunConfig):
    if cfg.example in ("example1", "multi"):
        return [(1.0, 1.0)]
    return [(a1, a2) for a1 in cfg.alpha1 for a2 in cfg.alpha2]


def _depth(cfg: RunConfig, level: int) -> int:
    """Requested depth, reduced if the mesh cannot be halved that often."""
    if cfg.n_coarse is not None:
        return cfg.levels
    n = cells_at_level(level)
    depth = 1
    while depth < cfg.levels and n % 2 == 0:
        n //= 2
        depth += 1
    return depth


def run(cfg: RunConfig) -> list[BenchmarkRow]:
    """Run every combination in ``cfg``; one row per solver."""
    rows = []
    counts = cfg.interfaces if cfg.example == "multi" else (1,)
    finest = cfg.finest if cfg.n_coarse is None else (cfg.finest[0],)
    for k in counts:
        for a1, a2 in _coefficient_pairs(cfg):
            pb = _problem(cfg.example, a1, a2, k)
            for variant in cfg.variants:
                for level in finest:
                    depth = _depth(cfg, level)
                    disc = discretize(pb, level, depth, NitscheConfig(variant), n_coarse=cfg.n_coarse)
                    kappa = disc.condition_number() if cfg.kappa else None
                    for solver in cfg.solvers:
                        u, rep = disc.solve(solver, cfg.tol)
                        l2, en = disc.errors(u) if cfg.errors else (None, None)
                        rows.append(BenchmarkRow(
                            example=cfg.example, variant=variant, alpha1=a1, alpha2=a2,
                            finest=level if cfg.n_coarse is None else "",
                            levels=depth, solver=solver,
                            n_coarse=disc.hierarchy.levels[0].n, interfaces=len(pb.interfaces),
                            tol=cfg.tol, dofs=disc.n_dofs,
                            elements=disc.hierarchy.finest.n_elements + disc.space.decomp.n_cut,
                            l2_error=l2, energy_error=en, kappa=kappa,
                            iterations=rep.iterations if solver != "direct" else None,
                            rho_star=rep.rho_star, wall_time=rep.wall_time,
                        ))
                        log.info("row %s", rows[-1])
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_csv(path, rows) -> None:
    """CSV with a fixed header in :data:`ROW_FIELDS` order (header only for no rows)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in ROW_FIELDS])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_plot(path, rows) -> bool:
    """Log-log error plot per variant (against kappa if available, else dofs).

    Returns False when plotting is unavailable or there is nothing to draw.
    """
    rows = [r for r in rows if r.l2_error]
    if not rows:
        return False
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", path)
        return False
    use_kappa = all(r.kappa for r in rows)
    fig, ax = plt.subplots(figsize=(5, 4))
    groups = {}
    for r in rows:
        groups.setdefault((r.variant, r.alpha1, r.alpha2, r.solver), []).append(r)
    for (variant, a1, a2, _), rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r.dofs)
        x = [r.kappa if use_kappa else r.dofs for r in rs]
        label = variant if len({k[1:3] for k in groups}) == 1 else f"{variant} a=({a1:g},{a2:g})"
        ax.loglog(x, [r.l2_error for r in rs], "o-", label=f"{label} L2")
        ax.loglog(x, [r.energy_error for r in rs], "s--", label=f"{label} energy")
    ax.set_xlabel("condition number" if use_kappa else "dofs")
    ax.set_ylabel("error")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def emit_outputs(rows, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"csv": out / "results.csv"}
    write_csv(files["csv"], rows)
    plot = out / "errors.svg"
    if write_plot(plot, rows):
        files["plot"] = plot
    return files
