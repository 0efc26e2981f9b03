"""Command-line entry point ``nitsche-bench``.

Exit codes: 0 on success, 2 for configuration errors, 3 for solver failures.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import CONFIG_KEYS, EXAMPLES, RunConfig, emit_outputs, run
from .errors import ConfigurationError, ConvergenceError, DegenerateElementError, NotPositiveDefiniteError
from .nitsche import VARIANTS
from .pipeline import SOLVERS

EXIT_CONFIG = 2
EXIT_SOLVER = 3

LIST_KEYS = {"variants": str, "alpha1": float, "alpha2": float, "finest": int, "solvers": str, "interfaces": int}
SCALAR_KEYS = {"example": str, "levels": int, "n_coarse": int, "out": str, "tol": float}
FLAG_KEYS = ("kappa", "errors", "l5")
# command-line spellings that differ from the field names
ALIASES = {"variant": "variants", "solver": "solvers", "ncoarse": "n_coarse"}


def _split(text: str, kind, allowed=None) -> tuple:
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if allowed is not None and items == ["all"]:
        return tuple(allowed)
    try:
        return tuple(kind(t) for t in items)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {text!r}") from exc


def _convert(key: str, value):
    allowed = {"variants": VARIANTS, "solvers": SOLVERS}.get(key)
    if key in LIST_KEYS:
        return _split(value, LIST_KEYS[key], allowed)
    if key in FLAG_KEYS:
        if isinstance(value, bool):
            return value
        v = str(value).strip().lower()
        if v not in ("1", "0", "true", "false", "yes", "no"):
            raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")
        return v in ("1", "true", "yes")
    try:
        return SCALAR_KEYS[key](value)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: cannot parse {value!r}") from exc


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Unknown keys are rejected."""
    out = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        key = ALIASES.get(key, key)
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nitsche-bench", description="Nitsche-XFEM interface benchmarks")
    p.add_argument("example", choices=EXAMPLES)
    p.add_argument("--variant", help="comma list of N-EV, N-LO, N-GP or 'all'")
    p.add_argument("--alpha1", help="comma list of alpha_1 values")
    p.add_argument("--alpha2", help="comma list of alpha_2 values")
    p.add_argument("--finest", help="comma list of finest levels (L1 = 100 cells per side)")
    p.add_argument("--levels", help="multigrid hierarchy depth")
    p.add_argument("--solver", help=f"comma list of {', '.join(SOLVERS)} or 'all'")
    p.add_argument("--ncoarse", help="cells per side of the coarsest mesh (overrides --finest)")
    p.add_argument("--interfaces", help="comma list of interface counts (multi example)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tol", help="relative energy-norm tolerance")
    p.add_argument("--kappa", action="store_true", default=None, help="compute condition numbers")
    p.add_argument("--no-errors", dest="errors", action="store_false", default=None,
                   help="skip discretization errors")
    p.add_argument("--l5", action="store_true", default=None, help="allow finest levels 4 and 5")
    p.add_argument("--config", help="key=value configuration file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    values["example"] = args.example
    for flag in ("variant", "alpha1", "alpha2", "finest", "levels", "solver", "ncoarse",
                 "interfaces", "out", "tol", "kappa", "errors", "l5"):
        v = getattr(args, flag)
        if v is not None:
            key = ALIASES.get(flag, flag)
            values[key] = _convert(key, v)
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        rows = run(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NotPositiveDefiniteError, DegenerateElementError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    files = emit_outputs(rows, cfg.out)
    for r in rows:
        print(f"{r.example} {r.variant} a=({r.alpha1:g},{r.alpha2:g}) level={r.finest} dofs={r.dofs} "
              f"{r.solver} its={r.iterations} l2={r.l2_error} kappa={r.kappa}")
    print(f"wrote {', '.join(str(f) for f in files.values())}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
