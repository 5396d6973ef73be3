"""Command-line front end: parse a JSON run configuration, execute
verification pipelines, and emit machine-readable reports plus
plot-ready data tables.

Subcommands:

- ``check``     run the configured check list and write a report
- ``solve``     run only the root-finding stage (checks = [solve])
- ``retrieve``  solve and build/verify Bethe states (checks = [solve, states])
- ``report``    extract a comma-delimited plot table from a written report

Reports are bit-for-bit reproducible given an identical configuration
(including the solver seed): all randomness is drawn from seeded
generators and the recorded timing field stays null unless --timing
explicitly requests wall-clock seconds.  The report
embeds a normalized echo of its configuration in which sampled
inhomogeneities are resolved to explicit values, so the echo is itself
a valid configuration that reproduces the run.

Exit codes: 0 all checks pass, 1 at least one check failed (the report
is still written), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

from . import checks, open_chain, torus
from .checks import MODEL_OPEN, MODEL_TORUS, CheckContext
from .errors import DegenerateParameterError
from .solver import SolverConfig

MAX_SITES = 8
PLOT_KINDS = ("spectrum", "residuals", "roots")

_CONFIG_KEYS = {
    "model",
    "N",
    "eta",
    "theta",
    "boundary",
    "tq_variant",
    "solver",
    "checks",
    "output",
}
_BOUNDARY_KEYS = ("p", "q", "xi")
_SOLVER_KEYS = tuple(f.name for f in dataclasses.fields(SolverConfig))
_INT_SOLVER_KEYS = ("max_iter", "polish_iter", "restarts", "seed")


class UsageError(Exception):
    """Invalid command line, configuration, or report request."""


def _pair(z: complex) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _as_complex(value, where: str) -> complex:
    ok = (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
    )
    if not ok:
        raise UsageError(f"{where}: expected a [re, im] pair, got {value!r}")
    return complex(float(value[0]), float(value[1]))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Normalized run configuration with every default resolved."""

    model: str
    n_sites: int
    eta: complex
    theta: tuple
    generic: bool
    boundary: dict | None
    tq_variant: str | None
    solver: SolverConfig
    checks: tuple
    output: str


def _parse_solver(raw, seed_override) -> SolverConfig:
    if not isinstance(raw, dict):
        raise UsageError("solver: expected an object of solver fields")
    unknown = sorted(set(raw) - set(_SOLVER_KEYS))
    if unknown:
        raise UsageError(f"solver: unknown fields {unknown}; known: {list(_SOLVER_KEYS)}")
    kwargs = {}
    for key, value in raw.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise UsageError(f"solver.{key}: expected a number, got {value!r}")
        if key in _INT_SOLVER_KEYS:
            if value != int(value) or value < 0:
                raise UsageError(
                    f"solver.{key}: expected a nonnegative integer, got {value!r}"
                )
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    if seed_override is not None:
        kwargs["seed"] = int(seed_override)
    return SolverConfig(**kwargs)


def _parse_theta(raw_theta, model: str, n_sites: int, eta: complex):
    """Resolve the theta field to (values, generic_flag)."""
    module = torus if model == MODEL_TORUS else open_chain
    if raw_theta == "homogeneous":
        return (0.0,) * n_sites, False
    if isinstance(raw_theta, str):
        prefix = "generic:"
        if not raw_theta.startswith(prefix):
            raise UsageError(
                f'theta: expected a list of [re, im] pairs, "generic:<seed>", '
                f'or "homogeneous", got {raw_theta!r}'
            )
        try:
            seed = int(raw_theta[len(prefix) :])
        except ValueError:
            raise UsageError(f"theta: bad seed in {raw_theta!r}") from None
        return tuple(module.generic_theta(n_sites, eta, seed)), True
    if isinstance(raw_theta, list):
        if len(raw_theta) != n_sites:
            raise UsageError(f"theta: expected {n_sites} entries, got {len(raw_theta)}")
        return tuple(_as_complex(x, f"theta[{i}]") for i, x in enumerate(raw_theta)), True
    raise UsageError(f"theta: unsupported value {raw_theta!r}")


def parse_config(raw, seed_override=None, allow_large_n=False) -> RunConfig:
    """Validate a raw configuration mapping and fill in every default."""
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config fields {unknown}; known: {sorted(_CONFIG_KEYS)}")

    model = raw.get("model")
    if model not in (MODEL_TORUS, MODEL_OPEN):
        raise UsageError(f'model: expected "{MODEL_TORUS}" or "{MODEL_OPEN}", got {model!r}')

    n_sites = raw.get("N")
    if isinstance(n_sites, bool) or not isinstance(n_sites, int) or n_sites < 1:
        raise UsageError(f"N: expected a positive integer, got {n_sites!r}")
    if n_sites > MAX_SITES and not allow_large_n:
        raise UsageError(
            f"N = {n_sites} exceeds the desk-scale guard ({MAX_SITES}); "
            "pass --allow-large-N to override"
        )

    solver = _parse_solver(raw.get("solver", {}), seed_override)

    if model == MODEL_TORUS:
        default_eta = torus.DEFAULT_ETA
    else:
        default_eta = open_chain.DEFAULT_ETA
    eta = _as_complex(raw["eta"], "eta") if "eta" in raw else default_eta

    theta, generic = _parse_theta(
        raw.get("theta", f"generic:{solver.seed}"), model, n_sites, eta
    )

    boundary = None
    tq_variant = None
    if model == MODEL_OPEN:
        if "tq_variant" in raw:
            raise UsageError("tq_variant: only valid for model " + MODEL_TORUS)
        raw_boundary = raw.get(
            "boundary",
            {
                "p": _pair(open_chain.DEFAULT_P),
                "q": _pair(open_chain.DEFAULT_Q),
                "xi": _pair(open_chain.DEFAULT_XI),
            },
        )
        if not isinstance(raw_boundary, dict) or sorted(raw_boundary) != sorted(_BOUNDARY_KEYS):
            raise UsageError(f"boundary: expected exactly the fields {list(_BOUNDARY_KEYS)}")
        boundary = {k: _as_complex(raw_boundary[k], f"boundary.{k}") for k in _BOUNDARY_KEYS}
    else:
        if "boundary" in raw:
            raise UsageError("boundary: only valid for model " + MODEL_OPEN)
        tq_variant = raw.get("tq_variant", torus.VARIANT_M0)
        if tq_variant not in (torus.VARIANT_M0, torus.VARIANT_SPLIT):
            raise UsageError(
                f'tq_variant: expected "{torus.VARIANT_M0}" or '
                f'"{torus.VARIANT_SPLIT}", got {tq_variant!r}'
            )

    check_names = raw.get("checks", ["full"])
    if not isinstance(check_names, list) or not all(isinstance(c, str) for c in check_names):
        raise UsageError("checks: expected a list of check names")
    known = set(checks.available_checks(model)) | {"full"}
    bad = sorted(set(check_names) - known)
    if bad:
        raise UsageError(f"checks: unknown names {bad}; available: {sorted(known)}")

    output = raw.get("output", "report.json")
    if not isinstance(output, str) or not output:
        raise UsageError(f"output: expected a file path, got {output!r}")

    return RunConfig(
        model=model,
        n_sites=n_sites,
        eta=eta,
        theta=theta,
        generic=generic,
        boundary=boundary,
        tq_variant=tq_variant,
        solver=solver,
        checks=tuple(check_names),
        output=output,
    )


def build_params(config: RunConfig):
    if config.model == MODEL_TORUS:
        return torus.TorusParams(
            config.n_sites, config.eta, config.theta, generic=config.generic
        )
    b = config.boundary
    return open_chain.OpenParams(
        config.n_sites,
        config.eta,
        config.theta,
        b["p"],
        b["q"],
        b["xi"],
        generic=config.generic,
    )


def config_echo(config: RunConfig) -> dict:
    """The normalized configuration as a JSON-ready mapping.  Sampled
    inhomogeneities are echoed as explicit values, so feeding the echo
    back in reproduces the run bit for bit."""
    echo = {
        "model": config.model,
        "N": config.n_sites,
        "eta": _pair(config.eta),
    }
    if config.generic:
        echo["theta"] = [_pair(t) for t in config.theta]
    else:
        echo["theta"] = "homogeneous"
    if config.boundary is not None:
        echo["boundary"] = {k: _pair(v) for k, v in config.boundary.items()}
    if config.tq_variant is not None:
        echo["tq_variant"] = config.tq_variant
    echo["solver"] = dataclasses.asdict(config.solver)
    echo["checks"] = list(config.checks)
    echo["output"] = config.output
    return echo


def run(config: RunConfig) -> dict:
    """Execute the configured checks and assemble the verification report."""
    ctx = CheckContext(
        model=config.model,
        params=build_params(config),
        solver_config=config.solver,
        tq_variant=config.tq_variant or torus.VARIANT_M0,
        seed=config.solver.seed,
    )
    records, eigenstates = checks.run_checks(ctx, config.checks)
    return {
        "config_echo": config_echo(config),
        "checks": records,
        "eigenstates": eigenstates,
        "timing": None,
    }


def write_report(report: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# plot tables


def _row(values) -> str:
    parts = []
    for v in values:
        parts.append(str(v) if isinstance(v, int) else repr(float(v)))
    return ",".join(parts)


def emit_plot_data(report: dict, kind: str, path: str) -> None:
    """Write one comma-delimited numeric table extracted from a report.

    spectrum:   eigenvalue samples as (u_re, u_im, eigenvalue_re, eigenvalue_im)
    residuals:  per-state (state_index, bae_residual, state_residual)
    roots:      per-root (state_index, root_index, re, im)
    """
    states = report.get("eigenstates") or []
    rows = []
    if kind == "spectrum":
        header = "u_re,u_im,eigenvalue_re,eigenvalue_im"
        for rec in states:
            for sample in rec.get("eigenvalue_samples") or []:
                rows.append(_row(sample))
    elif kind == "residuals":
        header = "state_index,bae_residual,state_residual"
        for rec in states:
            if rec.get("bae_residual") is None or rec.get("state_residual") is None:
                continue
            rows.append(_row([rec["index"], rec["bae_residual"], rec["state_residual"]]))
    elif kind == "roots":
        header = "state_index,root_index,re,im"
        for rec in states:
            for k, root in enumerate(rec.get("roots") or []):
                rows.append(_row([rec["index"], k, root[0], root[1]]))
    else:
        raise UsageError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    if not rows:
        raise UsageError(f"report contains no {kind} data")
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        fh.write("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# entry points


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path!r} is not valid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odba",
        description="Verification laboratory for Bethe-state retrieval on "
        "the twisted XXZ torus and the open XXX chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_help = {
        "check": "run the configured verification checks",
        "solve": "fit Bethe roots to the exact spectrum (checks = [solve])",
        "retrieve": "solve roots and rebuild eigenstates (checks = [solve, states])",
    }
    for name, text in run_help.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--out", help="report path (overrides the config output field)")
        p.add_argument("--seed", type=int, help="override the solver seed")
        p.add_argument(
            "--allow-large-N",
            action="store_true",
            dest="allow_large_n",
            help=f"lift the N <= {MAX_SITES} desk-scale guard",
        )
        p.add_argument(
            "--timing",
            action="store_true",
            help="record wall-clock seconds in the report (defeats "
            "byte-identical reproducibility)",
        )
    p = sub.add_parser("report", help="extract a plot-ready table from a written report")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("--config", required=True, help="path to a previously written report")
    p.add_argument("--out", help="table path (default <kind>.csv)")
    return parser


def _cmd_run(args) -> int:
    config = parse_config(
        _load_json(args.config, "config"),
        seed_override=args.seed,
        allow_large_n=args.allow_large_n,
    )
    if args.command == "solve":
        config = dataclasses.replace(config, checks=("solve",))
    elif args.command == "retrieve":
        config = dataclasses.replace(config, checks=("solve", "states"))
    if args.out is not None:
        config = dataclasses.replace(config, output=args.out)
    started = time.perf_counter()
    report = run(config)
    if args.timing:
        report["timing"] = round(time.perf_counter() - started, 6)
    write_report(report, config.output)
    for rec in report["checks"]:
        flag = "pass" if rec["pass"] else "FAIL"
        print(
            f"{flag}  {rec['name']:<24s} residual {rec['residual']:.3e}"
            f"  tolerance {rec['tolerance']:.1e}"
        )
    print(f"report written to {config.output}")
    return 0 if all(rec["pass"] for rec in report["checks"]) else 1


def _cmd_report(args) -> int:
    report = _load_json(args.config, "report")
    out = args.out if args.out is not None else f"{args.kind}.csv"
    emit_plot_data(report, args.kind, out)
    print(f"table written to {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return _cmd_report(args)
        return _cmd_run(args)
    except (UsageError, DegenerateParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
