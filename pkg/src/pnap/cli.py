"""Command-line front end: ``pnap run``, ``pnap convergence``, ``pnap list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import io
from .integrator import SweepDivergenceError
from .physics import PhysicalConstants
from .scenarios import (
    BUILTINS,
    INTEGRATORS,
    ConfigError,
    StepFailure,
    apply_overrides,
    builtin,
    convergence_study,
    load_config,
    run_simulation,
)

log = logging.getLogger("pnap")


def _mesh(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"mesh must be N or NxN, got {text!r}") from None
    if not 1 <= len(parts) <= 2 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"mesh must be N or NxN, got {text!r}")
    return parts


def _onoff(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=BUILTINS, help="builtin scenario")
    src.add_argument("--config", help="key=value scenario file")
    p.add_argument("--mesh", type=_mesh, help="cell counts, N or NxN")
    p.add_argument("--order", type=int, help="P_N truncation degree M")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--integrator", choices=INTEGRATORS)
    p.add_argument("--reconstruction", choices=("constant", "linear", "weno3"))
    p.add_argument("--filter", type=_onoff, metavar="{on,off}")
    p.add_argument("--tmax", type=float)
    p.add_argument("--out", default="out", metavar="DIR")
    p.add_argument("--format", choices=io.FORMATS, default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnap", description="AP IMEX P_N solver for gray radiative transfer")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a scenario and write snapshots")
    _add_scenario_args(run)
    run.add_argument("--snap-every", type=int, help="also write a snapshot every K steps")

    conv = sub.add_parser("convergence", help="grid self-convergence study of a slab scenario")
    _add_scenario_args(conv)
    conv.add_argument("--ladder", default="50,100,200,400,800,1600",
                      help="comma-separated cell counts; the finest is the reference")
    conv.add_argument("--epsilons", default="1,0.1,0.01")

    sub.add_parser("list-scenarios", help="print builtin scenario names")
    return parser


def resolve(args):
    scenario = builtin(args.scenario) if args.scenario else load_config(args.config)
    return apply_overrides(
        scenario,
        cells=args.mesh, order=args.order, epsilon=args.epsilon, cfl=args.cfl,
        integrator=args.integrator, reconstruction=args.reconstruction, filter=args.filter,
        tmax=args.tmax, snap_every=getattr(args, "snap_every", None),
    )


def _state_arrays(scenario, state):
    """Moments and temperature of a transport or diffusion state."""
    if hasattr(state, "moments"):
        return state.moments, state.T
    U = (scenario.a * scenario.c * state.T**4)[None]
    return U, state.T


def cmd_run(args) -> int:
    scenario = resolve(args)
    scenario = apply_overrides(scenario, output_times=tuple(t for t in scenario.output_times if t < scenario.tmax)
                               + (scenario.tmax,))
    os.makedirs(args.out, exist_ok=True)
    log.info("running %s to t=%g", scenario.name, scenario.tmax)
    result = run_simulation(scenario)
    consts = PhysicalConstants(scenario.a, scenario.c, scenario.epsilon)
    mesh = scenario.mesh()
    for t, st in sorted(result.snapshots.items()):
        U, T = _state_arrays(scenario, st)
        path = io.write_snapshot(args.out, scenario.name, t, args.format, mesh, U, T, consts, scenario.geometry)
        print(path)
    if result.log.records:
        diag = os.path.join(args.out, f"{scenario.name}_diagnostics.csv")
        result.log.write_csv(diag)
        print(diag)
    return 0


def cmd_convergence(args) -> int:
    scenario = resolve(args)
    ladder = [int(n) for n in args.ladder.split(",")]
    epsilons = [float(e) for e in args.epsilons.split(",")]

    def progress(eps, n):
        log.info("eps=%g N=%d done", eps, n)

    table = convergence_study(scenario, ladder, epsilons, progress=progress)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{scenario.name}_convergence.csv")
    with open(path, "w") as fh:
        fh.write("epsilon,N,err_I,err_T\n")
        for eps, n, eI, eT in table.rows():
            fh.write(f"{eps!r},{n},{eI!r},{eT!r}\n")
    for eps in table.epsilons:
        print(f"eps={eps:g}  slope_I={table.slopes_I[eps]:.3f}  slope_T={table.slopes_T[eps]:.3f}")
    print(path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "list-scenarios":
            for name in BUILTINS:
                print(name)
            return 0
        if args.command == "run":
            return cmd_run(args)
        return cmd_convergence(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StepFailure, SweepDivergenceError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
