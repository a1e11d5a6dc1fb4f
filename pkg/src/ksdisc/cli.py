"""Command-line surface: reproducible runs writing CSV artifacts + manifest.

Every run resolves its configuration (flags over --config file over
defaults), writes the artifacts for its command into --out, and records the
fully resolved configuration in manifest.txt so the run can be reproduced
bit-for-bit.  All floats print with 17 significant digits.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import consistency_order, dft_power, time_averaged_spectrum
from .continuation import (
    FAMILY_NAMES,
    branch_label,
    branch_state_at,
    continue_branch,
    newton_solve,
    seed_family_branch,
    signed_norm,
    trivial_steady,
)
from .errors import KsError, UsageError
from .initial_conditions import builtin_ic
from .integrate import Trajectory, integrate, max_stable_dt
from .models import ModelSpec
from .odd import OddState
from .orbits import trace_to_period_doubling
from .systems import Geometry
from .tables import (
    TABLE1_ALL_ROWS,
    TABLE1_COLUMNS,
    TABLE1_DEFAULT_ROWS,
    TABLE3_ALL_ENTRIES,
    TABLE3_DEFAULT_ENTRIES,
    TABLE4_ALL_ROWS,
    TABLE4_DEFAULT_ROWS,
    run_table3,
    run_table4,
    spectrum_comparison,
    table1_row,
    trivial_pitchforks,
)

FAMILY_BY_NAME = {name: k for k, name in FAMILY_NAMES.items()}


def fnum(x):
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else fnum(cell) for cell in row
        ))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(out_dir, command, resolved):
    lines = [f"command={command}", f"version={__version__}"]
    for key in sorted(resolved):
        value = resolved[key]
        if value is None:
            continue
        if isinstance(value, float):
            value = fnum(value)
        lines.append(f"{key}={value}")
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def parse_branch(text):
    text = text.strip()
    if text == "trivial":
        return None, None
    sign = {"+": 1.0, "-": -1.0}.get(text[-1])
    family = FAMILY_BY_NAME.get(text[:-1])
    if sign is None or family is None:
        raise UsageError(
            f"unknown branch {text!r}; use trivial or e.g. unimodal-/bimodal+"
        )
    return family, sign


def parse_range(text):
    try:
        lo, hi = text.split(":")
        lo, hi = float(lo), float(hi)
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected lo:hi") from None
    if hi <= lo:
        raise UsageError(f"empty range {text!r}")
    return lo, hi


def resolve_model(args, alpha):
    spec = ModelSpec.from_string(args.model, alpha, getattr(args, "gamma", 1.0))
    geometry = getattr(args, "geometry", None)
    if spec.is_grid:
        if geometry is None:
            raise UsageError("grid models need --geometry (odd:M or full:N)")
        return spec, Geometry.from_string(geometry)
    if geometry is not None:
        raise UsageError("Galerkin models take no --geometry")
    return spec, None


def out_dir_of(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def state_header(dim, prefix="u"):
    return [f"{prefix}_{i + 1}" for i in range(dim)]


def branch_norm(point):
    if isinstance(point.state, OddState):
        return signed_norm(point.state)
    return float(np.linalg.norm(point.x))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_sim(args):
    spec, geometry = resolve_model(args, args.alpha)
    if geometry is None:
        geometry = Geometry.modal(spec.modes)
    state = builtin_ic(args.ic, geometry)
    traj = integrate(state, spec, args.dt, args.t_end,
                     record_every=args.record_every)
    out = out_dir_of(args)
    header = ["t"] + state_header(traj.states.shape[1])
    rows = [[t] + list(row) for t, row in zip(traj.times, traj.states)]
    write_csv(out / "trajectory.csv", header, rows)
    return {"snapshots": len(traj)}


def cmd_steady(args):
    spec, geometry = resolve_model(args, args.alpha)
    family, sign = parse_branch(args.branch)
    if family is None:
        sol = trivial_steady(spec, geometry, args.alpha) if geometry \
            else newton_solve(builtin_ic("zero", Geometry.modal(spec.modes)),
                              spec, alpha=args.alpha)
    else:
        if geometry is None:
            raise UsageError("named branches need a grid geometry")
        sol = branch_state_at(spec, geometry, family, sign, args.alpha)
    out = out_dir_of(args)
    write_csv(
        out / "steady.csv",
        ["alpha", "signed_norm", "residual_norm", "n_unstable"]
        + state_header(sol.x.size),
        [[sol.alpha, branch_norm(sol), sol.residual_norm, str(sol.n_unstable)]
         + list(sol.x)],
    )
    write_csv(
        out / "eigenvalues.csv", ["re_lambda", "im_lambda"],
        [[lam.real, lam.imag] for lam in sol.eigenvalues],
    )
    return {"alpha": sol.alpha, "n_unstable": sol.n_unstable}


def _write_branch(out, branch, events):
    dim = branch.points[0].x.size if branch.points else 0
    write_csv(
        out / "branch.csv",
        ["alpha", "signed_norm", "n_unstable"] + state_header(dim),
        [[p.alpha, norm, str(p.n_unstable)] + list(p.x)
         for p, norm in zip(branch.points, branch.signed_norms)],
    )
    write_csv(
        out / "bifurcations.csv",
        ["kind", "alpha", "branch", "re_lambda", "im_lambda"],
        [[e.kind, e.alpha, e.branch_label, e.eigenvalue.real,
          e.eigenvalue.imag] for e in events],
    )


def cmd_cont(args):
    spec, geometry = resolve_model(args, 0.0)
    if geometry is None:
        raise UsageError("continuation needs a grid geometry")
    alpha_range = parse_range(args.alpha_range)
    family, sign = parse_branch(args.seed_branch)
    out = out_dir_of(args)
    if family is None:
        branch, events = trivial_pitchforks(args.model, args.geometry,
                                            alpha_range)
    else:
        bp, (seed, tangent) = seed_family_branch(spec, geometry, family, sign)
        label = branch_label(family, seed.state)
        branch, events = continue_branch(
            seed, spec, alpha_range, label=label, initial_tangent=tangent,
        )
    _write_branch(out, branch, events)
    return {"points": len(branch.points), "events": len(events)}


def cmd_orbit(args):
    spec, geometry = resolve_model(args, 0.0)
    if geometry is None:
        raise UsageError("orbit tracing needs a grid geometry")
    if args.from_hopf != "HB1":
        raise UsageError("only --from-hopf HB1 is catalogued")
    alpha_range = parse_range(args.alpha_range)
    bp, (seed, tangent) = seed_family_branch(spec, geometry, 2, +1.0)
    label = branch_label(2, seed.state)
    branch, events = continue_branch(
        seed, spec, (0.0, alpha_range[1]), label=label,
        initial_tangent=tangent, max_points=500,
    )
    hopfs = [e for e in events if e.kind == "hopf"
             and alpha_range[0] - 2.0 <= e.alpha <= alpha_range[1]]
    if not hopfs:
        raise KsError("no Hopf point found in range on the bimodal branch")
    hb1 = min(hopfs, key=lambda e: e.alpha)
    orbits, oevents, pd = trace_to_period_doubling(
        hb1, spec, geometry, alpha_range[1], label=label + " cycles",
    )
    out = out_dir_of(args)
    dim = orbits[0].x.size
    rows = []
    for o in orbits:
        mus = o.nontrivial_multipliers()
        mu_max = mus[np.argmax(np.abs(mus))] if mus.size else 0j
        rows.append([o.alpha, o.period, str(int(o.stable)), mu_max.real,
                     mu_max.imag] + list(o.x))
    write_csv(
        out / "orbit.csv",
        ["alpha", "period", "stable", "mu_max_re", "mu_max_im"]
        + state_header(dim, "anchor_u"),
        rows,
    )
    all_events = [hb1] + oevents
    write_csv(
        out / "orbit_events.csv",
        ["kind", "alpha", "branch", "re_lambda", "im_lambda"],
        [[e.kind, e.alpha, e.branch_label, e.eigenvalue.real,
          e.eigenvalue.imag] for e in all_events],
    )
    return {"orbits": len(orbits),
            "pd": None if pd is None else pd.alpha}


def cmd_dtmax(args):
    spec, geometry = resolve_model(args, args.alpha)
    family, sign = parse_branch(args.branch)
    if family is None:
        sol = trivial_steady(spec, geometry, args.alpha)
    else:
        sol = branch_state_at(spec, geometry, family, sign, args.alpha)
    dt = max_stable_dt(sol.state, spec, horizon=args.horizon,
                       bound_factor=args.bound_factor)
    result = {"model": args.model, "geometry": args.geometry,
              "alpha": args.alpha, "branch": args.branch, "dt_max": dt}
    if args.out:
        out = out_dir_of(args)
        write_csv(out / "dtmax.csv",
                  ["model", "geometry", "alpha", "branch", "dt_max"],
                  [[args.model, args.geometry, args.alpha, args.branch, dt]])
    print(f"dt_max={fnum(dt)}")
    return result


def _read_trajectory_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    if header[0] != "t":
        raise UsageError(f"{path}: not a trajectory CSV")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return data[:, 0], data[:, 1:]


def cmd_spectrum(args):
    times, states = _read_trajectory_csv(args.traj)
    n = states.shape[1]
    traj = Trajectory(times, states, None, Geometry.full(n))
    result = time_averaged_spectrum(traj, args.skip)
    out = out_dir_of(args)
    write_csv(out / "spectrum.csv", ["k", "S_k"],
              [[str(int(k)), p] for k, p in zip(result.wavenumbers,
                                                result.power)])
    return {"samples": result.samples_used}


def cmd_consistency(args):
    spec = ModelSpec.from_string(args.model, args.alpha)
    if not spec.is_grid:
        raise UsageError("consistency orders are defined for grid models")
    grids = [int(v) for v in args.grids.split(",")]
    report = consistency_order(spec, alpha=args.alpha, grids=grids)
    out = out_dir_of(args)
    rows = [
        [str(int(n)), 2.0 * np.pi / n, err, report.fitted_order]
        for n, err in zip(report.grid_sizes, report.max_errors)
    ]
    write_csv(out / "consistency.csv",
              ["N", "h", "max_error", "fitted_order"], rows)
    print(f"fitted_order={fnum(report.fitted_order)}")
    return {"fitted_order": report.fitted_order}


def _fmt_cell(cell):
    if cell is None:
        return "---"
    alpha, kind = cell
    star = "*" if kind == "fold" else ""
    return f"{alpha:.17g}{star}"


def cmd_tables(args):
    out = out_dir_of(args)
    if args.target == "table1":
        rows = TABLE1_ALL_ROWS if args.rows == "all" else TABLE1_DEFAULT_ROWS
        table_rows = []
        event_rows = []
        for model, geometry in rows:
            row = table1_row(model, geometry)
            table_rows.append([model, geometry] + [
                _fmt_cell(row.columns[c]) for c in TABLE1_COLUMNS
            ])
            for fam, evs in row.events.items():
                for e in evs:
                    event_rows.append([model, geometry, fam, e.kind, e.alpha])
        write_csv(out / "table1.csv",
                  ["model", "geometry", *TABLE1_COLUMNS], table_rows)
        write_csv(out / "table1_events.csv",
                  ["model", "geometry", "family", "kind", "alpha"], event_rows)
        return {"rows": len(table_rows)}
    if args.target == "table3":
        entries = TABLE3_ALL_ENTRIES if args.rows == "all" \
            else TABLE3_DEFAULT_ENTRIES
        results = run_table3(entries)
        write_csv(out / "table3.csv",
                  ["model", "geometry", "alpha", "branch_family", "dt_max"],
                  [[r["model"], r["geometry"], r["alpha"], r["family"],
                    r["dt_max"]] for r in results])
        return {"rows": len(results)}
    if args.target == "table4":
        rows = TABLE4_ALL_ROWS if args.rows == "all" else TABLE4_DEFAULT_ROWS
        results = run_table4(rows)
        write_csv(out / "table4.csv",
                  ["model", "geometry", "HB1", "PD"],
                  [[r.model, r.geometry, r.hb1,
                    "---" if r.pd is None else fnum(r.pd)] for r in results])
        return {"rows": len(results)}
    raise UsageError(f"unknown table target {args.target!r}")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ks",
        description="Coarse-grid Kuramoto-Sivashinsky models: simulation, "
                    "continuation, orbits, stability steps and spectra.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, geometry=True, out_required=True):
        if model:
            p.add_argument("--model", required=True,
                           help="hol:3|hol:4|hol:5|cd:2|cd:4|cd:6|gal:m|nlgal:m")
        if geometry:
            p.add_argument("--geometry", default=None,
                           help="odd:M (M elements on [0,pi]) or full:N")
        p.add_argument("--config", default=None,
                       help="key=value file; flags override its entries")
        p.add_argument("--out", required=out_required, default=None,
                       help="output directory for artifacts + manifest")

    p = sub.add_parser("sim", help="integrate a trajectory with RK4")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--t-end", dest="t_end", type=float, required=True)
    p.add_argument("--ic", default="zero",
                   help="zero | halfwave | sine(k) | random(seed, amplitude)")
    p.add_argument("--record-every", dest="record_every", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("steady", help="Newton steady state on a named branch")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--branch", default="trivial")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("cont", help="pseudo-arclength branch continuation")
    common(p)
    p.add_argument("--alpha-range", dest="alpha_range", required=True)
    p.add_argument("--seed-branch", dest="seed_branch", default="trivial")
    p.set_defaults(func=cmd_cont)

    p = sub.add_parser("orbit", help="limit cycles from the first Hopf point")
    common(p)
    p.add_argument("--from-hopf", dest="from_hopf", default="HB1")
    p.add_argument("--alpha-range", dest="alpha_range", required=True)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("dtmax", help="maximum stable RK4 step near a state")
    common(p, out_required=False)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--branch", default="unimodal-")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--bound-factor", dest="bound_factor", type=float,
                   default=10.0)
    p.set_defaults(func=cmd_dtmax)

    p = sub.add_parser("spectrum", help="time-averaged power spectrum of a "
                                        "recorded trajectory")
    common(p, model=False, geometry=False)
    p.add_argument("--traj", required=True)
    p.add_argument("--skip", type=float, default=10.0)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("consistency", help="fitted consistency order")
    common(p, geometry=False)
    p.add_argument("--alpha", type=float, default=7.0)
    p.add_argument("--grids", default="32,64,128,256")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("tables", help="reproduce the bifurcation/stability "
                                      "tables")
    common(p, model=False, geometry=False)
    p.add_argument("--target", required=True,
                   choices=["table1", "table3", "table4"])
    p.add_argument("--rows", default="acceptance",
                   choices=["acceptance", "all"])
    p.set_defaults(func=cmd_tables)
    return parser


def _apply_config(argv):
    """Fold --config FILE entries in as defaults (flags given win)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = Path(argv[idx + 1])
    if not path.exists():
        raise UsageError(f"config file {path} not found")
    injected = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"bad config line: {line!r}")
        key, _, value = line.partition("=")
        injected.extend([f"--{key.strip().replace('_', '-')}", value.strip()])
    # insert after the subcommand so argparse's last-wins lets flags override
    return argv[:1] + injected + argv[1:]


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
        resolved = {
            k: v for k, v in vars(args).items()
            if k not in ("func", "config") and not callable(v)
        }
        summary = args.func(args)
        if args.out:
            write_manifest(Path(args.out), args.command, resolved)
        if summary:
            parts = " ".join(f"{k}={v}" for k, v in summary.items())
            print(f"ok {args.command}: {parts}")
        return 0
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2
    except KsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
