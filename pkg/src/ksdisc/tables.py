"""Reproducible experiment recipes: bifurcation tables, stability steps,
Hopf/period-doubling points and spectrum comparisons.

Each runner returns plain data structures; the CLI serialises them and the
acceptance suite asserts against them, so both exercise the same path.
"""

from dataclasses import dataclass, field

import numpy as np

from .analysis import reference_trajectory, time_averaged_spectrum
from .continuation import (
    _dedupe_events,
    branch_label,
    continue_branch,
    newton_solve,
    seed_family_branch,
    trivial_pitchfork_alpha,
    trivial_steady,
)
from .errors import (BlowUpError, ContinuationStallError, KsError,
                     NewtonDivergenceError)
from .initial_conditions import builtin_ic
from .integrate import integrate, max_stable_dt
from .models import ModelSpec
from .orbits import trace_to_period_doubling
from .systems import Geometry

TABLE1_COLUMNS = ("R2b1", "R2b2", "R2b3", "R2b4", "R3t1", "R3t2", "R4b1", "R4q1")

# model rows reproduced by default: the verification targets
TABLE1_DEFAULT_ROWS = (("cd:6", "odd:48"), ("hol:5", "odd:8"))
TABLE1_ALL_ROWS = (
    ("cd:6", "odd:48"),
    ("hol:3", "odd:8"), ("hol:4", "odd:8"), ("hol:5", "odd:8"),
    ("cd:2", "odd:8"), ("cd:4", "odd:8"), ("cd:6", "odd:8"),
    ("hol:3", "odd:12"), ("hol:4", "odd:12"),
    ("cd:2", "odd:12"), ("cd:4", "odd:12"),
)

TABLE3_DEFAULT_ENTRIES = (("hol:5", "odd:8", 10.0), ("cd:2", "odd:16", 10.0))
TABLE3_ALL_ENTRIES = tuple(
    (model, geometry, alpha)
    for model, geometry in (
        ("hol:3", "odd:8"), ("hol:4", "odd:8"), ("hol:5", "odd:8"),
        ("cd:2", "odd:8"), ("cd:4", "odd:8"), ("cd:6", "odd:8"),
        ("cd:2", "odd:16"),
    )
    for alpha in (10.0, 20.0, 30.0)
)

TABLE4_DEFAULT_ROWS = (("cd:6", "odd:24"), ("hol:5", "odd:8"), ("cd:6", "odd:8"))
TABLE4_ALL_ROWS = (
    ("cd:6", "odd:24"),
    ("hol:3", "odd:8"), ("hol:4", "odd:8"), ("hol:5", "odd:8"),
    ("cd:4", "odd:8"), ("cd:6", "odd:8"),
)


def _spec_geo(model, geometry, alpha=0.0):
    return ModelSpec.from_string(model, alpha), Geometry.from_string(geometry)


@dataclass(eq=False)
class BranchRun:
    label: str
    branch: object
    events: list


@dataclass(eq=False)
class Table1Row:
    model: str
    geometry: str
    columns: dict
    events: dict  # family name -> deduped steady-state events
    runs: list = field(default_factory=list)
    trivial_pitchforks: list = field(default_factory=list)


def trace_family(spec, geometry, family, alpha_range=(0.0, 70.0),
                 max_points=600):
    """Continue both signed branches of one family; returns the runs."""
    runs = []
    for sign in (+1.0, -1.0):
        bp, (seed, tangent) = seed_family_branch(spec, geometry, family, sign)
        label = branch_label(family, seed.state)
        try:
            branch, events = continue_branch(
                seed, spec, alpha_range, label=label,
                initial_tangent=tangent, max_points=max_points,
            )
        except ContinuationStallError as exc:
            branch, events = exc.branch, exc.bifurcations or []
        runs.append(BranchRun(label=label, branch=branch, events=events))
    return runs


def steady_events_of(runs, birth_alpha, tol=0.05):
    """Real-crossing events across a family's runs, birth point excluded."""
    merged = []
    for run in runs:
        merged.extend(e for e in run.events if e.kind != "hopf")
    merged = [e for e in merged if abs(e.alpha - birth_alpha) > tol]
    return _dedupe_events(merged)


def table1_row(model, geometry, alpha_max=70.0):
    """All steady-state bifurcations of the bimodal/trimodal/quadrimodal
    families, mapped onto the table's column layout."""
    spec, geo = _spec_geo(model, geometry)
    events = {}
    runs = []
    for family, name in ((2, "bimodal"), (3, "trimodal"), (4, "quadrimodal")):
        birth = trivial_pitchfork_alpha(spec, geo, family)
        if birth > alpha_max:
            events[name] = []
            continue
        family_runs = trace_family(spec, geo, family, (0.0, alpha_max))
        runs.extend(family_runs)
        events[name] = steady_events_of(family_runs, birth)

    def pick(name, index):
        evs = events.get(name, [])
        return (evs[index].alpha, evs[index].kind) if index < len(evs) else None

    columns = {
        "R2b1": pick("bimodal", 0),
        "R2b2": pick("bimodal", 1),
        "R2b3": pick("bimodal", 2),
        "R2b4": pick("bimodal", 3),
        "R4b1": pick("bimodal", 4),
        "R3t1": pick("trimodal", 0),
        "R3t2": pick("trimodal", 1),
        "R4q1": pick("quadrimodal", 0),
    }
    return Table1Row(model=model, geometry=geometry, columns=columns,
                     events=events, runs=runs)


def trivial_pitchforks(model, geometry, alpha_range=(0.0, 70.0)):
    """Continuation of the trivial branch; returns detected pitchforks."""
    spec, geo = _spec_geo(model, geometry)
    seed = trivial_steady(spec, geo, alpha=alpha_range[0] + 0.5)
    branch, events = continue_branch(seed, spec, alpha_range, label="trivial")
    return branch, [e for e in events if e.kind == "pitchfork"]


def stable_branch_state(spec, geometry, family, alpha):
    """Stable steady state of a family at alpha, trying both signs."""
    from .continuation import branch_state_at

    last = None
    for sign in (-1.0, +1.0):
        try:
            sol = branch_state_at(spec, geometry, family, sign, alpha)
        except KsError as exc:
            last = exc
            continue
        if sol.n_unstable == 0:
            return sol
        last = NewtonDivergenceError(
            f"branch {family}/{sign:+.0f} is unstable at alpha={alpha}"
        )
    raise last


def table3_entry(model, geometry, alpha, horizon=1.0, bound_factor=10.0):
    """Maximum stable RK4 step on the stable unimodal/bimodal state."""
    spec, geo = _spec_geo(model, geometry, alpha)
    family = 1 if alpha < 16.0 else 2
    state = stable_branch_state(spec, geo, family, alpha)
    dt = max_stable_dt(state.state, spec, horizon=horizon,
                       bound_factor=bound_factor)
    return {"model": model, "geometry": geometry, "alpha": alpha,
            "family": "unimodal" if family == 1 else "bimodal",
            "dt_max": dt}


def run_table3(entries=TABLE3_DEFAULT_ENTRIES):
    return [table3_entry(*entry) for entry in entries]


@dataclass(eq=False)
class Table4Row:
    model: str
    geometry: str
    hb1: float
    pd: float | None
    omega: float
    sb_alphas: list
    orbits: list


def table4_row(model, geometry, alpha_margin=3.6):
    """First Hopf point on the positive bimodal branch and the first
    period doubling of the cycles it spawns."""
    spec, geo = _spec_geo(model, geometry)
    bp, (seed, tangent) = seed_family_branch(spec, geo, 2, +1.0)
    label = branch_label(2, seed.state)
    hopfs = []
    alpha_cap = 40.0
    try:
        branch, events = continue_branch(
            seed, spec, (0.0, alpha_cap), label=label,
            initial_tangent=tangent, max_points=500,
        )
        hopfs = [e for e in events if e.kind == "hopf"]
    except ContinuationStallError as exc:
        hopfs = [e for e in (exc.bifurcations or []) if e.kind == "hopf"]
    if not hopfs:
        raise KsError(f"no Hopf point found on {label} for {model} {geometry}")
    hb1 = min(hopfs, key=lambda e: e.alpha)
    orbits, oevents, pd = trace_to_period_doubling(
        hb1, spec, geo, hb1.alpha + alpha_margin, label=label + " cycles",
    )
    return Table4Row(
        model=model, geometry=geometry, hb1=float(hb1.alpha),
        pd=None if pd is None else float(pd.alpha), omega=hb1.omega,
        sb_alphas=[e.alpha for e in oevents if e.kind == "cycle_pitchfork"],
        orbits=orbits,
    )


def run_table4(rows=TABLE4_DEFAULT_ROWS):
    return [table4_row(*row) for row in rows]


# --------------------------------------------------------------------------
# spectra comparison
# --------------------------------------------------------------------------


@dataclass(eq=False)
class SpectrumComparison:
    alpha: float
    deviations: dict  # model -> summed |log10 S| gap over k = 1..k_max
    spectra: dict     # model -> SpectrumResult
    reference: object


def _rk4_spectrum(model, n, alpha, dt, t_end, skip, sample_dt, ic_name):
    from math import ceil

    from .integrate import linear_stability_dt
    from .systems import make_system

    spec = ModelSpec.from_string(model, alpha)
    geo = Geometry.full(n)
    # quarter of the trivial-state linear bound leaves margin for the
    # nonlinear eigenvalue shifts along a chaotic trajectory
    dt_lin, _ = linear_stability_dt(make_system(spec, geo), np.zeros(n))
    record_every = max(1, ceil(sample_dt / min(dt, 0.25 * dt_lin)))
    dt = sample_dt / record_every
    ic = builtin_ic(ic_name, geo)
    traj = integrate(ic, spec, dt, t_end, record_every=record_every)
    return time_averaged_spectrum(traj, skip)


def spectrum_comparison(alpha=20.0, coarse_n=12, reference_n=256,
                        models=("hol:5", "cd:6"), t_end=50.0, skip=10.0,
                        sample_dt=0.01, coarse_dt=1e-3, reference_dt=1e-4,
                        k_max=5, ic_name="sine(1)"):
    """Coarse-model spectra against the fine-grid reference at one alpha.

    Models integrate with RK4; the reference uses the exponential
    reference integrator.  Deviation is summed |log10 S(k)| over k=1..k_max.
    The default initial state sin(x) has zero spatial mean (the mean is a
    decoupled drift parameter, and nonzero values push the coarse centered
    schemes off their bounded attractor at this alpha).
    """
    ref_spec = ModelSpec.from_string("cd:6", alpha)
    geo = Geometry.full(reference_n)
    ic = builtin_ic(ic_name, geo)
    record_every = max(1, round(sample_dt / reference_dt))
    ref_traj = reference_trajectory(ref_spec, ic, reference_dt, t_end,
                                    record_every=record_every)
    reference = time_averaged_spectrum(ref_traj, skip)
    ref_map = reference.as_dict()

    deviations = {}
    spectra = {}
    for model in models:
        try:
            spec_result = _rk4_spectrum(model, coarse_n, alpha, coarse_dt,
                                        t_end, skip, sample_dt, ic_name)
        except BlowUpError:
            # the coarse model left its bounded regime entirely: it departs
            # from the reference by any measure
            spectra[model] = None
            deviations[model] = np.inf
            continue
        spectra[model] = spec_result
        got = spec_result.as_dict()
        dev = 0.0
        for k in range(1, k_max + 1):
            dev += abs(np.log10(max(got[k], 1e-300))
                       - np.log10(max(ref_map[k], 1e-300)))
        deviations[model] = dev
    return SpectrumComparison(alpha=alpha, deviations=deviations,
                              spectra=spectra, reference=reference)
