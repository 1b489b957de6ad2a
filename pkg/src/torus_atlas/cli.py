"""Command-line entry point: ``torus-atlas <command> [options]``.

Every command writes CSV/JSON data plus ``manifest.json`` (config hash,
versions, seed) into the output directory.  Exit codes: 0 on success, 1
on invalid usage or configuration, 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, config_hash, load_config
from .errors import ConfigError, TorusAtlasError
from .output import save_tori, write_csv, write_json

log = logging.getLogger("torus_atlas")

COMMANDS = ("bifurcation", "freqmap", "diophantine", "monodromy", "solve-tori", "glue",
            "verify-freq")
DEFAULT_OUT = "torus_atlas_out"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _pmap(fn, items, jobs):
    """Ordered map, across processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _versions():
    import numba
    import scipy
    import shapely
    return {"torus_atlas": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__,
            "shapely": shapely.__version__}


def _manifest(out, command, block, seed, files):
    write_json(out / "manifest.json", {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "config_sha256": config_hash(block),
        "config": block.model_dump(mode="json"),
        "seed": seed,
        "versions": _versions(),
        "outputs": sorted(files),
    })


def _grid(r_I, r_E, shape):
    return np.linspace(*r_I, shape[0]), np.linspace(*r_E, shape[1])


# ---------------------------------------------------------------------------
# workers (module level so that they pickle)
# ---------------------------------------------------------------------------


def _classify_point(args):
    from .fibration import classify
    I, E, tol = args
    return classify((I, E), tol).value


def _freq_point(args):
    from .action_angle import frequency_jacobian
    from .fibration import ValueClass, classify
    I, E, h = args
    for dI, dE in ((0, 0), (h, 0), (-h, 0), (0, h), (0, -h)):
        if classify((I + dI, E + dE)) is not ValueClass.REGULAR:
            return None
    jac, d = frequency_jacobian((I, E), h)
    w = d.omega
    return [d.J, d.T, d.theta, float(w[0]), float(w[1]), float(np.linalg.det(jac))]


def _solve_point(args):
    from .action_angle import integrable_embedding
    from .geometry import HamiltonianSpec
    from .kam import solve_invariance, validate_torus
    v, phase, eps, pid, kam, t_end, n_points = args
    K0 = integrable_embedding(v, kam.N).translate(np.asarray(phase))
    spec = HamiltonianSpec(eps, pid)
    st = solve_invariance(K0, K0.omega, spec, kam)
    dist = validate_torus(st, spec, t_end=t_end, n_points=n_points) if t_end > 0 else float("nan")
    return st, dist


def _verify_point(args):
    from .action_angle import frequency_map
    from .freqverify import trajectory_frequencies
    v, t_end, h, dt = args
    w_q = np.asarray(frequency_map(v), dtype=float)
    w_t = trajectory_frequencies(v, t_end, h, dt)
    return w_q, w_t


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_bifurcation(cfg, out, seed, jobs):
    from .fibration import boundary_point
    Is, Es = _grid(cfg.I_range, cfg.E_range, cfg.shape)
    pts = [(float(I), float(E), cfg.tol) for I in Is for E in Es]
    cls = _pmap(_classify_point, pts, jobs)
    write_csv(out / "bifurcation.csv", ["I", "E", "class"],
              [(I, E, c) for (I, E, _), c in zip(pts, cls)])
    zs = -np.cos(0.5 * np.pi * np.linspace(0.0, 1.0, 201)[1:-1])
    rows = []
    for z in zs:
        b = boundary_point(z)
        rows += [(z, b.I, b.E), (z, -b.I, b.E)]
    write_csv(out / "boundary.csv", ["z_star", "I", "E"], rows)
    counts = {c: cls.count(c) for c in sorted(set(cls))}
    write_json(out / "bifurcation.json", {"counts": counts, "shape": list(cfg.shape),
                                          "special_values": {"StableEquilibrium": [0, -1],
                                                             "FocusFocus": [0, 1]}})
    log.info("bifurcation: %s", counts)
    return ["bifurcation.csv", "boundary.csv", "bifurcation.json"]


def cmd_freqmap(cfg, out, seed, jobs):
    Is, Es = _grid(cfg.I_range, cfg.E_range, cfg.shape)
    pts = [(float(I), float(E), cfg.h) for I in Is for E in Es]
    res = _pmap(_freq_point, pts, jobs)
    skipped = [(I, E) for (I, E, _), r in zip(pts, res) if r is None]
    good = [(I, E, r) for (I, E, _), r in zip(pts, res) if r is not None]
    if not good:
        raise TorusAtlasError("no Regular grid points in the freqmap region")
    write_csv(out / "freqmap.csv", ["I", "E", "J", "T", "Theta", "omega1", "omega2", "detJac"],
              [(I, E, *r) for I, E, r in good])
    dets = np.array([abs(r[5]) for _, _, r in good])
    k = int(np.argmin(dets))
    write_json(out / "nondegeneracy.json", {
        "min_abs_det": float(dets[k]), "argmin": [good[k][0], good[k][1]],
        "max_abs_det": float(dets.max()), "evaluated": len(good),
        "skipped_non_regular": [list(p) for p in skipped], "h": cfg.h})
    log.info("freqmap: %d points, min |det| = %.6g", len(good), dets[k])
    return ["freqmap.csv", "nondegeneracy.json"]


def cmd_diophantine(cfg, out, seed, jobs):
    from .diophantine import DiophantineParams, chart_domain, diophantine_set_in_chart, \
        measure_estimate
    chart = cfg.chart.spec().validate()
    params = cfg.params.params()
    labels = diophantine_set_in_chart(chart, params, cfg.shape)
    write_csv(out / "diophantine_labels.csv",
              ["I", "E", "I_action", "J", "omega1", "omega2", "accepted", "margin"],
              [(v[0], v[1], a[0], a[1], w[0], w[1], bool(ok), m) for v, a, w, ok, m in
               zip(labels.values, labels.actions, labels.omegas, labels.inside, labels.margins)])
    dom = chart_domain(chart)
    est = measure_estimate(dom, params, cfg.samples, seed)
    write_csv(out / "diophantine_samples.csv", ["omega1", "omega2", "accepted", "margin"],
              [(w[0], w[1], bool(ok), m) for w, ok, m in
               zip(est.omegas, est.accepted, est.margins)])
    trend = []
    for g in (1e-1, 1e-2, 1e-3):
        p = DiophantineParams(g, params.tau, params.k_max)
        e = measure_estimate(dom, p, cfg.samples, seed)
        trend.append({"gamma": g, "fraction": e.fraction, "stderr": e.stderr})
    write_json(out / "diophantine.json", {
        "params": {"gamma": params.gamma, "tau": params.tau, "k_max": params.k_max,
                   "gamma_tilde": params.shrink},
        "grid_fraction": labels.fraction, "grid_shape": list(cfg.shape),
        "mc_fraction": est.fraction, "mc_stderr": est.stderr, "mc_samples": est.samples,
        "domain_area": dom.area, "trend": trend})
    log.info("diophantine: grid %.4f, Monte Carlo %.4f +- %.4f", labels.fraction,
             est.fraction, est.stderr)
    return ["diophantine_labels.csv", "diophantine_samples.csv", "diophantine.json"]


def cmd_monodromy(cfg, out, seed, jobs):
    from .monodromy import monodromy_matrix
    rep = monodromy_matrix(cfg.loop.loop())
    write_json(out / "monodromy.json", rep.as_dict())
    log.info("monodromy: Delta Theta / 2 pi = %.12f, matrix %s", rep.delta_theta / (2 * np.pi),
             rep.matrix.tolist())
    return ["monodromy.json"]


def cmd_solve_tori(cfg, out, seed, jobs):
    from .diophantine import diophantine_set_in_chart
    from .geometry import HamiltonianSpec
    from .kam import calibrate_guard
    chart = cfg.chart.spec().validate()
    params = cfg.params.params()
    kam = cfg.kam.kam()
    labels = diophantine_set_in_chart(chart, params, cfg.shape)
    vals = [tuple(map(float, v)) for v, ok in zip(labels.values, labels.inside) if ok]
    if not vals:
        raise TorusAtlasError(f"chart {chart.id} has no Diophantine grid tori")
    args = [(v, chart.phase, cfg.epsilon, cfg.perturbation_id, kam, cfg.validate_t_end,
             cfg.validate_points) for v in vals]
    res = _pmap(_solve_point, args, jobs)
    rows = [(v[0], v[1], st.omega[0], st.omega[1], st.residual, len(st.history) - 1,
             st.min_divisor, st.K.tail(), dist) for v, (st, dist) in zip(vals, res)]
    write_csv(out / "tori.csv", ["I", "E", "omega1", "omega2", "residual", "newton_steps",
                                 "min_divisor", "tail", "validate_distance"], rows)
    save_tori(out / "tori.bin", [st for st, _ in res])
    summary = {"chart": chart.id, "epsilon": cfg.epsilon, "perturbation_id": cfg.perturbation_id,
               "n_tori": len(vals), "grid_shape": list(cfg.shape),
               "max_residual": max(r[4] for r in rows),
               "max_validate_distance": max(r[8] for r in rows),
               "residual_histories": [st.history for st, _ in res]}
    if cfg.calibrate_guard:
        v = vals[len(vals) // 2]
        st0, _ = res[len(vals) // 2]
        lo, hi = calibrate_guard(st0.seed, st0.omega,
                                 HamiltonianSpec(cfg.epsilon, cfg.perturbation_id), kam)
        summary["guard"] = {"value": list(v), "eps_ok": lo, "eps_fail": hi}
    write_json(out / "tori.json", summary)
    log.info("solve-tori: %d tori, max residual %.3e", len(vals), summary["max_residual"])
    return ["tori.csv", "tori.bin", "tori.json"]


def _glue_values(gc, pu, n, seed):
    """Deterministic Diophantine values, alternating between the union of
    supports and the pairwise support overlaps."""
    from .diophantine import label_value
    sup = pu.supports
    boxes = [sup[k] for k in range(len(sup))]
    overlaps = []
    for a in range(len(sup)):
        for b in range(a + 1, len(sup)):
            lo = np.maximum(sup[a][:, 0], sup[b][:, 0])
            hi = np.minimum(sup[a][:, 1], sup[b][:, 1])
            if np.all(lo < hi):
                overlaps.append(np.stack([lo, hi], axis=-1))
    rng = np.random.Generator(np.random.Philox(seed))
    out, tries = [], 0
    while len(out) < n:
        tries += 1
        if tries > 200 * n:
            raise TorusAtlasError("could not sample enough Diophantine tori")
        pool = overlaps if (overlaps and len(out) % 2 == 0) else boxes
        bx = pool[int(rng.integers(len(pool)))]
        v = (float(rng.uniform(*bx[0])), float(rng.uniform(*bx[1])))
        w = pu.weights(v)
        if all(label_value(gc.locals[j].chart, v, gc.locals[j].params)[0]
               for j, x in w.items() if x > 0):
            out.append(v)
    return out


def cmd_glue(cfg, out, seed, jobs):
    from .geometry import HamiltonianSpec
    from .glue import build_partition, glue, hausdorff_distance, verify_global_conjugacy
    from .kam import LocalConjugacy
    charts = [c.spec().validate() for c in cfg.charts]
    params = cfg.params.params()
    spec = HamiltonianSpec(cfg.epsilon, cfg.perturbation_id)
    kam = cfg.kam.kam()
    pu = build_partition(charts, cfg.inset)
    gc = glue([LocalConjugacy(c, spec, params, kam, None) for c in charts], pu)
    vals = _glue_values(gc, pu, cfg.n_tori, seed)
    rep = verify_global_conjugacy(gc, spec, vals, cfg.n_points, cfg.t_end, seed=seed)
    transitions, haus = [], []
    for v in vals:
        gt = gc.torus(v)
        for tm in gc.transitions(v):
            d = tm.as_dict()
            d["value"] = list(v)
            transitions.append(d)
            haus.append(hausdorff_distance(gt.canonical[tm.i], gt.canonical[tm.j]))
    write_json(out / "glue.json", {
        "epsilon": cfg.epsilon, "charts": [c.id for c in charts],
        "defect": rep.defect, "identity_distance": rep.identity_distance,
        "per_torus": rep.per_torus, "transitions": transitions,
        "max_deviation": max((t["deviation"] for t in transitions), default=0.0),
        "max_translation": max((float(np.max(np.abs(t["c"]))) for t in transitions), default=0.0),
        "max_hausdorff": max(haus, default=0.0)})
    lo, hi = pu.supports[:, :, 0].min(axis=0), pu.supports[:, :, 1].max(axis=0)
    Is, Es = _grid((lo[0], hi[0]), (lo[1], hi[1]), cfg.partition_shape)
    pts = np.array([(I, E) for I in Is for E in Es])
    covered = np.isfinite(pu.log_bumps(pts).max(axis=1))
    xi = np.full((len(pts), len(charts)), np.nan)
    xi[covered] = pu(pts[covered])
    rows = [(p[0], p[1], bool(c), *x) for p, c, x in zip(pts, covered, xi)]
    write_csv(out / "partition.csv", ["I", "E", "covered"] + [f"xi_{c.id}" for c in charts], rows)
    log.info("glue: %d tori, defect %.3e", len(vals), rep.defect)
    return ["glue.json", "partition.csv"]


def cmd_verify_freq(cfg, out, seed, jobs):
    from .fibration import ValueClass, classify, lower_energy
    from .freqverify import extract_from_signal
    rng = np.random.Generator(np.random.Philox(seed))
    vals = []
    while len(vals) < cfg.n_values:
        I = float(rng.uniform(*cfg.I_range))
        E = float(rng.uniform(*cfg.E_range))
        if classify((I, E)) is not ValueClass.REGULAR:
            continue
        if E < lower_energy(I)[0] + 0.05 or np.hypot(I, E - 1.0) < 0.1:
            continue
        vals.append((I, E))
    res = _pmap(_verify_point, [(v, cfg.t_end, cfg.h, cfg.dt_sample) for v in vals], jobs)
    rows = []
    for v, (wq, wt) in zip(vals, res):
        rel = float(np.max(np.abs(wt - wq) / np.abs(wq)))
        rows.append((v[0], v[1], wq[0], wq[1], wt[0], wt[1], rel))
    write_csv(out / "verify_freq.csv", ["I", "E", "omega1_quad", "omega2_quad", "omega1_traj",
                                        "omega2_traj", "rel_err"], rows)
    t = np.arange(0.0, 500.0, 0.05)
    est = extract_from_signal(t, np.cos(1.7 * t) + 0.3 * np.cos(2.9 * t), 2)
    write_json(out / "verify_freq.json", {
        "n_values": len(vals), "max_rel_err": max(r[6] for r in rows),
        "synthetic": {"expected": [1.7, 2.9], "found": sorted(f for f, _ in est.frequencies)}})
    log.info("verify-freq: max relative error %.3e", max(r[6] for r in rows))
    return ["verify_freq.csv", "verify_freq.json"]


HELP = {
    "bifurcation": "classify a grid of (I, E) values and trace the boundary curve",
    "freqmap": "frequency map, actions and Jacobian determinant on a grid",
    "diophantine": "Diophantine labels on a chart and a Monte Carlo measure estimate",
    "monodromy": "rotation angle continuation around a loop",
    "solve-tori": "KAM Newton solves on the Diophantine grid of one chart",
    "glue": "glue local conjugacies with a partition of unity and verify",
    "verify-freq": "compare trajectory and quadrature frequencies",
}

HANDLERS = {
    "bifurcation": ("bifurcation", cmd_bifurcation, False),
    "freqmap": ("freqmap", cmd_freqmap, False),
    "diophantine": ("diophantine", cmd_diophantine, True),
    "monodromy": ("monodromy", cmd_monodromy, False),
    "solve-tori": ("solve_tori", cmd_solve_tori, False),
    "glue": ("glue", cmd_glue, True),
    "verify-freq": ("verify_freq", cmd_verify_freq, True),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes (default: logical cores)")
    common.add_argument("--seed", type=int, help="override the config seed (u64)")
    common.add_argument("--out", type=Path, help="output directory "
                        "(default: $TORUS_ATLAS_OUT or ./torus_atlas_out)")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")
    parser = _Parser(prog="torus-atlas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    if args.jobs < 1:
        parser.error("--jobs must be positive")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    key, fn, seeded = HANDLERS[args.command]
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"torus-atlas: {exc}", file=sys.stderr)
        return 1
    block = getattr(cfg, key)
    if seeded and args.seed is not None:
        block = block.model_copy(update={"seed": args.seed})
    seed = getattr(block, "seed", args.seed if args.seed is not None else 0)
    out = args.out or Path(os.environ.get("TORUS_ATLAS_OUT", DEFAULT_OUT))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"torus-atlas: cannot create output directory {out}: {exc}", file=sys.stderr)
        return 1
    try:
        files = fn(block, out, seed, args.jobs)
    except ConfigError as exc:
        print(f"torus-atlas: invalid input: {exc}", file=sys.stderr)
        return 1
    except TorusAtlasError as exc:
        print(f"torus-atlas: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"torus-atlas: invalid input: {exc}", file=sys.stderr)
        return 1
    _manifest(out, args.command, block, seed, files)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
