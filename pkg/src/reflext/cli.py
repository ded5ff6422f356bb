"""Config-driven experiment runner.

Subcommands: ``run <config>``, ``validate <config>``, ``report --summary
<report>``. A config is a single JSON document selecting a catalog space, an
optional domain, the parameter regime and an experiment list; outputs are a
deterministic report.json, per-experiment CSV tables and serialized
geometric artifacts. Exit codes: 0 all checks pass, 1 check failure,
2 config error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import extension as ext
from . import forms, hke, reflection, whitney
from .domains import boundary_decomposition, build_domain, corkscrew_check
from .report import CheckReport, dump_csv, dump_json
from .space import InvalidSpecError, ScaleFunction, build_space, doubling_constant
from .whitney import build_whitney, exactness_report, whitney_graph

EXPERIMENTS = ("geometry", "whitney", "reflection", "poincare", "extension",
               "boundary_energy", "css", "hke", "beta_fit")

RUN_ORDER = ("beta_fit", "geometry", "whitney", "reflection", "poincare",
             "extension", "boundary_energy", "css", "hke")

OUTDIR_ENV = "REFLEXT_OUTDIR"


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def validate_config(cfg: dict) -> list[str]:
    """All violated constraints (empty list when the config is runnable)."""
    errs = []
    if cfg.get("schemaVersion") != 1:
        errs.append("schemaVersion must be 1")
    exps = cfg.get("experiments", [])
    unknown = [e for e in exps if e not in EXPERIMENTS]
    if unknown:
        errs.append(f"unknown experiments: {unknown}")
    if not isinstance(cfg.get("space"), dict):
        errs.append("space spec is required")
    has_domain = isinstance(cfg.get("domain"), dict)
    eps = float(cfg.get("epsilon", 0.1))
    A_P = float(cfg.get("A_P", 1.0))

    needs_domain = {"whitney", "reflection", "poincare", "extension",
                    "boundary_energy", "css"}
    for e in needs_domain & set(exps):
        if not has_domain:
            errs.append(f"dependency error: experiment '{e}' needs a domain spec")
    deps = {"reflection": "whitney", "extension": "reflection",
            "boundary_energy": "extension"}
    for e, need in deps.items():
        if e in exps and need not in exps:
            errs.append(f"dependency error: '{e}' requires '{need}'")

    whitney_users = {"whitney", "reflection", "extension", "boundary_energy"}
    if whitney_users & set(exps) and not (0.0 < eps < 0.5):
        errs.append("epsilon must lie in (0, 1/2)")
    if {"extension", "poincare"} & set(exps) and not (27.0 * A_P * eps < 1.0):
        errs.append(
            f"parameter regime violated: requires 27*A_P*epsilon < 1 "
            f"(got {27.0 * A_P * eps:.4g})")
    refl_users = {"reflection", "extension", "boundary_energy"}
    if refl_users & set(exps) and not (eps < 0.2):
        errs.append("reflection requires epsilon < 1/5")
    if int(cfg.get("whitney", {}).get("chain_samples", 0)) > 0 and not (eps < 1.0 / 14.0):
        errs.append("central-ball/chain sampling requires epsilon < 1/14")

    psi = cfg.get("psi", {})
    if psi.get("beta") == "fit" and "beta_fit" not in exps:
        errs.append("dependency error: psi.beta == 'fit' requires 'beta_fit'")
    return errs


# -- experiment context --------------------------------------------------------


class _Context:
    def __init__(self, cfg):
        self.cfg = cfg
        self.space = build_space(cfg["space"])
        self.dom = (build_domain(self.space, cfg["domain"])
                    if isinstance(cfg.get("domain"), dict) else None)
        self.eps = float(cfg.get("epsilon", 0.1))
        self.A = float(cfg.get("A", 3.0))
        self.A_P = float(cfg.get("A_P", 1.0))
        self.A_U = float(cfg.get("A_U", 2.0))
        self.K = float(cfg.get("K", 9.0))
        self.seed = int(cfg.get("seed", 0))
        self.psi_cfg = dict(cfg.get("psi", {"c": 1.0, "beta": 2.0}))
        self.psi = (None if self.psi_cfg.get("beta") == "fit"
                    else ScaleFunction(float(self.psi_cfg.get("c", 1.0)),
                                       float(self.psi_cfg.get("beta", 2.0))))
        self.coverR = None
        self.coverS = None
        self.refl = None
        self.partition = None
        self.op = None
        self.beta_fitted = None

    def need_psi(self) -> ScaleFunction:
        if self.psi is None:
            raise ConfigError("psi not resolved; enable beta_fit first")
        return self.psi

    def need_covers(self):
        if self.coverR is None:
            self.coverR = build_whitney(self.space, self.dom, "interior", self.eps)
            if self.dom.V.size:
                self.coverS = build_whitney(self.space, self.dom, "exterior", self.eps)
        return self.coverR, self.coverS


def _spread(values: np.ndarray, k: int) -> np.ndarray:
    values = np.asarray(values)
    if values.size <= k:
        return values
    step = values.size // k
    return values[::step][:k]


def _dyadic_radii(h: float, top: float, n_max: int = 4) -> list[float]:
    out = []
    r = 2.0 * h
    while r <= top and len(out) < n_max:
        out.append(r)
        r *= 2.0
    return out or [top / 2.0]


# -- experiments ----------------------------------------------------------------


def _run_geometry(ctx: _Context, outdir: str) -> CheckReport:
    rep = CheckReport("geometry")
    sp, dom = ctx.space, ctx.dom
    radii = _dyadic_radii(sp.h_min, sp.diameter / 2.0)
    d0, alpha = doubling_constant(sp, np.arange(sp.n), radii)
    rep.add("doubling_ambient", {"radii": radii}, d0, passed=None,
            notes=f"alpha={alpha:.4f}")
    if dom is not None:
        rep.add("domain_sizes", {"U": int(dom.U.size),
                                 "boundary": int(dom.boundary.size),
                                 "V": int(dom.V.size)}, None, passed=None)
        d0c, alphac = doubling_constant(sp, dom.closure_U, radii)
        rep.add("doubling_closure", {"radii": radii}, d0c, passed=None,
                notes=f"alpha={alphac:.4f}")
        r_cs = dom.diam_U / 4.0
        centers = _spread(dom.boundary, 3)
        cs = corkscrew_check(sp, dom, ctx.A, [(int(c), r_cs) for c in centers])
        rep.records.extend(cs.records)
        dump_csv({"vertex": [int(v) for v in dom.U],
                  "delta_U": [float(dom.delta_full[v]) for v in dom.U]},
                 os.path.join(outdir, "delta_U.csv"))
    return rep


def _run_whitney(ctx: _Context, outdir: str) -> CheckReport:
    coverR, coverS = ctx.need_covers()
    rep = exactness_report(coverR)
    dump_json(coverR.to_json_dict(), os.path.join(outdir, "cover_interior.json"))
    gR = whitney_graph(coverR)
    rep.add("graph_degree_interior", {}, float(gR.max_degree), passed=None)
    dump_csv({"center": [int(c) for c in coverR.centers],
              "radius": [float(r) for r in coverR.radii]},
             os.path.join(outdir, "cover_interior.csv"))
    if coverS is not None:
        rep2 = exactness_report(coverS)
        rep.records.extend(rep2.records)
        gS = whitney_graph(coverS)
        rep.add("graph_degree_exterior", {}, float(gS.max_degree), passed=None)
        dump_json(coverS.to_json_dict(), os.path.join(outdir, "cover_exterior.json"))
    n_chain = int(ctx.cfg.get("whitney", {}).get("chain_samples", 0))
    if n_chain > 0:
        _sample_chains(ctx, rep, n_chain)
    return rep


def _sample_chains(ctx: _Context, rep: CheckReport, n_chain: int) -> None:
    coverR, _ = ctx.need_covers()
    dom = ctx.dom
    centers = _spread(dom.boundary, n_chain)
    r = min(4.0 * ctx.space.h_min, dom.diam_U / 2.5)
    for c in centers:
        try:
            near = whitney.near_and_central(coverR, int(c), r, ctx.A)
        except whitney.NoCentralBallError as exc:
            rep.add("chain", {"center": int(c), "r": r}, None, passed=False,
                    notes=str(exc))
            continue
        targets = [int(i) for i in near.indices[:3]]
        for tgt in targets:
            try:
                ch = whitney.chain(coverR, dom, near, tgt, ctx.A)
            except whitney.ChainUnavailableError as exc:
                rep.add("chain", {"center": int(c), "target": tgt}, None,
                        passed=False, notes=str(exc))
                continue
            ok = ch.wu1_ok and ch.wu2_ok and ch.wu3_ok
            rep.add("chain", {"center": int(c), "target": tgt},
                    float(ch.length), passed=bool(ok))


def _run_reflection(ctx: _Context, outdir: str) -> CheckReport:
    coverR, coverS = ctx.need_covers()
    if coverS is None:
        rep = CheckReport("reflection")
        rep.add("empty_exterior", {}, 0.0, passed=True,
                notes="V is empty; the map is empty")
        return rep
    ctx.refl = reflection.build_reflection(ctx.space, ctx.dom, coverR, coverS, ctx.A)
    dump_json(ctx.refl.to_json_dict(), os.path.join(outdir, "reflection.json"))
    return reflection.validate_reflection(ctx.space, ctx.dom, ctx.refl,
                                          coverS, coverR, seed=ctx.seed)


def _run_poincare(ctx: _Context, outdir: str) -> CheckReport:
    from .space import Ball
    rep = CheckReport("poincare")
    psi = ctx.need_psi()
    sp, dom = ctx.space, ctx.dom
    pc = ctx.cfg.get("poincare", {})
    radii = [float(r) * sp.h_min for r in pc.get("radii", (4, 8, 16))]
    centers = _spread(dom.boundary, int(pc.get("centers", 4)))
    rows = {"center": [], "r": [], "constant": []}
    for xi in centers:
        for r in radii:
            if ctx.A_U * r >= dom.diam_U:
                continue
            inner = sp.ball(int(xi), r, within=dom.U)
            outer = sp.ball(int(xi), ctx.A_U * r, within=dom.U)
            if inner.size < 2:
                continue
            val = forms.poincare_constant(sp, Ball(int(xi), r, inner), outer, psi)
            ok = bool(np.isfinite(val))
            rep.add("poincare_ratio", {"center": int(xi), "r": r,
                                       "A_U": ctx.A_U}, val, passed=ok,
                    notes="" if ok else "disconnected energy set")
            rows["center"].append(int(xi))
            rows["r"].append(r)
            rows["constant"].append(float(val))
    dump_csv(rows, os.path.join(outdir, "poincare.csv"))
    return rep


def _locations(ctx: _Context) -> list[tuple[int, float]]:
    sp, dom = ctx.space, ctx.dom
    ecfg = ctx.cfg.get("extension", {})
    radii = [float(r) * sp.h_min for r in ecfg.get("radii", (2, 4, 8))]
    cap = 0.2 * dom.diam_U
    radii = [r for r in radii if r < cap] or [cap / 2.0]
    centers = list(_spread(dom.boundary, int(ecfg.get("n_centers", 5))))
    centers += list(_spread(dom.U, 2))
    return [(int(c), float(r)) for c in centers for r in radii]


def _build_extension(ctx: _Context):
    if ctx.op is not None:
        return ctx.op
    coverR, coverS = ctx.need_covers()
    if ctx.refl is None:
        ctx.refl = reflection.build_reflection(ctx.space, ctx.dom, coverR,
                                               coverS, ctx.A)
    if ctx.partition is None:
        ctx.partition = forms.partition_of_unity(ctx.space, ctx.dom, coverS,
                                                 ctx.need_psi())
    ctx.op = ext.build_extension(ctx.space, ctx.dom, ctx.refl, ctx.partition,
                                 coverR)
    return ctx.op


def _run_extension(ctx: _Context, outdir: str) -> CheckReport:
    op = _build_extension(ctx)
    rep = CheckReport("extension")
    rep.records.extend(ctx.partition.report.records)
    n_fam = int(ctx.cfg.get("extension", {}).get("family", 12))
    family = ext.function_family(ctx.space, ctx.dom, n_fam, seed=ctx.seed)
    f, g = family[1], family[-1]
    ef = ext.extend(op, f)
    rest = bool(np.array_equal(ef[ctx.dom.closure_U], f[ctx.dom.closure_U]))
    rep.add("restriction_identity", {}, None, passed=rest)
    lin = ext.extend(op, 2.0 * f - 3.0 * g) - (2.0 * ef - 3.0 * ext.extend(op, g))
    lin_err = float(np.max(np.abs(lin)))
    rep.add("linearity", {}, lin_err, bound=1e-12, passed=bool(lin_err <= 1e-12))
    checks = ext.extension_checks(ctx.space, ctx.dom, op, family,
                                  ctx.need_psi(), _locations(ctx), ctx.K)
    rep.records.extend(checks.records)
    rows = {"check": [], "ratio": []}
    for rec in checks.records:
        if rec.measured is not None:
            rows["check"].append(rec.check)
            rows["ratio"].append(rec.measured)
    dump_csv(rows, os.path.join(outdir, "extension_ratios.csv"))
    return rep


def _run_boundary_energy(ctx: _Context, outdir: str) -> CheckReport:
    op = _build_extension(ctx)
    rep = CheckReport("boundary_energy")
    family = ext.function_family(ctx.space, ctx.dom, 6, seed=ctx.seed)
    rows = {"f": [], "gamma_boundary": [], "ratio": []}
    for fid, f in enumerate(family):
        g = ext.extend(op, f)
        gb, ratio = ext.boundary_energy(ctx.space, ctx.dom, g)
        rep.add("boundary_energy_ratio", {"f": fid}, ratio, passed=None)
        rows["f"].append(fid)
        rows["gamma_boundary"].append(gb)
        rows["ratio"].append(ratio)
    dump_csv(rows, os.path.join(outdir, "boundary_energy.csv"))
    return rep


def _run_css(ctx: _Context, outdir: str) -> CheckReport:
    rep = CheckReport("css")
    psi = ctx.need_psi()
    sp, dom = ctx.space, ctx.dom
    ccfg = ctx.cfg.get("css", {})
    A1 = float(ccfg.get("A1", 2.0))
    A2 = float(ccfg.get("A2", 4.0))
    radii = [float(r) * sp.h_min for r in ccfg.get("radii", (4, 8, 16))]
    rng = np.random.default_rng(ctx.seed)
    nf = int(ccfg.get("n_family", 8))
    family = [rng.normal(size=sp.n) for _ in range(nf)] + [np.ones(sp.n)]
    sub, back = hke.reflected_space(sp, dom)
    centers = _spread(dom.closure_U, int(ccfg.get("centers", 3)))
    rows = {"x": [], "R": [], "C1": []}
    for x in centers:
        for R in radii:
            if not (R < sub.diameter / A2):
                continue
            c1, crep = forms.css_check(sp, int(x), R, A1, psi, family,
                                       subset=dom.closure_U, A2=A2)
            rep.add("css_minimal_C1", {"x": int(x), "R": R}, c1,
                    passed=bool(np.isfinite(c1)))
            rows["x"].append(int(x))
            rows["R"].append(R)
            rows["C1"].append(c1)
    dump_csv(rows, os.path.join(outdir, "css.csv"))
    return rep


def _profile_records(rep: CheckReport, tag: str, prof: hke.HKEProfile) -> None:
    rep.add(f"{tag}_envelope_ratio", {}, prof.envelope_ratio, passed=None,
            notes=f"c_low={prof.c_low:.4g} C_high={prof.C_high:.4g}")
    frac = 1.0 if prof.near_pairs == 0 else prof.near_ok / prof.near_pairs
    rep.add(f"{tag}_near_diag", {"pairs": prof.near_pairs}, frac,
            bound=1.0, passed=bool(frac == 1.0))
    rep.add(f"{tag}_offdiag_slope", {}, prof.fit_slope, passed=None)


def _run_hke(ctx: _Context, outdir: str) -> CheckReport:
    rep = CheckReport("hke")
    psi = ctx.need_psi()
    sp = ctx.space
    hcfg = ctx.cfg.get("hke", {})
    n_t, n_x = int(hcfg.get("n_t", 4)), int(hcfg.get("n_x", 6))

    def grid(space):
        lo, hi = hke.scale_window(space, psi)
        ts = np.geomspace(lo, hi, n_t)
        return np.unique(ts)

    prof = hke.hke_profile(sp, psi, grid(sp), _spread(np.arange(sp.n), n_x))
    _profile_records(rep, "ambient", prof)
    dump_csv({"t": [t for t in prof.t_grid for _ in prof.x_sample],
              "x": [int(x) for _ in prof.t_grid for x in prof.x_sample],
              "on_diag": [float(v) for row in prof.on_diag for v in row]},
             os.path.join(outdir, "hke_ambient.csv"))
    if ctx.dom is not None and hcfg.get("target", "both") in ("both", "reflected"):
        sub, back = hke.reflected_space(sp, ctx.dom)
        prof_r = hke.hke_profile(sub, psi, grid(sub),
                                 _spread(np.arange(sub.n), n_x))
        _profile_records(rep, "reflected", prof_r)
    return rep


def _run_beta_fit(ctx: _Context, outdir: str) -> CheckReport:
    rep = CheckReport("beta_fit")
    sp = ctx.space
    bcfg = ctx.cfg.get("beta_fit", {})
    radii = [float(r) * sp.h_min for r in bcfg.get("radii", (2, 4, 8))]
    ecc = sp.distance.max(axis=1)
    order = np.lexsort((np.arange(sp.n), ecc))
    xs = order[: int(bcfg.get("n_x", 3))]
    beta, r2 = hke.beta_fit(sp, radii, xs)
    rep.add("beta_fit", {"radii": radii}, beta, passed=None,
            notes=f"rsq={r2:.4f}")
    ctx.beta_fitted = beta
    if ctx.psi is None:
        ctx.psi = ScaleFunction(float(ctx.psi_cfg.get("c", 1.0)), beta)
    return rep


_RUNNERS = {
    "geometry": _run_geometry,
    "whitney": _run_whitney,
    "reflection": _run_reflection,
    "poincare": _run_poincare,
    "extension": _run_extension,
    "boundary_energy": _run_boundary_energy,
    "css": _run_css,
    "hke": _run_hke,
    "beta_fit": _run_beta_fit,
}


def run_experiment(cfg: dict, outdir: str | None = None) -> tuple[dict, int]:
    """Run the enabled experiments in dependency order and write the report.

    Returns (report dict, exit code).
    """
    errs = validate_config(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    outdir = outdir or os.environ.get(OUTDIR_ENV) or cfg.get("output_dir", "out")
    os.makedirs(outdir, exist_ok=True)
    ctx = _Context(cfg)
    dump_json(ctx.space.to_json_dict(), os.path.join(outdir, "space.json"))
    enabled = [e for e in RUN_ORDER if e in cfg.get("experiments", [])]
    reports = {}
    for name in enabled:
        reports[name] = _RUNNERS[name](ctx, outdir)
    doc = {
        "schemaVersion": 1,
        "config": cfg,
        "experiments": {k: r.to_json_dict() for k, r in reports.items()},
    }
    if ctx.beta_fitted is not None:
        doc["betaFitted"] = ctx.beta_fitted
    hard_fail = sum(r.n_fail for r in reports.values())
    doc["hardFailures"] = hard_fail
    dump_json(doc, os.path.join(outdir, "report.json"))
    return doc, (1 if hard_fail else 0)


def summarize(report_path: str) -> str:
    with open(report_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    lines = []
    for name, rep in sorted(doc.get("experiments", {}).items()):
        s = rep["summary"]
        lines.append(f"{name}: {s['pass']} pass, {s['fail']} fail, "
                     f"{s['total']} records")
    lines.append(f"hard failures: {doc.get('hardFailures', 0)}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="reflext")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiments in a config")
    p_run.add_argument("config")
    p_run.add_argument("--outdir", default=None)
    p_val = sub.add_parser("validate", help="validate a config")
    p_val.add_argument("config")
    p_rep = sub.add_parser("report", help="summarize a report file")
    p_rep.add_argument("--summary", required=True, dest="report_path")
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        errs = validate_config(cfg)
        if errs:
            for e in errs:
                print(f"config error: {e}", file=sys.stderr)
            return 2
        print("config ok")
        return 0

    if args.command == "run":
        try:
            cfg = load_config(args.config)
            doc, code = run_experiment(cfg, args.outdir)
        except (ConfigError, InvalidSpecError, OSError,
                json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(f"hard failures: {doc['hardFailures']}")
        return code

    print(summarize(args.report_path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
