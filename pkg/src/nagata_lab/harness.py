"""Reproducible experiments with flat configs, CSV/JSON artifacts and exit codes.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
``experiment`` names one of :data:`EXPERIMENTS`; every other key must be a
parameter of that experiment.  Exit codes: 0 all criteria pass, 2 some
criterion fails, 1 usage or config error.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._serialize import jsonable
from .complex_maps import Genus1Function, exp_preimage_sequence, rational_unit_square
from .construction import (
    ConstructionParams,
    alpha_separation_ok,
    run_construction,
    write_construction,
    zero_clearance,
)
from .dimension import (
    ScaleGrid,
    chain_growth_witness,
    covering_exponent,
    exp_sequence,
    exp_sequence_cover,
    ndim0_certificate,
    ratio_sequence_certificate,
)
from .errors import NagataLabError
from .metric import PointSet2D, verify_cover
from .spiral import porosity_estimate, ray_gap_report, spiral_constants, spiral_sample

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class ConfigError(NagataLabError):
    """The config text or its values are invalid."""


# -- config ---------------------------------------------------------------------


def _floats(v: str) -> list:
    return [float(x) for x in v.split(",") if x.strip()]


def _ints(v: str) -> list:
    return [int(x) for x in v.split(",") if x.strip()]


# name -> {param: (parser, default)}
EXPERIMENTS: dict = {
    "exp-sequence": {
        "lam": (float, 2.0), "n_points": (int, 30), "n_scales": (int, 12),
        "s_min": (float, 0.01), "s_max": (float, 1e8),
    },
    "half-lattice": {
        "k_max": (int, 40), "l_max": (int, 40), "delta": (float, 1.0),
    },
    "picard-exp": {
        "n_targets": (int, 200), "start_radius": (float, 1.0),
        "s_min": (float, 1.0), "n_scales": (int, 10), "C_max": (float, 3.0),
    },
    "thm17": {
        "function": (str, "m=1, q=0,1, zeros=geometric:2"), "c_A": (float, 2.0),
        "epsilon": (float, 1e-3), "delta": (float, 1.0), "n_min": (int, 1), "n_max": (int, 14),
        "admissibility": (str, "per-block"),
    },
    "spiral-porosity": {
        "p": (float, 1.0), "c": (float, 0.1), "eps_angle": (float, math.pi / 4),
        "n_alpha": (int, 64), "k_span": (int, 2000), "k0_list": (_ints, [8, 16, 32]),
        "h_rel": (float, 0.004), "max_probes": (int, 200),
    },
    "covering-exponent": {
        "p": (float, 1.0), "k0": (int, 32), "n_radii": (int, 5), "first_power": (int, 3),
        "s_hat_min": (float, 1.5),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    out: str | None = None
    seed: int = 0


def parse_config(text: str) -> ExperimentConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    name = raw.pop("experiment", None)
    if name is None:
        raise ConfigError("missing 'experiment' key")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    out = raw.pop("out", None)
    try:
        seed = int(raw.pop("seed", "0"))
    except ValueError as exc:
        raise ConfigError(f"bad seed: {exc}") from None
    schema = EXPERIMENTS[name]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {unknown}")
    params = {}
    for key, (parse, default) in schema.items():
        try:
            params[key] = parse(raw[key]) if key in raw else default
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return ExperimentConfig(name, params, out, seed)


def thread_count() -> int:
    v = os.environ.get("NAGATA_LAB_THREADS", "")
    try:
        return max(1, int(v))
    except ValueError:
        return 1


# -- reports ----------------------------------------------------------------------


# criterion name -> acceptance criterion number; reports use no other names
CRITERIA = {
    "cover-multiplicity-one": 1, "ultrametric-ratio-sequence": 2,
    "domain-chain-growth": 4, "image-ratio-sequence": 4,
    "doubling-moduli": 5, "exp-hits-targets": 5, "ndim0-certificate": 5,
    "patch-lengths-grow": 6, "ratio-certificate": 6, "diagnostic-floors": 6,
    "ray-gaps-below-2cr0": 7, "gap-bound-chain": 7,
    "porosity-non-increasing": 8, "covering-exponent": 8,
}


@dataclass
class Criterion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunReport:
    experiment: str
    params: dict
    seed: int
    criteria: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return bool(self.criteria) and all(c.passed for c in self.criteria) and self.error is None

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_FAIL

    def to_dict(self) -> dict:
        return jsonable({
            "experiment": self.experiment, "params": self.params, "seed": self.seed,
            "criteria": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                         for c in self.criteria],
            "artifacts": self.artifacts, "wall_time": self.wall_time, "error": self.error,
            "passed": self.passed,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["experiment"], d.get("params", {}), d.get("seed", 0),
                   [Criterion(c["name"], c["passed"], c.get("detail", "")) for c in d.get("criteria", [])],
                   d.get("artifacts", []), d.get("wall_time", 0.0), d.get("error"))


class _Run:
    def __init__(self, out: str):
        self.out = out
        self.criteria: list = []
        self.artifacts: list = []
        self.diagnostics: dict = {}

    def check(self, name: str, passed, detail: str = ""):
        assert name in CRITERIA, name
        self.criteria.append(Criterion(name, bool(passed), detail))

    def note(self, name: str, value):
        """Record a diagnostic that is reported but is not a pass/fail criterion."""
        self.diagnostics[name] = value

    def path(self, name: str) -> str:
        self.artifacts.append(name)
        return os.path.join(self.out, name)

    def write_json(self, name: str, obj):
        with open(self.path(name), "w") as fh:
            json.dump(jsonable(obj), fh, indent=2, sort_keys=True)

    def write_csv(self, name: str, header: list, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


# -- experiments ----------------------------------------------------------------


def _exp_sequence(run: _Run, P: dict, seed: int):
    lam, n = P["lam"], P["n_points"]
    ps = exp_sequence(lam, n)
    c = lam / (lam - 1)
    rows, all_ok = [], True
    for s in np.geomspace(P["s_min"], P["s_max"], P["n_scales"]):
        cover = exp_sequence_cover(lam, n, float(s))
        v = verify_cover(ps, cover)
        ok = v.bounded and v.multiplicity_upper == 1 and v.exact
        all_ok &= ok
        rows.append((float(s), len(cover.blocks[0]), len(cover.blocks), v.multiplicity_upper, v.bounded))
    run.write_csv("covers.csv", ["s", "N", "n_blocks", "multiplicity", "bounded"], rows)
    run.check("cover-multiplicity-one", all_ok, f"{len(rows)} scales, c = {c:.6g}")

    cert = ratio_sequence_certificate(ps, 0, lam)
    run.check("ultrametric-ratio-sequence",
              cert.checked and cert.strong_triangle_ok and cert.bilipschitz_ok,
              f"bi-Lipschitz bounds [{cert.biLip_lower:.6g}, {cert.biLip_upper:.6g}]")
    grid = ScaleGrid(lam, lam ** (n - 1), lam)
    nd = ndim0_certificate(ps, grid, C_max=c * (1 + 1e-9))
    run.note("ndim0_C", nd.C)
    run.note("ndim0_within_cover_constant", nd.passed)
    run.write_json("certificates.json", {"ratio_sequence": cert.to_dict(), "ndim0": nd.to_dict()})


def half_lattice(k_max: int, l_max: int) -> PointSet2D:
    k, l = np.meshgrid(np.arange(1, k_max + 1), np.arange(-l_max, l_max + 1), indexing="ij")
    return PointSet2D((k + 2j * np.pi * l).ravel())


def merge_close(z: np.ndarray, rtol: float = 1e-9) -> tuple:
    """Distinct values of ``z`` up to relative ``rtol``; returns ``(values, spread)``."""
    order = np.argsort(np.abs(z), kind="stable")
    reps, spread = [], 0.0
    for w in z[order]:
        if reps and abs(w - reps[-1]) <= rtol * abs(reps[-1]):
            spread = max(spread, abs(w - reps[-1]) / abs(reps[-1]))
        else:
            reps.append(w)
    return np.asarray(reps), spread


def _half_lattice(run: _Run, P: dict, seed: int):
    dom = half_lattice(P["k_max"], P["l_max"])
    w = chain_growth_witness(dom, P["delta"])
    top = max(w.diameters) if w else 0.0
    run.check("domain-chain-growth", w is not None and top >= P["k_max"] - 1 - 1e-9,
              f"max chain diameter {top:.6g}")
    image, spread = merge_close(np.exp(dom.points))
    cert = ratio_sequence_certificate(PointSet2D(image), 0, math.e)
    run.check("image-ratio-sequence", cert.checked, f"{len(image)} image points, merge spread {spread:.2e}")
    run.write_csv("image.csv", ["re", "im"], ((z.real, z.imag) for z in image))
    run.write_json("witness.json", {"witness": w.to_dict() if w else None,
                                    "ratio_sequence": cert.to_dict()})


def _picard_exp(run: _Run, P: dict, seed: int):
    pre = exp_preimage_sequence(rational_unit_square(P["n_targets"]), P["start_radius"])
    x = pre.points.points
    run.check("doubling-moduli", bool(np.all(np.abs(x[1:]) >= 2 * np.abs(x[:-1]))) and pre.doubling_exact(),
              "float and exact moduli")
    err = pre.max_rel_error()
    run.check("exp-hits-targets", err <= 1e-12, f"max relative error {err:.3e}")
    grid = ScaleGrid(P["s_min"], P["s_min"] * 2 ** (P["n_scales"] - 1), 2.0)
    nd = ndim0_certificate(pre.points, grid, C_max=P["C_max"])
    run.check("ndim0-certificate", nd.passed, f"C = {nd.C:.6g} over {len(grid.scales)} scales")
    run.write_csv("branches.csv", ["i", "k", "target_re", "target_im", "x_re", "x_im"],
                  ((i, k, y.real, y.imag, z.real, z.imag)
                   for i, (k, y, z) in enumerate(zip(pre.k, pre.targets, x))))
    run.write_json("certificate.json", nd.to_dict())


def _thm17(run: _Run, P: dict, seed: int):
    f = Genus1Function.parse(P["function"])
    params = ConstructionParams(f, P["c_A"], P["epsilon"], P["delta"], (P["n_min"], P["n_max"]),
                                P["admissibility"])
    res = run_construction(params)
    for p in write_construction(res, run.out):
        run.artifacts.append(os.path.basename(p))
    M = [res.patches.M[n] for n in sorted(res.patches.M)]
    run.check("patch-lengths-grow", all(b >= a for a, b in zip(M, M[1:])) and M[-1] >= 10 * M[0],
              f"M from {M[0]} to {M[-1]}")
    cert = res.certificate
    ok = cert.passed and bool(np.all(cert.L[cert.K:] >= math.log(cert.Lambda))) if cert.K is not None else False
    run.check("ratio-certificate", ok,
              f"K = {cert.K}, n_K = {cert.n_K}, Lambda = {cert.Lambda}")
    run.check("diagnostic-floors", bool(np.all(cert.L >= cert.floor - 1e-6)),
              f"{int(np.isfinite(cert.floor).sum())} finite floors")
    run.note("zero_clearance", zero_clearance(params, res.patches))
    run.note("far_zero_separation", alpha_separation_ok(params, cert))
    run.note("trichotomy_ok", bool(np.all(cert.trichotomy_ok)))
    X = cert.pruned()
    w = None
    if len(X) >= 2:
        w = chain_growth_witness(PointSet2D(X.astype(np.complex128)), params.delta, rtol=1e-9)
    run.note("pruned_chain_growth", w is not None)
    run.note("pruned_max_chain_diameter", max(w.diameters) if w else 0.0)


def _spiral_porosity(run: _Run, P: dict, seed: int):
    sp = spiral_constants(P["p"], P["c"], P["eps_angle"])
    rng = np.random.default_rng(seed)
    alphas = np.sort(rng.uniform(-math.pi, math.pi, P["n_alpha"]))
    reports = [ray_gap_report(sp, float(a), sp.k0 + P["k_span"]) for a in alphas]
    run.check("ray-gaps-below-2cr0", all(r.passed for r in reports),
              f"worst margin {min(r.margin for r in reports):.4f}")
    run.check("gap-bound-chain", all(r.chain_ok for r in reports))
    run.write_csv("rays.csv", ["alpha", "k", "a_k", "b_k", "gap", "bound", "pass"],
                  (row for r in reports for row in r.rows()))

    def one(k0):
        r0 = (2 * k0) ** (-P["p"])
        t_lo = (2 * r0) ** (-1 / P["p"])
        ps = spiral_sample(P["p"], 16 * t_lo, h_rel=P["h_rel"], t_min=t_lo)
        z = ps.points
        pc = z[(np.abs(z) >= r0 / 2) & (np.abs(z) <= r0)]
        pc = pc[::max(1, len(pc) // P["max_probes"])]
        return k0, r0, porosity_estimate(ps, 0, r0, [r0 / 4, r0 / 8], probe_centers=pc)

    with ThreadPoolExecutor(thread_count()) as pool:
        ests = list(pool.map(one, P["k0_list"]))
    c_hats = [e.c_hat for _, _, e in ests]
    run.check("porosity-non-increasing", all(b <= a for a, b in zip(c_hats, c_hats[1:])),
              "c_hat " + ", ".join(f"{c:.4f}" for c in c_hats))
    rows = []
    for k0, r0, e in ests:
        for i, x in enumerate(e.probe_centers):
            for j, r in enumerate(e.probe_radii):
                rows.append((k0, x.real, x.imag, r, e.ratios[i, j]))
    run.write_csv("porosity.csv", ["k0", "x_re", "x_im", "r", "best_ratio"], rows)
    run.write_json("summary.json", {"spiral": sp, "c_hat": dict(zip(P["k0_list"], c_hats)),
                                    "worst_ray_margin": min(r.margin for r in reports)})


def _covering_exponent(run: _Run, P: dict, seed: int):
    r0 = (2 * P["k0"]) ** (-P["p"])
    radii = [r0 / 2 ** i for i in range(P["first_power"], P["first_power"] + P["n_radii"])]
    r_min = radii[-1]
    t_lo = (2 * r0) ** (-1 / P["p"])
    # absolute spacing well below the smallest radius; the hole near 0 has radius r_min / 8
    ps = spiral_sample(P["p"], (r_min / 8) ** (-1 / P["p"]), h_abs=r_min / 4, h_rel=1.0, t_min=t_lo)
    ce = covering_exponent(ps, 0, r0, radii)
    run.check("covering-exponent", ce.s_hat >= P["s_hat_min"], f"s_hat = {ce.s_hat:.4f}")
    run.write_csv("counts.csv", ["r", "N"], zip(ce.radii, ce.counts))
    run.write_json("fit.json", ce.to_dict())


RUNNERS = {
    "exp-sequence": _exp_sequence, "half-lattice": _half_lattice, "picard-exp": _picard_exp,
    "thm17": _thm17, "spiral-porosity": _spiral_porosity, "covering-exponent": _covering_exponent,
}


def run(config: ExperimentConfig, out: str | None = None) -> RunReport:
    """Run one experiment, writing artifacts and ``report.json`` into ``out``."""
    out = out or config.out or os.path.join("out", config.experiment)
    os.makedirs(out, exist_ok=True)
    marker = os.path.join(out, "FAILED")
    if os.path.exists(marker):
        os.remove(marker)
    r = _Run(out)
    t0 = time.perf_counter()
    error = None
    try:
        RUNNERS[config.experiment](r, config.params, config.seed)
    except NagataLabError as exc:
        error = f"{type(exc).__name__}: {exc}"
    if r.diagnostics:
        r.write_json("diagnostics.json", r.diagnostics)
    report = RunReport(config.experiment, config.params, config.seed, r.criteria,
                       r.artifacts, time.perf_counter() - t0, error)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    if not report.passed:
        with open(marker, "w") as fh:
            fh.write((error or "criterion failure") + "\n")
    return report


# -- summaries ----------------------------------------------------------------------


def emit_summary(reports: list) -> tuple:
    """``(table_text, summary_json, exit_code)`` for one or more reports."""
    if not reports:
        raise ConfigError("no reports to summarize")
    reports = sorted(reports, key=lambda r: (r.experiment, r.seed))
    rows = []
    for r in reports:
        flags = []
        if not r.artifacts:
            flags.append("NO-ARTIFACTS")
        if r.error:
            flags.append("ERROR")
        npass = sum(c.passed for c in r.criteria)
        rows.append((r.experiment, "PASS" if r.passed else "FAIL", f"{npass}/{len(r.criteria)}",
                     str(len(r.artifacts)), f"{r.wall_time:.2f}", " ".join(flags)))
    head = ("experiment", "status", "criteria", "artifacts", "seconds", "flags")
    widths = [max(len(x[i]) for x in rows + [head]) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*row).rstrip() for row in rows]
    code = max(r.exit_code for r in reports)
    summary = {"exit_code": code, "runs": [
        {"experiment": r.experiment, "passed": r.passed, "n_criteria": len(r.criteria),
         "failed": [c.name for c in r.criteria if not c.passed],
         "n_artifacts": len(r.artifacts), "flags": row[5].split()}
        for r, row in zip(reports, rows)]}
    return "\n".join(line.rstrip() for line in lines), summary, code


def load_reports(dirs: list) -> list:
    reports = []
    for d in dirs:
        found = [os.path.join(d, "report.json")] if os.path.isfile(os.path.join(d, "report.json")) else \
            sorted(os.path.join(root, "report.json") for root, _, files in os.walk(d) if "report.json" in files)
        if not found:
            raise ConfigError(f"no report.json under {d}")
        for p in found:
            with open(p) as fh:
                reports.append(RunReport.from_dict(json.load(fh)))
    return reports
