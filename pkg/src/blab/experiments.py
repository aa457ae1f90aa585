"""Experiment registry for the verification CLI.

Each experiment turns a config into CSV rows plus a JSON summary with a
machine-checkable "pass" boolean.  Identical config and seed give
bit-identical CSV output: rows are computed deterministically and sorted
by N before writing.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import bundles, dolbeault, geometry, modules_k, quantization
from .bundles import BundleSpec
from .geometry import Symbol


EXPERIMENTS: dict = {}


def _register(name, columns, description):
    def deco(fn):
        EXPERIMENTS[name] = {"runner": fn, "columns": columns,
                             "description": description}
        return fn
    return deco


@dataclass
class ExperimentConfig:
    experiment: str
    Ns: list = field(default_factory=list)
    bundle: dict | None = None
    symbol: dict | None = None
    section: dict | None = None
    potential: dict | None = None
    lmax2: int | None = None
    quadrature: dict | None = None
    seed: int = 0
    out: str = "results"
    plot: bool = False

    def canonical(self) -> str:
        data = {k: v for k, v in self.__dict__.items()
                if k not in ("out", "plot")}
        return json.dumps(data, sort_keys=True)

    @property
    def params_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as f:
        data = json.load(f)
    cfg = ExperimentConfig(**data)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "bundle.degrees":
            cfg.bundle = dict(cfg.bundle or {})
            cfg.bundle["degrees"] = val
        else:
            setattr(cfg, key, val)
    if cfg.experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {cfg.experiment!r}; "
                         f"known: {sorted(EXPERIMENTS)}")
    if cfg.Ns and sorted(cfg.Ns) != list(cfg.Ns):
        raise ValueError("Ns must be ascending")
    return cfg


def make_symbol(spec: dict | None, rng) -> Symbol:
    spec = spec or {"type": "cos_theta"}
    kind = spec.get("type", "cos_theta")
    if kind == "cos_theta":
        return geometry.cos_theta()
    if kind == "ylm":
        if spec.get("real", True):
            return geometry.ylm_real(spec["l"], spec["m"])
        return geometry.ylm(spec["l"], spec["m"])
    if kind == "random":
        local = np.random.default_rng(spec.get("seed", 0))
        return geometry.random_real_symbol(spec.get("lmax", 2), local)
    if kind == "coeffs":
        return Symbol.from_json(json.dumps({"coeffs": spec["coeffs"]}))
    raise ValueError(f"unknown symbol spec {kind!r}")


def make_bundle(spec: dict | None, seed: int) -> BundleSpec:
    spec = spec or {"degrees": [0]}
    degrees = tuple(spec.get("degrees", [0]))
    label = spec.get("label", "O(" + ",".join(map(str, degrees)) + ")")
    pot = None
    pspec = spec.get("potential")
    if pspec:
        base = BundleSpec(degrees, None, label)
        if pspec.get("profile") == "zonal":
            pot = bundles.zonal_potential(base, pspec.get("scale", 0.4),
                                          pspec.get("kind", "compatible"))
        else:
            rng = np.random.default_rng(pspec.get("seed", seed))
            pot = bundles.random_potential(base, pspec.get("lmax", 1),
                                           pspec.get("scale", 0.4), rng,
                                           pspec.get("kind", "compatible"))
    return BundleSpec(degrees, pot, label)


def make_section(spec: dict | None, V: BundleSpec, seed: int):
    spec = spec or {"type": "random", "lmax": 1}
    if spec.get("type", "random") == "random":
        rng = np.random.default_rng(spec.get("seed", seed))
        return bundles.random_section(V, spec.get("lmax", 1), rng)
    raise ValueError("unknown section spec")


def _fit_slope(Ns, values):
    pts = [(math.log(n), math.log(v)) for n, v in zip(Ns, values) if v > 0]
    if len(pts) < 2:
        return 0.0
    x, y = np.array([p[0] for p in pts]), np.array([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

@_register("dims", ["N", "dim", "poly", "pass"],
           "dim of the holomorphic space vs the N+1 formula")
def _run_dims(cfg: ExperimentConfig):
    Ns = cfg.Ns or list(range(1, 41))
    rows, ok = [], True
    for N in Ns:
        dim = bundles.h_space(N).dim
        good = dim == N + 1
        ok = ok and good
        rows.append([N, dim, N + 1, good])
    return rows, {"pass": bool(ok)}


@_register("toeplitz-convergence",
           ["N", "norm", "sup", "gap", "closed_gap", "params_hash"],
           "norm of the compressed multiplication operator vs the sup norm")
def _run_toeplitz(cfg: ExperimentConfig):
    Ns = cfg.Ns or [4, 8, 16, 32, 60]
    rng = np.random.default_rng(cfg.seed)
    f = make_symbol(cfg.symbol, rng)
    sup = geometry.sup_norm(f)
    is_cos = cfg.symbol in (None, {"type": "cos_theta"})
    rows, ok = [], True
    for N in Ns:
        nrm = quantization.toeplitz(f, N).norm
        gap = abs(nrm - sup)
        closed = 2.0 / (N + 2) if is_cos else float("nan")
        ok = ok and nrm <= sup + 1e-9
        if is_cos:
            ok = ok and abs(gap - closed) < 1e-9
        rows.append([N, nrm, sup, gap, closed, cfg.params_hash])
    final_gap = rows[-1][3]
    ok = ok and final_gap <= 0.05 * sup
    return rows, {"pass": bool(ok), "final_gap": final_gap}


@_register("tuynman", ["N", "l", "m", "residual", "params_hash"],
           "identity between the two geometric-quantization routes")
def _run_tuynman(cfg: ExperimentConfig):
    Ns = cfg.Ns or [2, 4, 8, 16, 20]
    lms = ([(cfg.symbol["l"], cfg.symbol["m"])] if cfg.symbol
           else [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)])
    rows, worst = [], 0.0
    for N in Ns:
        for l, m in lms:
            r = quantization.tuynman_residual(geometry.ylm(l, m), N)
            worst = max(worst, r)
            rows.append([N, l, m, r, cfg.params_hash])
    return rows, {"pass": bool(worst < 1e-8), "worst_residual": worst}


@_register("gq-gap", ["N", "value", "bound", "params_hash"],
           "norm gap between geometric and Toeplitz quantization")
def _run_gq_gap(cfg: ExperimentConfig):
    Ns = cfg.Ns or [16, 32, 64, 128]
    rng = np.random.default_rng(cfg.seed)
    f = make_symbol(cfg.symbol, rng)
    rows = []
    for N in Ns:
        m, b = quantization.gq_toeplitz_gap(f, N)
        rows.append([N, m, b, cfg.params_hash])
    slope = _fit_slope(Ns, [r[1] for r in rows])
    ok = all(r[1] <= r[2] + 1e-12 for r in rows) and abs(slope + 1.0) <= 0.1
    return rows, {"pass": bool(ok), "slope": slope}


@_register("spectrum",
           ["N", "bundle", "gap", "C", "kernel_rank", "dim_deg0", "dim_deg1"],
           "spectral gap of the squared twisted operator vs N - C")
def _run_spectrum(cfg: ExperimentConfig):
    Ns = cfg.Ns or list(range(2, 21))
    V = make_bundle(cfg.bundle, cfg.seed)
    C = dolbeault.weitzenbock_constant(V)
    rows, ok = [], True
    for N in Ns:
        D = dolbeault.build_dolbeault(V, N, cfg.lmax2)
        sp = dolbeault.spectrum_d2(D)
        basis = dolbeault.kernel_basis(D)
        nonzero = sp[sp > N / 2.0]
        gap = float(nonzero[0]) if len(nonzero) else float("inf")
        good = gap >= N - C - 1e-6
        ok = ok and good
        rows.append([N, V.label, gap, C, basis.dim, basis.degree_dims[0],
                     basis.degree_dims[1]])
    return rows, {"pass": bool(ok), "C": C}


@_register("kernel-degrees",
           ["N", "dim_deg0", "dim_odd", "min_psi0", "in_regime"],
           "even-degree structure of the kernel for a seeded potential")
def _run_kernel_degrees(cfg: ExperimentConfig):
    bundle_spec = cfg.bundle or {
        "degrees": [0],
        "potential": {"kind": "hermitian", "scale": 0.5, "lmax": 1}}
    V = make_bundle(bundle_spec, cfg.seed)
    C = dolbeault.weitzenbock_constant(V)
    B = dolbeault.potential_dirac_norm(V)
    n_lo = max(4, int(math.ceil(C + B * B)) + 1)
    Ns = cfg.Ns or list(range(n_lo, 21))
    rows, ok = [], True
    for N in Ns:
        D = dolbeault.build_dolbeault(V, N, cfg.lmax2)
        dims, dim_odd, min0, reg = dolbeault.kernel_degree_split(D)
        good = (not reg) or (dim_odd == 0 and min0 > 1e-6)
        ok = ok and good
        rows.append([N, dims[0], dim_odd, min0, reg])
    return rows, {"pass": bool(ok), "C": C, "B_norm": B}


@_register("projector-drift",
           ["N", "value", "bound", "corrected_bound", "a_norm", "applicable",
            "params_hash"],
           "kernel-projector drift under a potential, against the contour bound")
def _run_drift(cfg: ExperimentConfig):
    Ns = cfg.Ns or [16, 32, 64, 128]
    bundle_spec = cfg.bundle or {
        "degrees": [0],
        "potential": {"kind": "compatible", "scale": 0.4,
                      "profile": "zonal"}}
    V = make_bundle(bundle_spec, cfg.seed)
    W = BundleSpec(V.degrees, None, "round")
    rows = []
    for N in Ns:
        d = dolbeault.projector_distance(V, W, N, cfg.lmax2)
        rows.append([N, d.measured, d.bound, d.corrected_bound, d.a_norm,
                     d.applicable, cfg.params_hash])
    slope = _fit_slope(Ns, [r[1] for r in rows])
    # the printed contour constant is known-bad at large N (see ledger);
    # both verdicts are reported, the exit status follows the literal one
    ok_printed = all((not r[5]) or r[1] <= r[2] for r in rows)
    ok_corrected = all((not r[5]) or r[1] <= r[3] for r in rows)
    ok = ok_printed and slope <= -0.45
    return rows, {"pass": bool(ok), "pass_printed_bound": bool(ok_printed),
                  "pass_corrected_bound": bool(ok_corrected and
                                               slope <= -0.45),
                  "slope": slope}


@_register("comparator",
           ["N", "sigma_min", "bijective", "projector_distance", "residual",
            "params_hash"],
           "bijectivity of the module comparator and its intertwining defect")
def _run_comparator(cfg: ExperimentConfig):
    Ns = cfg.Ns or [4, 8, 16, 32]
    bundle_spec = cfg.bundle or {
        "degrees": [0],
        "potential": {"kind": "compatible", "scale": 0.4, "lmax": 1}}
    V = make_bundle(bundle_spec, cfg.seed)
    W = BundleSpec(V.degrees, None, "round")
    v = make_section(cfg.section, W, cfg.seed + 1)
    rows, ok = [], True
    for N in Ns:
        res = modules_k.comparator(V, W, N, cfg.lmax2)
        resid = modules_k.comparator_residual(V, W, N, v, res)
        if res.projector_distance < 0.5:
            ok = ok and res.bijective and res.sigma_min > 0.1
        rows.append([N, res.sigma_min, res.bijective,
                     res.projector_distance, resid, cfg.params_hash])
    ok = ok and rows[-1][4] < rows[0][4]
    return rows, {"pass": bool(ok)}


@_register("rank-growth", ["N", "rank", "poly", "match"],
           "measured module rank vs the degree-1 rank polynomial")
def _run_rank_growth(cfg: ExperimentConfig):
    Ns = cfg.Ns or list(range(1, 13))
    V = make_bundle(cfg.bundle, cfg.seed)
    qm = modules_k.rank_sequence(V, Ns, lmax2=cfg.lmax2)
    rows = [[N, qm.rank(N), qm.poly.value(N), qm.rank(N) == qm.poly.value(N)]
            for N in Ns]
    n_star_max = max(1, max(V.degrees))
    ok = qm.threshold <= n_star_max
    return rows, {"pass": bool(ok), "threshold": qm.threshold,
                  "threshold_max": n_star_max}


@_register("idempotent",
           ["N", "trace", "poly", "idempotency", "lift_defect"],
           "spectral lifting of the standard rank-1 idempotent")
def _run_idempotent(cfg: ExperimentConfig):
    Ns = cfg.Ns or [1, 2, 3, 5, 10, 20, 40]
    orientation = (cfg.bundle or {}).get("orientation", 1)
    e = modules_k.bott_projector(orientation)
    lift = modules_k.lift_idempotent(e, Ns)
    rows_tc, threshold, poly = modules_k.idempotent_trace_check(e, Ns, lift)
    rows = [[N, tr, pv, lift.idempotency[N], lift.defects[N]]
            for N, tr, pv in rows_tc]
    ok = (threshold <= 3
          and all(lift.idempotency[N] <= 1e-10 for N in Ns)
          and all(lift.defects[Ns[i+1]] <= lift.defects[Ns[i]]
                  for i in range(len(Ns) - 1)))
    return rows, {"pass": bool(ok), "threshold": threshold,
                  "poly": [poly.c0, poly.c1],
                  "final_defect": lift.defects[max(Ns)]}


@_register("spinor", ["N", "rk_plus", "rk_minus", "gap", "kernel_bound"],
           "rank gap of the spinor halves and the induced kernel bound")
def _run_spinor(cfg: ExperimentConfig):
    Ns = cfg.Ns or list(range(2, 41))
    rows = modules_k.spinor_rank_gap(Ns)
    ok = all(r[3] == 2 and r[4] == 2 * (r[0] + 1) for r in rows)
    return [list(r) for r in rows], {"pass": bool(ok)}


@_register("traces", ["N", "trace", "params_hash"],
           "linear growth of the compressed-operator trace")
def _run_traces(cfg: ExperimentConfig):
    Ns = cfg.Ns or list(range(10, 41, 2))
    rng = np.random.default_rng(cfg.seed)
    if cfg.symbol is None:
        f = Symbol({(0, 0): math.sqrt(4 * math.pi),
                    (1, 0): math.sqrt(4 * math.pi / 3)})  # 1 + cos(theta)
    else:
        f = make_symbol(cfg.symbol, rng)
    lead, target, traces = quantization.trace_asymptotics(f, Ns)
    rows = [[N, t, cfg.params_hash] for N, t in zip(Ns, traces)]
    rel = abs(lead - target) / max(abs(target), 1e-12)
    return rows, {"pass": bool(rel < 0.01), "fit_leading": lead,
                  "target": target, "rel_error": rel}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: str, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_plot(path: str, name: str, rows, columns):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    ncol = {c: k for k, c in enumerate(columns)}
    if "value" not in ncol:
        return False
    Ns = [r[ncol["N"]] for r in rows]
    vals = [r[ncol["value"]] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(Ns, vals, "o-", label="measured")
    if "bound" in ncol:
        ax.loglog(Ns, [r[ncol["bound"]] for r in rows], "s--", label="bound")
    ax.set_xlabel("N")
    ax.set_ylabel("value")
    ax.set_title(name)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def run(cfg: ExperimentConfig) -> dict:
    """Run one experiment; writes CSV + JSON summary (+ optional SVG)."""
    entry = EXPERIMENTS[cfg.experiment]
    rows, summary = entry["runner"](cfg)
    rows = sorted(rows, key=lambda r: r[0])
    os.makedirs(cfg.out, exist_ok=True)
    base = os.path.join(cfg.out, cfg.experiment)
    write_csv(base + ".csv", entry["columns"], rows)
    summary_full = {"experiment": cfg.experiment, "pass": summary["pass"],
                    "details": {k: v for k, v in summary.items()
                                if k != "pass"},
                    "params_hash": cfg.params_hash}
    with open(base + "_summary.json", "w") as f:
        json.dump(summary_full, f, indent=2, sort_keys=True)
        f.write("\n")
    if cfg.plot:
        write_plot(base + ".svg", cfg.experiment, rows, entry["columns"])
    return summary_full
