"""Verification suites: fixed sequences of checks producing reports."""

from __future__ import annotations

import logging
import math
import os
import re
from typing import Callable

import numpy as np

from . import decomposition as dec
from .config import RunConfig
from .grids import LogGrid, UGrid
from .maxsq import (COWLING_FLOOR, bound_ratio_experiment, cowling_reconstruct,
                    maximal_discrete, maximal_function, square_function, square_function_mellin,
                    truncation_converged)
from .mellin import (a_phi, decay_report, log_integral, mellin_inverse, mellin_transform,
                     plancherel_residual)
from .multipliers import MultiplierSpec, parse_multiplier
from .norms import smoothness_norms
from .reports import VerificationReport, dumps, failed_precondition, table_to_csv
from .spectral import SpectralModel, load_model, random_signals

log = logging.getLogger(__name__)

SUITES = ("mellin", "norms", "maximal", "square", "decomposition")

# grids used by individual checks (recorded in every report)
DECAY_S_MIN = 1e-30
DECAY_UGRID = UGrid(1024.0, 0.25)
COWLING_DU = 1.0 / 16.0
COWLING_TS = (0.1, 1.0, 10.0)
MELLIN_FORM_DU = 1.0 / 16.0
BLOCK_UGRID = UGrid(128.0, 1.0 / 64.0)
PARSEVAL_KS = (0, 1, 4)
PARSEVAL_LAMBDAS = (0.1, 1.0, 10.0)
CJK_K_RANGE = (-16, 16)
CLAIM_K_RANGE = (-32, 32)
TAIL_YS = (2.0, 4.0, 8.0)
TAIL_KS = (1, 4, 8)


class Context:
    """Inputs shared by the checks of one run, built lazily."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.m: MultiplierSpec = parse_multiplier(cfg.multiplier)
        self._model = None
        self._norms = None

    @property
    def model(self) -> SpectralModel:
        if self._model is None:
            self._model = load_model(self.cfg.model)
        return self._model

    @property
    def norms(self):
        if self._norms is None:
            self._norms = smoothness_norms(self.m, self.cfg.alpha)
        return self._norms

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, stream])

    def base_inputs(self) -> dict:
        return {"multiplier": self.m.name, "alpha": self.cfg.alpha, "model": self.cfg.model}

    def require_vanishing(self):
        if self.m.value_at_zero != 0:
            raise ValueError(f"{self.m.name}: needs psi(0) = 0, got {self.m.value_at_zero}")

    @property
    def decay_sgrid(self) -> LogGrid:
        return LogGrid(DECAY_S_MIN, self.cfg.s_max, self.cfg.points_per_decade)


def _guard(name: str, ctx: Context, fn: Callable[[], list]) -> list:
    try:
        return fn()
    except Exception as exc:  # a precondition failure becomes a failed report
        log.info("check %s failed: %s", name, exc)
        return [failed_precondition(name, ctx.base_inputs(), exc, seed=ctx.cfg.seed)]


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(b)))
    if scale == 0.0:
        return float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b))) / scale


# ---------------------------------------------------------------------------
# mellin


def _mellin_samples(ctx: Context):
    m, cfg = ctx.m, ctx.cfg
    if m.value_at_zero == 0:
        return mellin_transform(m, cfg.sgrid, cfg.ugrid), m.eval
    c0 = m.value_at_zero
    return a_phi(m, cfg.ugrid, cfg.sgrid), lambda s: m.shifted(s) - c0 * np.expm1(-s)


def check_mellin_transform(ctx: Context) -> list:
    M, _ = _mellin_samples(ctx)
    mag = np.abs(M.values)
    stats = {"abs_max": float(np.max(mag)), "abs_at_zero": float(mag[M.u.size // 2]),
             "abs_at_u_max": float(mag[-1])}
    cols = {"u": M.u, "re": M.values.real, "im": M.values.imag}
    return [VerificationReport("mellin_transform", {**ctx.base_inputs(), "source": M.source},
                               stats, {}, bool(np.all(np.isfinite(mag))),
                               grid_meta=M.grid_meta, seed=ctx.cfg.seed, table=cols)]


def check_plancherel(ctx: Context, tol: float = 1e-4) -> list:
    M, g = _mellin_samples(ctx)
    m = ctx.m
    if m.value_at_zero == 0:
        res = plancherel_residual(m, ctx.cfg.sgrid, ctx.cfg.ugrid, samples=M)
        lhs, rhs = res["lhs"], res["rhs"]
    else:
        lhs = log_integral(lambda s: np.abs(g(s)) ** 2, ctx.cfg.sgrid)
        w = np.full(M.u.size, M.du)
        w[0] = w[-1] = M.du / 2
        rhs = float(np.sum(w * np.abs(M.values) ** 2)) / (2 * math.pi)
    diff = abs(lhs - rhs)
    notes = [] if m.value_at_zero == 0 else [f"applied to {M.source}"]
    return [VerificationReport("plancherel", ctx.base_inputs(),
                               {"lhs": lhs, "rhs": rhs, "abs_diff": diff},
                               {"abs_diff_max": tol * max(1.0, lhs)},
                               bool(diff <= tol * max(1.0, lhs)), grid_meta=M.grid_meta,
                               seed=ctx.cfg.seed, notes=notes)]


def inversion_points(m: MultiplierSpec, count: int = 65) -> np.ndarray:
    sb = m.support_bound
    hi = 10.0 if not sb else min(10.0, 0.9 * sb)
    lo = min(0.1, hi / 10)
    return np.logspace(math.log10(lo), math.log10(hi), count)


def check_inversion(ctx: Context) -> list:
    M, g = _mellin_samples(ctx)
    m = ctx.m
    s = inversion_points(m)
    smooth = m.support_bound is None and not m.kinks
    tol = 1e-3 if smooth else 1e-2
    inv = mellin_inverse(M, s, rel_tol=tol)
    ref = np.asarray(g(s))
    # pointwise relative error, with a floor at 1e-6 of the peak
    floor = 1e-6 * float(np.max(np.abs(ref))) if ref.size else 0.0
    err = np.abs(inv.values - ref) / np.maximum(np.abs(ref), floor) if floor > 0 else \
        np.abs(inv.values - ref)
    stat = float(np.max(err))
    return [VerificationReport(
        "mellin_inversion", ctx.base_inputs(),
        {"max_rel_error": stat, "imag_residual": inv.imag_residual,
         "tail_estimate": inv.tail_estimate},
        {"max_rel_error": tol}, bool(stat < tol), grid_meta=M.grid_meta, seed=ctx.cfg.seed,
        table={"s": s, "reconstructed": inv.values, "exact": ref.real})]


def check_decay(ctx: Context, refine_tol: float = 0.05) -> list:
    m, alpha = ctx.m, ctx.cfg.alpha
    order = alpha + 2
    bound = ctx.norms.n_value
    sg = ctx.decay_sgrid

    def samples(ug):
        if m.value_at_zero == 0:
            return mellin_transform(m, sg, ug, derivatives=True)
        return a_phi(m, ug, sg, alpha=alpha)

    S1, S2 = samples(DECAY_UGRID), samples(DECAY_UGRID.refined())
    whiches = ("values", "d1", "d2") if m.value_at_zero == 0 else ("values",)
    out = []
    for which in whiches:
        rep = decay_report(S1, order, bound, which=which, name=f"decay_{which}")
        fine = decay_report(S2, order, bound, which=which)
        a, b = rep.statistics["sup_g"], fine.statistics["sup_g"]
        change = 0.0 if a == b else abs(a - b) / max(a, b)
        rep.statistics["refinement_change"] = change
        rep.tolerance["refinement_change_max"] = refine_tol
        rep.passed = bool(rep.passed and change <= refine_tol)
        rep.inputs.update(ctx.base_inputs())
        rep.seed = ctx.cfg.seed
        out.append(rep)
    return out


# ---------------------------------------------------------------------------
# norms


def check_norms(ctx: Context) -> list:
    rep = ctx.norms
    stats = rep.to_json_dict()
    stats["C_unit_interval"] = rep.c_unit_interval
    vals = [v for v in stats.values() if v is not None]
    ok = (all(v >= 0 for v in vals)
          and rep.mh_alpha == max(rep.mh_norms)
          and rep.n_tilde >= rep.n_value)
    return [VerificationReport("norms", ctx.base_inputs(), stats, {}, bool(ok),
                               grid_meta=rep.grid_meta, seed=ctx.cfg.seed,
                               notes=list(rep.diagnostics))]


# ---------------------------------------------------------------------------
# maximal


def _signals(ctx: Context, count: int, stream: int) -> np.ndarray:
    return random_signals(ctx.model, count, ctx.rng(stream))


def check_maximal(ctx: Context) -> list:
    cfg, model, m = ctx.cfg, ctx.model, ctx.m
    tg = cfg.tgrid
    F = _signals(ctx, 8, 1)
    res = maximal_function(model, m, F, tg, full_output=True)
    out = [VerificationReport("maximal_refinement", ctx.base_inputs(),
                              {"refinement_change": res.change, "stable": res.stable},
                              {"refinement_change_max": 0.05}, bool(res.change <= 0.05),
                              grid_meta={"tgrid": res.tgrid.as_dict()}, seed=cfg.seed)]
    disc = maximal_discrete(model, m, F, (-cfg.j_max, -cfg.j_min))
    excess = float(np.max(disc - res.values))
    scale = float(np.max(res.values))
    out.append(VerificationReport("maximal_discrete_bound", ctx.base_inputs(),
                                  {"max_excess": max(excess, 0.0)},
                                  {"max_excess": 1e-12 * scale},
                                  bool(excess <= 1e-12 * scale),
                                  grid_meta={"tgrid": tg.as_dict()}, seed=cfg.seed))
    c = -2.5
    hom = _rel_err(maximal_function(model, m, c * F, tg), abs(c) * res.values)
    dil = _rel_err(maximal_function(model.scaled(2.0), m, F, tg), res.values)
    out.append(VerificationReport("maximal_invariances", ctx.base_inputs(),
                                  {"homogeneity_error": hom, "dilation_error": dil},
                                  {"homogeneity_error": 1e-12, "dilation_error": 1e-3},
                                  bool(hom <= 1e-12 and dil <= 1e-3),
                                  grid_meta={"tgrid": tg.as_dict(), "dilation": 2.0},
                                  seed=cfg.seed))
    return out


def check_cowling(ctx: Context, tol: float = 1e-2) -> list:
    cfg, model, m = ctx.cfg, ctx.model, ctx.m
    f = _signals(ctx, 1, 2)[:, 0]
    rows = {"t": [], "u_max": [], "residual": []}
    res = {}
    for U in (cfg.u_max, 2 * cfg.u_max):
        A = a_phi(m, UGrid(U, COWLING_DU), cfg.sgrid)
        for t in COWLING_TS:
            r = cowling_reconstruct(model, m, f, t, A).residual
            res[(t, U)] = r
            rows["t"].append(t)
            rows["u_max"].append(U)
            rows["residual"].append(r)
    worst = max(res[(t, cfg.u_max)] for t in COWLING_TS)
    decreasing = all(truncation_converged(res[(t, cfg.u_max)], res[(t, 2 * cfg.u_max)])
                     for t in COWLING_TS)
    stats = {"max_residual": worst,
             "max_residual_doubled": max(res[(t, 2 * cfg.u_max)] for t in COWLING_TS),
             "decreasing": decreasing}
    return [VerificationReport("cowling", ctx.base_inputs(), stats,
                               {"max_residual": tol, "residual_floor": COWLING_FLOOR},
                               bool(worst < tol and decreasing),
                               grid_meta={"sgrid": cfg.sgrid.as_dict(), "du": COWLING_DU,
                                          "u_max": [cfg.u_max, 2 * cfg.u_max]},
                               seed=cfg.seed, table=rows)]


def check_bound_ratio(ctx: Context, kind: str) -> list:
    cfg = ctx.cfg
    out = []
    for p in cfg.p_values:
        rep = bound_ratio_experiment(ctx.model, ctx.m, p, kind, alpha=cfg.alpha,
                                     seed=cfg.seed, n_signals=cfg.n_signals, tg=cfg.tgrid,
                                     model_name=cfg.model)
        rep.check_name = f"{rep.check_name}_p{p:g}"
        out.append(rep)
    return out


# ---------------------------------------------------------------------------
# square


def check_isometry(ctx: Context, tol: float = 1e-3) -> list:
    ctx.require_vanishing()
    cfg, model, psi = ctx.cfg, ctx.model, ctx.m
    c2 = log_integral(lambda s: np.abs(psi.eval(s)) ** 2, LogGrid(DECAY_S_MIN, cfg.s_max, 256),
                      support=psi.support_bound)
    c = math.sqrt(c2)
    F = _signals(ctx, 20, 3)
    S = square_function(model, psi, F, cfg.tgrid)
    w = np.sqrt(model.weights)[:, None]
    ratio = np.linalg.norm(w * S, axis=0) / np.linalg.norm(w * F, axis=0)
    dev = float(np.max(np.abs(ratio - c))) / c if c > 0 else float(np.max(ratio))
    return [VerificationReport("square_isometry", ctx.base_inputs(),
                               {"c_psi": c, "max_rel_deviation": dev},
                               {"max_rel_deviation": tol}, bool(dev < tol),
                               grid_meta={"tgrid": cfg.tgrid.as_dict()}, seed=cfg.seed,
                               table={"index": np.arange(ratio.size), "ratio": ratio})]


def check_mellin_form(ctx: Context, tol: float = 1e-2) -> list:
    ctx.require_vanishing()
    cfg, model, psi = ctx.cfg, ctx.model, ctx.m
    ug = UGrid(cfg.u_max, MELLIN_FORM_DU)
    M = mellin_transform(psi, ctx.decay_sgrid, ug)
    F = _signals(ctx, 4, 4)
    Sd = square_function(model, psi, F, cfg.tgrid)
    Sm = square_function_mellin(model, psi, F, M)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(Sd > 0, np.abs(Sm - Sd) / np.where(Sd > 0, Sd, 1.0), np.abs(Sm))
    stat = float(np.max(rel))
    return [VerificationReport("square_mellin_form", ctx.base_inputs(),
                               {"max_rel_discrepancy": stat}, {"max_rel_discrepancy": tol},
                               bool(stat < tol),
                               grid_meta={**M.grid_meta, "tgrid": cfg.tgrid.as_dict()},
                               seed=cfg.seed)]


# ---------------------------------------------------------------------------
# decomposition


def _block_samples(ctx: Context, ug: UGrid = BLOCK_UGRID):
    ctx.require_vanishing()
    return mellin_transform(ctx.m, ctx.decay_sgrid, ug, derivatives=True)


def check_parseval(ctx: Context, tol: float = 1e-4) -> list:
    M = _block_samples(ctx)
    part = dec.build_partition()
    rows = {"k": [], "lambda": [], "lhs": [], "rhs": [], "residual": [],
            "residual_printed": []}
    ok = True
    notes = []
    for k in PARSEVAL_KS:
        for lam in PARSEVAL_LAMBDAS:
            r = dec.parseval_block_check(M, part, k, lam, tol=tol)
            ok = ok and r.passed
            notes += r.notes
            for key in ("lhs", "rhs", "residual", "residual_printed"):
                rows[key].append(r.statistics[key])
            rows["k"].append(k)
            rows["lambda"].append(lam)
    stats = {"max_residual": max(rows["residual"]),
             "max_residual_printed": max(rows["residual_printed"])}
    return [VerificationReport("parseval_block", ctx.base_inputs(), stats,
                               {"max_residual": tol}, bool(ok),
                               grid_meta={"ugrid": BLOCK_UGRID.as_dict()}, seed=ctx.cfg.seed,
                               notes=notes, table=rows)]


def _decay_precondition(ctx: Context) -> None:
    order = ctx.cfg.alpha + 2
    S = mellin_transform(ctx.m, ctx.decay_sgrid, DECAY_UGRID)
    rep = decay_report(S, order, 1.0)
    if not rep.passed:
        raise ValueError(f"Mellin symbol does not decay at order {order} "
                         f"(slope {rep.statistics['slope']:.3g})")


def check_cjk(ctx: Context) -> list:
    M = _block_samples(ctx)
    _decay_precondition(ctx)
    part = dec.build_partition()
    M2 = _block_samples(ctx, BLOCK_UGRID.refined())
    rep = dec.cjk_bounds_report(M, part, CJK_K_RANGE, CJK_K_RANGE, ctx.cfg.alpha, M_check=M2)
    rep.inputs.update(ctx.base_inputs())
    rep.seed = ctx.cfg.seed
    return [rep]


def check_cjk_tail(ctx: Context, ibp_tol: float = 1e-6) -> list:
    M = _block_samples(ctx)
    part = dec.build_partition()
    alpha = ctx.cfg.alpha
    rows = {"k": [], "y": [], "value": []}
    for k in TAIL_KS:
        for y in TAIL_YS:
            c = abs(dec.cjk_derivative(M, part, 0, k, 0, y, alpha)[0])
            rows["k"].append(k)
            rows["y"].append(y)
            rows["value"].append(c * (1 + k * k) * y * y)
    const = max(rows["value"])
    ibp = 0.0
    for beta in range(alpha + 1):
        d = dec.cjk_derivative(M, part, 0, 3, beta, 5.0, alpha)[0]
        i = dec.cjk_derivative_ibp(M, part, 0, 3, beta, 5.0)[0]
        ibp = max(ibp, abs(d - i) / abs(d) if d != 0 else abs(i))
    ok = math.isfinite(const) and ibp < ibp_tol
    return [VerificationReport("cjk_tail", ctx.base_inputs(),
                               {"tail_constant": const, "ibp_rel_difference": ibp},
                               {"ibp_rel_difference": ibp_tol}, bool(ok),
                               grid_meta={"ugrid": BLOCK_UGRID.as_dict()}, seed=ctx.cfg.seed,
                               table=rows)]


def check_b_tail(ctx: Context) -> list:
    M = _block_samples(ctx)
    part = dec.build_partition()
    T = dec.b_tail_sums(M, part, 0, np.logspace(-1, 1, 9))
    Js = sorted(T)
    ratios = [T[b] / T[a] if T[a] > 0 else 0.0 for a, b in zip(Js[:-1], Js[1:])]
    # values at round-off level cannot show a trend
    meaningful = [r for (a, r) in zip(Js[:-1], ratios) if T[a] > 1e-28]
    ok = all(r <= 0.5 for r in meaningful)
    stats = {f"T_{J}": T[J] for J in Js}
    stats["max_doubling_ratio"] = max(meaningful) if meaningful else 0.0
    return [VerificationReport("b_tail", ctx.base_inputs(), stats,
                               {"max_doubling_ratio": 0.5}, bool(ok),
                               grid_meta={"ugrid": BLOCK_UGRID.as_dict(),
                                          "lambda": [0.1, 10.0]}, seed=ctx.cfg.seed)]


def check_claim(ctx: Context) -> list:
    M = _block_samples(ctx)
    _decay_precondition(ctx)
    rep = dec.claim_decay_check(M, dec.build_partition(), ctx.cfg.alpha, CLAIM_K_RANGE,
                                ctx.cfg.n_rademacher, seed=ctx.cfg.seed)
    rep.inputs.update(ctx.base_inputs())
    return [rep]


CHECKS = {
    "mellin": [("mellin_transform", check_mellin_transform), ("plancherel", check_plancherel),
               ("mellin_inversion", check_inversion), ("decay", check_decay)],
    "norms": [("norms", check_norms)],
    "maximal": [("maximal", check_maximal), ("cowling", check_cowling),
                ("bound_ratio_max", lambda c: check_bound_ratio(c, "max"))],
    "square": [("square_isometry", check_isometry), ("square_mellin_form", check_mellin_form),
               ("bound_ratio_square", lambda c: check_bound_ratio(c, "square")),
               ("bound_ratio_square_lower", lambda c: check_bound_ratio(c, "square_lower"))],
    "decomposition": [("parseval_block", check_parseval), ("cjk_bounds", check_cjk),
                      ("cjk_tail", check_cjk_tail), ("b_tail", check_b_tail),
                      ("claim_decay", check_claim)],
}


def run_suite(cfg: RunConfig, suite: str) -> list[VerificationReport]:
    """Run the named suite (or ``all``) and return its reports in fixed order."""
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    ctx = Context(cfg)
    reports = []
    for name in SUITES if suite == "all" else (suite,):
        for check, fn in CHECKS[name]:
            reports += _guard(check, ctx, lambda fn=fn: fn(ctx))
    return reports


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def write_outputs(reports: list[VerificationReport], cfg: RunConfig, out_dir: str) -> list:
    """reports.json plus one CSV per report that carries a table."""
    os.makedirs(out_dir, exist_ok=True)
    mult = _safe(parse_multiplier(cfg.multiplier).name)
    written = []
    path = os.path.join(out_dir, "reports.json")
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps([r.to_json_dict() for r in reports]))
        fh.write("\n")
    written.append(path)
    for r in reports:
        if r.table:
            p = os.path.join(out_dir, f"{_safe(r.check_name)}_{mult}.csv")
            with open(p, "w", newline="\n") as fh:
                fh.write(table_to_csv(r.table))
            written.append(p)
    return written
