"""Replicated Monte Carlo experiments.

Each replication is an independent chain seeded by
``replication_seed(master, index)``: it starts from the configured state,
runs the burn-in sweeps, and records the centered statistics of its final
configuration together with any configured pseudolikelihood fits.  The
coupling is drawn once from its own seed stream and shared by all chains.
Records are gathered in index order before anything is summarised, so the
output files do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import coupling as cpl
from .. import ergm, ising, mple, theory
from ..errors import CondCenterError, ConfigError, ReplicationError
from ..measure import make_discrete, make_rademacher, tilted_var
from ..stats import centered_stats, ergm_centered_stats
from . import summaries
from .config import ExperimentConfig
from .seeds import check_seed, coupling_seed, replication_seed

KS_NOTE = (
    "KS tolerances are finite-N engineering slack for a convergence-in-distribution "
    "statement; they are not theoretical constants"
)
FIT_PARAMS = {
    "beta": ("beta",),
    "b_field": ("B",),
    "joint": ("joint_beta", "joint_B"),
    "bipartite": ("bip_h", "bip_B"),
    "ergm_beta1": ("beta1",),
}


# ------------------------------------------------------------------ building


def build_measure(spec):
    if spec == "rademacher":
        return make_rademacher()
    return make_discrete([tuple(a) for a in spec["atoms"]])


def build_coupling(params: dict, master_seed: int) -> cpl.CouplingMatrix:
    p = dict(params)
    gen = p.pop("generator")
    n = p.pop("n")
    seed = coupling_seed(master_seed)
    rng = np.random.default_rng(seed)
    if gen == "complete":
        return cpl.complete_graph(n)
    if gen == "regular":
        return cpl.regular_graph(n, p["d"], rng, seed=seed)
    if gen == "erdos_renyi":
        if ("p" in p) == ("p_log_scale" in p):
            raise ConfigError("erdos_renyi needs exactly one of p or p_log_scale")
        prob = p["p"] if "p" in p else p["p_log_scale"] * math.log(n) / n
        return cpl.erdos_renyi(n, prob, rng, seed=seed)
    if gen == "sbm":
        return cpl.sbm(n, p["a"], p["b"], rng, seed=seed)
    if gen == "bipartite":
        return cpl.bipartite_complete(n)
    if gen == "block_graphon":
        return cpl.from_block_graphon(graphon_of(params), n)
    if gen == "wigner":
        return cpl.wigner(n, p["atom_dist"], p["mu"], rng, seed=seed)
    raise ConfigError(f"unknown generator {gen!r}")


def graphon_of(params: dict) -> cpl.BlockGraphon:
    return cpl.BlockGraphon.from_arrays(params["boundaries"], params["values"])


def build_model(config: ExperimentConfig, seed: int):
    spec = config.model
    if spec.family == "ergm":
        return ergm.ErgmModel.from_names(spec.n, [tuple(t) for t in spec.terms])
    a = build_coupling(spec.coupling, seed)
    template = ising.TemplateGraph.named(spec.template) if spec.template else None
    return ising.IsingModel(a, spec.beta, spec.b_field, build_measure(spec.measure), template)


def _block_labels(model: ising.IsingModel) -> np.ndarray:
    a = model.coupling
    if a.is_block:
        return a.block_labels
    return (np.arange(a.n) >= a.n // 2).astype(np.int64)


def build_weights(config: ExperimentConfig, model) -> np.ndarray | None:
    w = config.weights
    if isinstance(model, ergm.ErgmModel):
        if w.kind == "ones":
            return None
        if w.kind == "custom":
            return np.asarray(w.values, dtype=float)
        raise ConfigError("ERGM experiments support only ones or custom pair weights")
    n = model.n
    if w.kind == "ones":
        c = np.ones(n)
    elif w.kind == "block":
        c = (_block_labels(model) == w.block).astype(float)
    elif w.kind == "contrast":
        c = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    else:
        c = np.asarray(w.values, dtype=float)
    if c.shape != (n,):
        raise ConfigError(f"weights must have length {n}")
    return c


def floor_value(config: ExperimentConfig, model) -> float:
    if config.floor.rule == "constant":
        return float(config.floor.value)
    size = model.n_pairs if isinstance(model, ergm.ErgmModel) else model.n
    return 1.0 / math.sqrt(size)


# -------------------------------------------------------------------- theory


def _try(out: dict, key: str, fn):
    try:
        out[key] = fn()
    except (CondCenterError, ValueError, ArithmeticError) as exc:
        out.setdefault("unavailable", {})[key] = f"{type(exc).__name__}: {exc}"


def jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    return x


def theory_targets(config: ExperimentConfig, model, c) -> dict:
    """Deterministic reference values attached to an experiment."""
    out: dict = {}
    if isinstance(model, ergm.ErgmModel):
        betas, counts = model.betas, model.edge_counts
        fp = theory.ergm_pstar(betas, counts)
        out.update(pstar=fp.value, ergm_regime=fp.regime, phi_prime=fp.stability, pstar_roots=list(fp.roots))
        _try(out, "ergm_edge_var", lambda: theory.ergm_variances(betas, counts)[0])
        _try(out, "ergm_mple_var", lambda: theory.ergm_variances(betas, counts)[1])
        _try(out, "ergm_mple_var_delta", lambda: theory.ergm_mple_var_delta(betas, counts))
        return jsonable(out)
    mu, beta, b = model.measure, model.beta, model.b_field
    gen = config.model.coupling["generator"]
    n = model.n
    if not model.is_pairwise:
        out["note"] = "no closed-form targets for tensor couplings"
        return out
    ups1 = float(np.mean(c * c))
    ups2 = float(c @ model.coupling.matvec(c)) / n
    out.update(ups1=ups1, ups2=ups2)
    if gen == "bipartite":
        _try(out, "beta0", lambda: theory.locate_beta0(mu, b))
        pair = theory.solve_bipartite_pair(mu, beta, b)
        t1, t2 = pair.value
        lab = _block_labels(model)
        s0 = float(np.sum(c[lab == 0] ** 2)) / n
        s1 = float(np.sum(c[lab == 1] ** 2)) / n
        # block 0 at mean a sees field b and vice versa
        level = lambda a, bb: s0 * tilted_var(mu, beta * bb + b) + s1 * tilted_var(mu, beta * a + b)
        out.update(bipartite_pair=[t1, t2], bipartite_regime=pair.regime,
                   bipartite_levels=[level(t1, t2), level(t2, t1)])
        _try(out, "mixture_covariances", lambda: [m.tolist() for m in theory.bipartite_mixture_covariances(mu, beta, b)[:2]])
        return jsonable(out)
    if gen == "block_graphon":
        g = graphon_of(config.model.coupling)
        fp = theory.solve_block_fixed_point(g, mu, beta, b)
        out.update(block_f=np.asarray(fp.value).tolist(), block_stability=fp.stability)
        _try(out, "joint_covariance", lambda: theory.joint_clt_covariance(fp.value, g, mu, beta, b).value)
        return jsonable(out)
    if beta >= 0:
        fp = theory.solve_t_rho(mu, beta, b)
        out.update(t=fp.value, t_regime=fp.regime)
        _try(out, "regclt_var", lambda: theory.avar_regclt(mu, beta, b, ups1, ups2).value)
        _try(out, "avar_beta", lambda: theory.avar_marginal(mu, beta, b, "beta").value)
        _try(out, "avar_B", lambda: theory.avar_marginal(mu, beta, b, "B").value)
    return jsonable(out)


# -------------------------------------------------------------- replications


@dataclass
class _Context:
    config: ExperimentConfig
    seed: int
    model: object
    weights: np.ndarray | None
    a_n: float


_WORKER: _Context | None = None


def make_context(config: ExperimentConfig, seed: int) -> _Context:
    model = build_model(config, seed)
    if isinstance(model, ergm.ErgmModel) and config.schedule.start != "empty":
        raise ConfigError("ERGM chains start from the empty graph")
    if isinstance(model, ising.IsingModel) and config.schedule.start == "empty":
        raise ConfigError("'empty' is a graph start")
    is_ergm = isinstance(model, ergm.ErgmModel)
    if any((f == "ergm_beta1") != is_ergm for f in config.estimate.fits):
        raise ConfigError(f"fits {config.estimate.fits} do not match the model family")
    return _Context(config, seed, model, build_weights(config, model), floor_value(config, model))


def _init_worker(config: ExperimentConfig, seed: int):
    global _WORKER
    _WORKER = make_context(config, seed)


def fit_state(ctx: _Context, name: str, state):
    alpha = ctx.config.estimate.alpha
    m = ctx.model
    if name == "beta":
        rep = mple.fit_beta(m, state, alpha=alpha, floor=ctx.a_n)
        truth = [m.beta]
    elif name == "b_field":
        rep = mple.fit_b_field(m, state, alpha=alpha, floor=ctx.a_n)
        truth = [m.b_field]
    elif name == "joint":
        rep = mple.fit_joint(m, state, alpha=alpha, floor=ctx.a_n)
        truth = [m.beta, m.b_field]
    elif name == "bipartite":
        rep = mple.fit_bipartite(m, state, alpha=alpha, floor=ctx.a_n)
        truth = [0.0, m.b_field]
    else:
        rep = mple.fit_ergm_beta1(m, state, alpha=alpha, floor=ctx.a_n)
        truth = [m.betas[0]]
    return rep, truth


def simulate(ctx: _Context, index: int):
    """Final state of replication ``index``."""
    rng = np.random.default_rng(replication_seed(ctx.seed, index))
    burn = ctx.config.schedule.burn
    if isinstance(ctx.model, ergm.ErgmModel):
        state = ergm.GraphState.empty(ctx.model.n)
        return ergm.run_sweeps(ctx.model, state, burn, rng)
    state = ising.initial_state(ctx.model, rng, ctx.config.schedule.start)
    return ising.run_sweeps(ctx.model, state, burn, rng)


def _replicate(ctx: _Context, index: int) -> dict:
    state = simulate(ctx, index)
    rec = {"index": index, "seed": replication_seed(ctx.seed, index)}
    if isinstance(ctx.model, ergm.ErgmModel):
        st = ergm_centered_stats(ctx.model, state, ctx.a_n, c=ctx.weights)
        rec.update(T=st.t_stat, U=st.u_stat, V=st.v_stat, studentized=st.studentized,
                   density=state.edge_count() / ctx.model.n_pairs)
    else:
        st = centered_stats(ctx.model, state, ctx.weights, ctx.a_n)
        rec.update(T=st.t_stat, U=st.u_stat, V=st.v_stat, studentized=st.studentized)
    for name in ctx.config.estimate.fits:
        rep, truth = fit_state(ctx, name, state)
        scale = math.sqrt(rep.n_eff)
        for k, (param, tr) in enumerate(zip(FIT_PARAMS[name], truth)):
            est = float(rep.estimate[k])
            lo, hi = rep.ci[k]
            rec.update({
                f"est_{param}": est, f"err_{param}": scale * (est - tr),
                f"lo_{param}": lo, f"hi_{param}": hi, f"cover_{param}": int(lo <= tr <= hi),
            })
        rec[f"converged_{name}"] = int(rep.converged)
        if name == "bipartite":
            rec["component"] = rep.diagnostics.get("component", "")
    return rec


def _worker_task(index: int) -> dict:
    try:
        return _replicate(_WORKER, index)
    except (CondCenterError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ReplicationError(index, exc) from exc


def run_replications(config: ExperimentConfig, seed: int, jobs: int = 1) -> list[dict]:
    reps = config.schedule.replications
    if jobs <= 1 or reps == 1:
        _init_worker(config, seed)
        return [_worker_task(i) for i in range(reps)]
    chunk = max(1, reps // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(config, seed)) as ex:
        return list(ex.map(_worker_task, range(reps), chunksize=chunk))


# ------------------------------------------------------------------- checks


def _column(records, name) -> np.ndarray:
    if not records or name not in records[0]:
        raise ConfigError(f"records have no column {name!r}")
    return np.array([r[name] for r in records], dtype=float)


def _target(theory_vals: dict, key: str):
    if key not in theory_vals:
        why = theory_vals.get("unavailable", {}).get(key, "not computed for this model")
        raise ConfigError(f"theory target {key!r} unavailable: {why}")
    return theory_vals[key]


def evaluate_check(check, records, theory_vals) -> dict:
    p = check.params
    out = {"name": check.name, "kind": check.kind}
    try:
        if check.kind == "ks":
            col = p.get("column", "studentized")
            ks = summaries.ks_normal(_column(records, col))
            out.update(column=col, statistic=ks.statistic, threshold_95=ks.threshold, tolerance=p["max"],
                       note=KS_NOTE, passed=ks.statistic <= p["max"])
        elif check.kind == "variance":
            m = summaries.moments(_column(records, p["column"]))
            tgt = float(_target(theory_vals, p["target"]))
            rel = abs(m.variance / tgt - 1.0)
            out.update(column=p["column"], empirical=m.variance, target=tgt, rel_error=rel,
                       tolerance=p["rel_tol"], passed=rel <= p["rel_tol"])
        elif check.kind == "coverage":
            hits = _column(records, f"cover_{p['param']}")
            rate = float(hits.mean())
            out.update(param=p["param"], rate=rate, se=math.sqrt(rate * (1 - rate) / hits.size),
                       band=[p["lo"], p["hi"]], passed=p["lo"] <= rate <= p["hi"])
        elif check.kind == "mean_within_se":
            m = summaries.moments(_column(records, p["column"]))
            tgt = float(p["value"]) if "value" in p else float(_target(theory_vals, p["target"]))
            z = abs(m.mean - tgt) / m.mean_se if m.mean_se > 0 else (0.0 if m.mean == tgt else math.inf)
            out.update(column=p["column"], mean=m.mean, se=m.mean_se, target=tgt, z=z,
                       tolerance=p["n_se"], passed=z <= p["n_se"])
        elif check.kind == "covariance_frobenius":
            data = np.column_stack([_column(records, c) for c in p["columns"]])
            emp = np.cov(data, rowvar=False, ddof=1)
            tgt = np.asarray(_target(theory_vals, p["target"]), dtype=float)
            rel = summaries.frobenius_relative(emp, tgt)
            out.update(columns=list(p["columns"]), empirical=emp.tolist(), target=tgt.tolist(),
                       rel_error=rel, tolerance=p["rel_tol"], passed=rel <= p["rel_tol"])
        elif check.kind == "mixture":
            levels = _target(theory_vals, p["target"])
            gap = abs(levels[1] - levels[0])
            res = summaries.mixture_clusters(_column(records, p.get("column", "U")), levels,
                                             p.get("eps_fraction", 0.25) * gap)
            ok = all(p["frac_lo"] <= f <= p["frac_hi"] for f in res.fractions) and res.unassigned <= p["max_unassigned"]
            out.update(levels=list(res.levels), eps=res.eps, fractions=list(res.fractions),
                       unassigned=res.unassigned, passed=ok)
        elif check.kind == "regime":
            got = _target(theory_vals, p["target"])
            out.update(value=got, expect=p["expect"], passed=got == p["expect"])
    except CondCenterError as exc:
        if isinstance(exc, ConfigError):
            raise
        out.update(passed=False, error=f"{type(exc).__name__}: {exc}")
    out["passed"] = bool(out["passed"])
    return out


# -------------------------------------------------------------------- results


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seed: int
    records: list
    theory: dict
    checks: list
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def column(self, name: str) -> np.ndarray:
        return _column(self.records, name)


def _summarise(records) -> dict:
    out = {"replications": len(records)}
    for col in ("T", "U", "V", "studentized", "density"):
        if records and col in records[0]:
            m = summaries.moments(_column(records, col))
            out[col] = {"mean": m.mean, "mean_se": m.mean_se, "variance": m.variance}
    if len(records) >= summaries.KS_MIN_SAMPLES:
        ks = summaries.ks_normal(_column(records, "studentized"))
        out["ks_studentized"] = {"statistic": ks.statistic, "threshold_95": ks.threshold}
    out["ks_note"] = KS_NOTE
    return out


def run_experiment(config: ExperimentConfig, jobs: int = 1, out_dir=None, seed: int | None = None) -> ExperimentResult:
    """Run every replication, attach theory values, evaluate the checks."""
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ConfigError("a seed is required")
    check_seed(seed)
    ctx = make_context(config, seed)
    theory_vals = theory_targets(config, ctx.model, ctx.weights if ctx.weights is not None else None)
    records = run_replications(config, seed, jobs)
    checks = [evaluate_check(chk, records, theory_vals) for chk in config.checks]
    res = ExperimentResult(config, seed, records, theory_vals, checks, _summarise(records))
    if out_dir is not None:
        write_result(res, out_dir)
    return res


def records_csv(records) -> str:
    buf = io.StringIO()
    if not records:
        return ""
    cols = list(records[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in cols])
    return buf.getvalue()


def read_records(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        rec = {}
        for k, v in row.items():
            try:
                rec[k] = int(v)
            except ValueError:
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
        out.append(rec)
    return out


def _dump(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_result(res: ExperimentResult, out_dir) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "records.csv").write_text(records_csv(res.records))
    (d / "theory.json").write_text(_dump(res.theory))
    summary = {
        "name": res.config.name, "seed": res.seed, "config": res.config.to_dict(),
        "summary": res.summary, "checks": res.checks, "passed": res.passed,
    }
    (d / "summary.json").write_text(_dump(summary))
    if res.records:
        q, x = summaries.qq_points(_column(res.records, "studentized"))
        lines = ["normal_quantile,studentized"] + [f"{a!r},{b!r}" for a, b in zip(q.tolist(), x.tolist())]
        (d / "qq.csv").write_text("\n".join(lines) + "\n")
    return d
