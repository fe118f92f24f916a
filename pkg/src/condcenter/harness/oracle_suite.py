"""Exact-reference checks run by ``condcenter oracle``.

Each check returns ``{check, config, worst_case, pass}``; random draws come
from seeds derived from the master seed so reruns are identical.
"""

from __future__ import annotations

import numpy as np

from .. import coupling as cpl
from .. import oracle
from ..ergm import ErgmModel, sample as ergm_sample
from ..ising import IsingModel, TemplateGraph, local_fields, sample_spin_matrix
from ..measure import make_discrete, make_rademacher
from ..stats import centered_stats, ergm_centered_stats
from .seeds import STREAM_META, derive_seed


def _rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, k, STREAM_META))


def _result(check, config, worst, ok) -> dict:
    return {"check": check, "config": config, "worst_case": float(worst), "pass": bool(ok)}


def curie_weiss(n: int, beta: float, b: float, measure=None) -> IsingModel:
    return IsingModel(cpl.complete_graph(n), beta, b, measure or make_rademacher())


def tv_glauber(seed: int, snapshots: int = 1_000_000, thin: int = 2, burn: int = 100) -> dict:
    model = curie_weiss(10, 0.3, 0.1)
    law = oracle.exact_gibbs(model)
    spins = sample_spin_matrix(model, burn, thin, snapshots, _rng(seed, 0))
    tv = oracle.tv_distance(oracle.empirical_histogram(model, spins), law)
    return _result("tv_glauber", f"curie_weiss N=10 beta=0.3 B=0.1 snapshots={snapshots} thin={thin}", tv, tv < 0.02)


def detailed_balance(seed: int) -> dict:
    rng = _rng(seed, 1)
    three = make_discrete([(-1.0, 0.3), (0.0, 0.4), (1.0, 0.3)])
    worst = max(
        oracle.ising_detailed_balance(curie_weiss(8, 0.3, 0.1)),
        oracle.ising_detailed_balance(IsingModel(cpl.erdos_renyi(6, 0.6, rng), 0.8, -0.3, three)),
        oracle.ergm_detailed_balance(ErgmModel.from_names(4, [("edge", -0.2), ("triangle", 0.5)])),
    )
    return _result("detailed_balance", "curie_weiss N=8; three-atom ER N=6; ERGM N=4", worst, worst <= 1e-12)


def tower_property(seed: int) -> dict:
    rng = _rng(seed, 2)
    ising_model = curie_weiss(10, 0.3, 0.1)
    ergm_model = ErgmModel.from_names(4, [("edge", -0.2), ("triangle", 0.5)])
    il, el = oracle.exact_gibbs(ising_model), oracle.exact_gibbs(ergm_model)
    vals = [
        oracle.exact_moment(ising_model, np.ones(10), 1, law=il),
        oracle.exact_moment(ising_model, rng.normal(size=10), 1, law=il),
        oracle.exact_moment(ergm_model, None, 1, law=el),
        oracle.exact_moment(ergm_model, rng.normal(size=6), 1, law=el),
    ]
    worst = max(abs(v) for v in vals)
    return _result("tower_property", "ising N=10 and ERGM N=4, c = ones and random", worst, worst <= 1e-12)


def cmean_bound(seed: int, k: int, trials: int = 10_000) -> dict:
    rng = _rng(seed, 10 + k)
    a = cpl.erdos_renyi(8, 0.6, rng)
    model = IsingModel(a, 1.0, 0.2, make_rademacher())
    rep = oracle.check_cmean_bound(model, k, trials, rng)
    ok = rep.worst_ratio <= 1.0 + 1e-9 and rep.zero_bound_violations == 0
    return _result(f"cmean_bound_k{k}", f"ER N=8 beta=1 B=0.2 trials={trials}", rep.worst_ratio, ok)


def random_instance(rng: np.random.Generator, n: int) -> IsingModel:
    """A random pairwise model for equivalence checks."""
    kind = int(rng.integers(5))
    if kind == 0:
        a = cpl.erdos_renyi(n, float(rng.uniform(0.1, 0.9)), rng)
    elif kind == 1:
        a = cpl.wigner(n, {"kind": "exponential", "mean": 1.0}, 1.0, rng)
    elif kind == 2:
        w = rng.uniform(0.2, 2.0, (2, 2))
        a = cpl.from_block_graphon(cpl.BlockGraphon.from_arrays([0.0, 0.3, 1.0], (0.5 * (w + w.T)).tolist()), n)
    elif kind == 3:
        a = cpl.sbm(n, float(rng.uniform(0.3, 0.9)), float(rng.uniform(0.05, 0.3)), rng)
    else:
        a = cpl.complete_graph(n)
    if rng.random() < 0.5:
        mu = make_rademacher()
    else:
        mu = make_discrete([(-1.0, 0.25), (-0.5, 0.15), (0.0, 0.2), (0.5, 0.15), (1.0, 0.25)])
    return IsingModel(a, float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1.0, 1.0)), mu)


def v_equivalence(seed: int, instances: int = 100, n: int = 50) -> dict:
    rng = _rng(seed, 3)
    worst = 0.0
    for _ in range(instances):
        model = random_instance(rng, n)
        sup = model.measure.support
        s = sup[rng.integers(sup.size, size=n)]
        c = rng.normal(size=n)
        worst = max(worst, abs(centered_stats(model, s, c).v_stat - oracle.v_dense(model, s, c)))
    return _result("v_equivalence", f"{instances} random instances N={n}", worst, worst <= 1e-12)


def tensor_fields(seed: int, states: int = 5) -> dict:
    rng = _rng(seed, 4)
    worst = 0.0
    for name in ("edge", "two_star", "triangle"):
        for a in (cpl.erdos_renyi(6, 0.7, rng), cpl.wigner(6, {"kind": "exponential", "mean": 1.0}, 1.0, rng)):
            model = IsingModel(a, 0.7, 0.1, make_rademacher(), TemplateGraph.named(name))
            for _ in range(states):
                s = rng.choice([-1.0, 1.0], size=6)
                worst = max(worst, float(np.max(np.abs(local_fields(model, s) - oracle.tensor_fields_bruteforce(model, s)))))
    return _result("tensor_fields", "edge/two_star/triangle N=6", worst, worst <= 1e-10)


def ergm_v_equivalence(seed: int, graphs: int = 10) -> dict:
    rng = _rng(seed, 5)
    model = ErgmModel.from_names(7, [("edge", -0.3), ("two_star", 0.2), ("triangle", 0.5)])
    worst = 0.0
    for g in ergm_sample(model, 5, 2, graphs, rng):
        worst = max(worst, abs(ergm_centered_stats(model, g).v_stat - oracle.ergm_v_dense(model, g)))
    return _result("ergm_v_equivalence", f"ERGM N=7, {graphs} sampled graphs", worst, worst <= 1e-12)


def run_suite(seed: int) -> list[dict]:
    return [
        tv_glauber(seed),
        detailed_balance(seed),
        tower_property(seed),
        cmean_bound(seed, 2),
        cmean_bound(seed, 3),
        v_equivalence(seed),
        ergm_v_equivalence(seed),
        tensor_fields(seed),
    ]
