"""Exact enumeration and brute-force references for tiny systems.

Everything here trades speed for transparency: laws are enumerated state
by state, leave-one-out quantities are recomputed from scratch, and tensor
fields are summed over explicit index tuples.  The fast code paths of the
other modules are tested against these functions.

State indexing is mixed-radix little-endian: for spins the index is
``sum_i a_i K^i`` where ``a_i`` is the atom index of site ``i`` and ``K``
the support size; for graphs it is ``sum_e Y_e 2^e`` over pairs in
lexicographic order.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .ergm import ErgmModel, GraphState, eta_all, log_weight, logistic
from .errors import IndexMismatchError, OverlappingSetsError, TooLargeError
from .ising import IsingModel, conditional_probs, hamiltonian, local_fields, sample_spin_matrix, sym_tensor_entry
from .measure import tilted_mean
from .stats import centered_stats, ergm_centered_stats
from .tolerances import TOL

MAX_SPIN_STATES = 2_000_000
MAX_ERGM_N = 5
MAX_MOMENT_ORDER = 8


@dataclass
class ExactLaw:
    """Enumerated law.

    Attributes:
        states: ``(K, N)`` spins or ``(K, C)`` edge indicators, row ``k``
            being the state with index ``k``.
        log_weights: unnormalised log-weights.
        probs: normalised probabilities.
        log_partition: log of the normalising constant.
        kind: ``"ising"`` or ``"ergm"``.
    """

    states: np.ndarray
    log_weights: np.ndarray
    probs: np.ndarray
    log_partition: float
    kind: str

    @property
    def size(self) -> int:
        return self.probs.size

    def mean(self, values) -> float:
        v = np.asarray(values, dtype=float)
        return math.fsum(self.probs * v)


def _spin_states(model: IsingModel) -> np.ndarray:
    sup = model.measure.support
    k, n = sup.size, model.n
    if k**n > MAX_SPIN_STATES:
        raise TooLargeError(f"{k}^{n} states exceed the limit of {MAX_SPIN_STATES}")
    codes = np.arange(k**n)
    digits = (codes[:, None] // (k ** np.arange(n))[None, :]) % k
    return sup[digits]


def _graph_states(n: int) -> np.ndarray:
    if n > MAX_ERGM_N:
        raise TooLargeError(f"graph enumeration is limited to N <= {MAX_ERGM_N}")
    c = n * (n - 1) // 2
    codes = np.arange(2**c)
    return ((codes[:, None] >> np.arange(c)[None, :]) & 1).astype(np.int64)


def graph_from_edges(n: int, y) -> GraphState:
    adj = np.zeros((n, n), dtype=np.int64)
    r, c = np.triu_indices(n, k=1)
    adj[r, c] = np.asarray(y, dtype=np.int64)
    return GraphState.from_adjacency(adj + adj.T)


def _finish(states, logw, kind) -> ExactLaw:
    logz = float(logsumexp(logw))
    probs = np.exp(logw - logz)
    if not np.all(np.isfinite(probs)):
        raise ValueError("non-finite probabilities")
    if abs(math.fsum(probs) - 1.0) > TOL.law_normalization:
        probs = probs / math.fsum(probs)
    return ExactLaw(states, logw, probs, logz, kind)


def exact_gibbs(model) -> ExactLaw:
    """Enumerate the Gibbs law of an Ising model or an ERGM."""
    if isinstance(model, ErgmModel):
        states = _graph_states(model.n)
        logw = np.array([log_weight(model, graph_from_edges(model.n, y)) for y in states])
        return _finish(states, logw, "ergm")
    states = _spin_states(model)
    base = model.measure.log_weights[np.searchsorted(model.measure.support, states)].sum(axis=1)
    if model.is_pairwise:
        a = model.coupling.csr
        quad = 0.5 * np.einsum("ki,ki->k", states, (a @ states.T).T)
        energy = model.beta * quad + model.b_field * states.sum(axis=1)
    else:
        energy = np.array([hamiltonian(model, s) for s in states])
    return _finish(states, energy + base, "ising")


def state_index(model, state) -> int:
    """Index of one state in the enumeration order of :func:`exact_gibbs`."""
    if isinstance(model, ErgmModel):
        y = state.edge_vector() if isinstance(state, GraphState) else np.asarray(state)
        return int(np.sum(np.asarray(y, dtype=np.int64) << np.arange(y.size)))
    sup = model.measure.support
    s = np.asarray(getattr(state, "spins", state), dtype=float)
    digits = np.searchsorted(sup, s)
    if np.any(digits >= sup.size) or np.any(sup[np.minimum(digits, sup.size - 1)] != s):
        raise ValueError("state contains values outside the support")
    return int(np.sum(digits * sup.size ** np.arange(s.size)))


def state_indices(model: IsingModel, spins: np.ndarray) -> np.ndarray:
    """Vectorised :func:`state_index` for an ``(R, N)`` spin array."""
    sup = model.measure.support
    digits = np.searchsorted(sup, np.asarray(spins, dtype=float))
    return digits @ (sup.size ** np.arange(model.n))


def empirical_histogram(model: IsingModel, spins: np.ndarray) -> np.ndarray:
    k = model.measure.size**model.n
    return np.bincount(state_indices(model, spins), minlength=k).astype(float)


def tv_distance(empirical, exact: ExactLaw) -> float:
    """Half the L1 distance between a histogram (counts or frequencies) and the exact law."""
    h = np.asarray(empirical, dtype=float)
    if h.shape != exact.probs.shape:
        raise IndexMismatchError(f"histogram has {h.size} cells, law has {exact.size}")
    total = h.sum()
    if total <= 0:
        raise ValueError("empty histogram")
    return 0.5 * math.fsum(np.abs(h / total - exact.probs))


# ---------------------------------------------------------------- statistics


def _state_stats(model, state, c, a_n, g) -> tuple[float, float, float]:
    if isinstance(model, ErgmModel):
        st = ergm_centered_stats(model, graph_from_edges(model.n, state), a_n, c=c)
    elif g is None:
        st = centered_stats(model, state, c, a_n)
    else:
        return transformed_stats(model, state, c, g)
    return st.t_stat, st.u_stat, st.v_stat


def exact_moment(model, c, k: int, k1: int = 0, k2: int = 0, *, a_n: float | None = None,
                 g: Callable | None = None, law: ExactLaw | None = None) -> float:
    """``E[T^k U^k1 V^k2]`` under the exact law.

    ``g`` replaces the spins by a bounded transform ``g(s)`` (Ising only);
    ``None`` means the identity and routes through :mod:`condcenter.stats`.
    """
    if min(k, k1, k2) < 0 or k + 2 * k1 + 2 * k2 > MAX_MOMENT_ORDER:
        raise ValueError(f"moment orders must be nonnegative with k + 2k1 + 2k2 <= {MAX_MOMENT_ORDER}")
    law = exact_gibbs(model) if law is None else law
    vals = np.empty(law.size)
    for idx, state in enumerate(law.states):
        t, u, v = _state_stats(model, state, c, a_n, g)
        vals[idx] = t**k * u**k1 * v**k2
    return math.fsum(law.probs * vals)


def transformed_stats(model: IsingModel, spins, c, g: Callable) -> tuple[float, float, float]:
    """``(T, U, V)`` for the transformed observations ``g(s_i)``.

    Conditional means ``E[g(s_i) | rest]`` come from the tilted atom
    probabilities; leave-one-out means set ``s_i = 0`` and recompute every
    field from scratch.
    """
    s = np.asarray(spins, dtype=float)
    n = s.size
    cw = np.asarray(c, dtype=float)
    gs = np.asarray([g(x) for x in model.measure.support], dtype=float)
    obs = np.asarray([g(x) for x in s], dtype=float)
    t = conditional_probs(model, local_fields(model, s)) @ gs
    resid = cw * (obs - t)
    v = 0.0
    for i in range(n):
        z = s.copy()
        z[i] = 0.0
        ti = conditional_probs(model, local_fields(model, z)) @ gs
        for j in range(n):
            if j != i:
                v += resid[i] * cw[j] * (ti[j] - t[j])
    t_stat = math.fsum(resid) / math.sqrt(n)
    u_stat = math.fsum(cw * cw * (obs * obs - t * t)) / n
    return t_stat, u_stat, v / n


def v_dense(model: IsingModel, spins, c) -> float:
    """V by an explicit double loop with dense leave-one-out fields."""
    s = np.asarray(spins, dtype=float)
    n = s.size
    cw = np.asarray(c, dtype=float)
    a = model.coupling.dense()
    mu = model.measure

    def tmean(m):
        return tilted_mean(mu, model.beta * m + model.b_field)

    t = tmean(a @ s)
    total = 0.0
    for i in range(n):
        z = s.copy()
        z[i] = 0.0
        m_i = a @ z
        for j in range(n):
            if j == i:
                continue
            total += cw[i] * (s[i] - t[i]) * cw[j] * (tmean(m_i[j]) - t[j])
    return total / n


def ergm_v_dense(model: ErgmModel, state: GraphState, c=None) -> float:
    """Edge V summing over every ordered pair of distinct pairs.

    Each leave-one-out log-odds vector is recomputed from a fresh graph with
    the removed pair deleted, so no sharing structure is assumed.
    """
    npairs = model.n_pairs
    cw = np.ones(npairs) if c is None else np.asarray(c, dtype=float)
    y = state.edge_vector()
    lam = logistic(eta_all(model, state))
    total = 0.0
    for e in range(npairs):
        y0 = y.copy()
        y0[e] = 0.0
        lam_e = logistic(eta_all(model, graph_from_edges(model.n, y0)))
        d = cw * (lam_e - lam)
        d[e] = 0.0
        total += cw[e] * (y[e] - lam[e]) * math.fsum(d)
    return total / npairs


def tensor_fields_bruteforce(model: IsingModel, spins) -> np.ndarray:
    """``m_i = N^{-(v-1)} sum over distinct tuples of Sym[A](i, ...) prod(s)``."""
    s = np.asarray(spins, dtype=float)
    n = s.size
    h = model.template
    out = np.zeros(n)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        acc = 0.0
        for tup in itertools.permutations(others, h.vertex_count - 1):
            acc += sym_tensor_entry(model.coupling, h, (i,) + tup) * math.prod(s[list(tup)])
        out[i] = acc / n ** (h.vertex_count - 1)
    return out


# ------------------------------------------------------------ detailed balance


def ising_detailed_balance(model: IsingModel, law: ExactLaw | None = None) -> float:
    """Worst ``|pi(x) P(x->y) - pi(y) P(y->x)|`` over single-site moves.

    ``P`` is the random-scan heat-bath kernel built from the conditional
    probabilities of the sampler, independently of the enumerated weights.
    """
    law = exact_gibbs(model) if law is None else law
    sup = model.measure.support
    ksz, n = sup.size, model.n
    digits = np.searchsorted(sup, law.states)
    worst = 0.0
    for x in range(law.size):
        s = law.states[x]
        p_cond = conditional_probs(model, local_fields(model, s))
        for i in range(n):
            for a in range(ksz):
                if a == digits[x, i]:
                    continue
                y = x + (a - digits[x, i]) * ksz**i
                s_y = law.states[y]
                q_cond = conditional_probs(model, local_fields(model, s_y))
                fwd = law.probs[x] * p_cond[i, a] / n
                bwd = law.probs[y] * q_cond[i, digits[x, i]] / n
                worst = max(worst, abs(fwd - bwd))
    return worst


def ergm_detailed_balance(model: ErgmModel, law: ExactLaw | None = None) -> float:
    """Same check for the random-scan edge heat-bath kernel."""
    law = exact_gibbs(model) if law is None else law
    npairs = model.n_pairs
    worst = 0.0
    for x in range(law.size):
        g = graph_from_edges(model.n, law.states[x])
        lam = logistic(eta_all(model, g))
        for e in range(npairs):
            y = x ^ (1 << e)
            on = law.states[x][e] == 1
            p_fwd = (1.0 - lam[e]) if on else lam[e]
            p_bwd = lam[e] if on else (1.0 - lam[e])  # eta_e does not depend on Y_e
            worst = max(worst, abs(law.probs[x] * p_fwd - law.probs[y] * p_bwd) / npairs)
    return worst


# ------------------------------------------------------------------ smoothness


def delta_operator(fn: Callable[[np.ndarray], float], base_set: Iterable[int], diff_set: Iterable[int], state) -> float:
    """Mixed discrete difference ``sum_{D in 2^B} (-1)^{|D|} fn(s with A u D zeroed)``."""
    a = sorted({int(x) for x in base_set})
    b = sorted({int(x) for x in diff_set})
    if set(a) & set(b):
        raise OverlappingSetsError(f"base and difference sets overlap: {sorted(set(a) & set(b))}")
    s = np.asarray(getattr(state, "spins", state), dtype=float)
    terms = []
    for r in range(len(b) + 1):
        for d in itertools.combinations(b, r):
            z = s.copy()
            z[a + list(d)] = 0.0
            terms.append((-1.0) ** r * float(fn(z)))
    return math.fsum(terms)


@dataclass
class CmeanReport:
    k: int
    trials: int
    worst_ratio: float
    zero_bound_violations: int

    def to_json(self, config: str = "") -> str:
        return json.dumps({
            "check": f"cmean_bound_k{self.k}", "config": config, "worst_case": self.worst_ratio,
            "pass": self.worst_ratio <= 1.0 + 1e-9 and self.zero_bound_violations == 0,
        })


def check_cmean_bound(model: IsingModel, k: int, trials: int, rng: np.random.Generator) -> CmeanReport:
    """Worst ratio of ``|Delta(t_j1; S; {j2..jk})|`` to ``(k-1) prod_r A(j1, jr)``.

    States are drawn from the base measure, ``S`` includes each remaining
    site with probability one half, and ``0/0`` counts as 0.  A nonzero
    difference against a zero bound is counted separately.
    """
    if not model.is_pairwise:
        raise ValueError("the closed-form bound is stated for pairwise models")
    n = model.n
    if n > 12:
        raise TooLargeError("smoothness checks are limited to N <= 12")
    if k not in (2, 3, 4):
        raise ValueError("k must be 2, 3 or 4")
    a = model.coupling.dense()
    sup, w = model.measure.support, model.measure.weights
    worst, bad = 0.0, 0
    for _ in range(trials):
        s = sup[rng.choice(sup.size, size=n, p=w)]
        tup = [int(x) for x in rng.choice(n, size=k, replace=False)]
        rest = [x for x in range(n) if x not in tup]
        s_tilde = [x for x in rest if rng.random() < 0.5]
        j1 = tup[0]

        def fn(z, j1=j1):
            return tilted_mean(model.measure, model.beta * float(a[j1] @ z) + model.b_field)

        d = abs(delta_operator(fn, s_tilde, tup[1:], s))
        bound = (k - 1) * math.prod(a[j1, j] for j in tup[1:])
        if bound == 0.0:
            if d != 0.0:
                bad += 1
            continue
        worst = max(worst, d / bound)
    return CmeanReport(k, trials, worst, bad)


@dataclass
class ConcentrationTable:
    t_grid: tuple[float, ...]
    empirical: tuple[float, ...]
    envelope: tuple[float, ...]
    constant: float
    reps: int

    @property
    def holds(self) -> bool:
        return all(e <= b for e, b in zip(self.empirical, self.envelope))

    def to_json(self, config: str = "") -> str:
        return json.dumps({
            "check": "concentration", "config": config,
            "worst_case": max(e - b for e, b in zip(self.empirical, self.envelope)),
            "pass": self.holds, "t": list(self.t_grid), "empirical": list(self.empirical),
            "envelope": list(self.envelope),
        })


def concentration_check(model: IsingModel, d, reps: int, rng: np.random.Generator, *,
                        t_grid: Sequence[float] = (1.0, 2.0, 3.0), constant: float = 0.125,
                        burn: int = 200, thin: int = 1) -> ConcentrationTable:
    """Tail frequencies of ``|sum d_i (s_i - t_i)| / ||d||`` against ``2 exp(-C t^2)``.

    The reference constant is fixed for regression tracking only.
    """
    dw = np.asarray(d, dtype=float)
    spins = sample_spin_matrix(model, burn, thin, reps, rng)
    norm = math.sqrt(math.fsum(dw * dw))
    if norm == 0.0:
        stat = np.zeros(reps)
    else:
        fields = (model.coupling.csr @ spins.T).T
        t = tilted_mean(model.measure, model.beta * fields + model.b_field)
        stat = np.abs((spins - t) @ dw) / norm
    emp = tuple(float(np.mean(stat > x)) for x in t_grid)
    env = tuple(2.0 * math.exp(-constant * x * x) for x in t_grid)
    return ConcentrationTable(tuple(float(x) for x in t_grid), emp, env, constant, reps)
