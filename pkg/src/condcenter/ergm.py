"""Exponential random graph models on undirected simple graphs.

The law of the edge indicators is proportional to
``exp(sum_m beta_m hom(H_m, G) / N^(v_m - 2))`` where ``hom`` counts
injective homomorphisms.  Toggling pair ``(i, j)`` changes the exponent by

* ``2 beta`` for the edge,
* ``(2 beta / N) (d_i' + d_j')`` for the two-star,
* ``(6 beta / N) cn_ij`` for the triangle,

with ``d'`` the degrees ignoring the pair itself and ``cn_ij`` the number
of common neighbours.  These are the conditional log-odds ``eta_ij``.
"""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import SamePairError, TooLargeError, UnsupportedTemplateError
from .ising import TemplateGraph


@dataclass(frozen=True)
class ErgmModel:
    """ERGM with ``templates[0]`` the single edge.

    Attributes:
        n: number of vertices.
        templates: ``(template, beta)`` pairs.
    """

    n: int
    templates: tuple[tuple[TemplateGraph, float], ...]

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two vertices")
        if not self.templates or self.templates[0][0].kind != "edge":
            raise ValueError("the first template must be the single edge")
        for h, _ in self.templates[1:]:
            if h.edge_count < 2:
                raise ValueError("higher templates need at least two edges")

    @classmethod
    def from_names(cls, n: int, betas: Sequence[tuple[str, float]]) -> "ErgmModel":
        return cls(n, tuple((TemplateGraph.named(name), float(b)) for name, b in betas))

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(b for _, b in self.templates)

    @property
    def edge_counts(self) -> tuple[int, ...]:
        return tuple(h.edge_count for h, _ in self.templates)

    @property
    def n_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    def with_beta1(self, beta1: float) -> "ErgmModel":
        return ErgmModel(self.n, ((self.templates[0][0], float(beta1)),) + self.templates[1:])

    def coefficients(self) -> tuple[float, float, float]:
        """``(c_edge, c_star, c_tri)`` such that eta = c_edge + c_star d' + c_tri cn."""
        c = [0.0, 0.0, 0.0]
        for h, beta in self.templates:
            kind = h.kind
            if kind == "edge":
                c[0] += 2.0 * beta
            elif kind == "two_star":
                c[1] += 2.0 * beta / self.n
            elif kind == "triangle":
                c[2] += 6.0 * beta / self.n
            else:
                raise UnsupportedTemplateError(f"no closed form for template {h}")
        return c[0], c[1], c[2]


@dataclass
class GraphState:
    """Dense adjacency with degree and common-neighbour caches."""

    adj: np.ndarray
    deg: np.ndarray
    cn: np.ndarray
    sweep: int = 0

    @classmethod
    def from_adjacency(cls, adj) -> "GraphState":
        a = np.ascontiguousarray(adj, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T) or np.any(np.diag(a) != 0) or not np.all(np.isin(a, (0, 1))):
            raise ValueError("adjacency must be symmetric 0/1 with zero diagonal")
        return cls(a.copy(), a.sum(axis=1), a @ a)

    @classmethod
    def empty(cls, n: int) -> "GraphState":
        return cls.from_adjacency(np.zeros((n, n), dtype=np.int64))

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def edge_vector(self) -> np.ndarray:
        """Indicators in lexicographic pair order."""
        r, c = np.triu_indices(self.n, k=1)
        return self.adj[r, c].astype(float)

    def edge_count(self) -> int:
        return int(self.adj.sum() // 2)

    def set_edge(self, i: int, j: int, y: int) -> None:
        old = int(self.adj[i, j])
        if old == y:
            return
        delta = y - old
        self.adj[i, j] = self.adj[j, i] = y
        self.deg[i] += delta
        self.deg[j] += delta
        nj = self.adj[j].copy()
        nj[i] = 0
        ni = self.adj[i].copy()
        ni[j] = 0
        self.cn[i, :] += delta * nj
        self.cn[:, i] += delta * nj
        self.cn[j, :] += delta * ni
        self.cn[:, j] += delta * ni
        # diagonal of adj @ adj is the degree
        self.cn[i, i] = self.deg[i]
        self.cn[j, j] = self.deg[j]

    def copy(self) -> "GraphState":
        return GraphState(self.adj.copy(), self.deg.copy(), self.cn.copy(), self.sweep)

    def check(self) -> bool:
        return bool(
            np.array_equal(self.deg, self.adj.sum(axis=1)) and np.array_equal(self.cn, self.adj @ self.adj)
        )


def logistic(x):
    out = expit(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def _check_pair(n: int, i: int, j: int):
    if not (0 <= i < j < n):
        raise ValueError(f"pair must satisfy 0 <= i < j < n, got {(i, j)}")


def eta(model: ErgmModel, state: GraphState, i: int, j: int) -> float:
    """Conditional log-odds of ``Y_ij = 1`` given all other pairs."""
    _check_pair(model.n, i, j)
    ce, cs, ct = model.coefficients()
    y = int(state.adj[i, j])
    return ce + cs * (state.deg[i] - y + state.deg[j] - y) + ct * state.cn[i, j]


def eta_all(model: ErgmModel, state: GraphState) -> np.ndarray:
    """Log-odds for every pair, lexicographic order."""
    ce, cs, ct = model.coefficients()
    r, c = np.triu_indices(model.n, k=1)
    y = state.adj[r, c]
    return ce + cs * (state.deg[r] + state.deg[c] - 2 * y) + ct * state.cn[r, c]


def hom_count(h: TemplateGraph, state: GraphState, *, limit: int = 40) -> int:
    """Number of injective homomorphisms of ``h`` into the graph."""
    n = state.n
    kind = h.kind
    adj = state.adj
    if kind == "edge":
        return int(adj.sum())
    if kind == "two_star":
        d = state.deg
        return int(np.sum(d * (d - 1)))
    if kind == "triangle":
        if n > limit:
            raise TooLargeError(f"triangle count guarded at N <= {limit}")
        return int(np.trace(adj @ adj @ adj))
    if n > 20:
        raise TooLargeError("generic templates are enumerated only for N <= 20")
    return _hom_bruteforce(h, adj)


def _hom_bruteforce(h: TemplateGraph, adj: np.ndarray) -> int:
    n = adj.shape[0]
    count = 0
    for tup in itertools.permutations(range(n), h.vertex_count):
        if all(adj[tup[a], tup[b]] for a, b in h.edges):
            count += 1
    return count


def log_weight(model: ErgmModel, state: GraphState) -> float:
    """Unnormalised log-probability of the current graph."""
    return math.fsum(
        beta * _hom_bruteforce(h, state.adj) / model.n ** (h.vertex_count - 2)
        if h.kind is None
        else beta * hom_count(h, state) / model.n ** (h.vertex_count - 2)
        for h, beta in model.templates
    )


def eta_bruteforce(model: ErgmModel, state: GraphState, i: int, j: int) -> float:
    """Log-odds by summing over template embeddings that use pair ``{i, j}``.

    Enumerates every injective vertex map sending some template edge onto
    ``{i, j}`` and multiplies the indicators of the remaining template
    edges.  Exponential cost, guarded at N <= 20.
    """
    _check_pair(model.n, i, j)
    if model.n > 20:
        raise TooLargeError("brute-force eta is guarded at N <= 20")
    n = model.n
    adj = state.adj.copy()
    adj[i, j] = adj[j, i] = 0
    total = 0.0
    for h, beta in model.templates:
        v = h.vertex_count
        acc = 0
        for tup in itertools.permutations(range(n), v):
            images = [frozenset((tup[a], tup[b])) for a, b in h.edges]
            target = frozenset((i, j))
            if target not in images:
                continue
            if all(adj[tup[a], tup[b]] for (a, b), img in zip(h.edges, images) if img != target):
                acc += 1
        total += beta * acc / n ** (v - 2)
    return total


def eta_leave_one_out(model: ErgmModel, state: GraphState, target, removed) -> float:
    """``eta`` at ``target`` with the indicator of ``removed`` forced to 0."""
    i2, j2 = sorted(int(x) for x in target)
    i1, j1 = sorted(int(x) for x in removed)
    if (i1, j1) == (i2, j2):
        raise SamePairError("target and removed pair coincide")
    base = eta(model, state, i2, j2)
    if state.adj[i1, j1] == 0:
        return base
    shared = {i1, j1} & {i2, j2}
    if len(shared) != 1:
        return base
    _, cs, ct = model.coefficients()
    (a,) = shared
    b = j1 if i1 == a else i1
    k = j2 if i2 == a else i2
    return base - cs - ct * state.adj[b, k]


def glauber_edge_step(model: ErgmModel, state: GraphState, i: int, j: int, rng: np.random.Generator) -> GraphState:
    e = eta(model, state, i, j)
    y = 1 if rng.random() < logistic(e) else 0
    state.set_edge(i, j, y)
    return state


def run_sweeps(model: ErgmModel, state: GraphState, n_sweeps: int, rng: np.random.Generator, chunk: int = 32):
    """Lexicographic-order edge sweeps in place."""
    ce, cs, ct = model.coefficients()
    done = 0
    while done < n_sweeps:
        k = min(chunk, n_sweeps - done)
        u = rng.random((k, model.n_pairs))
        _kernels.ergm_sweeps(state.adj, state.deg, state.cn, model.n, ce, cs, ct, u)
        done += k
    state.sweep += n_sweeps
    # the kernel leaves the diagonal of cn stale; restore it
    np.fill_diagonal(state.cn, state.deg)
    return state


def sample(
    model: ErgmModel, burn_sweeps: int, thin_sweeps: int, reps: int, rng: np.random.Generator,
    start: GraphState | None = None,
) -> list[GraphState]:
    if burn_sweeps < 0 or thin_sweeps < 1 or reps < 1:
        raise ValueError("need burn >= 0, thin >= 1 and reps >= 1")
    state = GraphState.empty(model.n) if start is None else start.copy()
    run_sweeps(model, state, burn_sweeps, rng)
    out = []
    for _ in range(reps):
        run_sweeps(model, state, thin_sweeps, rng)
        out.append(state.copy())
    return out


def write_edge_lists(path, model: ErgmModel, snapshots: Sequence[GraphState], seed: int | None) -> None:
    """One CSV block per snapshot: JSON header line, then ``i,j`` rows."""
    buf = io.StringIO()
    for snap in snapshots:
        header = {"n": model.n, "betas": list(model.betas), "seed": seed, "sweep": snap.sweep}
        buf.write("# " + json.dumps(header) + "\n")
        r, c = np.nonzero(np.triu(snap.adj, 1))
        for i, j in zip(r.tolist(), c.tolist()):
            buf.write(f"{i},{j}\n")
    Path(path).write_text(buf.getvalue())


def read_edge_lists(path) -> list[tuple[dict, GraphState]]:
    out = []
    header, edges = None, []

    def flush():
        if header is not None:
            adj = np.zeros((header["n"], header["n"]), dtype=np.int64)
            for i, j in edges:
                adj[i, j] = adj[j, i] = 1
            g = GraphState.from_adjacency(adj)
            g.sweep = header["sweep"]
            out.append((header, g))

    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            flush()
            header, edges = json.loads(line[2:]), []
        elif line:
            i, j = line.split(",")
            edges.append((int(i), int(j)))
    flush()
    return out
