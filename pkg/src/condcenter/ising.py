"""Pairwise and tensor Ising models with heat-bath (Glauber) sampling.

Pairwise model: weights ``exp((beta/2) s'As + B sum(s))`` against the
product base measure, local fields ``m = A s``.

Tensor model for a template graph ``H`` on ``v`` vertices: weights
``exp((beta N / v) U_N(s) + B sum(s))`` where
``U_N = N^{-v} sum_{distinct tuples} prod(s) prod_{E(H)} A``.  The local
field is ``m_i = N^{-(v-1)} sum Sym[A](i, ...) prod(s)``, so that the
conditional law of ``s_i`` is the base measure tilted by ``beta m_i + B``
in both cases.  Note that the edge template therefore coincides with the
pairwise model only after multiplying ``A`` by ``N``.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .coupling import CouplingMatrix
from .errors import RepeatedIndexError, UnsupportedTemplateError
from .measure import BaseMeasure, tilted_mean, tilted_sample

SUPPORTED_TEMPLATES = ("edge", "two_star", "triangle")


@dataclass(frozen=True)
class TemplateGraph:
    """Simple graph on vertices ``0..v-1`` with no isolated vertex."""

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        v = self.vertex_count
        if v < 2:
            raise ValueError("template needs at least two vertices")
        norm = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < v and 0 <= b < v):
                raise ValueError(f"bad template edge {(a, b)}")
            norm.add((min(a, b), max(a, b)))
        if len(norm) != len(self.edges):
            raise ValueError("template has repeated edges")
        touched = {x for e in self.edges for x in e}
        if touched != set(range(v)):
            raise ValueError("template has an isolated vertex")

    @classmethod
    def edge(cls) -> "TemplateGraph":
        return cls(2, ((0, 1),))

    @classmethod
    def two_star(cls) -> "TemplateGraph":
        return cls(3, ((0, 1), (0, 2)))

    @classmethod
    def triangle(cls) -> "TemplateGraph":
        return cls(3, ((0, 1), (1, 2), (0, 2)))

    @classmethod
    def named(cls, name: str) -> "TemplateGraph":
        try:
            return {"edge": cls.edge, "two_star": cls.two_star, "triangle": cls.triangle}[name]()
        except KeyError:
            raise UnsupportedTemplateError(f"unknown template {name!r}") from None

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def kind(self) -> str | None:
        """Name of the supported shape this graph is isomorphic to, if any."""
        v, e = self.vertex_count, self.edge_count
        if v == 2 and e == 1:
            return "edge"
        if v == 3 and e == 3:
            return "triangle"
        if v == 3 and e == 2:
            return "two_star"
        return None


@dataclass(frozen=True, eq=False)
class IsingModel:
    coupling: CouplingMatrix
    beta: float
    b_field: float
    measure: BaseMeasure
    template: TemplateGraph | None = None

    def __post_init__(self):
        if not (math.isfinite(self.beta) and math.isfinite(self.b_field)):
            raise ValueError("beta and b_field must be finite")
        if self.template is not None and self.template.kind is None:
            raise UnsupportedTemplateError(
                f"templates beyond {SUPPORTED_TEMPLATES} are not supported"
            )

    @property
    def n(self) -> int:
        return self.coupling.n

    @property
    def is_pairwise(self) -> bool:
        return self.template is None

    def with_params(self, beta=None, b_field=None) -> "IsingModel":
        return IsingModel(
            self.coupling,
            self.beta if beta is None else float(beta),
            self.b_field if b_field is None else float(b_field),
            self.measure,
            self.template,
        )

    def digest(self) -> str:
        """Short content hash identifying the model in dump headers."""
        h = hashlib.sha256()
        h.update(json.dumps(self.coupling.header(), sort_keys=True).encode())
        h.update(self.coupling.vals.tobytes())
        h.update(np.array([self.beta, self.b_field]).tobytes())
        h.update(self.measure.to_json().encode())
        h.update(repr(self.template).encode())
        return h.hexdigest()[:16]


@dataclass
class SpinState:
    """Spin configuration with its cached local fields.  Owned by one chain."""

    spins: np.ndarray
    local_fields: np.ndarray
    sweep: int = 0

    def copy(self) -> "SpinState":
        return SpinState(self.spins.copy(), self.local_fields.copy(), self.sweep)


def _tensor_fields(a: CouplingMatrix, kind: str, s: np.ndarray) -> np.ndarray:
    n = a.n
    s1 = a.matvec(s)
    if kind == "edge":
        return s1 / n
    if kind == "two_star":
        sq = a.csr.multiply(a.csr)
        s2 = sq @ s
        q = sq @ (s * s)
        return (2.0 * a.matvec(s * s1) - 2.0 * s * s2 + s1 * s1 - q) / (3.0 * n * n)
    if kind == "triangle":
        dense = a.dense()
        b = dense * s[None, :]
        return np.einsum("ij,jk,ki->i", b, b, dense) / (n * n)
    raise UnsupportedTemplateError(kind)


def local_fields(model: IsingModel, spins) -> np.ndarray:
    """From-scratch local fields ``m_i`` for the model's coupling and template."""
    s = np.asarray(spins, dtype=float)
    if model.is_pairwise:
        return model.coupling.matvec(s)
    return _tensor_fields(model.coupling, model.template.kind, s)


def sym_tensor_entry(a: CouplingMatrix, h: TemplateGraph, indices: Sequence[int]) -> float:
    idx = [int(x) for x in indices]
    if len(idx) != h.vertex_count:
        raise ValueError(f"need {h.vertex_count} indices")
    if len(set(idx)) != len(idx):
        raise RepeatedIndexError(f"indices must be distinct: {idx}")
    total = 0.0
    for perm in itertools.permutations(range(h.vertex_count)):
        prod = 1.0
        for x, y in h.edges:
            prod *= a.entry(idx[perm[x]], idx[perm[y]])
        total += prod
    return total / math.factorial(h.vertex_count)


def conditional_mean(model: IsingModel, m_i):
    return tilted_mean(model.measure, model.beta * np.asarray(m_i, dtype=float) + model.b_field)


def conditional_probs(model: IsingModel, m_i) -> np.ndarray:
    from .measure import tilted_probs

    return tilted_probs(model.measure, model.beta * np.asarray(m_i, dtype=float) + model.b_field)


def hamiltonian(model: IsingModel, spins) -> float:
    """Log of the unnormalised Gibbs weight relative to the base measure."""
    s = np.asarray(spins, dtype=float)
    if model.is_pairwise:
        quad = math.fsum(model.coupling.vals * s[model.coupling.rows] * s[model.coupling.cols])
        return model.beta * quad + model.b_field * math.fsum(s)
    v = model.template.vertex_count
    m = local_fields(model, s)
    return (model.beta / v) * math.fsum(s * m) + model.b_field * math.fsum(s)


def initial_state(model: IsingModel, rng: np.random.Generator, start="iid") -> SpinState:
    """Starting configuration.

    Args:
        start: ``"iid"`` (draws from the base measure), ``"all_plus"``,
            ``"all_minus"``, ``"mode_basin"`` or an explicit spin array.
            ``"mode_basin"`` only makes sense for the complete bipartite
            coupling: a fair coin decides which half starts at +1 while the
            other half starts at -1.
    """
    n = model.n
    sup = model.measure.support
    if isinstance(start, str):
        if start == "iid":
            spins = sup[rng.choice(sup.size, size=n, p=model.measure.weights)].astype(float)
        elif start == "all_plus":
            spins = np.ones(n)
        elif start == "all_minus":
            spins = -np.ones(n)
        elif start == "mode_basin":
            a = model.coupling
            if a.is_block and a.block_values.shape[0] == 2:
                labels = a.block_labels
            else:
                labels = (np.arange(n) >= n // 2).astype(np.int64)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            spins = np.where(labels == 0, sign, -sign).astype(float)
        else:
            raise ValueError(f"unknown start {start!r}")
    else:
        spins = np.array(start, dtype=float)
        if spins.shape != (n,) or not np.all(np.isin(spins, sup)):
            raise ValueError("start array must contain n values from the support")
    return SpinState(spins, local_fields(model, spins))


def glauber_step(model: IsingModel, state: SpinState, site: int, rng: np.random.Generator) -> SpinState:
    """Resample one site from its exact conditional law, in place."""
    tilt = model.beta * state.local_fields[site] + model.b_field
    new = tilted_sample(model.measure, tilt, rng)
    old = state.spins[site]
    if new != old:
        state.spins[site] = new
        if model.is_pairwise:
            m = model.coupling.csr
            lo, hi = m.indptr[site], m.indptr[site + 1]
            state.local_fields[m.indices[lo:hi]] += m.data[lo:hi] * (new - old)
        else:
            state.local_fields[:] = local_fields(model, state.spins)
    return state


def _run_sweeps(model: IsingModel, state: SpinState, n_sweeps: int, rng: np.random.Generator, chunk: int = 64):
    n = model.n
    sup = np.ascontiguousarray(model.measure.support, dtype=float)
    logw = np.ascontiguousarray(model.measure.log_weights, dtype=float)
    a = model.coupling
    done = 0
    while done < n_sweeps:
        k = min(chunk, n_sweeps - done)
        u = rng.random((k, n))
        if not model.is_pairwise:
            for row in u:
                for i in range(n):
                    tilt = model.beta * state.local_fields[i] + model.b_field
                    new = _inverse_cdf(model.measure, tilt, row[i])
                    if new != state.spins[i]:
                        state.spins[i] = new
                        state.local_fields[:] = local_fields(model, state.spins)
        elif a.is_block:
            sums = np.bincount(a.block_labels, weights=state.spins, minlength=a.block_values.shape[0])
            _kernels.sweeps_block(
                state.spins, a.block_labels, np.ascontiguousarray(a.block_values),
                sums, float(model.beta), float(model.b_field), sup, logw, u,
            )
        else:
            m = a.csr
            _kernels.sweeps_csr(
                state.spins, state.local_fields, m.indptr, m.indices, m.data,
                float(model.beta), float(model.b_field), sup, logw, u,
            )
        done += k
    state.sweep += n_sweeps
    # refresh the cache so floating drift never accumulates across snapshots
    state.local_fields[:] = local_fields(model, state.spins)
    return state


def _inverse_cdf(m: BaseMeasure, tilt: float, u: float) -> float:
    logits = tilt * m.support + m.log_weights
    e = np.exp(logits - logits.max())
    acc = 0.0
    target = u * e.sum()
    for a in range(m.size - 1):
        acc += e[a]
        if target < acc:
            return float(m.support[a])
    return float(m.support[-1])


def run_sweeps(model: IsingModel, state: SpinState, n_sweeps: int, rng: np.random.Generator) -> SpinState:
    """Apply ``n_sweeps`` systematic-scan sweeps (sites 0..N-1) in place."""
    if n_sweeps < 0:
        raise ValueError("n_sweeps must be nonnegative")
    if n_sweeps == 0:
        return state
    return _run_sweeps(model, state, n_sweeps, rng)


def sample(
    model: IsingModel,
    n_sweeps_burn: int,
    n_sweeps_thin: int,
    n_reps: int,
    rng: np.random.Generator,
    start="iid",
) -> list[SpinState]:
    """Snapshots of one chain: burn-in, then one snapshot every ``thin`` sweeps."""
    if n_sweeps_burn < 0 or n_sweeps_thin < 1 or n_reps < 1:
        raise ValueError("need burn >= 0, thin >= 1 and reps >= 1")
    state = initial_state(model, rng, start)
    run_sweeps(model, state, n_sweeps_burn, rng)
    out = []
    for _ in range(n_reps):
        run_sweeps(model, state, n_sweeps_thin, rng)
        out.append(state.copy())
    return out


def sample_spin_matrix(
    model: IsingModel, n_sweeps_burn: int, n_sweeps_thin: int, n_reps: int,
    rng: np.random.Generator, start="iid",
) -> np.ndarray:
    """Like :func:`sample` but returns only an ``(n_reps, N)`` spin array.

    Avoids the per-snapshot field refresh, which matters when collecting
    millions of snapshots of a tiny model.
    """
    if n_sweeps_burn < 0 or n_sweeps_thin < 1 or n_reps < 1:
        raise ValueError("need burn >= 0, thin >= 1 and reps >= 1")
    if not model.is_pairwise:
        return np.array([s.spins for s in sample(model, n_sweeps_burn, n_sweeps_thin, n_reps, rng, start)])
    state = initial_state(model, rng, start)
    run_sweeps(model, state, n_sweeps_burn, rng)
    out = np.empty((n_reps, model.n))
    sup = np.ascontiguousarray(model.measure.support, dtype=float)
    logw = np.ascontiguousarray(model.measure.log_weights, dtype=float)
    m = model.coupling.csr
    batch = max(1, 65536 // max(1, model.n * n_sweeps_thin))
    r = 0
    while r < n_reps:
        k = min(batch, n_reps - r)
        u = rng.random((k * n_sweeps_thin, model.n))
        for j in range(k):
            _kernels.sweeps_csr(
                state.spins, state.local_fields, m.indptr, m.indices, m.data,
                float(model.beta), float(model.b_field), sup, logw,
                u[j * n_sweeps_thin : (j + 1) * n_sweeps_thin],
            )
            out[r + j] = state.spins
        r += k
    return out


def write_snapshots(path, model: IsingModel, snapshots: Sequence[SpinState], seed: int | None) -> None:
    """CSV with a JSON header line; one row of spins per snapshot."""
    buf = io.StringIO()
    buf.write(json.dumps({"model": model.digest(), "seed": seed, "n": model.n}) + "\n")
    buf.write("sweep," + ",".join(f"s{i}" for i in range(model.n)) + "\n")
    for snap in snapshots:
        buf.write(str(snap.sweep) + "," + ",".join(repr(float(x)) for x in snap.spins) + "\n")
    Path(path).write_text(buf.getvalue())


def read_snapshots(path) -> tuple[dict, np.ndarray, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    rows = [ln.split(",") for ln in lines[2:] if ln]
    sweeps = np.array([int(r[0]) for r in rows], dtype=np.int64)
    spins = np.array([[float(x) for x in r[1:]] for r in rows])
    return header, sweeps, spins
