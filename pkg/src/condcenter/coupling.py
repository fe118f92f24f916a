"""Interaction matrices: generators, validation and CSV persistence.

A coupling is stored once as its strict upper triangle ``(i, j, a_ij)``
with ``i < j``, so symmetry holds by construction.  Couplings whose
entries are constant on blocks (complete graph, complete bipartite graph,
block graphons) additionally record the block structure; the samplers and
the statistics use it to avoid touching all ``n^2`` entries.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import (
    BadDistributionError,
    BadProbabilityError,
    InfeasibleDegreeError,
    OddSizeError,
    PairingFailedError,
)

MAX_PAIRING_RESTARTS = 200


@dataclass(frozen=True)
class BlockGraphon:
    """Piecewise-constant graphon on ``[0, 1]^2``.

    Attributes:
        block_boundaries: ``B + 1`` points, strictly increasing from 0 to 1.
        values: symmetric nonnegative ``B x B`` matrix ``W(b, b')``.
    """

    block_boundaries: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        b = np.asarray(self.block_boundaries, dtype=float)
        w = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.size < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("boundaries must run from 0 to 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        if w.shape != (b.size - 1, b.size - 1):
            raise ValueError("value matrix shape does not match the partition")
        if not np.array_equal(w, w.T) or np.any(w < 0):
            raise ValueError("graphon values must be symmetric and nonnegative")

    @classmethod
    def from_arrays(cls, boundaries, values) -> "BlockGraphon":
        return cls(
            tuple(float(x) for x in boundaries),
            tuple(tuple(float(x) for x in row) for row in np.asarray(values)),
        )

    @property
    def n_blocks(self) -> int:
        return len(self.block_boundaries) - 1

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.block_boundaries, dtype=float))

    def row_integrals(self) -> np.ndarray:
        return self.w @ self.widths

    def labels(self, n: int) -> np.ndarray:
        """Block index of each node; node ``i`` covers ``(i/n, (i+1)/n]``."""
        mid = (np.arange(n) + 0.5) / n
        idx = np.searchsorted(np.asarray(self.block_boundaries), mid, side="right") - 1
        return np.clip(idx, 0, self.n_blocks - 1).astype(np.int64)


class CouplingMatrix:
    """Symmetric nonnegative ``n x n`` matrix with zero diagonal.

    Treat instances as immutable.  ``rows``, ``cols`` and ``vals`` hold the
    strict upper triangle sorted lexicographically.  When ``block_labels``
    is set, ``a_ij = block_values[label_i, label_j]`` for every ``i != j``
    and the triplets are only materialised on demand.
    """

    def __init__(
        self,
        n: int,
        rows=None,
        cols=None,
        vals=None,
        *,
        generator: str = "custom",
        seed: int | None = None,
        params: Mapping[str, Any] | None = None,
        block_labels=None,
        block_values=None,
    ):
        self.n = int(n)
        self.generator = generator
        self.seed = seed
        self.params = dict(params or {})
        self.block_labels = None if block_labels is None else np.asarray(block_labels, dtype=np.int64)
        self.block_values = None if block_values is None else np.asarray(block_values, dtype=float)
        if rows is None and self.block_labels is None:
            raise ValueError("need either triplets or a block structure")
        if rows is not None:
            r = np.asarray(rows, dtype=np.int64)
            c = np.asarray(cols, dtype=np.int64)
            v = np.asarray(vals, dtype=float)
            if np.any(r >= c):
                raise ValueError("triplets must satisfy i < j")
            order = np.lexsort((c, r))
            self._set_triplets(r[order], c[order], v[order])
        else:
            self._rows = self._cols = self._vals = None
        self._csr = None
        self._row_sums = None

    def _set_triplets(self, r, c, v):
        for arr in (r, c, v):
            arr.setflags(write=False)
        self._rows, self._cols, self._vals = r, c, v

    @property
    def is_block(self) -> bool:
        return self.block_labels is not None

    def _materialise(self):
        lab, w = self.block_labels, self.block_values
        r, c = np.triu_indices(self.n, k=1)
        v = w[lab[r], lab[c]]
        keep = v != 0
        self._set_triplets(r[keep].astype(np.int64), c[keep].astype(np.int64), v[keep])

    @property
    def rows(self) -> np.ndarray:
        if self._rows is None:
            self._materialise()
        return self._rows

    @property
    def cols(self) -> np.ndarray:
        if self._cols is None:
            self._materialise()
        return self._cols

    @property
    def vals(self) -> np.ndarray:
        if self._vals is None:
            self._materialise()
        return self._vals

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def csr(self) -> sp.csr_matrix:
        """Full symmetric matrix in CSR form (both triangles)."""
        if self._csr is None:
            r, c, v = self.rows, self.cols, self.vals
            m = sp.coo_matrix(
                (np.concatenate([v, v]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                shape=(self.n, self.n),
            ).tocsr()
            m.sort_indices()
            self._csr = m
        return self._csr

    @property
    def row_sums(self) -> np.ndarray:
        """Correctly rounded row sums ``R_i`` (math.fsum per row)."""
        if self._row_sums is None:
            if self.is_block:
                lab, w = self.block_labels, self.block_values
                counts = np.bincount(lab, minlength=w.shape[0])
                per_block = np.empty(w.shape[0])
                for b in range(w.shape[0]):
                    terms = []
                    for b2 in range(w.shape[0]):
                        k = counts[b2] - (1 if b2 == b else 0)
                        terms.extend([w[b, b2]] * int(k))
                    per_block[b] = math.fsum(terms)
                out = per_block[lab]
            else:
                m = self.csr
                out = np.array(
                    [math.fsum(m.data[m.indptr[i] : m.indptr[i + 1]]) for i in range(self.n)]
                )
            out.setflags(write=False)
            self._row_sums = out
        return self._row_sums

    def entry(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if self.is_block:
            return float(self.block_values[self.block_labels[i], self.block_labels[j]])
        m = self.csr
        lo, hi = m.indptr[i], m.indptr[i + 1]
        k = np.searchsorted(m.indices[lo:hi], j)
        if k < hi - lo and m.indices[lo + k] == j:
            return float(m.data[lo + k])
        return 0.0

    def matvec(self, x) -> np.ndarray:
        """``A x`` without forming a dense matrix."""
        x = np.asarray(x, dtype=float)
        if self.is_block:
            lab, w = self.block_labels, self.block_values
            sums = np.bincount(lab, weights=x, minlength=w.shape[0])
            return (w @ sums)[lab] - w[lab, lab] * x
        return self.csr @ x

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = self.vals
        out[self.cols, self.rows] = self.vals
        return out

    def header(self) -> dict:
        h: dict[str, Any] = {"n": self.n, "generator": self.generator, "seed": self.seed}
        if self.is_block:
            h["blocks"] = {
                "labels": self.block_labels.tolist(),
                "values": self.block_values.tolist(),
            }
        return h

    def __eq__(self, other):
        if not isinstance(other, CouplingMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    __hash__ = None

    def __repr__(self):
        return f"CouplingMatrix(n={self.n}, generator={self.generator!r}, nnz={self.nnz})"


def _triplets_from_edges(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    return lo.astype(np.int64), hi.astype(np.int64)


def _bernoulli_upper(n: int, prob_fn, rng: np.random.Generator):
    """Independent upper-triangle edges, drawn row by row for bounded memory."""
    rows, cols = [], []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        u = rng.random(j.size)
        keep = u < prob_fn(i, j)
        rows.append(np.full(int(keep.sum()), i, dtype=np.int64))
        cols.append(j[keep])
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def _check_prob(p, name="p"):
    if not (0.0 < p <= 1.0) or not math.isfinite(p):
        raise BadProbabilityError(f"{name} must lie in (0, 1], got {p!r}")


def complete_graph(n: int) -> CouplingMatrix:
    """Curie-Weiss coupling ``a_ij = 1/(n-1)``."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    return CouplingMatrix(
        n,
        generator="complete",
        params={"n": n},
        block_labels=np.zeros(n, dtype=np.int64),
        block_values=np.array([[1.0 / (n - 1)]]),
    )


def regular_graph(n: int, d: int, rng: np.random.Generator, *, seed: int | None = None) -> CouplingMatrix:
    """Uniform-ish random simple ``d``-regular graph scaled by ``1/d``.

    Stubs are paired sequentially; a candidate pair that would create a
    loop or a repeated edge is redrawn, and a dead end restarts the whole
    pairing.  At most ``MAX_PAIRING_RESTARTS`` restarts are attempted.
    """
    if d < 1 or d >= n or (n * d) % 2:
        raise InfeasibleDegreeError(f"no simple {d}-regular graph on {n} nodes")
    for _ in range(MAX_PAIRING_RESTARTS):
        edges = _pair_stubs(n, d, rng)
        if edges is not None:
            r, c = _triplets_from_edges(edges)
            return CouplingMatrix(
                n, r, c, np.full(r.size, 1.0 / d),
                generator="regular", seed=seed, params={"n": n, "d": d},
            )
    raise PairingFailedError(f"pairing failed {MAX_PAIRING_RESTARTS} times for n={n}, d={d}")


def _pair_stubs(n: int, d: int, rng: np.random.Generator):
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    live = stubs.size
    seen: set[tuple[int, int]] = set()
    out = np.empty((n * d // 2, 2), dtype=np.int64)
    k = 0
    while live:
        for _attempt in range(100):
            a, b = rng.integers(0, live, size=2)
            u, v = int(stubs[a]), int(stubs[b])
            key = (u, v) if u < v else (v, u)
            if a != b and u != v and key not in seen:
                break
        else:
            return None
        seen.add(key)
        out[k] = key
        k += 1
        # swap the two used stubs to the end of the live prefix
        for idx in sorted((int(a), int(b)), reverse=True):
            live -= 1
            stubs[idx], stubs[live] = stubs[live], stubs[idx]
    return out


def erdos_renyi(n: int, p: float, rng: np.random.Generator, *, seed: int | None = None) -> CouplingMatrix:
    _check_prob(p)
    r, c = _bernoulli_upper(n, lambda i, j: p, rng)
    return CouplingMatrix(
        n, r, c, np.full(r.size, 1.0 / ((n - 1) * p)),
        generator="erdos_renyi", seed=seed, params={"n": n, "p": p},
    )


def sbm(n: int, a: float, b: float, rng: np.random.Generator, *, seed: int | None = None) -> CouplingMatrix:
    """Two-community stochastic block model scaled by ``2/(n(a+b))``."""
    if n % 2:
        raise OddSizeError(f"sbm needs even n, got {n}")
    _check_prob(a, "a")
    _check_prob(b, "b")
    half = n // 2
    r, c = _bernoulli_upper(n, lambda i, j: np.where((i < half) == (j < half), a, b), rng)
    return CouplingMatrix(
        n, r, c, np.full(r.size, 2.0 / (n * (a + b))),
        generator="sbm", seed=seed, params={"n": n, "a": a, "b": b},
    )


def bipartite_complete(n: int) -> CouplingMatrix:
    if n % 2 or n < 2:
        raise OddSizeError(f"bipartite coupling needs even n, got {n}")
    v = 2.0 / n
    return CouplingMatrix(
        n,
        generator="bipartite",
        params={"n": n},
        block_labels=(np.arange(n) >= n // 2).astype(np.int64),
        block_values=np.array([[0.0, v], [v, 0.0]]),
    )


def from_block_graphon(w: BlockGraphon, n: int) -> CouplingMatrix:
    """Deterministic ``a_ij = W(block_i, block_j) / n`` (note ``1/n``, not ``1/(n-1)``)."""
    if n < w.n_blocks:
        raise ValueError(f"need n >= {w.n_blocks} nodes")
    return CouplingMatrix(
        n,
        generator="block_graphon",
        params={"n": n, "boundaries": list(w.block_boundaries), "values": [list(r) for r in w.values]},
        block_labels=w.labels(n),
        block_values=w.w / n,
    )


def _draw_atoms(spec: Mapping[str, Any], size: int, rng: np.random.Generator) -> np.ndarray:
    kind = spec.get("kind")
    if kind == "exponential":
        mean = float(spec.get("mean", 0.0))
        if not mean > 0:
            raise BadDistributionError("exponential mean must be positive")
        return rng.exponential(mean, size)
    if kind == "constant":
        value = float(spec.get("value", -1.0))
        if not value >= 0:
            raise BadDistributionError("constant value must be nonnegative")
        return np.full(size, value)
    if kind == "atoms":
        atoms = np.asarray(spec.get("atoms", []), dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != 2 or atoms.shape[0] == 0:
            raise BadDistributionError("atoms must be a list of [value, weight]")
        vals, wts = atoms[:, 0], atoms[:, 1]
        if np.any(vals < 0) or np.any(wts < 0) or abs(wts.sum() - 1.0) > 1e-12:
            raise BadDistributionError("atom values and weights must be nonnegative, weights sum to 1")
        return vals[rng.choice(vals.size, size=size, p=wts)]
    raise BadDistributionError(f"unknown distribution kind {kind!r}")


def wigner(
    n: int, atom_dist: Mapping[str, Any], mu: float, rng: np.random.Generator, *, seed: int | None = None
) -> CouplingMatrix:
    """I.i.d. nonnegative entries scaled by ``1/(n mu)``; zero draws are kept.

    ``atom_dist`` is one of ``{"kind": "exponential", "mean": m}``,
    ``{"kind": "constant", "value": v}`` or
    ``{"kind": "atoms", "atoms": [[value, weight], ...]}``.
    """
    if not (mu > 0 and math.isfinite(mu)):
        raise BadDistributionError(f"mu must be positive, got {mu!r}")
    r, c = np.triu_indices(n, k=1)
    draws = _draw_atoms(atom_dist, r.size, rng)
    return CouplingMatrix(
        n, r.astype(np.int64), c.astype(np.int64), draws / (n * mu),
        generator="wigner", seed=seed, params={"n": n, "mu": mu, "atom_dist": dict(atom_dist)},
    )


@dataclass
class CouplingReport:
    n: int
    max_row_sum: float
    frobenius_ratio: float
    row_sum_var: float
    row_sum_hist: tuple[list[int], list[float]]
    symmetric: bool
    zero_diagonal: bool
    nonnegative: bool
    row_sums_consistent: bool = True
    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(a, bins: int = 20) -> CouplingReport:
    """Diagnostics for a coupling: bounded row sums, mean-field ratio, symmetry.

    Accepts a ``CouplingMatrix`` or any dense square array (so that broken
    matrices built by hand can be inspected).  ``frobenius_ratio`` is
    ``||A||_F^2 / n``.
    """
    issues = []
    consistent = True
    if isinstance(a, CouplingMatrix):
        n = a.n
        rs = np.asarray(a.row_sums)
        check = np.zeros(n)
        np.add.at(check, a.rows, a.vals)
        np.add.at(check, a.cols, a.vals)
        consistent = bool(np.all(np.abs(check - rs) <= 1e-12 * np.maximum(1.0, np.abs(rs))))
        frob = 2.0 * math.fsum(a.vals**2) / n
        sym, diag, nonneg = True, True, bool(np.all(a.vals >= 0))
    else:
        m = np.asarray(a, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("expected a square matrix")
        n = m.shape[0]
        rs = m.sum(axis=1)
        frob = float(np.sum(m * m)) / n
        sym = bool(np.array_equal(m, m.T))
        diag = bool(np.all(np.diag(m) == 0))
        nonneg = bool(np.all(m >= 0))
    if not sym:
        issues.append("matrix is not symmetric")
    if not diag:
        issues.append("diagonal is not zero")
    if not nonneg:
        issues.append("negative entries")
    if not consistent:
        issues.append("cached row sums disagree with entries")
    counts, edges = np.histogram(rs, bins=bins)
    return CouplingReport(
        n=n,
        max_row_sum=float(np.max(np.abs(rs))),
        frobenius_ratio=float(frob),
        row_sum_var=float(np.var(rs)),
        row_sum_hist=(counts.tolist(), edges.tolist()),
        symmetric=sym,
        zero_diagonal=diag,
        nonnegative=nonneg,
        row_sums_consistent=consistent,
        issues=issues,
    )


def save_csv(a: CouplingMatrix, path) -> None:
    """Header line of JSON, then ``i,j,value`` rows with round-trip floats."""
    buf = io.StringIO()
    buf.write(json.dumps(a.header()) + "\n")
    buf.write("i,j,value\n")
    for i, j, v in zip(a.rows.tolist(), a.cols.tolist(), a.vals.tolist()):
        buf.write(f"{i},{j},{v!r}\n")
    Path(path).write_text(buf.getvalue())


def load_csv(path) -> CouplingMatrix:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    body = [ln.split(",") for ln in lines[2:] if ln]
    r = np.array([int(x[0]) for x in body], dtype=np.int64)
    c = np.array([int(x[1]) for x in body], dtype=np.int64)
    v = np.array([float(x[2]) for x in body], dtype=float)
    blocks = header.get("blocks")
    out = CouplingMatrix(
        header["n"], r, c, v,
        generator=header.get("generator", "custom"),
        seed=header.get("seed"),
        block_labels=None if blocks is None else blocks["labels"],
        block_values=None if blocks is None else blocks["values"],
    )
    return out
