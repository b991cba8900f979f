"""Finite-dimensional operator algebra: embeddings, vectorization, observation maps.

Conventions fixed here and asserted by the test suite:

* Tensor-factor order follows the ordered site tuple of an operator's volume;
  the first site is the slowest-varying index (leftmost Kronecker factor).
* Vectorization is column stacking, ``vec(A) = A.flatten(order="F")``, so
  ``vec(X A Y) = (Y.T kron X) vec(A)``.

Completely-bounded norms of observation maps are never computed exactly;
each map carries a certified bracket ``[cb_lower, cb_upper]`` and every
analytic bound consumes ``cb_upper``, which only loosens the right-hand side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .geometry import Site

EMBED_ATOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "P": np.array([[0, 0], [1, 0]], dtype=complex),   # |1><0|, raising
    "M": np.array([[0, 1], [0, 0]], dtype=complex),   # |0><1|, lowering
}


class AlgebraError(ValueError):
    pass


def _resolve_dims(sites: Sequence[Site], dims: Union[int, Mapping, Sequence, None]) -> tuple:
    if dims is None:
        dims = 2
    if isinstance(dims, int):
        return (dims,) * len(sites)
    if isinstance(dims, Mapping):
        return tuple(int(dims.get(s, 2)) for s in sites)
    out = tuple(int(d) for d in dims)
    if len(out) != len(sites):
        raise AlgebraError("dims length does not match sites")
    return out


@dataclass(frozen=True)
class ObservableOp:
    """A dense operator on the Hilbert space of an ordered site tuple.

    ``support`` records where the operator may act non-trivially; it is a
    subset of ``sites`` (the embedding volume).
    """

    matrix: np.ndarray
    sites: tuple
    support: frozenset
    dims: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        sites = tuple(self.sites)
        dims = tuple(self.dims)
        total = int(np.prod(dims)) if dims else 1
        if m.shape != (total, total):
            raise AlgebraError(f"matrix shape {m.shape} != ({total}, {total})")
        if not frozenset(self.support) <= set(sites):
            raise AlgebraError("support must lie inside the volume")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "support", frozenset(self.support))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return op_norm(self)

    def dagger(self) -> "ObservableOp":
        return ObservableOp(self.matrix.conj().T, self.sites, self.support, self.dims)

    def __add__(self, other: "ObservableOp") -> "ObservableOp":
        self._check_compatible(other)
        return ObservableOp(self.matrix + other.matrix, self.sites,
                            self.support | other.support, self.dims)

    def __sub__(self, other: "ObservableOp") -> "ObservableOp":
        self._check_compatible(other)
        return ObservableOp(self.matrix - other.matrix, self.sites,
                            self.support | other.support, self.dims)

    def __matmul__(self, other: "ObservableOp") -> "ObservableOp":
        self._check_compatible(other)
        return ObservableOp(self.matrix @ other.matrix, self.sites,
                            self.support | other.support, self.dims)

    def __mul__(self, scalar) -> "ObservableOp":
        return ObservableOp(self.matrix * scalar, self.sites, self.support, self.dims)

    __rmul__ = __mul__

    def _check_compatible(self, other: "ObservableOp"):
        if self.sites != other.sites or self.dims != other.dims:
            raise AlgebraError("operators live on different volumes")


def identity(sites: Sequence[Site], dims=None) -> ObservableOp:
    dims_t = _resolve_dims(tuple(sites), dims)
    total = int(np.prod(dims_t)) if dims_t else 1
    return ObservableOp(np.eye(total, dtype=complex), tuple(sites), frozenset(), dims_t)


def from_matrix(matrix, sites: Sequence[Site], support=None, dims=None) -> ObservableOp:
    sites = tuple(sites)
    if support is None:
        support = frozenset(sites)
    return ObservableOp(np.asarray(matrix, dtype=complex), sites, frozenset(support),
                        _resolve_dims(sites, dims))


def site_operator(name_or_matrix, site: Site) -> ObservableOp:
    """A single-site operator, from a named Pauli-type letter or a 2x2 matrix."""
    if isinstance(name_or_matrix, str):
        try:
            m = PAULI[name_or_matrix.upper()]
        except KeyError:
            raise AlgebraError(f"unknown operator letter {name_or_matrix!r}") from None
    else:
        m = np.asarray(name_or_matrix, dtype=complex)
    return ObservableOp(m, (site,), frozenset([site]), (m.shape[0],))


def _basis_permutation(src_sites: tuple, dst_sites: tuple, dst_dims: tuple) -> np.ndarray:
    """Index map sigma with M_dst[i, j] = M_src[sigma[i], sigma[j]]."""
    pos = {s: k for k, s in enumerate(dst_sites)}
    src_order = [pos[s] for s in src_sites]
    total = int(np.prod(dst_dims))
    digits = np.unravel_index(np.arange(total), dst_dims)
    src_dims = tuple(dst_dims[k] for k in src_order)
    return np.ravel_multi_index([digits[k] for k in src_order], src_dims)


def embed(op: ObservableOp, sites: Sequence[Site], dims=None) -> ObservableOp:
    """Kronecker embedding of ``op`` into a larger ordered volume.

    New sites carry identity factors; the result respects the target site
    order regardless of how the source volume interleaves with it.
    """
    sites = tuple(sites)
    dims_t = _resolve_dims(sites, dims)
    by_site = dict(zip(sites, dims_t))
    missing = [s for s in op.sites if s not in by_site]
    if missing:
        raise AlgebraError(f"operator sites {missing!r} not in target volume")
    for s, d in zip(op.sites, op.dims):
        if by_site[s] != d:
            raise AlgebraError(f"local dimension mismatch at site {s!r}")
    if sites == op.sites:
        return ObservableOp(op.matrix, sites, op.support, dims_t)
    rest = [s for s in sites if s not in set(op.sites)]
    rest_dim = int(np.prod([by_site[s] for s in rest])) if rest else 1
    m0 = np.kron(op.matrix, np.eye(rest_dim, dtype=complex))
    sigma = _basis_permutation(tuple(op.sites) + tuple(rest), sites, dims_t)
    return ObservableOp(m0[np.ix_(sigma, sigma)], sites, op.support, dims_t)


def op_norm(op: Union[ObservableOp, np.ndarray]) -> float:
    """Operator (largest-singular-value) norm."""
    m = op.matrix if isinstance(op, ObservableOp) else np.asarray(op)
    if m.size == 1:
        return float(abs(m.reshape(())))
    return float(np.linalg.norm(m, 2))


def vectorize(op: Union[ObservableOp, np.ndarray]) -> np.ndarray:
    """Column stacking: vec of [[a, b], [c, d]] is (a, c, b, d)."""
    m = op.matrix if isinstance(op, ObservableOp) else np.asarray(op)
    return m.flatten(order="F")


def devectorize(vec: np.ndarray, sites: Sequence[Site], dims=None,
                support=None) -> ObservableOp:
    sites = tuple(sites)
    dims_t = _resolve_dims(sites, dims)
    total = int(np.prod(dims_t)) if dims_t else 1
    v = np.asarray(vec, dtype=complex).reshape(-1)
    if v.size != total * total:
        raise AlgebraError(f"vector length {v.size} != {total * total}")
    m = v.reshape((total, total), order="F")
    return ObservableOp(m, sites, frozenset(sites) if support is None else frozenset(support),
                        dims_t)


def left_right_superop(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of A -> left @ A @ right on column-stacked vectors."""
    return np.kron(right.T, left)


@dataclass(frozen=True)
class ObservationMap:
    """A linear map on the observable algebra of a volume that kills the identity.

    ``matrix`` acts on column-stacked operators of the full volume; the map is
    supported on ``support`` (it is an embedded map of that region).
    """

    matrix: np.ndarray
    sites: tuple
    dims: tuple
    support: frozenset
    cb_upper: float
    cb_lower: float
    kind: str = "general"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        total = int(np.prod(self.dims))
        if m.shape != (total * total, total * total):
            raise AlgebraError("observation map has wrong dimension")
        if self.cb_lower > self.cb_upper + 1e-12:
            raise AlgebraError("cb_lower exceeds cb_upper")
        ident = np.eye(total, dtype=complex).flatten(order="F")
        residual = np.linalg.norm(m @ ident)
        if residual > EMBED_ATOL * max(1.0, float(np.linalg.norm(m))):
            raise AlgebraError("observation map must annihilate the identity")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "support", frozenset(self.support))


def commutator_map(b: ObservableOp, probe_seed: int = 2024) -> ObservationMap:
    """The map A -> [B, A] on B's volume, with certified cb bracket.

    ``cb_upper`` is 2 * opnorm(B); ``cb_lower`` is the best ratio
    ``norm([B, U]) / norm(U)`` over a fixed probe family (single-site Pauli
    letters on B's support plus a few seeded Haar unitaries).
    """
    m = left_right_superop(b.matrix, np.eye(b.dim)) - left_right_superop(np.eye(b.dim), b.matrix)
    upper = 2.0 * op_norm(b)
    lower = 0.0
    for probe in _probe_operators(b.sites, b.support, b.dims, probe_seed):
        num = op_norm(b.matrix @ probe.matrix - probe.matrix @ b.matrix)
        den = op_norm(probe)
        if den > 0:
            lower = max(lower, num / den)
    lower = min(lower, upper)
    return ObservationMap(m, b.sites, b.dims, b.support, upper, lower, kind="commutator")


def general_map(matrix, sites: Sequence[Site], support, dims=None,
                cb_upper: Optional[float] = None, cb_lower: Optional[float] = None,
                probe_seed: int = 2024) -> ObservationMap:
    """Wrap an explicit super-matrix as an observation map.

    When no cb bracket is supplied, the upper bound comes from a Choi-type
    factorization (sum of sigma_k * |U_k| * |V_k| over the singular pieces),
    which is valid for every linear map; the lower bound from probes.
    """
    sites = tuple(sites)
    dims_t = _resolve_dims(sites, dims)
    m = np.asarray(matrix, dtype=complex)
    if cb_upper is None:
        cb_upper = _factorization_cb_upper(m)
    if cb_lower is None:
        cb_lower = 0.0
        for probe in _probe_operators(sites, frozenset(support), dims_t, probe_seed):
            img = m @ vectorize(probe)
            num = op_norm(devectorize(img, sites, dims_t).matrix)
            den = op_norm(probe)
            if den > 0:
                cb_lower = max(cb_lower, num / den)
        cb_lower = min(cb_lower, cb_upper)
    return ObservationMap(m, sites, dims_t, frozenset(support), float(cb_upper),
                          float(cb_lower), kind="general")


def apply_map(k: ObservationMap, a: ObservableOp) -> ObservableOp:
    if tuple(a.sites) != tuple(k.sites) or tuple(a.dims) != tuple(k.dims):
        raise AlgebraError("map and operator volumes differ")
    out = k.matrix @ vectorize(a)
    return devectorize(out, a.sites, a.dims, support=frozenset(a.sites))


def _probe_operators(sites: tuple, support: frozenset, dims: tuple, seed: int):
    """Identity-excluded probes on ``support``, embedded into the volume."""
    probes = []
    for s, d in zip(sites, dims):
        if s not in support or d != 2:
            continue
        for letter in ("X", "Y", "Z"):
            probes.append(embed(site_operator(letter, s), sites, dims))
    sup_sites = tuple(s for s in sites if s in support)
    sup_dims = tuple(d for s, d in zip(sites, dims) if s in support)
    dim_sup = int(np.prod(sup_dims)) if sup_dims else 1
    rng = np.random.default_rng(seed)
    for _ in range(4):
        g = rng.normal(size=(dim_sup, dim_sup)) + 1j * rng.normal(size=(dim_sup, dim_sup))
        q, r = np.linalg.qr(g)
        u = q * (np.diag(r) / np.abs(np.diag(r)))
        probes.append(embed(from_matrix(u, sup_sites, support, sup_dims), sites, dims))
    return probes


def _factorization_cb_upper(superop: np.ndarray) -> float:
    d2 = superop.shape[0]
    d = int(round(math.sqrt(d2)))
    choi = superop.reshape(d, d, d, d).swapaxes(0, 3).reshape(d2, d2)
    u, s, vh = np.linalg.svd(choi)
    total = 0.0
    for k, sigma in enumerate(s):
        if sigma < 1e-14 * s[0]:
            break
        lk = u[:, k].reshape((d, d), order="F")
        rk = vh[k, :].conj().reshape((d, d), order="F")
        total += sigma * op_norm(lk) * op_norm(rk)
    return float(total)
