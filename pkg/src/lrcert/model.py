"""Dissipative interactions in Lindblad form and their generator assembly.

An interaction is a list of local terms, each with a self-adjoint Hamiltonian
part and a family of Kraus operators on a finite support.  Exact
completely-bounded norms are out of scope; every term carries the certified
surrogate ``cb_upper = 2 |H| + 2 sum_j |K_j|^2`` (triangle inequality over
the three Lindblad pieces) together with a probed lower bound, and all
analytic bounds consume ``cb_upper``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import geometry
from .geometry import FiniteMetricSpace, Site
from .qalgebra import (
    ObservableOp,
    embed,
    from_matrix,
    left_right_superop,
    op_norm,
)

HERMITICITY_ATOL = 1e-12


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Superoperator:
    """Dense linear map on the vectorized observable algebra of a volume."""

    matrix: np.ndarray
    sites: tuple
    dims: tuple
    picture: str  # "heisenberg" | "schrodinger"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        total = int(np.prod(self.dims))
        if m.shape != (total * total, total * total):
            raise ModelError(f"superoperator shape {m.shape} inconsistent with volume")
        if self.picture not in ("heisenberg", "schrodinger"):
            raise ModelError(f"unknown picture {self.picture!r}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def hilbert_dim(self) -> int:
        return int(np.prod(self.dims))


@dataclass(frozen=True)
class LindbladTerm:
    """One local generator piece: i[H, .] plus Kraus dissipators on a support."""

    support: frozenset
    hamiltonian: Optional[ObservableOp]
    kraus: tuple
    label: str = ""
    cb_upper: float = field(init=False)
    cb_lower: float = field(init=False)

    def __post_init__(self):
        support = frozenset(self.support)
        if not support:
            raise ModelError("term needs nonempty support")
        h = self.hamiltonian
        if h is not None:
            if frozenset(h.sites) != support:
                raise ModelError("hamiltonian volume must equal the term support")
            if op_norm(h.matrix - h.matrix.conj().T) > HERMITICITY_ATOL * max(1.0, op_norm(h)):
                raise ModelError("hamiltonian part must be self-adjoint")
        kraus = tuple(self.kraus)
        for k in kraus:
            if frozenset(k.sites) != support:
                raise ModelError("kraus operator volume must equal the term support")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "kraus", kraus)
        h_norm = op_norm(h) if h is not None else 0.0
        k_norms = [op_norm(k) for k in kraus]
        object.__setattr__(self, "cb_upper", 2.0 * h_norm + 2.0 * sum(x * x for x in k_norms))
        object.__setattr__(self, "cb_lower", self._probe_lower())

    def _probe_lower(self) -> float:
        sites = self._site_order()
        dims = self._dims()
        sup = local_superop(self, sites, dims)
        from .qalgebra import _probe_operators, devectorize, vectorize

        lower = 0.0
        for probe in _probe_operators(sites, self.support, dims, seed=99):
            img = sup @ vectorize(probe)
            num = op_norm(devectorize(img, sites, dims).matrix)
            den = op_norm(probe)
            if den > 0:
                lower = max(lower, num / den)
        return min(lower, self.cb_upper)

    def _site_order(self) -> tuple:
        ref = self.hamiltonian if self.hamiltonian is not None else self.kraus[0] if self.kraus else None
        if ref is None:
            return tuple(sorted(self.support, key=repr))
        return tuple(ref.sites)

    def _dims(self) -> tuple:
        ref = self.hamiltonian if self.hamiltonian is not None else self.kraus[0] if self.kraus else None
        return tuple(ref.dims) if ref is not None else (2,) * len(self.support)


def local_superop(term: LindbladTerm, sites: tuple, dims: tuple) -> np.ndarray:
    """Heisenberg-picture matrix of the term on the given volume:
    A -> i[H, A] + sum_j K_j* A K_j - (1/2){K_j* K_j, A}."""
    total = int(np.prod(dims))
    eye = np.eye(total, dtype=complex)
    out = np.zeros((total * total, total * total), dtype=complex)
    if term.hamiltonian is not None:
        h = embed(term.hamiltonian, sites, dims).matrix
        out += 1j * (left_right_superop(h, eye) - left_right_superop(eye, h))
    for k in term.kraus:
        km = embed(k, sites, dims).matrix
        kdag = km.conj().T
        kk = kdag @ km
        out += left_right_superop(kdag, km)
        out -= 0.5 * (left_right_superop(kk, eye) + left_right_superop(eye, kk))
    return out


@dataclass(frozen=True)
class DissipativeInteraction:
    """A family of Lindblad terms indexed by finite supports of a space."""

    space: FiniteMetricSpace
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        universe = self.space.all_sites()
        for t in terms:
            if not t.support <= universe:
                raise ModelError("term support outside the space")
        object.__setattr__(self, "terms", terms)

    @property
    def sup_norm(self) -> float:
        """Uniform bound: max over supports of the summed cb_upper surrogates
        (terms sharing a support are merged, matching a single map per region)."""
        by_support: dict = {}
        for t in self.terms:
            by_support[t.support] = by_support.get(t.support, 0.0) + t.cb_upper
        return max(by_support.values(), default=0.0)

    @property
    def range_r0(self) -> float:
        """Largest support diameter; zero for purely on-site interactions."""
        return max((geometry.diameter(self.space, t.support) for t in self.terms),
                   default=0.0)

    def terms_for(self, volume: frozenset, max_diam: Optional[float] = None) -> list:
        out = []
        for t in self.terms:
            if not t.support <= volume:
                continue
            if max_diam is not None and geometry.diameter(self.space, t.support) > max_diam + 1e-12:
                continue
            out.append(t)
        return out


def lindblad_superop(term: LindbladTerm, space: FiniteMetricSpace,
                     volume: Iterable[Site], dims=None) -> Superoperator:
    """The term embedded as a Heisenberg-picture superoperator on ``volume``."""
    vol_sites = space.ordered(volume)
    if not term.support <= frozenset(vol_sites):
        raise ModelError("term support not contained in the volume")
    dims_t = _volume_dims(vol_sites, dims, term)
    return Superoperator(local_superop(term, vol_sites, dims_t), vol_sites, dims_t,
                         picture="heisenberg")


def generator(interaction: DissipativeInteraction, volume: Iterable[Site] = None,
              mode: str = "full", R: Optional[float] = None,
              region: Optional[Iterable[Site]] = None, dims=None) -> Superoperator:
    """Sum of embedded term superoperators, filtered by mode.

    ``full``      : all terms supported inside the volume.
    ``truncated`` : additionally diam(support) <= R (requires ``R > 0``);
                    identical to ``full`` once R reaches the interaction range.
    ``subvolume`` : only terms supported inside ``region``, still embedded in
                    the full volume.
    Terms are summed in their stored order for reproducibility.
    """
    space = interaction.space
    vol_sites = space.ordered(volume if volume is not None else space.points)
    vol_set = frozenset(vol_sites)
    if mode == "full":
        selected = interaction.terms_for(vol_set)
    elif mode == "truncated":
        if R is None or R <= 0:
            raise ModelError("truncated mode needs R > 0")
        selected = interaction.terms_for(vol_set, max_diam=R)
    elif mode == "subvolume":
        if region is None:
            raise ModelError("subvolume mode needs a region")
        reg = frozenset(region)
        if not reg <= vol_set:
            raise ModelError("region must lie inside the volume")
        selected = interaction.terms_for(reg)
    else:
        raise ModelError(f"unknown generator mode {mode!r}")
    dims_t = _volume_dims(vol_sites, dims, *selected)
    total = int(np.prod(dims_t))
    acc = np.zeros((total * total, total * total), dtype=complex)
    for t in selected:
        acc += local_superop(t, vol_sites, dims_t)
    return Superoperator(acc, vol_sites, dims_t, picture="heisenberg")


def interaction_f_norm(interaction: DissipativeInteraction, f: Callable,
                       space: Optional[FiniteMetricSpace] = None) -> float:
    """Smallest M with sum over terms containing both anchors x, y of cb_upper
    <= M F(d(x,y)), maximized over all anchor pairs (including x = y)."""
    space = space or interaction.space
    n = len(space)
    anchored = np.zeros((n, n))
    for t in interaction.terms:
        idx = space.indices(t.support)
        anchored[np.ix_(idx, idx)] += t.cb_upper
    fm = np.asarray(f(space.dist), dtype=float)
    if np.min(fm) <= 0:
        raise ModelError("profile must be positive on the space")
    return float(np.max(anchored / fm))


def finite_range_fnorm_bound(interaction: DissipativeInteraction, f: Callable,
                             kappa: float, nu: float) -> float:
    """Counting bound for uniformly bounded finite-range interactions:
    sup_norm * 2**(kappa * R0**nu - 2) / F(R0)."""
    r0 = interaction.range_r0
    if r0 <= 0:
        raise ModelError("finite-range bound needs R0 > 0")
    sup = interaction.sup_norm
    if sup == 0.0:
        return 0.0
    return sup * 2.0 ** (kappa * r0 ** nu - 2.0) / float(f(r0))


def adjoint_generator(gen: Superoperator) -> Superoperator:
    """Trace-pairing adjoint; swaps Heisenberg and Schroedinger pictures."""
    flipped = "schrodinger" if gen.picture == "heisenberg" else "heisenberg"
    return Superoperator(gen.matrix.conj().T, gen.sites, gen.dims, picture=flipped)


def _volume_dims(vol_sites: tuple, dims, *terms: LindbladTerm) -> tuple:
    if dims is not None:
        from .qalgebra import _resolve_dims

        return _resolve_dims(vol_sites, dims)
    by_site = {}
    for t in terms:
        for s, d in zip(t._site_order(), t._dims()):
            prev = by_site.setdefault(s, d)
            if prev != d:
                raise ModelError(f"inconsistent local dimension at site {s!r}")
    return tuple(by_site.get(s, 2) for s in vol_sites)


# -- named interaction families -------------------------------------------------

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
LOWERING = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def tfim_dissipative(space: FiniteMetricSpace, j: float, h: float,
                     gamma: float) -> DissipativeInteraction:
    """Nearest-neighbour ZZ couplings, transverse X field, on-site amplitude
    damping.  One term per support: field and damping share each site term."""
    terms = []
    for s in space.points:
        ham = from_matrix(h * PAULI_X, (s,), frozenset([s])) if h != 0.0 else None
        kraus = ()
        if gamma != 0.0:
            kraus = (from_matrix(math.sqrt(gamma) * LOWERING, (s,), frozenset([s])),)
        if ham is not None or kraus:
            terms.append(LindbladTerm(frozenset([s]), ham, kraus, label=f"site{s!r}"))
    if j != 0.0:
        for x, y in _nearest_neighbour_pairs(space):
            ham = _two_site_zz(space, x, y, j)
            terms.append(LindbladTerm(frozenset([x, y]), ham, (), label=f"zz{(x, y)!r}"))
    return DissipativeInteraction(space, tuple(terms))


def long_range_zz(space: FiniteMetricSpace, j: float, alpha_int: float,
                  gamma: float) -> DissipativeInteraction:
    """All-to-all ZZ pairs with amplitude j / (1 + d)**alpha_int, plus on-site
    amplitude damping at rate gamma."""
    terms = []
    for s in space.points:
        if gamma != 0.0:
            k = from_matrix(math.sqrt(gamma) * LOWERING, (s,), frozenset([s]))
            terms.append(LindbladTerm(frozenset([s]), None, (k,), label=f"damp{s!r}"))
    if j != 0.0:
        pts = space.points
        for i, x in enumerate(pts):
            for y in pts[i + 1:]:
                amp = j / (1.0 + space.d(x, y)) ** alpha_int
                terms.append(LindbladTerm(frozenset([x, y]), _two_site_zz(space, x, y, amp),
                                          (), label=f"zz{(x, y)!r}"))
    return DissipativeInteraction(space, tuple(terms))


def _two_site_zz(space: FiniteMetricSpace, x: Site, y: Site, amp: float) -> ObservableOp:
    sites = space.ordered([x, y])
    return from_matrix(amp * np.kron(PAULI_Z, PAULI_Z), sites, frozenset(sites))


def _nearest_neighbour_pairs(space: FiniteMetricSpace) -> list:
    if len(space) < 2:
        return []
    off = space.dist[~np.eye(len(space), dtype=bool)]
    nn_dist = float(np.min(off))
    pairs = []
    pts = space.points
    for i, x in enumerate(pts):
        for y in pts[i + 1:]:
            if abs(space.d(x, y) - nn_dist) <= 1e-12:
                pairs.append((x, y))
    return pairs
