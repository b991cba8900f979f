"""Semigroup propagation and the exact left-hand sides of the approximation bounds.

Propagators are dense matrix exponentials (scaling-and-squaring Pade via
scipy) of vectorized generators.  The desk-scale ceiling is a 4096-dimensional
vectorized algebra (six qubits); larger volumes are rejected rather than
silently degraded.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np
import scipy.linalg

from . import geometry
from .geometry import Site
from .model import DissipativeInteraction, Superoperator, generator
from .qalgebra import ObservableOp, ObservationMap, apply_map, devectorize, op_norm, vectorize

MAX_DENSE_DIM = 4096


class DynamicsError(ValueError):
    pass


def propagator(gen: Superoperator, t: float) -> Superoperator:
    """exp(t * gen); defined for t >= 0 only (semigroup, not a group)."""
    if t < 0:
        raise DynamicsError("propagation time must be nonnegative")
    d2 = gen.matrix.shape[0]
    if d2 > MAX_DENSE_DIM:
        raise DynamicsError("volume exceeds the dense-exponential ceiling")
    if t == 0.0:
        mat = np.eye(d2, dtype=complex)
    else:
        mat = scipy.linalg.expm(t * gen.matrix)
    return Superoperator(mat, gen.sites, gen.dims, picture=gen.picture)


def evolve(gen: Superoperator, t: float, a: ObservableOp) -> ObservableOp:
    """Apply the time-t propagator of ``gen`` to one observable."""
    if tuple(a.sites) != tuple(gen.sites) or tuple(a.dims) != tuple(gen.dims):
        raise DynamicsError("observable volume differs from the generator volume")
    prop = propagator(gen, t)
    out = prop.matrix @ vectorize(a)
    return devectorize(out, a.sites, a.dims)


def apply_superop(sup: Superoperator, a: ObservableOp) -> ObservableOp:
    if tuple(a.sites) != tuple(sup.sites):
        raise DynamicsError("observable volume differs from the map volume")
    return devectorize(sup.matrix @ vectorize(a), a.sites, a.dims)


def lhs_quasi_locality(k: ObservationMap, gen: Superoperator, t: float,
                       a: ObservableOp) -> float:
    """Exact opnorm of K applied to the evolved observable.

    The supports of K and the observable must be disjoint; the quasi-locality
    statements are vacuous otherwise.
    """
    if k.support & a.support:
        raise DynamicsError("observation map and observable supports overlap")
    evolved = evolve(gen, t, a)
    return op_norm(apply_map(k, evolved))


def lhs_truncation_error(interaction: DissipativeInteraction, volume: Iterable[Site],
                         R: float, t: float, a: ObservableOp) -> float:
    """Exact opnorm of (full - range-R truncated) evolution of ``a``."""
    if R <= 0:
        raise DynamicsError("truncation range must be positive")
    full = generator(interaction, volume, mode="full", dims=a.dims)
    trunc = generator(interaction, volume, mode="truncated", R=R, dims=a.dims)
    return op_norm(evolve(full, t, a) - evolve(trunc, t, a))


def lhs_local_error(interaction: DissipativeInteraction, volume: Iterable[Site],
                    xs: Iterable[Site], r: float, t: float, a: ObservableOp) -> float:
    """Exact opnorm of (full - strictly local on the r-inflation of xs)
    evolution of ``a``; the local dynamics stays embedded in the volume."""
    space = interaction.space
    x_set = frozenset(xs)
    if not a.support <= x_set:
        raise DynamicsError("observable must be supported in the localization region")
    region = geometry.inflate(space, x_set, r)
    full = generator(interaction, volume, mode="full", dims=a.dims)
    local = generator(interaction, volume, mode="subvolume", region=region, dims=a.dims)
    return op_norm(evolve(full, t, a) - evolve(local, t, a))


def choi_matrix(sup: Superoperator) -> np.ndarray:
    """Choi representative in the column-stacking convention.

    For the Schroedinger-picture propagator of a Lindblad semigroup this is
    positive semidefinite up to roundoff.
    """
    d2 = sup.matrix.shape[0]
    d = int(round(np.sqrt(d2)))
    if d * d != d2:
        raise DynamicsError("superoperator is not square over a Hilbert space")
    return sup.matrix.reshape(d, d, d, d).swapaxes(0, 3).reshape(d2, d2)


def choi_min_eigenvalue(sup: Superoperator) -> float:
    c = choi_matrix(sup)
    c = 0.5 * (c + c.conj().T)
    return float(np.min(np.linalg.eigvalsh(c)))
