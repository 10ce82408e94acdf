"""Two Hamiltonian pictures of the TSP.

Qubit picture: N^2 binary variables z[i, a] (city i sits at tour slot a),
with the quadratic objective whose distance term is the tour length and
whose squared constraint terms vanish exactly on permutation matrices.
Spins are the usual sigma = 2z - 1 relabelling.

Qudit picture: N ring-coupled N-level sites, configuration n = (n_1..n_N)
with n_a the city visited a-th. Diagonal elements of valid configurations
are tour lengths; everything else is pushed up by penalties p (global
variant) or p' (two-site variant).
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidTourError, SizeLimitError
from .instance import Instance, TourLike, is_permutation, tour_lengths

DENSE_MAX_CITIES = 5
VALID_SUBSPACE_MAX_CITIES = 8


@dataclass(frozen=True)
class PenaltyConfig:
    """Energy penalties for invalid configurations; both must dominate
    every distance in the instance."""

    p: float
    p_prime: float


def default_penalties(instance: Instance) -> PenaltyConfig:
    # 10 * N * max d: comfortably above any tour length
    scale = 10.0 * instance.n_cities * float(instance.dist.max())
    return PenaltyConfig(p=scale, p_prime=scale)


# ---------------------------------------------------------------------------
# one-hot spins
# ---------------------------------------------------------------------------

def tour_to_onehot(order: TourLike) -> np.ndarray:
    """Permutation matrix z with z[i-1, a-1] = 1 iff tour slot a holds city i."""
    order = np.asarray(order, dtype=np.int64)
    n = order.shape[0]
    if not is_permutation(order, n):
        raise InvalidTourError(f"cannot one-hot encode a non-permutation: {order.tolist()}")
    z = np.zeros((n, n), dtype=np.int64)
    z[order - 1, np.arange(n)] = 1
    return z


def onehot_to_tour(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    n = z.shape[0]
    if z.shape != (n, n) or not np.isin(z, (0, 1)).all():
        raise InvalidTourError("one-hot input must be a square 0/1 matrix")
    if np.any(z.sum(axis=0) != 1) or np.any(z.sum(axis=1) != 1):
        raise InvalidTourError("not a permutation matrix: row/column sums differ from 1")
    return (np.argmax(z, axis=0) + 1).astype(np.int64)


def tours_to_sigma(orders: np.ndarray) -> np.ndarray:
    """Map a (B, N) batch of tours to (B, N^2) spin vectors in {-1, +1}.

    Row-major flattening of the (city, slot) one-hot matrix; this is the
    input layout the spin-network ansatz sees.
    """
    orders = np.asarray(orders, dtype=np.int64)
    b, n = orders.shape
    z = np.zeros((b, n, n), dtype=np.float64)
    z[np.arange(b)[:, None], orders - 1, np.arange(n)[None, :]] = 1.0
    return (2.0 * z - 1.0).reshape(b, n * n)


def qubo_objective(
    instance: Instance,
    z: np.ndarray,
    position_penalty: float = 1.0,
    city_penalty: float = 1.0,
) -> float:
    """Quadratic objective over an arbitrary 0/1 matrix z.

    Distance term sum_{i,j,a} d_ij z[i,a] z[j,a+1] (slot index cyclic) plus
    squared one-city-per-slot and one-slot-per-city constraint terms. The
    penalty coefficients default to 1; they are exposed for experimentation
    but never matter on the valid-tour manifold where both terms vanish.
    """
    z = np.asarray(z, dtype=float)
    n = instance.n_cities
    if z.shape != (n, n):
        raise ValueError(f"z must be {n}x{n}, got {z.shape}")
    z_next = np.roll(z, -1, axis=1)
    distance = float(np.einsum("ia,ij,ja->", z, instance.dist, z_next))
    per_slot = float(((z.sum(axis=0) - 1.0) ** 2).sum())
    per_city = float(((z.sum(axis=1) - 1.0) ** 2).sum())
    return distance + position_penalty * per_slot + city_penalty * per_city


def ising_energy(instance: Instance, sigma: np.ndarray) -> float:
    """Same objective on spins sigma = 2z - 1, by direct substitution."""
    sigma = np.asarray(sigma, dtype=float)
    if not np.isin(sigma, (-1.0, 1.0)).all():
        raise ValueError("spin entries must be -1 or +1")
    return qubo_objective(instance, (sigma + 1.0) / 2.0)


# ---------------------------------------------------------------------------
# qudit ring
# ---------------------------------------------------------------------------

def is_valid_tour(config: TourLike) -> bool:
    """True iff the qudit levels form a permutation of 1..N."""
    config = np.asarray(config)
    return is_permutation(config, config.shape[0])


def qudit_diagonal_energy(instance: Instance, config: TourLike, pen: PenaltyConfig) -> float:
    """Diagonal element of the globally-penalized Hamiltonian: the cyclic
    tour length on valid configurations, the flat penalty p otherwise."""
    config = np.asarray(config, dtype=np.int64)
    if not is_valid_tour(config) or config.shape[0] != instance.n_cities:
        return pen.p
    nxt = np.roll(config, -1)
    return float(instance.dist[config - 1, nxt - 1].sum())


def twobody_element(
    instance: Instance, i: int, j: int, l: int, m: int, pen: PenaltyConfig
) -> float:
    """<i,j| D |l,m> = d_ij * delta_il * delta_jm + p' * (2 - delta_il - delta_jm)."""
    n = instance.n_cities
    for label in (i, j, l, m):
        if not 1 <= label <= n:
            raise ValueError(f"level {label} outside 1..{n}")
    d_il = 1.0 if i == l else 0.0
    d_jm = 1.0 if j == m else 0.0
    return float(instance.dist[i - 1, j - 1]) * d_il * d_jm + pen.p_prime * (2.0 - d_il - d_jm)


def ring_hamiltonian_element(
    instance: Instance, config_a: TourLike, config_b: TourLike, pen: PenaltyConfig
) -> float:
    """<n| sum_k D^(k,k+1) |m> for the periodic ring of two-site couplers.

    Each bond contributes its two-site element times identity deltas on all
    other sites, so elements vanish whenever the configurations differ on
    three or more sites (and on two sites unless both sit on one bond).
    """
    a = np.asarray(config_a, dtype=np.int64)
    b = np.asarray(config_b, dtype=np.int64)
    n = instance.n_cities
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError(f"configurations must have length {n}")
    total = 0.0
    for k in range(n):
        k1 = (k + 1) % n
        rest = [s for s in range(n) if s != k and s != k1]
        if any(a[s] != b[s] for s in rest):
            continue
        total += twobody_element(instance, int(a[k]), int(a[k1]), int(b[k]), int(b[k1]), pen)
    return total


def _enumerate_basis(n: int) -> np.ndarray:
    """All N^N level tuples in lexicographic order, levels 1..N."""
    grids = np.meshgrid(*([np.arange(1, n + 1)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def dense_hamiltonian(instance: Instance, variant: str, pen: PenaltyConfig) -> np.ndarray:
    """Full N^N x N^N matrix over the lexicographic product basis.

    variant "eq2": tour length / p on the diagonal, p on every off-diagonal.
    variant "eq4": built from the ring of two-site couplers; only the
    diagonal and single-site differences are nonzero.
    """
    n = instance.n_cities
    if n > DENSE_MAX_CITIES:
        raise SizeLimitError(f"dense Hamiltonian limited to N <= {DENSE_MAX_CITIES}, got {n}")
    if variant not in ("eq2", "eq4"):
        raise ValueError(f"unknown variant {variant!r}; expected 'eq2' or 'eq4'")
    basis = _enumerate_basis(n)
    dim = basis.shape[0]
    lengths = tour_lengths(instance, basis)
    valid = np.array([is_valid_tour(c) for c in basis])

    if variant == "eq2":
        h = np.full((dim, dim), pen.p)
        np.fill_diagonal(h, np.where(valid, lengths, pen.p))
        return h

    h = np.zeros((dim, dim))
    # ring diagonal carries the cyclic distance sum for every configuration
    np.fill_diagonal(h, lengths)
    # off-diagonal support: configurations differing on a single site or on
    # both sites of one ring bond; everything else hits a vanishing
    # identity delta on some bond-external differing site
    strides = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    levels = range(1, n + 1)
    for row in range(dim):
        cfg = basis[row]
        for site in range(n):
            for v in levels:
                if v == cfg[site]:
                    continue
                col = row + (v - cfg[site]) * strides[site]
                other = cfg.copy()
                other[site] = v
                h[row, col] = ring_hamiltonian_element(instance, cfg, other, pen)
        for k in range(n):
            k1 = (k + 1) % n
            if k1 == k:
                continue
            for v1 in levels:
                if v1 == cfg[k]:
                    continue
                for v2 in levels:
                    if v2 == cfg[k1]:
                        continue
                    col = row + (v1 - cfg[k]) * strides[k] + (v2 - cfg[k1]) * strides[k1]
                    other = cfg.copy()
                    other[k], other[k1] = v1, v2
                    h[row, col] = ring_hamiltonian_element(instance, cfg, other, pen)
    return h


def basis_labels(n: int) -> list[str]:
    return ["(" + ",".join(str(v) for v in cfg) + ")" for cfg in _enumerate_basis(n)]


def dense_to_csv(matrix: np.ndarray, n_cities: int) -> str:
    """Row-major CSV dump of a dense Hamiltonian, basis labels as header."""
    labels = basis_labels(n_cities)
    if matrix.shape != (len(labels), len(labels)):
        raise ValueError("matrix dimension does not match the N^N basis")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(labels)
    for row in matrix:
        writer.writerow([repr(float(v)) for v in row])
    return out.getvalue()


def exact_ground_valid_subspace(instance: Instance) -> tuple[np.ndarray, float]:
    """Minimum diagonal energy over all N! valid configurations."""
    n = instance.n_cities
    if n > VALID_SUBSPACE_MAX_CITIES:
        raise SizeLimitError(
            f"valid-subspace scan limited to N <= {VALID_SUBSPACE_MAX_CITIES}, got {n}"
        )
    best_cfg: np.ndarray | None = None
    best = np.inf
    for perm in itertools.permutations(range(1, n + 1)):
        cfg = np.array(perm, dtype=np.int64)
        nxt = np.roll(cfg, -1)
        e = float(instance.dist[cfg - 1, nxt - 1].sum())
        if e < best:
            best = e
            best_cfg = cfg
    assert best_cfg is not None
    return best_cfg, best
