"""Metropolis-Hastings sampling over valid tours.

Proposals swap the occupations of two tour positions (a configurable
number of swaps per proposal, the second position at most a given cyclic
distance from the first), so chains never leave the permutation manifold
and the encoding penalties never enter the dynamics. Acceptance follows
min(1, |psi(n')/psi(n)|^2) on cached log-amplitudes.

The amplitude evaluator is a callable mapping a (B, N) int array of tours
to a (B,) complex array of log psi values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .instance import Instance, farthest_city_tour

LogPsiFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int
    n_swaps: int
    max_swap_len: int
    fix_first: bool
    sample_size: int
    seed: int
    n_warmup: int | None = None  # None -> 10 * n_cities per sampling pass

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be positive")
        if self.n_swaps < 1:
            raise ValueError("n_swaps must be positive")
        if self.max_swap_len < 1:
            raise ValueError("max_swap_len must be at least 1")
        if self.sample_size < self.n_chains:
            raise ValueError("sample_size must be at least n_chains")


@dataclass
class ChainState:
    """One Markov chain: its current tour, the cached log-amplitude of that
    tour, a private RNG stream and acceptance counters."""

    current: np.ndarray
    log_psi_current: complex
    rng: np.random.Generator
    n_accepted: int = 0
    n_proposed: int = 0


@dataclass(frozen=True)
class Sample:
    """Recorded configurations of one sampling pass, merged by chain index."""

    configs: np.ndarray   # (S, N) int
    log_psi: np.ndarray   # (S,) complex
    acceptance_rate: float
    n_proposed: int
    n_accepted: int


@lru_cache(maxsize=128)
def _proposal_tables(n: int, max_swap_len: int, fix_first: bool):
    """Positions eligible as the first pick, and per-position arrays of
    eligible partners within the cyclic swap range."""
    first = np.array([p for p in range(n) if not (fix_first and p == 0)], dtype=np.int64)
    partners = {}
    for p in first:
        seen = set()
        for delta in range(1, min(max_swap_len, n - 1) + 1):
            seen.add((p + delta) % n)
            seen.add((p - delta) % n)
        seen.discard(int(p))
        if fix_first:
            seen.discard(0)
        partners[int(p)] = np.array(sorted(seen), dtype=np.int64)
    return first, partners


def init_chains(
    instance: Instance, cfg: SamplerConfig, log_psi: LogPsiFn | None = None
) -> list[ChainState]:
    """Start each chain on a greedy farthest-city tour.

    With fix_first the start city is 1 for every chain (and position 1 is
    frozen by the proposal rule); otherwise each chain draws its own start
    city from its RNG stream. Streams are the numbered children of
    SeedSequence(cfg.seed), one per chain index.
    """
    n = instance.n_cities
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    chains = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        start = 1 if cfg.fix_first else int(rng.integers(1, n + 1))
        tour = farthest_city_tour(instance, start)
        chains.append(ChainState(current=tour, log_psi_current=0.0, rng=rng))
    if log_psi is not None:
        values = np.asarray(log_psi(np.stack([c.current for c in chains])))
        for chain, value in zip(chains, values):
            chain.log_psi_current = complex(value)
    return chains


def propose_swap(state: ChainState, cfg: SamplerConfig) -> np.ndarray:
    """Apply cfg.n_swaps random position swaps to a copy of the current tour.

    Each swap is a transposition, so an even n_swaps proposes only even
    permutations of the current tour and the chain stays in one parity
    coset; use an odd count when full-support sampling matters.
    """
    tour = state.current
    n = tour.shape[0]
    first, partners = _proposal_tables(n, cfg.max_swap_len, cfg.fix_first)
    proposal = tour.copy()
    rng = state.rng
    for _ in range(cfg.n_swaps):
        p = int(first[rng.integers(first.shape[0])])
        cand = partners[p]
        if cand.shape[0] == 0:  # only possible at N=2 with fix_first
            continue
        q = int(cand[rng.integers(cand.shape[0])])
        proposal[p], proposal[q] = proposal[q], proposal[p]
    return proposal


def _decide(state: ChainState, proposal: np.ndarray, log_psi_new: complex) -> None:
    """Accept or reject a proposal with cached amplitude log_psi_new."""
    state.n_proposed += 1
    u = state.rng.random()  # drawn unconditionally to keep the stream position fixed
    re_new = log_psi_new.real
    if math.isnan(re_new) or re_new == -math.inf:
        return
    delta = re_new - state.log_psi_current.real
    if delta >= 0 or u < math.exp(2.0 * delta):
        state.current = proposal
        state.log_psi_current = log_psi_new
        state.n_accepted += 1


def mh_step(state: ChainState, log_psi: LogPsiFn, cfg: SamplerConfig) -> ChainState:
    """One Metropolis-Hastings update in place; returns the state."""
    proposal = propose_swap(state, cfg)
    value = complex(np.asarray(log_psi(proposal[None, :]))[0])
    _decide(state, proposal, value)
    return state


def run_chains(chains: list[ChainState], log_psi: LogPsiFn, cfg: SamplerConfig) -> Sample:
    """Advance all chains and record cfg.sample_size configurations.

    Each chain discards a warm-up prefix and then records every step;
    the first chains record sample_size // n_chains configurations and the
    last chain absorbs the remainder. Cached amplitudes are refreshed at
    the start so the pass is consistent with the current evaluator
    snapshot. Proposal evaluation is batched across chains, with identical
    per-chain RNG streams to stepping each chain alone.
    """
    n_chains = len(chains)
    n = chains[0].current.shape[0]
    warmup = cfg.n_warmup if cfg.n_warmup is not None else 10 * n
    base = cfg.sample_size // n_chains
    counts = [base] * n_chains
    counts[-1] = cfg.sample_size - base * (n_chains - 1)
    totals = [warmup + k for k in counts]

    values = np.asarray(log_psi(np.stack([c.current for c in chains])))
    for chain, value in zip(chains, values):
        chain.log_psi_current = complex(value)

    proposed_before = sum(c.n_proposed for c in chains)
    accepted_before = sum(c.n_accepted for c in chains)
    recorded = [[] for _ in range(n_chains)]
    recorded_psi = [[] for _ in range(n_chains)]
    proposals = np.empty((n_chains, n), dtype=np.int64)
    for step in range(max(totals)):
        active = [i for i in range(n_chains) if step < totals[i]]
        for i in active:
            proposals[i] = propose_swap(chains[i], cfg)
        new_values = np.asarray(log_psi(proposals[active]))
        for value, i in zip(new_values, active):
            chain = chains[i]
            _decide(chain, proposals[i].copy(), complex(value))
            if step >= warmup:
                recorded[i].append(chain.current)
                recorded_psi[i].append(chain.log_psi_current)

    configs = np.concatenate([np.stack(r) for r in recorded])
    psi = np.concatenate([np.asarray(r, dtype=np.complex128) for r in recorded_psi])
    n_proposed = sum(c.n_proposed for c in chains) - proposed_before
    n_accepted = sum(c.n_accepted for c in chains) - accepted_before
    rate = n_accepted / n_proposed if n_proposed else 0.0
    return Sample(configs=configs, log_psi=psi, acceptance_rate=rate,
                  n_proposed=n_proposed, n_accepted=n_accepted)
