"""Variational Monte Carlo training loop.

Each step draws a Metropolis sample from |psi|^2 over valid tours,
estimates the energy (the local energy of a valid tour is its length in
either representation, since sampling never leaves the valid manifold) and
the covariance gradient with respect to the real parameter components,
then applies one Adam update. Runs stop on a target energy, on a
no-improvement window, on a wall-clock budget or at max_steps.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import nqs
from .encoding import tours_to_sigma
from .errors import InvalidTourError
from .instance import Instance, is_permutation, tour_lengths
from .sampler import Sample, SamplerConfig, init_chains, run_chains

IMPROVEMENT_TOL = 1e-12
TARGET_TOL = 1e-9

# spawn key reserved for the parameter-init stream; chain streams use the
# plain spawn children (0,), (1,), ... of the sampler seed
_INIT_SPAWN_KEY = 1 << 20


@dataclass(frozen=True)
class VmcConfig:
    representation: str          # "qubit" | "qudit"
    sampler: SamplerConfig
    n_hidden: int = 0            # spin network
    n_channels: int = 0          # convolutional network
    kernel_size: int = 0
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_steps: int = 500
    prune_no_improve_steps: int = 300
    prune_wall_clock_s: float = 600.0
    init_scale: float = 0.02
    init_seed: int | None = None  # None -> derived from sampler.seed

    def __post_init__(self):
        if self.representation not in ("qubit", "qudit"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(first_moment=np.zeros(n), second_moment=np.zeros(n))


@dataclass(frozen=True)
class StepStats:
    step: int
    wall_clock_s: float
    energy_mean: float
    energy_std: float
    acceptance_rate: float
    best_energy: float
    best_tour: np.ndarray


@dataclass(frozen=True)
class RunRecord:
    representation: str
    n_cities: int
    config: dict
    target_energy: float | None
    steps: list[StepStats]
    termination_reason: str
    total_time_s: float
    best_energy: float
    best_tour: np.ndarray
    time_to_target_s: float | None

    @property
    def converged(self) -> bool:
        if self.target_energy is None:
            return False
        return self.best_energy <= self.target_energy + TARGET_TOL

    @property
    def n_steps(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# ansatz adapters: tours in, flat real parameters out
# ---------------------------------------------------------------------------

class QuditCnnAnsatz:
    """Convolutional amplitude evaluated directly on the level sequence."""

    kind = "cnn"

    def __init__(self, params: nqs.CnnParams):
        self.params = params

    def log_psi_tours(self, tours: np.ndarray) -> np.ndarray:
        return np.asarray(nqs.cnn_log_psi(self.params, np.asarray(tours, dtype=float)))

    def log_derivatives(self, tours: np.ndarray) -> np.ndarray:
        return nqs.cnn_log_derivatives(self.params, np.asarray(tours, dtype=float))

    def get_flat(self) -> np.ndarray:
        return self.params.to_flat()

    def set_flat(self, flat: np.ndarray) -> None:
        self.params = nqs.CnnParams.from_flat(
            flat, self.params.kernel_size, self.params.n_channels
        )


class QubitRbmAnsatz:
    """Spin-network amplitude on the one-hot image of the tour."""

    kind = "rbm"

    def __init__(self, params: nqs.RbmParams):
        self.params = params

    def log_psi_tours(self, tours: np.ndarray) -> np.ndarray:
        return np.asarray(nqs.rbm_log_psi(self.params, tours_to_sigma(tours)))

    def log_derivatives(self, tours: np.ndarray) -> np.ndarray:
        return nqs.rbm_log_derivatives(self.params, tours_to_sigma(tours))

    def get_flat(self) -> np.ndarray:
        return self.params.to_flat()

    def set_flat(self, flat: np.ndarray) -> None:
        self.params = nqs.RbmParams.from_flat(
            flat, self.params.n_visible, self.params.n_hidden
        )


def derive_init_seed(sampler_seed: int) -> int:
    ss = np.random.SeedSequence(entropy=sampler_seed, spawn_key=(_INIT_SPAWN_KEY,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_ansatz(cfg: VmcConfig, n_cities: int):
    seed = cfg.init_seed if cfg.init_seed is not None else derive_init_seed(cfg.sampler.seed)
    if cfg.representation == "qudit":
        if cfg.n_channels < 1 or cfg.kernel_size < 1:
            raise ValueError("qudit representation needs n_channels and kernel_size >= 1")
        if cfg.kernel_size > n_cities:
            raise ValueError("kernel_size cannot exceed the number of cities")
        params = nqs.init_params(
            "cnn", (cfg.kernel_size, cfg.n_channels), cfg.init_scale, seed
        )
        return QuditCnnAnsatz(params)
    if cfg.n_hidden < 1:
        raise ValueError("qubit representation needs n_hidden >= 1")
    params = nqs.init_params(
        "rbm", (n_cities * n_cities, cfg.n_hidden), cfg.init_scale, seed
    )
    return QubitRbmAnsatz(params)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def local_energy(instance: Instance, representation: str, config: np.ndarray) -> float:
    """Diagonal local energy of a valid tour: its cyclic length.

    Identical in both representations because the constraint terms vanish
    on the valid manifold; a non-permutation argument means the sampler
    leaked an invalid state and is reported as an error.
    """
    if representation not in ("qubit", "qudit"):
        raise ValueError(f"unknown representation {representation!r}")
    config = np.asarray(config, dtype=np.int64)
    if not is_permutation(config, instance.n_cities):
        raise InvalidTourError(
            f"invalid configuration reached the energy estimator: {config.tolist()}"
        )
    return float(tour_lengths(instance, config[None, :])[0])


def local_energies(instance: Instance, configs: np.ndarray) -> np.ndarray:
    """Batched local energies with the same validity guard."""
    configs = np.asarray(configs, dtype=np.int64)
    expected = np.arange(1, instance.n_cities + 1)
    if not np.array_equal(np.sort(configs, axis=1), np.broadcast_to(expected, configs.shape)):
        raise InvalidTourError("invalid configuration reached the energy estimator")
    return tour_lengths(instance, configs)


def estimate_energy(sample: Sample, instance: Instance, representation: str) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 divisor) of the local
    energies over the recorded configurations."""
    if representation not in ("qubit", "qudit"):
        raise ValueError(f"unknown representation {representation!r}")
    if sample.configs.shape[0] < 2:
        raise ValueError("energy estimation needs at least two recorded configurations")
    energies = local_energies(instance, sample.configs)
    return float(energies.mean()), float(energies.std(ddof=1))


def estimate_gradient(
    local_energy_values: np.ndarray,
    log_derivatives: np.ndarray,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Covariance gradient of <H> over the flat real parameters:

        g_k = 2 Re( E[E_loc conj(O_k)] - E[E_loc] E[conj(O_k)] )

    with O_k = d log psi / d theta_k. Expectations are plain sample means
    unless explicit weights (e.g. an exact Born distribution) are given.
    """
    e = np.asarray(local_energy_values, dtype=float)
    o = np.asarray(log_derivatives)
    if o.ndim != 2 or o.shape[0] != e.shape[0]:
        raise ValueError(f"log-derivative matrix {o.shape} does not match {e.shape[0]} energies")
    if weights is None:
        if e.shape[0] < 2:
            raise ValueError("gradient estimation needs at least two configurations")
        w = np.full(e.shape[0], 1.0 / e.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != e.shape:
            raise ValueError("weights must match the number of configurations")
        w = w / w.sum()
    centered = w * (e - w @ e)
    return 2.0 * np.real(centered @ np.conj(o))


def adam_update(
    state: AdamState, params: np.ndarray, grad: np.ndarray, cfg: VmcConfig
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam step on the flat real parameter vector."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match params {params.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError(f"non-finite gradient at Adam step {state.step_count + 1}")
    t = state.step_count + 1
    m = cfg.adam_beta1 * state.first_moment + (1 - cfg.adam_beta1) * grad
    v = cfg.adam_beta2 * state.second_moment + (1 - cfg.adam_beta2) * grad * grad
    m_hat = m / (1 - cfg.adam_beta1 ** t)
    v_hat = v / (1 - cfg.adam_beta2 ** t)
    new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return AdamState(first_moment=m, second_moment=v, step_count=t), new_params


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

SinkFn = Callable[[dict], None]


def _config_echo(cfg: VmcConfig) -> dict:
    return asdict(cfg)


def train(
    instance: Instance,
    cfg: VmcConfig,
    target_energy: float | None = None,
    sink: SinkFn | None = None,
) -> RunRecord:
    """Run the sample/estimate/update loop and collect per-step statistics.

    The optional sink receives one JSON-serializable dict per emitted line
    (header, then one per step, then a footer), enabling streaming JSONL
    output that stays parseable mid-run.
    """
    from . import __version__

    ansatz = build_ansatz(cfg, instance.n_cities)
    chains = init_chains(instance, cfg.sampler)
    theta = ansatz.get_flat()
    adam = AdamState.zeros(theta.shape[0])

    if sink is not None:
        sink({
            "type": "header",
            "version": __version__,
            "n_cities": instance.n_cities,
            "representation": cfg.representation,
            "target_energy": target_energy,
            "config": _config_echo(cfg),
        })

    steps: list[StepStats] = []
    best = math.inf
    best_tour: np.ndarray | None = None
    last_improve_step = 0
    time_to_target: float | None = None
    reason = "max-steps"
    t0 = time.perf_counter()

    for step in range(1, cfg.max_steps + 1):
        sample = run_chains(chains, ansatz.log_psi_tours, cfg.sampler)
        energies = local_energies(instance, sample.configs)
        e_mean = float(energies.mean())
        e_std = float(energies.std(ddof=1)) if energies.size > 1 else 0.0

        i_min = int(np.argmin(energies))
        if energies[i_min] < best - IMPROVEMENT_TOL:
            if math.isfinite(best):  # the first sample only sets the baseline
                last_improve_step = step
            best = float(energies[i_min])
            best_tour = sample.configs[i_min].copy()

        wall = time.perf_counter() - t0
        stats = StepStats(
            step=step,
            wall_clock_s=wall,
            energy_mean=e_mean,
            energy_std=e_std,
            acceptance_rate=sample.acceptance_rate,
            best_energy=best,
            best_tour=best_tour,
        )
        steps.append(stats)
        if sink is not None:
            sink({
                "type": "step",
                "step": step,
                "wall_clock_s": wall,
                "energy_mean": e_mean,
                "energy_std": e_std,
                "acceptance_rate": sample.acceptance_rate,
                "best_energy": best,
                "best_tour": best_tour.tolist(),
            })

        if target_energy is not None and best <= target_energy + TARGET_TOL:
            time_to_target = wall
            reason = "target-reached"
            break
        if step - last_improve_step >= cfg.prune_no_improve_steps:
            reason = "no-improvement"
            break
        if wall >= cfg.prune_wall_clock_s:
            reason = "time-limit"
            break
        if step == cfg.max_steps:
            reason = "max-steps"
            break

        o_matrix = ansatz.log_derivatives(sample.configs)
        grad = estimate_gradient(energies, o_matrix)
        adam, theta = adam_update(adam, theta, grad, cfg)
        ansatz.set_flat(theta)

    total = time.perf_counter() - t0
    record = RunRecord(
        representation=cfg.representation,
        n_cities=instance.n_cities,
        config=_config_echo(cfg),
        target_energy=target_energy,
        steps=steps,
        termination_reason=reason,
        total_time_s=total,
        best_energy=best,
        best_tour=best_tour,
        time_to_target_s=time_to_target,
    )
    if sink is not None:
        sink({
            "type": "footer",
            "reason": reason,
            "total_time_s": total,
            "n_steps": len(steps),
            "best_energy": best,
            "best_tour": best_tour.tolist(),
            "time_to_target_s": time_to_target,
        })
    return record
