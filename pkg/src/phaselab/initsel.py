"""Multi-start initialization: many short HIO trials, keep the best, run long.

Trial ``j`` starts from ``random_init(n, m, base_seed + j)``. After
``s_iters`` HIO steps each trial is scored by the residual of the image it
currently represents (the nonnegative in-support crop, re-embedded), the
lowest score wins with ties going to the lower trial index, and the winning
HIO state is continued for ``n_iters`` more steps.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import check_grid, crop, embed, support_mask
from .projections import HIOParams, HIOState, residual, run


@dataclass(frozen=True)
class InitParams:
    m_starts: int = 10
    s_iters: int = 20
    n_iters: int = 500
    beta: float = 0.9
    base_seed: int = 0

    def __post_init__(self):
        if self.m_starts < 1 or self.s_iters < 1 or self.n_iters < 0:
            raise ValueError("need m_starts >= 1, s_iters >= 1, n_iters >= 0")


PAPER_INIT = InitParams(m_starts=50, s_iters=50, n_iters=1000, beta=0.9)


@dataclass
class MultiStartResult:
    field: np.ndarray
    residual_trace: list
    trial_scores: list
    winner: int
    params: InitParams

    @property
    def provenance(self):
        p = self.params
        return {
            "m_starts": p.m_starts, "s_iters": p.s_iters, "n_iters": p.n_iters,
            "beta": p.beta, "base_seed": p.base_seed, "winner": self.winner,
        }


def random_init(n, m, seed):
    """Uniform [0, 255] pixels inside the support, zeros outside."""
    check_grid(n, m)
    rng = np.random.default_rng(seed)
    field = np.zeros((m, m))
    field[:n, :n] = rng.uniform(0.0, 255.0, size=(n, n))
    return field


def reconstruction_residual(field, y, n):
    """Residual of the image a field represents: ``embed(crop(field, n))``."""
    mag = y.y if hasattr(y, "y") else np.asarray(y)
    return residual(embed(crop(field, n), mag.shape[0]), mag)


def multi_start(y, n, params=InitParams(), workers=1):
    """Run the initialization stage; see the module docstring."""
    mag = y.y if hasattr(y, "y") else np.asarray(y)
    m = mag.shape[0]
    support = support_mask(n, m)
    short = HIOParams(beta=params.beta, iterations=params.s_iters)

    def trial(j):
        state = run(mag, random_init(n, m, params.base_seed + j), short, support)
        return state, reconstruction_residual(state.iterate, mag, n)

    trials = range(params.m_starts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(trial, trials))
    else:
        results = [trial(j) for j in trials]
    scores = [r for _, r in results]
    winner = min(range(len(scores)), key=lambda j: (scores[j], j))
    state: HIOState = results[winner][0]
    if params.n_iters > 0:
        state = run(mag, state, HIOParams(beta=params.beta, iterations=params.n_iters), support)
    return MultiStartResult(state.iterate, state.residual_trace, scores, winner, params)
