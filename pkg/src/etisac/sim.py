"""Echo synthesis, the matched-filter direction estimator and Monte-Carlo RMSE."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .array import ArrayConfig, covariance, steering_rx
from .crb import crb_direction
from .system import IsacSystem

__all__ = [
    "gen_symbols",
    "gen_echo",
    "mf_grid",
    "mf_estimate",
    "TrialResult",
    "MonteCarloResult",
    "monte_carlo_mse",
    "paired_sign_test",
    "trials_csv",
    "DEFAULT_SYMBOLS",
]

DEFAULT_SYMBOLS = 32
GRID_STEP_DEG = 0.1


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _cn(rng, shape, var=1.0):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(var / 2)


def gen_symbols(n_c: int, T: int, kind: str = "gaussian", seed=None) -> np.ndarray:
    """Unit-power, mutually uncorrelated data streams (``n_c x T``)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = _rng(seed)
    if kind == "gaussian":
        return _cn(rng, (n_c, T))
    if kind == "qpsk":
        bits = rng.integers(0, 4, size=(n_c, T))
        return np.exp(1j * (math.pi / 4 + math.pi / 2 * bits))
    raise ValueError(f"unknown symbol kind {kind!r}")


def gen_echo(W: np.ndarray, C: np.ndarray, partition, bundles, sp, seed=None, alpha=None) -> np.ndarray:
    """Received sensing block ``g sum_k sqrt(l_k) alpha_k b_k a_k^H W C + Z``.

    Delays are folded into the phases of ``alpha`` (narrowband discrete model).
    """
    rng = _rng(seed)
    K = len(bundles)
    if alpha is None:
        alpha = _cn(rng, K)
    X = W @ C
    l = partition.lengths
    n_r = bundles[0].b.shape[0]
    Y = np.zeros((n_r, X.shape[1]), dtype=complex)
    for k, bnd in enumerate(bundles):
        Y += (sp.g * math.sqrt(l[k]) * alpha[k]) * np.outer(bnd.b, bnd.a.conj() @ X)
    if sp.sigma_s2 > 0:
        Y += _cn(rng, Y.shape, sp.sigma_s2)
    return Y


def mf_grid(step_deg: float = GRID_STEP_DEG, lo_deg: float = -90.0, hi_deg: float = 90.0) -> np.ndarray:
    n = int(round((hi_deg - lo_deg) / step_deg)) + 1
    return np.radians(np.linspace(lo_deg, hi_deg, n))


def mf_estimate(Y: np.ndarray, cfg: ArrayConfig, grid=None, _steer=None) -> float:
    """Grid point maximizing ``||b(phi)^H Y||``; ties go to the smallest ``|phi|``, then smallest ``phi``."""
    grid = mf_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    B = steering_rx(cfg, grid) if _steer is None else _steer
    score = np.sum(np.abs(B.conj().T @ Y) ** 2, axis=1)
    best = score.max()
    # exact ties only; tolerance-based ties would make the estimate noise dependent
    cand = np.flatnonzero(score == best)
    if cand.size == 1:
        return float(grid[cand[0]])
    sub = grid[cand]
    return float(sub[np.lexsort((sub, np.abs(sub)))[0]])


@dataclass(frozen=True)
class TrialResult:
    trial: int
    phi_hat: float
    phi_true: float

    @property
    def squared_error(self) -> float:
        return (self.phi_hat - self.phi_true) ** 2


@dataclass
class MonteCarloResult:
    rmse: float
    root_crb: float
    n_trials: int
    seed: int
    n_symbols: int
    trials: list

    def summary(self) -> dict:
        return {"rmse": self.rmse, "root_crb": self.root_crb, "n_trials": self.n_trials,
                "seed": self.seed, "n_symbols": self.n_symbols}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    @property
    def errors(self) -> np.ndarray:
        return np.array([abs(t.phi_hat - t.phi_true) for t in self.trials])


def _sim_sensing(sp, T: int):
    # T unit-period samples carry the information of a t_s = T observation
    return dataclasses.replace(sp, t_s=float(T))


def monte_carlo_mse(system: IsacSystem, W: np.ndarray, n_trials: int, seed: int = 0,
                    n_symbols: int = DEFAULT_SYMBOLS, symbols: str = "gaussian", grid=None) -> MonteCarloResult:
    """RMSE of the matched-filter direction estimate over independent trials.

    Trial ``i`` draws RCS, noise and symbols from ``default_rng([seed, i])``, so
    two designs run with the same seed see identical randomness.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    grid = mf_grid() if grid is None else np.asarray(grid, dtype=float)
    steer = steering_rx(system.cfg, grid)
    phi_true = system.partition.pose.phi_o
    sp = _sim_sensing(system.sensing, n_symbols)
    trials = []
    for i in range(n_trials):
        rng = np.random.default_rng([seed, i])
        alpha = _cn(rng, system.partition.K)
        C = gen_symbols(W.shape[1], n_symbols, symbols, rng)
        Y = gen_echo(W, C, system.partition, system.bundles, sp, rng, alpha=alpha)
        trials.append(TrialResult(i, mf_estimate(Y, system.cfg, grid, _steer=steer), phi_true))
    rmse = math.sqrt(sum(t.squared_error for t in trials) / n_trials)
    crb_phi = crb_direction(system.partition, system.bundles, covariance(W), sp)
    return MonteCarloResult(rmse=rmse, root_crb=math.sqrt(crb_phi), n_trials=n_trials,
                            seed=seed, n_symbols=n_symbols, trials=trials)


def paired_sign_test(better: MonteCarloResult, worse: MonteCarloResult) -> dict:
    """One-sided sign test that ``better`` has smaller per-trial error than ``worse``.

    Trials with equal errors carry no information and are dropped.
    """
    a, b = better.errors, worse.errors
    if a.shape != b.shape:
        raise ValueError("paired test needs equal trial counts")
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    n = wins + losses
    p = binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return {"wins": wins, "losses": losses, "ties": int(a.size - n), "p_value": float(p)}


def trials_csv(result: MonteCarloResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["trial", "phi_hat", "error"])
    for t in result.trials:
        w.writerow([t.trial, repr(t.phi_hat), repr(t.phi_hat - t.phi_true)])
    return buf.getvalue()
