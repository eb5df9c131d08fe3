"""Monte Carlo risk estimation.

Every trial draws from its own Philox substream keyed by the trial index, so
results do not depend on thread scheduling.  Per-trial errors are collected in
trial order and reduced with numpy's pairwise summation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Tuple

import numpy as np

from models.group_sparse import GenModelParams, random_signal
from sensing.measurement import SensingConfig, observe, sample_matrix
from utils.rng import Purpose, substream
from utils.validation import InvalidInputError, require_multiple, require_positive_int

logger = logging.getLogger(__name__)

MODE_PRIOR = "prior_averaged"
MODE_WORST = "worst_case_over_sampled_signals"


class SignalSource(Protocol):
    def sample(self, rng: np.random.Generator) -> np.ndarray:
        ...


class Decoder(Protocol):
    name: str

    def decode(self, y: np.ndarray, A: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class HardPrior:
    """Uniform distribution on ``{xi v : v in V}``."""

    n: int
    k: int
    xi: float

    def __post_init__(self):
        require_multiple(self.n, self.k)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        B = self.n // self.k
        digits = rng.integers(0, 2 * B, size=self.k)
        x = np.zeros(self.n)
        x[np.arange(self.k) * B + digits // 2] = np.where(digits % 2 == 0, self.xi, -self.xi)
        return x


@dataclass(frozen=True)
class GroupSparsePrior:
    """Random members of S_k(x_max): uniform position and amplitude per block."""

    params: GenModelParams

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return random_signal(self.params, rng)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    m: int
    n: int
    k: int
    alpha: float
    xi: float
    decoder: str
    sq_error: float
    seed: int


@dataclass
class RiskEstimate:
    mean_sq_error: float
    std_error: float
    trials: int
    mode: str
    trial_records: Tuple[TrialRecord, ...] = field(default=(), repr=False)


def _summarize(errors: np.ndarray) -> Tuple[float, float]:
    mean = float(np.sum(errors) / errors.shape[0])
    if errors.shape[0] < 2:
        return mean, 0.0
    return mean, float(np.std(errors, ddof=1) / np.sqrt(errors.shape[0]))


def estimate_risk(
    source: SignalSource,
    decoder: Decoder,
    cfg: SensingConfig,
    trials: int,
    mode: str = MODE_PRIOR,
    threads: int = 1,
    panel_size: int = 16,
    k: Optional[int] = None,
    xi: float = float("nan"),
    record_trials: bool = False,
) -> RiskEstimate:
    """
    Estimate the mean squared recovery error of a decoder.

    ``prior_averaged`` draws a fresh signal from ``source`` in every trial.
    ``worst_case_over_sampled_signals`` draws a panel of signals, runs
    ``trials`` noise draws for each and reports the worst per-signal mean.

    Args:
        source: Signal distribution with a ``sample(rng)`` method
        decoder: Object with ``decode(y, A)``
        cfg: Sensing configuration (matrix, noise and seed)
        trials: Trials (per panel signal in worst-case mode)
        mode: ``prior_averaged`` or ``worst_case_over_sampled_signals``
        threads: Worker threads
        panel_size: Number of panel signals in worst-case mode
        k: Block count echoed into trial records
        xi: Amplitude echoed into trial records
        record_trials: Keep one TrialRecord per trial

    Returns:
        RiskEstimate
    """
    require_positive_int("trials", trials)
    require_positive_int("threads", threads)
    if mode not in (MODE_PRIOR, MODE_WORST):
        raise InvalidInputError(f"unknown risk mode {mode!r}")

    fixed_A = None if cfg.resample_per_trial else sample_matrix(cfg)

    def run_trial(signal_index: int, trial: int, x: Optional[np.ndarray]) -> float:
        if x is None:
            x = source.sample(substream(cfg.seed, Purpose.SIGNAL, trial))
        A = fixed_A if fixed_A is not None else sample_matrix(cfg, draw=1 + trial)
        noise_rng = substream(cfg.seed, Purpose.NOISE, signal_index, trial)
        y = observe(A, x, cfg.alpha, noise_rng)
        x_hat = decoder.decode(y, A)
        diff = x_hat - x
        return float(diff @ diff)

    def run_batch(signal_index: int, x: Optional[np.ndarray]) -> np.ndarray:
        if threads == 1:
            errors = [run_trial(signal_index, t, x) for t in range(trials)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                errors = list(pool.map(lambda t: run_trial(signal_index, t, x), range(trials)))
        return np.array(errors, dtype=np.float64)

    records: List[TrialRecord] = []
    if mode == MODE_PRIOR:
        errors = run_batch(0, None)
        mean, se = _summarize(errors)
        chosen = errors
    else:
        require_positive_int("panel_size", panel_size)
        best = None
        for p in range(panel_size):
            x = source.sample(substream(cfg.seed, Purpose.PANEL, p))
            errors = run_batch(p, x)
            mean_p, se_p = _summarize(errors)
            if best is None or mean_p > best[0]:
                best = (mean_p, se_p, errors)
        mean, se, chosen = best

    if record_trials:
        records = [
            TrialRecord(t, cfg.m, cfg.n, k if k is not None else 0, cfg.alpha, xi, decoder.name, float(e), cfg.seed)
            for t, e in enumerate(chosen)
        ]
    logger.debug(f"Risk m={cfg.m}, alpha={cfg.alpha}, {decoder.name}, {mode}: {mean:.6g} +/- {se:.3g}")
    return RiskEstimate(mean, se, trials, mode, tuple(records))
