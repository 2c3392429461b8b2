"""
hgr/dual.py
Neural estimation of the HGR correlation through the variational dual of the
chi^2-divergence.  Product-measure samples come from permuting the sensitive rows,
either globally (independence) or within strata of equal outcome (separation).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config.app_config import DEFAULT_CRITIC_STEPS, DEFAULT_HIDDEN_WIDTH
from hgr.exact import f_star
from tensor_nn import AdamOptimizer, DenseNet, as_matrix, as_vector, check_rows, load_network, save_network
from utils.errors import InputError, ParameterError
from utils.logger import get_logger

logger = get_logger(__name__)


def chi2_dual_objective(v_values_joint, v_values_product) -> float:
    """mean(V on joint samples) - mean(f*(V on product samples))."""
    vj = np.asarray(v_values_joint, dtype=np.float64).ravel()
    vp = np.asarray(v_values_product, dtype=np.float64).ravel()
    if vj.size == 0 or vp.size == 0:
        raise InputError("dual objective needs non-empty joint and product samples")
    return float(vj.mean() - f_star(vp).mean())


@dataclass(frozen=True)
class HgrEstimate:
    r_value: float
    rho_hat: float
    degenerate: bool = False
    singleton_strata: bool = False

    @classmethod
    def from_dual(cls, r_value: float, **flags) -> "HgrEstimate":
        return cls(r_value=float(r_value), rho_hat=float(np.sqrt(np.clip(r_value, 0.0, 1.0))), **flags)


# ----------------------------------------------------------------------
# Product-measure sampling
# ----------------------------------------------------------------------
def permute_rows(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n)


def permute_within_strata(strata: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, bool]:
    """Index permutation that only shuffles rows sharing a stratum label.

    Returns the permutation and whether some stratum had a single row (left in place).
    """
    strata = np.asarray(strata).ravel()
    perm = np.arange(len(strata))
    singleton = False
    for level in np.unique(strata):
        idx = np.flatnonzero(strata == level)
        if len(idx) == 1:
            singleton = True
            continue
        perm[idx] = idx[rng.permutation(len(idx))]
    return perm, singleton


# ----------------------------------------------------------------------
# Critic
# ----------------------------------------------------------------------
class DualCritic:
    """V(signal, A[, Y]) -> scalar, trained by ascent on the chi^2 dual."""

    def __init__(self, net: DenseNet, signal_width: int, conditional: bool = False):
        self.net = net
        self.signal_width = int(signal_width)
        self.conditional = conditional

    @classmethod
    def build(
        cls,
        signal_width: int,
        sensitive_width: int,
        conditional: bool = False,
        width: int = DEFAULT_HIDDEN_WIDTH,
        depth: int = 3,
        dropout_rate: float = 0.0,
        seed: int = 0,
    ) -> "DualCritic":
        input_width = signal_width + sensitive_width + (1 if conditional else 0)
        net = DenseNet.build(input_width, [width] * depth, 1, "identity", dropout_rate=dropout_rate, seed=seed)
        return cls(net, signal_width, conditional)

    def _inputs(self, signal, a, y=None) -> np.ndarray:
        parts = [signal, a]
        if self.conditional:
            if y is None:
                raise InputError("a separation critic needs the outcome column")
            parts.append(np.asarray(y, dtype=np.float64).reshape(-1, 1))
        return np.hstack(parts)

    def value(self, signal, a, a_product, y=None) -> float:
        """Dual objective in inference mode."""
        vj = self.net.forward(self._inputs(signal, a, y))[:, 0]
        vp = self.net.forward(self._inputs(signal, a_product, y))[:, 0]
        return chi2_dual_objective(vj, vp)

    def objective_and_gradients(self, signal, a, a_product, y=None):
        """R_V, dR/dparams and dR/dsignal from one training forward over joint+product rows."""
        n = len(signal)
        stacked = np.vstack([self._inputs(signal, a, y), self._inputs(signal, a_product, y)])
        v = self.net.forward(stacked, training=True)[:, 0]
        vj, vp = v[:n], v[n:]
        r_value = chi2_dual_objective(vj, vp)
        dv = np.concatenate([np.full(n, 1.0 / n), -(vp / 2.0 + 1.0) / n]).reshape(-1, 1)
        grads = self.net.backward(dv)
        w = self.signal_width
        d_signal = grads.input[:n, :w] + grads.input[n:, :w]
        return r_value, grads.params, d_signal

    def to_dict(self) -> dict:
        return {"signal_width": self.signal_width, "conditional": self.conditional, "net": save_network(self.net)}

    @classmethod
    def from_dict(cls, doc: dict) -> "DualCritic":
        try:
            return cls(load_network(doc["net"]), doc["signal_width"], bool(doc["conditional"]))
        except KeyError as e:
            raise InputError(f"malformed critic document: missing {e}") from e


# ----------------------------------------------------------------------
# Stand-alone estimators
# ----------------------------------------------------------------------
def _fit_critic(critic, signal, a, y, strata, steps, rng, batch_size, learning_rate, eval_rounds):
    n = len(signal)
    optimizer = AdamOptimizer(critic.net.parameters(), learning_rate=learning_rate)
    batch = n if batch_size is None else min(batch_size, n)
    singleton = False
    for _ in range(steps):
        idx = rng.choice(n, size=batch, replace=False) if batch < n else np.arange(n)
        if strata is None:
            perm = permute_rows(batch, rng)
        else:
            perm, flagged = permute_within_strata(strata[idx], rng)
            singleton = singleton or flagged
        a_b = a[idx]
        y_b = None if y is None else y[idx]
        _, grads, _ = critic.objective_and_gradients(signal[idx], a_b, a_b[perm], y_b)
        optimizer.step(grads, ascend=True)

    values = []
    for _ in range(eval_rounds):
        if strata is None:
            perm = permute_rows(n, rng)
        else:
            perm, flagged = permute_within_strata(strata, rng)
            singleton = singleton or flagged
        values.append(critic.value(signal, a, a[perm], y))
    return float(np.mean(values)), singleton


def _prepare(scores, sensitive):
    signal = as_matrix(scores, "scores")
    a = as_matrix(sensitive, "sensitive")
    check_rows(("scores", signal), ("sensitive", a))
    return signal, a


def estimate_hgr_independence(
    scores,
    sensitive,
    critic: Optional[DualCritic] = None,
    steps: int = DEFAULT_CRITIC_STEPS,
    rng: Optional[np.random.Generator] = None,
    batch_size: Optional[int] = 1000,
    learning_rate: float = 5e-3,
    eval_rounds: int = 5,
) -> HgrEstimate:
    """Estimate rho(scores, A) by training ``critic`` on permuted-A product samples."""
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    signal, a = _prepare(scores, sensitive)
    if np.all(np.ptp(signal, axis=0) == 0):
        logger.warning("constant scores: HGR estimate set to 0")
        return HgrEstimate(r_value=0.0, rho_hat=0.0, degenerate=True)
    rng = rng if rng is not None else np.random.default_rng(0)
    if critic is None:
        critic = DualCritic.build(signal.shape[1], a.shape[1], seed=int(rng.integers(2**31)))
    r_value, _ = _fit_critic(critic, signal, a, None, None, steps, rng, batch_size, learning_rate, eval_rounds)
    return HgrEstimate.from_dual(r_value)


def estimate_hgr_separation(
    scores,
    sensitive,
    outcome,
    critic: Optional[DualCritic] = None,
    steps: int = DEFAULT_CRITIC_STEPS,
    rng: Optional[np.random.Generator] = None,
    batch_size: Optional[int] = 1000,
    learning_rate: float = 5e-3,
    eval_rounds: int = 5,
) -> HgrEstimate:
    """Estimate the separation dependence of scores on A given a discrete outcome.

    Product samples draw A' ~ A | Y by permuting A inside each outcome stratum.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    signal, a = _prepare(scores, sensitive)
    y = as_vector(outcome, "outcome")
    check_rows(("scores", signal), ("outcome", y))
    if np.all(np.ptp(signal, axis=0) == 0):
        logger.warning("constant scores: separation estimate set to 0")
        return HgrEstimate(r_value=0.0, rho_hat=0.0, degenerate=True)
    rng = rng if rng is not None else np.random.default_rng(0)
    if critic is None:
        critic = DualCritic.build(signal.shape[1], a.shape[1], conditional=True, seed=int(rng.integers(2**31)))
    r_value, singleton = _fit_critic(critic, signal, a, y, y, steps, rng, batch_size, learning_rate, eval_rounds)
    if singleton:
        logger.warning("an outcome stratum had a single row in a batch; its permutation was the identity")
    return HgrEstimate.from_dual(r_value, singleton_strata=singleton)
