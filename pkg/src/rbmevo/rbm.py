"""Bernoulli restricted Boltzmann machine with persistent contrastive divergence.

Training runs one pass over the data per call: the data is shuffled, split
into minibatches, and each minibatch receives a fixed number of parameter
updates. Every update takes its positive statistics from the clamped
minibatch (hidden probabilities, computed once) and its negative statistics
from a persistent fantasy chain that is advanced one Gibbs step per update.
Sampling (generation, completion) runs free alternating Gibbs chains on the
visible layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from scipy.special import expit

__all__ = ["Rbm", "RbmConfig", "sample_layer", "ABLATIONS"]

#: Parameter groups that can be frozen at zero for the whole lifetime of a model.
ABLATIONS = ("full", "weights_only", "biases_only")

_SNAPSHOT_MAGIC = "rbmevo-snapshot v1"
_INIT_STD = 0.01  # weights and biases start at N(0, 0.01^2)


@dataclass
class RbmConfig:
    """Hyperparameters of one RBM.

    iterations is the number of weight updates applied to each minibatch;
    gibbs_steps (defaulting to iterations) is the chain length used when
    sampling new genomes.
    """

    num_hidden: int
    learning_rate: float = 0.01
    iterations: int = 20
    batch_size: int = 10
    ablation: str = "full"
    gibbs_steps: int | None = None
    sample_positive_hidden: bool = False
    seed: int | None = None

    def __post_init__(self):
        if self.num_hidden < 1:
            raise ValueError("num_hidden must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.gibbs_steps is not None and self.gibbs_steps < 1:
            raise ValueError("gibbs_steps must be >= 1")

    def resolved_gibbs_steps(self) -> int:
        return self.gibbs_steps if self.gibbs_steps is not None else self.iterations


def sample_layer(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Element-wise independent Bernoulli draws from activation probabilities."""
    p = np.asarray(probs)
    return (rng.random(p.shape) < p).astype(np.uint8)


class Rbm:
    """Binary visible/hidden units, weights of shape (num_hidden, num_visible)."""

    def __init__(self, num_visible: int, config: RbmConfig, rng: np.random.Generator | None = None):
        if num_visible < 1:
            raise ValueError("num_visible must be >= 1")
        if rng is None:
            rng = np.random.default_rng(config.seed)
        self.num_visible = num_visible
        self.num_hidden = config.num_hidden
        self.config = config
        self.weights = rng.normal(0.0, _INIT_STD, size=(config.num_hidden, num_visible))
        self.visible_bias = rng.normal(0.0, _INIT_STD, size=num_visible)
        self.hidden_bias = rng.normal(0.0, _INIT_STD, size=config.num_hidden)
        if config.ablation == "biases_only":
            self.weights[:] = 0.0
        elif config.ablation == "weights_only":
            self.visible_bias[:] = 0.0
            self.hidden_bias[:] = 0.0
        # Persistent fantasy chain, one row per minibatch slot.
        self.fantasy_visible = np.zeros((config.batch_size, num_visible))
        self._fantasy_hidden_probs: np.ndarray | None = None

    def hidden_probs(self, visible: np.ndarray) -> np.ndarray:
        """P(h_j = 1 | v) = sigmoid(sum_i w_ji v_i + b_j); accepts a vector or matrix."""
        v = np.asarray(visible, dtype=np.float64)
        if v.shape[-1] != self.num_visible:
            raise ValueError(f"visible length {v.shape[-1]} != {self.num_visible}")
        return expit(v @ self.weights.T + self.hidden_bias)

    def visible_probs(self, hidden: np.ndarray) -> np.ndarray:
        """P(v_i = 1 | h) = sigmoid(sum_j w_ji h_j + a_i); accepts a vector or matrix."""
        h = np.asarray(hidden, dtype=np.float64)
        if h.shape[-1] != self.num_hidden:
            raise ValueError(f"hidden length {h.shape[-1]} != {self.num_hidden}")
        return expit(h @ self.weights + self.visible_bias)

    def _sample(self, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return (rng.random(probs.shape) < probs).astype(np.float64)

    def train(self, data: np.ndarray, rng: np.random.Generator) -> "Rbm":
        """One pass of persistent contrastive divergence over the training set."""
        X = np.asarray(data, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a nonempty (count, n) array")
        if X.shape[1] != self.num_visible:
            raise ValueError(f"genome length {X.shape[1]} != num_visible {self.num_visible}")
        B = self.config.batch_size
        if B > X.shape[0]:
            raise ValueError(f"batch_size {B} exceeds training set size {X.shape[0]}")
        perm = rng.permutation(X.shape[0])
        for lo in range(0, X.shape[0], B):
            batch = X[perm[lo:lo + B]]
            for _ in range(self.config.iterations):
                self._update(batch, rng)
        if not (
            np.isfinite(self.weights).all()
            and np.isfinite(self.visible_bias).all()
            and np.isfinite(self.hidden_bias).all()
        ):
            raise FloatingPointError("RBM parameters diverged during training")
        return self

    def _update(self, batch: np.ndarray, rng: np.random.Generator) -> None:
        cfg = self.config
        h_pos = self.hidden_probs(batch)
        if cfg.sample_positive_hidden:
            h_pos = self._sample(h_pos, rng)
        # Advance the fantasy chain one Gibbs step. The cached hidden
        # probabilities were computed just before the previous parameter
        # update, so the chain's hidden samples always use the weights under
        # which the last negative statistics were measured.
        if self._fantasy_hidden_probs is None:
            self._fantasy_hidden_probs = self.hidden_probs(self.fantasy_visible)
        h_fantasy = self._sample(self._fantasy_hidden_probs, rng)
        self.fantasy_visible = self._sample(self.visible_probs(h_fantasy), rng)
        h_neg = self.hidden_probs(self.fantasy_visible)
        self._fantasy_hidden_probs = h_neg

        lr = cfg.learning_rate
        b = batch.shape[0]
        c = self.fantasy_visible.shape[0]
        if cfg.ablation != "biases_only":
            self.weights += lr * (h_pos.T @ batch / b - h_neg.T @ self.fantasy_visible / c)
        if cfg.ablation != "weights_only":
            self.visible_bias += lr * (batch.mean(axis=0) - self.fantasy_visible.mean(axis=0))
            self.hidden_bias += lr * (h_pos.mean(axis=0) - h_neg.mean(axis=0))

    def _chain(
        self,
        count: int,
        steps: int,
        rng: np.random.Generator,
        positions: np.ndarray | None = None,
        values: np.ndarray | None = None,
    ) -> np.ndarray:
        v = (rng.random((count, self.num_visible)) < 0.5).astype(np.float64)
        clamped = positions is not None and positions.size > 0
        if clamped:
            v[:, positions] = values
        for _ in range(steps):
            h = self._sample(self.hidden_probs(v), rng)
            v = self._sample(self.visible_probs(h), rng)
            if clamped:
                v[:, positions] = values
        return v.astype(np.uint8)

    def generate(
        self, count: int, gibbs_steps: int | None = None, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """Sample ``count`` genomes: uniform-random visible start, then free Gibbs steps."""
        if count < 1:
            raise ValueError("count must be >= 1")
        if rng is None:
            rng = np.random.default_rng(self.config.seed)
        steps = gibbs_steps if gibbs_steps is not None else self.config.resolved_gibbs_steps()
        if steps < 1:
            raise ValueError("gibbs_steps must be >= 1")
        return self._chain(count, steps, rng)

    def complete_many(
        self,
        known_positions: Sequence[int],
        known_values: np.ndarray,
        gibbs_steps: int | None = None,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Complete a batch of genomes, clamping the same positions in every row.

        known_values has shape (count, len(known_positions)); clamped units are
        reset after every visible-layer sample and returned unchanged.
        """
        if rng is None:
            rng = np.random.default_rng(self.config.seed)
        pos = np.asarray(known_positions, dtype=np.int64)
        if pos.size and (pos.min() < 0 or pos.max() >= self.num_visible):
            raise ValueError("clamped position out of range")
        if len(np.unique(pos)) != pos.size:
            raise ValueError("duplicate clamped positions")
        vals = np.atleast_2d(np.asarray(known_values, dtype=np.float64))
        if vals.shape[1] != pos.size:
            raise ValueError(f"known_values width {vals.shape[1]} != positions {pos.size}")
        steps = gibbs_steps if gibbs_steps is not None else self.config.resolved_gibbs_steps()
        return self._chain(vals.shape[0], steps, rng, positions=pos, values=vals)

    def complete(
        self,
        known_positions: Sequence[int],
        known_values: Sequence[int],
        gibbs_steps: int | None = None,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Complete a single genome from clamped values at known_positions."""
        vals = np.asarray(known_values, dtype=np.float64)[None, :]
        return self.complete_many(known_positions, vals, gibbs_steps, rng)[0]

    def save(self, path_or_stream: str | IO[str]) -> None:
        """Text snapshot (debugging aid): sizes, weights row-major, then biases."""
        own = isinstance(path_or_stream, str)
        fh = open(path_or_stream, "w", newline="\n") if own else path_or_stream
        try:
            fh.write(f"{_SNAPSHOT_MAGIC}\n")
            fh.write(f"{self.num_visible} {self.num_hidden}\n")
            for row in self.weights:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
            fh.write(" ".join(f"{x:.17g}" for x in self.visible_bias) + "\n")
            fh.write(" ".join(f"{x:.17g}" for x in self.hidden_bias) + "\n")
        finally:
            if own:
                fh.close()

    @classmethod
    def load(cls, path_or_stream: str | IO[str], config: RbmConfig | None = None) -> "Rbm":
        """Rebuild a model from a snapshot; the fantasy chain restarts at zeros."""
        own = isinstance(path_or_stream, str)
        fh = open(path_or_stream) if own else path_or_stream
        try:
            magic = fh.readline().strip()
            if magic != _SNAPSHOT_MAGIC:
                raise ValueError(f"not an RBM snapshot (header {magic!r})")
            n, h = (int(t) for t in fh.readline().split())
            weights = np.array(
                [[float(t) for t in fh.readline().split()] for _ in range(h)]
            ).reshape(h, n)
            visible_bias = np.array([float(t) for t in fh.readline().split()])
            hidden_bias = np.array([float(t) for t in fh.readline().split()])
        finally:
            if own:
                fh.close()
        if visible_bias.shape != (n,) or hidden_bias.shape != (h,):
            raise ValueError("snapshot bias sizes do not match header")
        if config is None:
            config = RbmConfig(num_hidden=h)
        elif config.num_hidden != h:
            raise ValueError("config.num_hidden does not match snapshot")
        model = cls(n, config, rng=np.random.default_rng(0))
        model.weights = weights
        model.visible_bias = visible_bias
        model.hidden_bias = hidden_bias
        model.fantasy_visible = np.zeros((config.batch_size, n))
        model._fantasy_hidden_probs = None
        return model
