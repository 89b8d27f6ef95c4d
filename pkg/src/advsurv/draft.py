"""Deep regularized AFT baseline (DRAFT): an MLP-parameterized log-normal
time-to-event likelihood with censoring, plus a differentiable within-batch
ranking reward that lower-bounds the concordance index.

The model is log t = mu(x) + xi with xi ~ Normal(0, sigma(x)^2), both heads
MLP-parameterized. Non-censored records contribute the log-normal log-density
of t (including the 1/(sigma*t) Jacobian by default; a flag drops it to
match the bare normal-density-of-standardized-residual variant); censored
records contribute log survival, log(1 - Phi(nu)).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .data import SurvivalDataset
from .ndnet import MLP, Adam, DenseLayer, Tensor, load_arrays, save_arrays, zero_grad
from .rng import RngStreams
from .training import EarlyStopper, iterate_minibatches, validation_metric

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)


@dataclass
class DraftConfig:
    hidden: tuple = (50, 50)
    eta: float = 1.0  # weight of the ranking reward
    learning_rate: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    batch_size: int = 350
    epochs: int = 300
    patience: int = 30
    sample_count: int = 200
    dropout_keep: float = 0.8
    batch_norm: bool = True
    sigma_floor: float = 1e-4
    jacobian: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.batch_size < 2:
            raise ValueError("batch size must be at least 2")
        if self.sample_count < 1:
            raise ValueError("sample count must be at least 1")


class DraftNetwork:
    """Shared trunk with two heads: mu(x) unconstrained and sigma(x) > 0
    via an additive floor plus exponentiated half-log-variance (the floor
    keeps the head differentiable while bounding sigma away from zero)."""

    def __init__(self, in_dim: int, config: DraftConfig, rng: np.random.Generator):
        self.config = config
        self.trunk = MLP(
            in_dim,
            list(config.hidden),
            rng,
            batch_norm=config.batch_norm,
            dropout_keep=config.dropout_keep,
            name="draft.trunk",
        )
        self.mu_head = DenseLayer(self.trunk.out_dim, 1, rng, activation="identity", name="draft.mu")
        self.logvar_head = DenseLayer(
            self.trunk.out_dim, 1, rng, activation="identity", name="draft.logvar"
        )

    def __call__(self, x: Tensor, train: bool, dropout_rng=None) -> tuple[Tensor, Tensor]:
        h = self.trunk(x, train, dropout_rng)
        mu = self.mu_head(h)
        half_logvar = self.logvar_head(h) * 0.5
        sigma = half_logvar.exp() + self.config.sigma_floor
        return mu, sigma

    def parameters(self) -> list:
        return self.trunk.parameters() + self.mu_head.parameters() + self.logvar_head.parameters()

    def norm_layers(self) -> list:
        return self.trunk.norm_layers()


def log_likelihood(mu: Tensor, sigma: Tensor, t: np.ndarray, l: np.ndarray, jacobian: bool = True) -> Tensor:
    """Censored log-normal log-likelihood, summed over the batch.

    Events: log phi(nu) - [log sigma + log t if jacobian], censored:
    log(1 - Phi(nu)), with nu = (log t - mu) / sigma.
    """
    t = np.asarray(t, dtype=np.float64)
    l = np.asarray(l)
    if np.any(t <= 0):
        raise ValueError("times must be strictly positive")
    log_t = np.log(t).reshape(-1, 1)
    nu = (Tensor(log_t) - mu) / sigma
    event_mask = (l == 1).astype(np.float64).reshape(-1, 1)
    log_phi = nu * nu * (-0.5) - LOG_SQRT_2PI
    event_terms = log_phi
    if jacobian:
        event_terms = event_terms - sigma.log() - Tensor(log_t)
    censored_terms = nu.std_normal_logsf()
    total = event_terms * Tensor(event_mask) + censored_terms * Tensor(1.0 - event_mask)
    return total.sum()


def rank_regularizer(mu: Tensor, t: np.ndarray, l: np.ndarray) -> Tensor:
    """Within-batch concordance lower bound.

    Over pairs (i, j) with l_i = 1 and t_j > t_i, averages
    1 + log(sigmoid(mu_j - mu_i)) / log 2; each term is at most 1, equals 0
    for an indistinguishable pair, and increases with mu_j - mu_i. Returns 0
    (with a warning) when the batch has no comparable pair.
    """
    t = np.asarray(t, dtype=np.float64)
    l = np.asarray(l)
    comparable = ((l == 1)[:, None] & (t[None, :] > t[:, None])).astype(np.float64)
    n_pairs = comparable.sum()
    if n_pairs == 0:
        warnings.warn("no comparable pairs in batch; ranking reward is 0", stacklevel=2)
        return Tensor(0.0)
    diff = mu.transpose() - mu  # diff[i, j] = mu_j - mu_i
    terms = diff.sigmoid().log() * (1.0 / LOG_2) + 1.0
    return (terms * Tensor(comparable)).sum() * (1.0 / n_pairs)


class DraftModel:
    """A trained (or trainable) DRAFT model bound to an input dimension."""

    def __init__(self, in_dim: int, config: DraftConfig, streams: RngStreams):
        self.config = config
        self.in_dim = in_dim
        self.streams = streams
        self.network = DraftNetwork(in_dim, config, streams.init)
        self.trained = False

    # -- losses ----------------------------------------------------------

    def objective(self, X: np.ndarray, t: np.ndarray, l: np.ndarray, train: bool = True) -> Tensor:
        """Mean negative log-likelihood minus eta * ranking reward."""
        mu, sigma = self.network(Tensor(X), train, self.streams.dropout)
        nll = log_likelihood(mu, sigma, t, l, jacobian=self.config.jacobian) * (-1.0 / len(t))
        if self.config.eta > 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                reward = rank_regularizer(mu, t, l)
            return nll - reward * self.config.eta
        return nll

    # -- training ----------------------------------------------------------

    def fit(self, dataset: SurvivalDataset) -> list[dict]:
        cfg = self.config
        train_split = dataset.subset("train")
        val_split = dataset.subset("validation")
        if train_split.n == 0:
            raise ValueError("training split is empty")
        if val_split.n == 0:
            raise ValueError("validation split is empty")
        self._init_output_bias(train_split)
        params = self.network.parameters()
        optimizer = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        self._optimizers = {"net": optimizer}
        stopper = EarlyStopper(cfg.patience)
        log: list[dict] = []
        for epoch in range(cfg.epochs):
            epoch_loss = 0.0
            n_batches = 0
            for idx in iterate_minibatches(train_split.n, cfg.batch_size, self.streams.data):
                loss = self.objective(train_split.X[idx], train_split.t[idx], train_split.l[idx])
                zero_grad(params)
                loss.backward()
                optimizer.step()
                epoch_loss += loss.item()
                n_batches += 1
            self.trained = True
            t_hat = self.predict_median_batch(val_split.X)
            score = validation_metric(val_split.t, val_split.l, t_hat, dataset.t_max)
            log.append(
                {"epoch": epoch, "loss": epoch_loss / max(n_batches, 1), "validation_metric": score}
            )
            if stopper.update(score, epoch, self.state_arrays()):
                break
        if stopper.best_state is not None:
            self.load_state_arrays(stopper.best_state)
            log.append({"best_epoch": stopper.best_epoch, "best_metric": stopper.best_score})
        return log

    def _init_output_bias(self, train_split: SurvivalDataset) -> None:
        # start the heads at the marginal log-time statistics
        log_t = np.log(train_split.t)
        self.network.mu_head.bias.data[:] = log_t.mean()
        self.network.logvar_head.bias.data[:] = np.log(max(log_t.var(), 1e-4))

    # -- prediction ------------------------------------------------------------

    def _check_trained(self):
        if not self.trained:
            raise RuntimeError("model has not been trained")

    def conditional_params(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu, sigma = self.network(Tensor(np.atleast_2d(X)), train=False)
        return mu.data[:, 0], sigma.data[:, 0]

    def sample_times(self, x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n draws of t = exp(mu(x) + sigma(x) * xi)."""
        self._check_trained()
        if n < 1:
            raise ValueError("need at least one sample")
        mu, sigma = self.conditional_params(np.atleast_2d(x))
        return np.exp(mu[0] + sigma[0] * rng.standard_normal(n))

    def sample_times_batch(self, X: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        self._check_trained()
        mu, sigma = self.conditional_params(X)
        return np.exp(mu[:, None] + sigma[:, None] * rng.standard_normal((X.shape[0], n)))

    def predict_median(self, x: np.ndarray, rng: np.random.Generator) -> float:
        """Median of sample_count draws (midpoint convention for even counts)."""
        return float(np.median(self.sample_times(x, self.config.sample_count, rng)))

    def predict_median_batch(self, X: np.ndarray) -> np.ndarray:
        """Exact conditional median exp(mu(x)); used for early stopping."""
        self._check_trained()
        mu, _ = self.conditional_params(X)
        return np.exp(mu)

    # -- state -----------------------------------------------------------------

    def state_arrays(self) -> dict:
        state = {p.name: p.data.copy() for p in self.network.parameters()}
        for i, norm in enumerate(self.network.norm_layers()):
            state[f"draft.bn{i}.running_mean"] = norm.running_mean.copy()
            state[f"draft.bn{i}.running_var"] = norm.running_var.copy()
        return state

    def load_state_arrays(self, state: dict) -> None:
        for p in self.network.parameters():
            p.data[:] = state[p.name]
        for i, norm in enumerate(self.network.norm_layers()):
            norm.running_mean = state[f"draft.bn{i}.running_mean"].copy()
            norm.running_var = state[f"draft.bn{i}.running_var"].copy()
        self.trained = True


def train(dataset: SurvivalDataset, config: DraftConfig) -> tuple[DraftModel, list[dict]]:
    """Train a DRAFT model on the dataset's train split with early stopping
    on the validation split."""
    streams = RngStreams(config.seed)
    model = DraftModel(dataset.p, config, streams)
    log = model.fit(dataset)
    return model, log


def save_checkpoint(model: DraftModel, path, extra_meta: dict | None = None) -> None:
    arrays = model.state_arrays()
    for opt_name, opt in getattr(model, "_optimizers", {}).items():
        for key, value in opt.state().items():
            arrays[f"opt.{opt_name}.{key}"] = value
    meta = {
        "model": "draft",
        "config": asdict(model.config),
        "in_dim": model.in_dim,
        "seed": model.config.seed,
    }
    meta.update(extra_meta or {})
    save_arrays(path, arrays, meta)


def load_checkpoint(path) -> tuple[DraftModel, dict]:
    arrays, meta = load_arrays(path)
    if meta.get("model") != "draft":
        raise ValueError(f"checkpoint at {path} is not a draft model")
    config = DraftConfig(**{**meta["config"], "hidden": tuple(meta["config"]["hidden"])})
    model = DraftModel(int(meta["in_dim"]), config, RngStreams(int(meta["seed"])))
    model.load_state_arrays({k: v for k, v in arrays.items() if not k.startswith("opt.")})
    return model, meta
