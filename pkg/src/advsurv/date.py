"""Adversarial time-to-event model (DATE).

A conditional generator maps (covariates, censoring flag, noise) to an event
time; a discriminator judges (covariates, time) pairs against observed
non-censored data. Censored records enter through a hinge penalty that only
fires when the generated time falls short of the censoring point, and a mean
absolute distortion term keeps generated times near observed event times.

Noise can be injected into the first affine only, the output affine only, or
every affine of the generator; widening of the predictive distribution with
all-layer noise is the behavior of interest. The generator emits log-time
(exponentiated to guarantee positivity), and all times are divided by the
training-split maximum before entering the discriminator or the losses.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .data import SurvivalDataset
from .ndnet import (
    Adam,
    BatchNormLayer,
    DenseLayer,
    MLP,
    Tensor,
    concat,
    dropout,
    load_arrays,
    save_arrays,
    zero_grad,
)
from .rng import RngStreams
from .training import EarlyStopper, iterate_minibatches, validation_metric

NOISE_DISTRIBUTIONS = ("uniform01", "uniform_sym", "std_normal")
NOISE_PLACEMENTS = ("all", "input", "output")
GAN_LOSS_FORMS = ("log", "linear")


@dataclass
class DateConfig:
    hidden: tuple = (50, 50)
    noise_dist: str = "uniform01"
    noise_placement: str = "all"
    lambda2: float = 1.0  # censored hinge weight
    lambda3: float = 1.0  # distortion weight
    batch_size: int = 350
    learning_rate: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    disc_steps: int = 1  # discriminator updates per generator update
    epochs: int = 300
    patience: int = 30
    sample_count: int = 200
    validation_samples: int = 50
    gan_loss: str = "log"  # "log" = cross-entropy with non-saturating generator
    dropout_keep: float = 0.8
    batch_norm: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.noise_dist not in NOISE_DISTRIBUTIONS:
            raise ValueError(f"noise_dist must be one of {NOISE_DISTRIBUTIONS}")
        if self.noise_placement not in NOISE_PLACEMENTS:
            raise ValueError(f"noise_placement must be one of {NOISE_PLACEMENTS}")
        if self.gan_loss not in GAN_LOSS_FORMS:
            raise ValueError(f"gan_loss must be one of {GAN_LOSS_FORMS}")
        if self.lambda2 < 0 or self.lambda3 < 0:
            raise ValueError("lambda2 and lambda3 must be nonnegative")
        if self.batch_size < 2:
            raise ValueError("batch size must be at least 2")
        if self.sample_count < 1:
            raise ValueError("sample count must be at least 1")
        if self.disc_steps < 1:
            raise ValueError("disc_steps must be at least 1")


def draw_noise(rng: np.random.Generator, dist: str, shape: tuple) -> np.ndarray:
    if dist == "uniform01":
        return rng.uniform(0.0, 1.0, shape)
    if dist == "uniform_sym":
        return rng.uniform(-1.0, 1.0, shape)
    return rng.standard_normal(shape)


class GeneratorNetwork:
    """MLP from (x, censoring flag) to log-time, with additive noise channels
    on the affines selected by the placement."""

    def __init__(self, in_dim: int, config: DateConfig, rng: np.random.Generator):
        self.config = config
        widths = list(config.hidden) + [1]
        n_affines = len(widths)
        if config.noise_placement == "all":
            self.noisy = set(range(n_affines))
        elif config.noise_placement == "input":
            self.noisy = {0}
        else:
            self.noisy = {n_affines - 1}
        self.affines: list[DenseLayer] = []
        self.norms: list[BatchNormLayer | None] = []
        prev = in_dim
        for i, width in enumerate(widths):
            self.affines.append(
                DenseLayer(
                    prev,
                    width,
                    rng,
                    activation="identity",
                    noise_dim=width if i in self.noisy else 0,
                    name=f"gen.{i}",
                )
            )
            is_head = i == n_affines - 1
            self.norms.append(
                BatchNormLayer(width, name=f"gen.{i}.bn")
                if (config.batch_norm and not is_head)
                else None
            )
            prev = width

    def noise_shapes(self, n: int) -> dict[int, tuple[int, int]]:
        return {i: (n, self.affines[i].noise_dim) for i in sorted(self.noisy)}

    def draw_noise(self, rng: np.random.Generator, n: int) -> dict[int, np.ndarray]:
        return {
            i: draw_noise(rng, self.config.noise_dist, shape)
            for i, shape in self.noise_shapes(n).items()
        }

    def __call__(
        self,
        xl: Tensor,
        eps: dict[int, np.ndarray],
        train: bool,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        h = xl
        last = len(self.affines) - 1
        for i, (affine, norm) in enumerate(zip(self.affines, self.norms)):
            noise = Tensor(eps[i]) if i in self.noisy else None
            h = affine(h, noise)
            if i == last:
                return h  # log-time pre-activation
            if norm is not None:
                h = norm(h, train)
            h = h.relu()
            if train and self.config.dropout_keep < 1.0:
                h = dropout(h, self.config.dropout_keep, train, dropout_rng)
        raise AssertionError("unreachable")

    def parameters(self) -> list:
        params = []
        for affine, norm in zip(self.affines, self.norms):
            params.extend(affine.parameters())
            if norm is not None:
                params.extend(norm.parameters())
        return params

    def norm_layers(self) -> list:
        return [n for n in self.norms if n is not None]


class DiscriminatorNetwork:
    """MLP from (x, scaled time) to a logit; probability via the logistic map."""

    def __init__(self, in_dim: int, config: DateConfig, rng: np.random.Generator):
        self.config = config
        self.trunk = MLP(
            in_dim,
            list(config.hidden),
            rng,
            batch_norm=config.batch_norm,
            dropout_keep=config.dropout_keep,
            name="disc",
        )
        self.head = DenseLayer(self.trunk.out_dim, 1, rng, activation="identity", name="disc.out")

    def __call__(
        self,
        x: Tensor,
        t_scaled: Tensor,
        train: bool,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        h = self.trunk(concat([x, t_scaled], axis=1), train, dropout_rng)
        return self.head(h)

    def parameters(self) -> list:
        return self.trunk.parameters() + self.head.parameters()

    def norm_layers(self) -> list:
        return self.trunk.norm_layers()


# -- loss pieces (pure functions over Tensors) -------------------------------------


def discriminator_gan_loss(logit_real: Tensor, logit_fake: Tensor, form: str = "log") -> Tensor:
    """Loss the discriminator minimizes: binary cross-entropy for "log",
    or the (negated) literal expectation objective for "linear"."""
    if form == "log":
        return (-logit_real).softplus().mean() + logit_fake.softplus().mean()
    if form == "linear":
        return (1.0 - logit_real.sigmoid()).mean() + logit_fake.sigmoid().mean()
    raise ValueError(f"unknown gan loss form {form!r}")


def generator_gan_loss(logit_fake: Tensor, form: str = "log") -> Tensor:
    """Loss the generator minimizes: non-saturating cross-entropy for "log",
    the literal 1 - D(fake) for "linear"."""
    if form == "log":
        return (-logit_fake).softplus().mean()
    if form == "linear":
        return (1.0 - logit_fake.sigmoid()).mean()
    raise ValueError(f"unknown gan loss form {form!r}")


def gan_losses(logit_real: Tensor, logit_fake: Tensor, form: str = "log") -> tuple[Tensor, Tensor]:
    """Discriminator and generator losses from one set of discriminator logits."""
    return discriminator_gan_loss(logit_real, logit_fake, form), generator_gan_loss(
        logit_fake, form
    )


def censored_hinge(t_censor: np.ndarray, t_generated: Tensor) -> Tensor:
    """Mean of max(0, censoring time - generated time); zero cost whenever
    generation lands beyond the censoring point."""
    target = np.asarray(t_censor, dtype=np.float64).reshape(-1, 1)
    if target.size == 0:
        raise ValueError("empty batch")
    return (Tensor(target) - t_generated).relu().mean()


def distortion(t_observed: np.ndarray, t_generated: Tensor) -> Tensor:
    """Mean absolute deviation between observed and generated times."""
    target = np.asarray(t_observed, dtype=np.float64).reshape(-1, 1)
    if target.size == 0:
        raise ValueError("empty batch")
    return (t_generated - Tensor(target)).abs().mean()


class DateModel:
    """Generator/discriminator pair with training and sampling."""

    def __init__(self, in_dim: int, config: DateConfig, streams: RngStreams):
        self.config = config
        self.in_dim = in_dim
        self.streams = streams
        self.generator = GeneratorNetwork(in_dim + 1, config, streams.init)
        self.discriminator = DiscriminatorNetwork(in_dim + 1, config, streams.init)
        self.t_scale = 1.0  # set to the train-split max during fit
        self.trained = False

    # -- forward pieces -----------------------------------------------------

    def generate_scaled(
        self,
        X: np.ndarray,
        flag: float | np.ndarray,
        eps: dict[int, np.ndarray],
        train: bool,
    ) -> Tensor:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        flags = np.broadcast_to(np.asarray(flag, dtype=np.float64), (X.shape[0],))
        xl = Tensor(np.column_stack([X, flags]))
        u = self.generator(xl, eps, train, self.streams.dropout)
        return u.exp()

    def _split_batch(self, X, t, l):
        l = np.asarray(l)
        nc = l == 1
        return (X[nc], t[nc]), (X[~nc], t[~nc])

    # -- loss operations -------------------------------------------------------

    def loss_adversarial(
        self, X: np.ndarray, t: np.ndarray, l: np.ndarray, eps: dict[int, np.ndarray], train: bool = True
    ) -> tuple[Tensor, Tensor]:
        """Discriminator and generator adversarial losses on a non-censored batch."""
        l = np.asarray(l)
        if l.size == 0:
            raise ValueError("empty batch")
        if np.any(l != 1):
            raise ValueError("adversarial loss expects non-censored records only")
        t_scaled = np.asarray(t, dtype=np.float64).reshape(-1, 1) / self.t_scale
        fake = self.generate_scaled(X, 1.0, eps, train)
        x_t = Tensor(np.atleast_2d(X))
        logit_real = self.discriminator(x_t, Tensor(t_scaled), train, self.streams.dropout)
        logit_fake = self.discriminator(x_t, fake, train, self.streams.dropout)
        return gan_losses(logit_real, logit_fake, self.config.gan_loss)

    def loss_censored(
        self, X: np.ndarray, t: np.ndarray, l: np.ndarray, eps: dict[int, np.ndarray], train: bool = True
    ) -> Tensor:
        """Hinge loss on a censored batch, on the scaled-time axis."""
        l = np.asarray(l)
        if np.any(l != 0):
            raise ValueError("censored loss expects censored records only")
        fake = self.generate_scaled(X, 0.0, eps, train)
        return censored_hinge(np.asarray(t) / self.t_scale, fake)

    def loss_distortion(
        self, X: np.ndarray, t: np.ndarray, l: np.ndarray, eps: dict[int, np.ndarray], train: bool = True
    ) -> Tensor:
        """Mean absolute deviation on a non-censored batch, scaled-time axis."""
        l = np.asarray(l)
        if np.any(l != 1):
            raise ValueError("distortion loss expects non-censored records only")
        fake = self.generate_scaled(X, 1.0, eps, train)
        return distortion(np.asarray(t) / self.t_scale, fake)

    def generator_objective(
        self,
        X: np.ndarray,
        t: np.ndarray,
        l: np.ndarray,
        eps_nc: dict[int, np.ndarray],
        eps_c: dict[int, np.ndarray] | None,
        train: bool = True,
    ) -> Tensor:
        """Full generator objective on a mixed batch with frozen noise draws."""
        (X_nc, t_nc), (X_c, t_c) = self._split_batch(np.atleast_2d(X), np.asarray(t), l)
        if X_nc.shape[0] == 0:
            raise ValueError("generator objective needs non-censored records")
        fake_nc = self.generate_scaled(X_nc, 1.0, eps_nc, train)
        logit_fake = self.discriminator(
            Tensor(X_nc), fake_nc, train, self.streams.dropout
        )
        gen_adv = generator_gan_loss(logit_fake, self.config.gan_loss)
        total = gen_adv + distortion(t_nc / self.t_scale, fake_nc) * self.config.lambda3
        if X_c.shape[0] > 0:
            if eps_c is None:
                raise ValueError("censored records present but no censored noise draws given")
            fake_c = self.generate_scaled(X_c, 0.0, eps_c, train)
            total = total + censored_hinge(t_c / self.t_scale, fake_c) * self.config.lambda2
        return total

    # -- training ----------------------------------------------------------------

    def fit(self, dataset: SurvivalDataset) -> list[dict]:
        cfg = self.config
        train_split = dataset.subset("train")
        val_split = dataset.subset("validation")
        if train_split.n == 0:
            raise ValueError("training split is empty")
        if val_split.n == 0:
            raise ValueError("validation split is empty")
        if not np.any(train_split.l == 1):
            raise ValueError("training split has no observed events")
        if cfg.lambda2 > 0 and not np.any(train_split.l == 0):
            warnings.warn(
                "training split has no censored records; hinge loss is inactive",
                stacklevel=2,
            )
        self.t_scale = float(train_split.t.max())
        gen_params = self.generator.parameters()
        disc_params = self.discriminator.parameters()
        adam_gen = Adam(gen_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        adam_disc = Adam(disc_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        self._optimizers = {"gen": adam_gen, "disc": adam_disc}
        stopper = EarlyStopper(cfg.patience)
        log: list[dict] = []

        for epoch in range(cfg.epochs):
            sums = {"l1_disc": 0.0, "l1_gen": 0.0, "l2": 0.0, "l3": 0.0}
            n_batches = 0
            for idx in iterate_minibatches(train_split.n, cfg.batch_size, self.streams.data):
                X_b, t_b, l_b = train_split.X[idx], train_split.t[idx], train_split.l[idx]
                (X_nc, t_nc), (X_c, t_c) = self._split_batch(X_b, t_b, l_b)
                if X_nc.shape[0] == 0:
                    continue
                t_nc_scaled = (t_nc / self.t_scale).reshape(-1, 1)

                # discriminator phase: real vs detached fake
                for _ in range(cfg.disc_steps):
                    eps = self.generator.draw_noise(self.streams.noise, X_nc.shape[0])
                    fake = self.generate_scaled(X_nc, 1.0, eps, train=True).detach()
                    x_t = Tensor(X_nc)
                    logit_real = self.discriminator(
                        x_t, Tensor(t_nc_scaled), True, self.streams.dropout
                    )
                    logit_fake = self.discriminator(x_t, fake, True, self.streams.dropout)
                    disc_loss = discriminator_gan_loss(logit_real, logit_fake, cfg.gan_loss)
                    zero_grad(disc_params)
                    disc_loss.backward()
                    adam_disc.step()

                # generator phase: adversarial + hinge + distortion
                eps_nc = self.generator.draw_noise(self.streams.noise, X_nc.shape[0])
                fake_nc = self.generate_scaled(X_nc, 1.0, eps_nc, train=True)
                logit_fake = self.discriminator(Tensor(X_nc), fake_nc, True, self.streams.dropout)
                gen_adv = generator_gan_loss(logit_fake, cfg.gan_loss)
                l3 = distortion(t_nc / self.t_scale, fake_nc)
                total = gen_adv + l3 * cfg.lambda3
                if X_c.shape[0] > 0 and cfg.lambda2 > 0:
                    eps_c = self.generator.draw_noise(self.streams.noise, X_c.shape[0])
                    fake_c = self.generate_scaled(X_c, 0.0, eps_c, train=True)
                    l2 = censored_hinge(t_c / self.t_scale, fake_c)
                    total = total + l2 * cfg.lambda2
                else:
                    l2 = Tensor(0.0)
                zero_grad(gen_params)
                total.backward()
                adam_gen.step()

                sums["l1_disc"] += disc_loss.item()
                sums["l1_gen"] += gen_adv.item()
                sums["l2"] += l2.item()
                sums["l3"] += l3.item()
                n_batches += 1

            self.trained = True
            t_hat = np.median(
                self.sample_times_batch(val_split.X, cfg.validation_samples, self.streams.eval),
                axis=1,
            )
            score = validation_metric(val_split.t, val_split.l, t_hat, dataset.t_max)
            entry = {k: v / max(n_batches, 1) for k, v in sums.items()}
            entry.update({"epoch": epoch, "validation_metric": score})
            log.append(entry)
            if stopper.update(score, epoch, self.state_arrays()):
                break
        if stopper.best_state is not None:
            self.load_state_arrays(stopper.best_state)
            log.append({"best_epoch": stopper.best_epoch, "best_metric": stopper.best_score})
        return log

    # -- prediction ---------------------------------------------------------------

    def _check_trained(self):
        if not self.trained or self.t_scale is None:
            raise RuntimeError("model has not been trained")

    def sample_times(self, x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n independent noise draws through the generator; prediction always
        conditions on the event flag l = 1."""
        self._check_trained()
        if n < 1:
            raise ValueError("need at least one sample")
        X = np.tile(np.asarray(x, dtype=np.float64).reshape(1, -1), (n, 1))
        eps = self.generator.draw_noise(rng, n)
        scaled = self.generate_scaled(X, 1.0, eps, train=False)
        return scaled.data[:, 0] * self.t_scale

    def sample_times_batch(
        self, X: np.ndarray, n: int, rng: np.random.Generator, chunk: int = 128
    ) -> np.ndarray:
        self._check_trained()
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], n))
        for start in range(0, X.shape[0], chunk):
            block = X[start : start + chunk]
            tiled = np.repeat(block, n, axis=0)
            eps = self.generator.draw_noise(rng, tiled.shape[0])
            scaled = self.generate_scaled(tiled, 1.0, eps, train=False)
            out[start : start + block.shape[0]] = scaled.data[:, 0].reshape(block.shape[0], n) * self.t_scale
        return out

    def predict_median(self, x: np.ndarray, rng: np.random.Generator) -> float:
        return float(np.median(self.sample_times(x, self.config.sample_count, rng)))

    # -- state ----------------------------------------------------------------------

    def state_arrays(self) -> dict:
        state = {p.name: p.data.copy() for p in self.generator.parameters()}
        state.update({p.name: p.data.copy() for p in self.discriminator.parameters()})
        for prefix, norms in (
            ("gen", self.generator.norm_layers()),
            ("disc", self.discriminator.norm_layers()),
        ):
            for i, norm in enumerate(norms):
                state[f"{prefix}.bn{i}.running_mean"] = norm.running_mean.copy()
                state[f"{prefix}.bn{i}.running_var"] = norm.running_var.copy()
        return state

    def load_state_arrays(self, state: dict) -> None:
        for p in self.generator.parameters() + self.discriminator.parameters():
            p.data[:] = state[p.name]
        for prefix, norms in (
            ("gen", self.generator.norm_layers()),
            ("disc", self.discriminator.norm_layers()),
        ):
            for i, norm in enumerate(norms):
                norm.running_mean = state[f"{prefix}.bn{i}.running_mean"].copy()
                norm.running_var = state[f"{prefix}.bn{i}.running_var"].copy()
        self.trained = True


def train(dataset: SurvivalDataset, config: DateConfig) -> tuple[DateModel, list[dict]]:
    """Train a DATE model on the dataset's train split with early stopping on
    the validation split."""
    streams = RngStreams(config.seed)
    model = DateModel(dataset.p, config, streams)
    log = model.fit(dataset)
    return model, log


def save_checkpoint(model: DateModel, path, extra_meta: dict | None = None) -> None:
    arrays = model.state_arrays()
    for opt_name, opt in getattr(model, "_optimizers", {}).items():
        for key, value in opt.state().items():
            arrays[f"opt.{opt_name}.{key}"] = value
    meta = {
        "model": "date",
        "config": asdict(model.config),
        "in_dim": model.in_dim,
        "t_scale": model.t_scale,
        "seed": model.config.seed,
    }
    meta.update(extra_meta or {})
    save_arrays(path, arrays, meta)


def load_checkpoint(path) -> tuple[DateModel, dict]:
    arrays, meta = load_arrays(path)
    if meta.get("model") != "date":
        raise ValueError(f"checkpoint at {path} is not a date model")
    config = DateConfig(**{**meta["config"], "hidden": tuple(meta["config"]["hidden"])})
    model = DateModel(int(meta["in_dim"]), config, RngStreams(int(meta["seed"])))
    model.t_scale = float(meta["t_scale"])
    model.load_state_arrays({k: v for k, v in arrays.items() if not k.startswith("opt.")})
    return model, meta
