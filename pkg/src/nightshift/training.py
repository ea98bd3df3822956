"""Translator training loop, optimizer, and inference.

Training alternates a discriminator step and a generator step per sample
at batch size one, with random crops and optional horizontal flips as the
only augmentation. Learning rates hold constant for the first half of the
epochs and decay linearly to zero over the second half. Everything is
driven by one seeded PRNG, so a fixed seed reproduces parameters bit for
bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import autodiff as ad
from .autodiff import Tensor
from .errors import TrainingDiverged
from .losses import cycle_loss, gan_loss, total_objective
from .networks import DISC_KINDS, Generator, Module, MultiDiscriminator


@dataclass
class TrainConfig:
    epochs: int = 40
    lr_g: float = 2e-4
    lr_d: float = 1e-4
    lambda_cyc: float = 10.0
    crop: int = 64
    random_flip: bool = True
    seed: int = 0
    discriminators: str = "CLG"
    relativistic: bool = False
    base_width: int = 16
    res_encoder: int = 2
    res_decoder: int = 2
    disc_heads: int = 3
    paper_literal_msweight: bool = False

    def __post_init__(self):
        if not self.discriminators:
            raise ValueError("discriminator selector must not be empty")
        for kind in self.discriminators:
            if kind not in DISC_KINDS:
                raise ValueError(f"unknown discriminator kind {kind!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.crop < 4 or self.crop % 4:
            raise ValueError(f"crop must be a positive multiple of 4, got {self.crop}")
        if self.disc_heads < 1:
            raise ValueError(f"disc_heads must be >= 1, got {self.disc_heads}")

    @staticmethod
    def from_run_config(cfg) -> "TrainConfig":
        return TrainConfig(
            epochs=cfg.epochs,
            lr_g=cfg.lr_g,
            lr_d=cfg.lr_d,
            lambda_cyc=cfg.lambda_cyc,
            crop=cfg.crop,
            random_flip=cfg.random_flip,
            seed=cfg.seed,
            discriminators=cfg.discriminators,
            relativistic=cfg.relativistic,
            base_width=cfg.base_width,
            res_encoder=cfg.res_encoder,
            res_decoder=cfg.res_decoder,
            disc_heads=cfg.disc_heads,
            paper_literal_msweight=cfg.paper_literal_msweight,
        )


def render_train_config(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def parse_train_config(text: str) -> TrainConfig:
    values: dict[str, object] = {}
    defaults = TrainConfig()
    typed = {f.name: getattr(defaults, f.name) for f in fields(defaults)}
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in typed:
            raise ValueError(f"unknown training config key {key!r}")
        default = typed[key]
        if isinstance(default, bool):
            values[key] = raw.lower() == "true"
        elif isinstance(default, int):
            values[key] = int(raw)
        elif isinstance(default, float):
            values[key] = float(raw)
        else:
            values[key] = raw
    return TrainConfig(**values)


def lr_at(epoch: int, total_epochs: int, base_lr: float) -> float:
    """Epoch-indexed (1-based) learning rate: flat half, then linear to zero."""
    if epoch < 1 or epoch > total_epochs:
        raise ValueError(f"epoch {epoch} out of range 1..{total_epochs}")
    half = total_epochs / 2.0
    if epoch <= half:
        return base_lr
    return base_lr * (total_epochs - epoch) / (total_epochs - half)


class TranslatorModel(Module):
    """Both generators and both discriminators plus their training config."""

    def __init__(self, config: TrainConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        kwargs = dict(
            base_width=config.base_width,
            res_encoder=config.res_encoder,
            res_decoder=config.res_decoder,
        )
        n_strided = config.disc_heads - 1
        if n_strided < 1:
            raise ValueError("disc_heads must be at least 2 (one strided layer + final)")
        self.gen_n2d = Generator(rng, **kwargs)
        self.gen_d2n = Generator(rng, **kwargs)
        self.disc_day = MultiDiscriminator(
            rng, kinds=config.discriminators, base_width=config.base_width, n_strided=n_strided
        )
        self.disc_night = MultiDiscriminator(
            rng, kinds=config.discriminators, base_width=config.base_width, n_strided=n_strided
        )

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for name in ("gen_n2d", "gen_d2n", "disc_day", "disc_night"):
            out.update(getattr(self, name).named_parameters(name))
        return out

    def generator_parameters(self) -> list[Tensor]:
        return self.gen_n2d.parameters() + self.gen_d2n.parameters()

    def discriminator_parameters(self) -> list[Tensor]:
        return self.disc_day.parameters() + self.disc_night.parameters()


class Adam:
    """Adam with first/second moment buffers; betas tuned for GAN training."""

    def __init__(self, params: Sequence[Tensor], beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data = p.data - np.asarray(lr, dtype=p.data.dtype) * update.astype(p.data.dtype)


def image_to_gan(img: np.ndarray) -> np.ndarray:
    """(H, W, 3) in [0, 1] -> (3, H, W) float32 in [-1, 1]."""
    return np.ascontiguousarray((img.transpose(2, 0, 1) * 2.0 - 1.0), dtype=np.float32)


def gan_to_image(arr: np.ndarray) -> np.ndarray:
    """(3, H, W) in (-1, 1) -> (H, W, 3) float64 in [0, 1]."""
    out = (arr.astype(np.float64).transpose(1, 2, 0) + 1.0) / 2.0
    return np.clip(out, 0.0, 1.0)


def _augment(img: np.ndarray, crop: int, flip: bool, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    if h < crop or w < crop:
        raise ValueError(f"crop {crop} exceeds image size {h}x{w}")
    y = int(rng.integers(0, h - crop + 1))
    x = int(rng.integers(0, w - crop + 1))
    out = img[y : y + crop, x : x + crop]
    if flip and rng.integers(2):
        out = out[:, ::-1]
    return out


def _check_finite_scalar(value: float, what: str, epoch: int, step: int) -> None:
    if not np.isfinite(value):
        raise TrainingDiverged(f"{what} became {value} at epoch {epoch}, step {step}")


def _check_finite_params(model: TranslatorModel, epoch: int, step: int) -> None:
    for name, p in model.named_parameters().items():
        if not np.isfinite(p.data).all():
            raise TrainingDiverged(
                f"parameter {name} became non-finite at epoch {epoch}, step {step}"
            )


def fit_translator(
    config: TrainConfig,
    day_images: Sequence[np.ndarray],
    night_images: Sequence[np.ndarray],
    log: Callable[[str], None] | None = None,
    checkpoint_fn: Callable[["TranslatorModel", int], None] | None = None,
) -> TranslatorModel:
    """Train the day<->night translator pair on unpaired image lists.

    Each epoch pairs a fresh shuffle of the smaller domain against the
    larger one, one sample pair per optimization round (D step first, then
    G step, reusing the generator forward). ``checkpoint_fn`` runs after
    every epoch.
    """
    if len(day_images) == 0 or len(night_images) == 0:
        raise ValueError("both day and night domains must be non-empty")
    model = TranslatorModel(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7261696E]))
    opt_g = Adam(model.generator_parameters())
    opt_d = Adam(model.discriminator_parameters())
    all_params = list(model.named_parameters().values())
    rel = config.relativistic
    literal = config.paper_literal_msweight
    n_iter = min(len(day_images), len(night_images))

    for epoch in range(1, config.epochs + 1):
        lr_g = lr_at(epoch, config.epochs, config.lr_g)
        lr_d = lr_at(epoch, config.epochs, config.lr_d)
        day_order = rng.permutation(len(day_images))
        night_order = rng.permutation(len(night_images))
        epoch_d = 0.0
        epoch_g = 0.0
        started = time.monotonic()
        for step in range(n_iter):
            day = _augment(day_images[day_order[step]], config.crop, config.random_flip, rng)
            night = _augment(night_images[night_order[step]], config.crop, config.random_flip, rng)
            day_t = Tensor(image_to_gan(day))
            night_t = Tensor(image_to_gan(night))

            fake_day = model.gen_n2d(night_t)
            fake_night = model.gen_d2n(day_t)

            # Discriminator step on detached fakes.
            d_real_day = model.disc_day(day_t)
            d_fake_day = model.disc_day(fake_day.detach())
            d_real_night = model.disc_night(night_t)
            d_fake_night = model.disc_night(fake_night.detach())
            loss_d = ad.add(
                gan_loss(d_real_day, d_fake_day, "D", relativistic=rel, paper_literal_msweight=literal),
                gan_loss(d_real_night, d_fake_night, "D", relativistic=rel, paper_literal_msweight=literal),
            )
            _check_finite_scalar(loss_d.item(), "discriminator loss", epoch, step)
            loss_d.backward()
            opt_d.step(lr_d)
            for p in all_params:
                p.zero_grad()

            # Generator step against the updated discriminators.
            rec_night = model.gen_d2n(fake_day)
            rec_day = model.gen_n2d(fake_night)
            g_fake_day = model.disc_day(fake_day)
            g_fake_night = model.disc_night(fake_night)
            if rel:
                g_real_day = model.disc_day(day_t)
                g_real_night = model.disc_night(night_t)
            else:
                g_real_day = g_fake_day
                g_real_night = g_fake_night
            gan_n2d = gan_loss(g_real_day, g_fake_day, "G", relativistic=rel, paper_literal_msweight=literal)
            gan_d2n = gan_loss(g_real_night, g_fake_night, "G", relativistic=rel, paper_literal_msweight=literal)
            cyc = cycle_loss(night_t, rec_night, day_t, rec_day)
            loss_g = total_objective(gan_n2d, gan_d2n, cyc, config.lambda_cyc)
            _check_finite_scalar(loss_g.item(), "generator loss", epoch, step)
            loss_g.backward()
            opt_g.step(lr_g)
            for p in all_params:
                p.zero_grad()

            epoch_d += loss_d.item()
            epoch_g += loss_g.item()
        _check_finite_params(model, epoch, n_iter)
        if log is not None:
            log(
                f"epoch {epoch}/{config.epochs} lr_g={lr_g:.2e} "
                f"loss_d={epoch_d / n_iter:.4f} loss_g={epoch_g / n_iter:.4f} "
                f"({time.monotonic() - started:.1f}s)"
            )
        if checkpoint_fn is not None:
            checkpoint_fn(model, epoch)
    return model


def translate(model: TranslatorModel, img: np.ndarray) -> np.ndarray:
    """Night-to-day inference at the image's own size.

    Sizes not divisible by 4 are reflect-padded and cropped back. Output is
    channel-last in [0, 1].
    """
    h, w = img.shape[:2]
    pad_h = (-h) % 4
    pad_w = (-w) % 4
    work = img
    if pad_h or pad_w:
        work = np.pad(img, ((0, pad_h), (0, pad_w), (0, 0)), mode="reflect")
    x = Tensor(image_to_gan(work))
    with ad.no_grad():
        out = model.gen_n2d(x).data
    return gan_to_image(out)[:h, :w]


class NightToDayTranslator(BaseEstimator):
    """Estimator facade: fit on unpaired day/night images, transform nights."""

    def __init__(
        self,
        epochs: int = 40,
        lr_g: float = 2e-4,
        lr_d: float = 1e-4,
        lambda_cyc: float = 10.0,
        crop: int = 64,
        random_flip: bool = True,
        seed: int = 0,
        discriminators: str = "CLG",
        relativistic: bool = False,
        base_width: int = 16,
        res_encoder: int = 2,
        res_decoder: int = 2,
        disc_heads: int = 3,
        paper_literal_msweight: bool = False,
    ):
        self.epochs = epochs
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.lambda_cyc = lambda_cyc
        self.crop = crop
        self.random_flip = random_flip
        self.seed = seed
        self.discriminators = discriminators
        self.relativistic = relativistic
        self.base_width = base_width
        self.res_encoder = res_encoder
        self.res_decoder = res_decoder
        self.disc_heads = disc_heads
        self.paper_literal_msweight = paper_literal_msweight

    def _train_config(self) -> TrainConfig:
        names = [f.name for f in fields(TrainConfig)]
        return TrainConfig(**{name: getattr(self, name) for name in names})

    def fit(self, day_images: Sequence[np.ndarray], night_images: Sequence[np.ndarray]):
        self.model_ = fit_translator(self._train_config(), day_images, night_images)
        return self

    def transform(self, images: Sequence[np.ndarray]) -> list[np.ndarray]:
        return [translate(self.model_, img) for img in images]
