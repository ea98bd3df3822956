"""Adversarial and reconstruction losses for the translator.

Decision maps arrive shallow-to-deep per discriminator clone; per-map mean
losses are combined with linearly ascending weights (deeper maps count
more) and the per-clone results are averaged equally. Everything here
operates on autodiff Tensors so the same code serves training and the
finite-difference verification suite.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from . import autodiff as ad
from .autodiff import Tensor


def multiscale_weight(per_map_losses: Sequence[Tensor], paper_literal: bool = False) -> Tensor:
    """Combine n per-map losses with weights [1, 2, .., n].

    By default the weighted sum is divided by sum(i) so the weights sum to
    one; ``paper_literal`` divides by n * sum(i) instead, reproducing the
    stated normalization verbatim (which scales the result down by n).
    """
    n = len(per_map_losses)
    if n < 1:
        raise ValueError("multiscale_weight needs at least one loss")
    total = None
    for i, loss in enumerate(per_map_losses, start=1):
        term = ad.mul(loss, float(i))
        total = term if total is None else ad.add(total, term)
    denom = sum(range(1, n + 1))
    if paper_literal:
        denom *= n
    return ad.mul(total, 1.0 / denom)


def _check_perspective(perspective: str) -> str:
    if perspective not in ("D", "G"):
        raise ValueError(f"perspective must be 'D' or 'G', got {perspective!r}")
    return perspective


def lsgan_loss(
    d_real: Sequence[Tensor],
    d_fake: Sequence[Tensor],
    perspective: str,
    paper_literal_msweight: bool = False,
) -> Tensor:
    """Least-squares adversarial loss over multi-scale decision maps.

    D perspective: mean((real - 1)^2) + mean(fake^2) per map.
    G perspective: mean((fake - 1)^2) per map.
    """
    _check_perspective(perspective)
    per_map = []
    if perspective == "D":
        for real, fake in zip(d_real, d_fake):
            term = ad.add(
                ad.mean(ad.square(ad.sub(real, 1.0))),
                ad.mean(ad.square(fake)),
            )
            per_map.append(term)
    else:
        for fake in d_fake:
            per_map.append(ad.mean(ad.square(ad.sub(fake, 1.0))))
    return multiscale_weight(per_map, paper_literal=paper_literal_msweight)


def relativistic_loss(
    d_real: Sequence[Tensor],
    d_fake: Sequence[Tensor],
    perspective: str,
    paper_literal_msweight: bool = False,
) -> Tensor:
    """Relativistic least-squares loss: realness judged against the fake.

    D perspective: mean((real - fake - 1)^2) per map.
    G perspective: mean((fake - real - 1)^2) per map.
    The pairwise difference cancels any constant shift of the decision maps.
    """
    _check_perspective(perspective)
    per_map = []
    for real, fake in zip(d_real, d_fake):
        diff = ad.sub(real, fake) if perspective == "D" else ad.sub(fake, real)
        per_map.append(ad.mean(ad.square(ad.sub(diff, 1.0))))
    return multiscale_weight(per_map, paper_literal=paper_literal_msweight)


def gan_loss(
    d_real: Mapping[str, Sequence[Tensor]],
    d_fake: Mapping[str, Sequence[Tensor]],
    perspective: str,
    relativistic: bool = False,
    paper_literal_msweight: bool = False,
) -> Tensor:
    """Average the chosen adversarial loss equally over discriminator clones."""
    if set(d_real) != set(d_fake):
        raise ValueError(f"real/fake clone sets differ: {set(d_real)} vs {set(d_fake)}")
    loss_fn = relativistic_loss if relativistic else lsgan_loss
    total = None
    for kind in d_real:
        term = loss_fn(
            d_real[kind], d_fake[kind], perspective,
            paper_literal_msweight=paper_literal_msweight,
        )
        total = term if total is None else ad.add(total, term)
    return ad.mul(total, 1.0 / len(d_real))


def cycle_loss(a: Tensor, rec_a: Tensor, b: Tensor, rec_b: Tensor) -> Tensor:
    """Mean-L1 reconstruction error, both directions summed."""
    if a.shape != rec_a.shape or b.shape != rec_b.shape:
        raise ValueError(
            f"cycle_loss shape mismatch: {a.shape} vs {rec_a.shape}, {b.shape} vs {rec_b.shape}"
        )
    return ad.add(
        ad.mean(ad.abs_(ad.sub(rec_a, a))),
        ad.mean(ad.abs_(ad.sub(rec_b, b))),
    )


def total_objective(gan_ab: Tensor, gan_ba: Tensor, cycle: Tensor, lam: float) -> Tensor:
    """Full objective: both adversarial directions plus weighted cycle term."""
    return ad.add(ad.add(gan_ab, gan_ba), ad.mul(cycle, float(lam)))
