"""Generator and discriminator networks for the day/night translator.

The generator is the familiar encoder/resblock/decoder image-translation
stack: a 7x7 stride-1 conv, two stride-2 downsampling convs, residual
blocks, two stride-2 transposed convs and a 7x7 output conv with tanh.
Each discriminator is three clones of one fully-convolutional net, fed by
differentiable feature taps (blurred RGB, luminance, xy-gradients of the
half-resolution luminance), each emitting a 1-channel decision map after
every stride-2 layer plus a final map.

Channel widths scale with ``base_width`` (64 reproduces the published
layer table; the desk-scale default is 16).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .imgproc import LUMA_WEIGHTS, gaussian_kernel

DISC_KINDS = "CLGM"
_TAP_CHANNELS = {"C": 3, "L": 1, "G": 2, "M": 2}


class Module:
    """Tiny parameter container: children and Tensors found by attribute walk."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(key))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}"))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())


def _conv_weight(rng: np.random.Generator, cout: int, cin: int, k: int, dtype) -> Tensor:
    w = rng.normal(0.0, 0.02, size=(cout, cin, k, k)).astype(dtype)
    return Tensor(w, requires_grad=True)


class Conv(Module):
    """Conv + optional instance norm + PReLU, with configurable padding mode."""

    def __init__(self, rng, cin, cout, k, stride=1, pad=0, pad_mode="zero",
                 norm=True, act=True, dtype=np.float32):
        self.w = _conv_weight(rng, cout, cin, k, dtype)
        self.b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.pad = pad
        self.pad_mode = pad_mode
        self.norm = InstanceNorm(cout, dtype) if norm else None
        self.act = PReLU(cout, dtype) if act else None

    def __call__(self, x: Tensor) -> Tensor:
        if self.pad and self.pad_mode == "reflect":
            x = ad.pad_reflect(x, self.pad)
            y = ad.conv2d(x, self.w, self.b, stride=self.stride, pad=0)
        elif self.pad and self.pad_mode == "replicate":
            x = ad.pad_replicate(x, self.pad)
            y = ad.conv2d(x, self.w, self.b, stride=self.stride, pad=0)
        else:
            y = ad.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)
        if self.norm is not None:
            y = self.norm(y)
        if self.act is not None:
            y = self.act(y)
        return y


class Deconv(Module):
    """Transposed conv (k4, s2, p1 = exact 2x upsampling) + IN + PReLU."""

    def __init__(self, rng, cin, cout, dtype=np.float32):
        w = rng.normal(0.0, 0.02, size=(cin, cout, 4, 4)).astype(dtype)
        self.w = Tensor(w, requires_grad=True)
        self.b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        self.norm = InstanceNorm(cout, dtype)
        self.act = PReLU(cout, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.conv_transpose2d(x, self.w, self.b, stride=2, pad=1)
        return self.act(self.norm(y))


class InstanceNorm(Module):
    def __init__(self, c, dtype=np.float32):
        self.weight = Tensor(np.ones((c, 1, 1), dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros((c, 1, 1), dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.instance_norm(x, self.weight, self.bias)


class PReLU(Module):
    def __init__(self, c, dtype=np.float32, init=0.25):
        self.alpha = Tensor(np.full((c, 1, 1), init, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.prelu(x, self.alpha)


class ResBlock(Module):
    """conv3-IN-PReLU-conv3-IN with an additive skip."""

    def __init__(self, rng, c, dtype=np.float32):
        self.conv1 = Conv(rng, c, c, 3, pad=1, dtype=dtype)
        self.conv2 = Conv(rng, c, c, 3, pad=1, act=False, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(x, self.conv2(self.conv1(x)))


class Generator(Module):
    """Fully-convolutional image translator, tanh output in (-1, 1).

    Input and output are (3, H, W) with H, W divisible by 4.
    """

    def __init__(self, rng, base_width=16, res_encoder=2, res_decoder=2, dtype=np.float32):
        n = base_width
        self.enc_in = Conv(rng, 3, n, 7, pad=3, pad_mode="reflect", dtype=dtype)
        self.enc_down1 = Conv(rng, n, 2 * n, 3, stride=2, pad=1, dtype=dtype)
        self.enc_down2 = Conv(rng, 2 * n, 4 * n, 3, stride=2, pad=1, dtype=dtype)
        self.enc_res = [ResBlock(rng, 4 * n, dtype) for _ in range(res_encoder)]
        self.dec_res = [ResBlock(rng, 4 * n, dtype) for _ in range(res_decoder)]
        self.dec_up1 = Deconv(rng, 4 * n, 2 * n, dtype)
        self.dec_up2 = Deconv(rng, 2 * n, n, dtype)
        self.dec_out = Conv(rng, n, 3, 7, pad=3, pad_mode="reflect", norm=False, act=False, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] % 4 or x.shape[2] % 4:
            raise ValueError(f"generator input must be divisible by 4, got {x.shape}")
        y = self.enc_down2(self.enc_down1(self.enc_in(x)))
        for block in self.enc_res:
            y = block(y)
        for block in self.dec_res:
            y = block(y)
        y = self.dec_up2(self.dec_up1(y))
        return ad.tanh(self.dec_out(y))


# ---------------------------------------------------------------------------
# Differentiable discriminator feature taps
# ---------------------------------------------------------------------------

_BLUR_SIZE = 5
_BLUR_SIGMA = 3.0


def _luma_kernel(dtype) -> Tensor:
    w = np.asarray(LUMA_WEIGHTS, dtype=dtype).reshape(1, 3, 1, 1)
    return Tensor(w)


def _blur_kernel(dtype) -> Tensor:
    g = gaussian_kernel(_BLUR_SIZE, _BLUR_SIGMA).astype(dtype)
    w = np.zeros((3, 3, _BLUR_SIZE, _BLUR_SIZE), dtype=dtype)
    for c in range(3):
        w[c, c] = g
    return Tensor(w)


def _grad_kernels(dtype) -> tuple[Tensor, Tensor]:
    kx = np.asarray([[-1.0, 0.0, 1.0]], dtype=dtype).reshape(1, 1, 1, 3)
    ky = np.asarray([[-1.0], [0.0], [1.0]], dtype=dtype).reshape(1, 1, 3, 1)
    return Tensor(kx), Tensor(ky)


def disc_features(x: Tensor, kind: str) -> Tensor:
    """Differentiable input tap for one discriminator clone.

    ``x`` is a (3, H, W) tensor in the GAN's [-1, 1] range. Kinds:
    C blurred RGB, L luminance, G xy-gradients of the half-resolution
    luminance (2 channels), M magnitude/orientation of those gradients.
    """
    if kind not in _TAP_CHANNELS:
        raise ValueError(f"unknown discriminator kind {kind!r} (expected one of C, L, G, M)")
    dtype = x.dtype
    if kind == "C":
        return ad.conv2d(ad.pad_replicate(x, _BLUR_SIZE // 2), _blur_kernel(dtype))
    gray = ad.conv2d(x, _luma_kernel(dtype))
    if kind == "L":
        return gray
    small = ad.subsample2(gray)
    kx, ky = _grad_kernels(dtype)
    # Replicate-pad one pixel on the axis each kernel spans, matching the
    # non-differentiable reference exactly.
    padded = ad.pad_replicate(small, 1)
    h, w = small.shape[1], small.shape[2]
    gx_full = ad.conv2d(padded, kx)  # (1, h+2, w)
    gy_full = ad.conv2d(padded, ky)  # (1, h, w+2)
    gx = _crop(gx_full, 1, 0, h, w)
    gy = _crop(gy_full, 0, 1, h, w)
    if kind == "G":
        return ad.concat_channels([gx, gy])
    mag = ad.sqrt(ad.add(ad.square(gx), ad.square(gy)))
    orient = ad.atan2(gy, gx)
    return ad.concat_channels([mag, orient])


def _crop(x: Tensor, top: int, left: int, h: int, w: int) -> Tensor:
    data = x.data[:, top : top + h, left : left + w].copy()

    def backward_fn(grad):
        g = np.zeros_like(x.data)
        g[:, top : top + h, left : left + w] = grad
        return (g,)

    return ad._make(data, (x,), backward_fn)


class DiscriminatorNet(Module):
    """PatchGAN-style stack with a decision head after every stride-2 layer.

    ``n_strided`` stride-2 k4 convs (channel-doubling), then a stride-1 k4
    conv at half width and a final 1-channel k4 conv. Decision maps are the
    per-stride-2 1x1 heads plus the final map, shallow to deep.
    """

    def __init__(self, rng, in_channels, base_width=16, n_strided=2, dtype=np.float32):
        self.layers = []
        self.heads = []
        c = in_channels
        width = base_width
        for i in range(n_strided):
            self.layers.append(
                Conv(rng, c, width, 4, stride=2, pad=1, norm=(i > 0), dtype=dtype)
            )
            head_w = _conv_weight(rng, 1, width, 1, dtype)
            head = Module()
            head.w = head_w
            head.b = Tensor(np.zeros(1, dtype=dtype), requires_grad=True)
            self.heads.append(head)
            c = width
            width *= 2
        self.mid = Conv(rng, c, max(c // 2, 1), 4, stride=1, pad=1, dtype=dtype)
        self.final_w = _conv_weight(rng, 1, max(c // 2, 1), 4, dtype)
        self.final_b = Tensor(np.zeros(1, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> list[Tensor]:
        decisions = []
        y = x
        for layer, head in zip(self.layers, self.heads):
            y = layer(y)
            decisions.append(ad.conv2d(y, head.w, head.b))
        y = self.mid(y)
        decisions.append(ad.conv2d(y, self.final_w, self.final_b, pad=1))
        return decisions


class MultiDiscriminator(Module):
    """One DiscriminatorNet clone per selected feature tap."""

    def __init__(self, rng, kinds="CLG", base_width=16, n_strided=2, dtype=np.float32):
        kinds = "".join(kinds)
        if not kinds:
            raise ValueError("discriminator selector must not be empty")
        for k in kinds:
            if k not in _TAP_CHANNELS:
                raise ValueError(f"unknown discriminator kind {k!r}")
        if len(set(kinds)) != len(kinds):
            raise ValueError(f"duplicate discriminator kind in {kinds!r}")
        self.kinds = kinds
        self.nets = [
            DiscriminatorNet(rng, _TAP_CHANNELS[k], base_width, n_strided, dtype)
            for k in kinds
        ]

    def __call__(self, x: Tensor) -> dict[str, list[Tensor]]:
        return {
            kind: net(disc_features(x, kind))
            for kind, net in zip(self.kinds, self.nets)
        }
