"""A small scale-equivariant segmentation network built on Riesz transforms.

Architecture: per hidden layer, batch normalization, then a Riesz layer,
then ReLU.  A Riesz layer connects input channel i to output channel j by a
learned linear combination of the first- and second-order Riesz transforms
of channel i (a 1x1 convolution across the stacked transform features),
plus one bias per output channel.  The head is a per-voxel linear
combination of the last features followed by a sigmoid, yielding a
probability map whose response is insensitive to the spatial scale of the
structures it marks.

A network is described by its channel tuple, e.g. (1, 16, 16, 32, 1) in 3D,
which has (1*9*16+16) + (16*9*16+16) + (16*9*32+32) + (32*1+1) = 7153
trainable parameters in the banks and head; batch-norm scale/shift
parameters are counted separately.

Everything here is plain numpy with hand-written backpropagation.  The
Riesz transforms are linear with known adjoints (conjugate multipliers), so
their backward pass is one more multiplier application.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import TrainingDivergedError, VolumeError
from .riesz import FEATURE_INDICES, feature_count, multiplier
from .volume import BinaryMask, VoxelVolume

_MAGIC = b"RNET1\x00"
_CLAMP = 1e-7


@dataclass(frozen=True)
class NetworkConfig:
    """Channel sizes (first 1 = grayscale in, last 1 = probability out)."""

    channels: tuple[int, ...]
    d: int = 3

    def __post_init__(self):
        channels = tuple(int(c) for c in self.channels)
        if len(channels) < 2:
            raise VolumeError("config needs at least (1, 1)")
        if channels[0] != 1:
            raise VolumeError("first channel count must be 1 (grayscale input)")
        if channels[-1] != 1:
            raise VolumeError("last channel count must be 1 (probability map)")
        if any(c < 1 for c in channels):
            raise VolumeError(f"channel counts must be >= 1: {channels}")
        if self.d not in (2, 3):
            raise VolumeError(f"spatial dimension must be 2 or 3, got {self.d}")
        object.__setattr__(self, "channels", channels)

    @property
    def n_features(self) -> int:
        return feature_count(self.d)

    @property
    def hidden_pairs(self) -> list[tuple[int, int]]:
        return [(self.channels[i], self.channels[i + 1])
                for i in range(len(self.channels) - 2)]


def count_params(config: NetworkConfig) -> int:
    """Trainable scalars in the Riesz banks plus the head (biases included)."""
    m = config.n_features
    total = sum(cin * m * cout + cout for cin, cout in config.hidden_pairs)
    return total + config.channels[-2] * 1 + 1


@dataclass
class RieszLayer:
    """Batch-norm state plus one bank of Riesz coefficients."""

    gamma: np.ndarray       # (c_in,)
    beta: np.ndarray        # (c_in,)
    run_mean: np.ndarray    # (c_in,)
    run_var: np.ndarray     # (c_in,)
    weight: np.ndarray      # (c_out, c_in, n_features)
    bias: np.ndarray        # (c_out,)


@dataclass
class RieszNetwork:
    config: NetworkConfig
    layers: list[RieszLayer]
    head_w: np.ndarray
    head_b: float
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9

    @classmethod
    def initialize(cls, config: NetworkConfig, seed: int = 0) -> "RieszNetwork":
        rng = np.random.default_rng(seed)
        m = config.n_features
        layers = []
        for cin, cout in config.hidden_pairs:
            layers.append(RieszLayer(
                gamma=np.ones(cin), beta=np.zeros(cin),
                run_mean=np.zeros(cin), run_var=np.ones(cin),
                weight=rng.normal(0.0, 1.0 / np.sqrt(cin * m), (cout, cin, m)),
                bias=np.zeros(cout)))
        c_last = config.channels[-2]
        head_w = rng.normal(0.0, 1.0 / np.sqrt(c_last), c_last)
        return cls(config=config, layers=layers, head_w=head_w, head_b=0.0)

    # parameter bookkeeping -------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays, in the fixed traversal order used by the
        optimizer, the gradient dict, and the model file."""
        out = []
        for layer in self.layers:
            out.extend([layer.gamma, layer.beta, layer.weight, layer.bias])
        out.append(self.head_w)
        out.append(np.array([self.head_b]))
        return out

    def set_parameters(self, arrays: list[np.ndarray]) -> None:
        k = 0
        for layer in self.layers:
            layer.gamma = arrays[k].copy(); k += 1
            layer.beta = arrays[k].copy(); k += 1
            layer.weight = arrays[k].copy(); k += 1
            layer.bias = arrays[k].copy(); k += 1
        self.head_w = arrays[k].copy(); k += 1
        self.head_b = float(arrays[k][0])

    def bank_param_count(self) -> int:
        return count_params(self.config)

    # forward/backward ------------------------------------------------------

    def _features(self, x: np.ndarray) -> np.ndarray:
        """Stack Riesz features: (N, C, sp) -> (N, C, m, sp)."""
        d = self.config.d
        axes = tuple(range(2, 2 + d))
        cplx = "complex64" if x.dtype == np.float32 else "complex128"
        spectra = _fft.fftn(x, axes=axes)
        shape = x.shape[2:]
        feats = np.empty(x.shape[:2] + (self.config.n_features,) + shape,
                         dtype=x.dtype)
        for m, idx in enumerate(FEATURE_INDICES[d]):
            feats[:, :, m] = _fft.ifftn(
                multiplier(shape, idx, cplx) * spectra, axes=axes).real
        return feats

    def _features_adjoint(self, dfeat: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`_features`: (N, C, m, sp) -> (N, C, sp)."""
        d = self.config.d
        shape = dfeat.shape[3:]
        axes = tuple(range(2, 2 + d))
        cplx = "complex64" if dfeat.dtype == np.float32 else "complex128"
        acc = None
        for m, idx in enumerate(FEATURE_INDICES[d]):
            term = np.conj(multiplier(shape, idx, cplx)) * _fft.fftn(
                dfeat[:, :, m], axes=axes)
            acc = term if acc is None else acc + term
        return _fft.ifftn(acc, axes=axes).real

    def forward(self, x: np.ndarray, train: bool = False,
                update_stats: bool = False, dtype=np.float64):
        """Probability maps for a batch ``(N, *spatial)`` of gray images.

        In train mode batch statistics normalize each channel; in eval mode
        the stored running statistics do.  Returns ``(probs, cache)``; the
        cache holds everything the backward pass needs and is None in eval
        mode.  ``dtype`` selects the compute precision of the activations
        (float32 roughly halves training time; gradients checked against
        finite differences use the float64 default).
        """
        d = self.config.d
        if x.ndim != 1 + d:
            raise VolumeError(f"expected (N, {'*' * d}) input, got {x.shape}")
        dtype = np.dtype(dtype)
        act = x[:, None].astype(dtype, copy=False)  # (N, 1, sp)
        stat_axes = (0,) + tuple(range(2, 2 + d))
        shape = (1, -1) + (1,) * d
        cache = [] if train else None
        for layer in self.layers:
            if train:
                mu = act.mean(axis=stat_axes, dtype=np.float64)
                var = act.astype(np.float64).var(axis=stat_axes)
                if update_stats:
                    mom = self.bn_momentum
                    layer.run_mean = mom * layer.run_mean + (1 - mom) * mu
                    layer.run_var = mom * layer.run_var + (1 - mom) * var
            else:
                mu, var = layer.run_mean, layer.run_var
            inv_std = 1.0 / np.sqrt(var + self.bn_eps)
            xhat = ((act - mu.reshape(shape).astype(dtype))
                    * inv_std.reshape(shape).astype(dtype))
            normed = (layer.gamma.reshape(shape).astype(dtype) * xhat
                      + layer.beta.reshape(shape).astype(dtype))
            feats = self._features(normed)
            pre = self.bank_forward(layer, feats)
            out = np.maximum(pre, 0.0)
            if train:
                cache.append((xhat, inv_std, feats, pre))
            act = out
        n = act.shape[0]
        flat = act.reshape(n, act.shape[1], -1)
        z = (self.head_w.astype(dtype)[None, :] @ flat).reshape(
            (n,) + act.shape[2:]) + dtype.type(self.head_b)
        probs = _sigmoid(z)
        if train:
            return probs, (cache, act, z, x.shape)
        return probs, None

    def bank_forward(self, layer: "RieszLayer", feats: np.ndarray) -> np.ndarray:
        """(N, C_in, m, sp) -> (N, C_out, sp) by a 1x1 conv across features."""
        n, cin, m = feats.shape[:3]
        sp = feats.shape[3:]
        dtype = feats.dtype
        flat = feats.reshape(n, cin * m, -1)
        w2 = layer.weight.reshape(-1, cin * m).astype(dtype)
        out = (w2[None] @ flat).reshape((n, -1) + sp)
        out += layer.bias.reshape((1, -1) + (1,) * len(sp)).astype(dtype)
        return out

    def backward(self, dprobs: np.ndarray, probs: np.ndarray, cache) -> tuple[dict, np.ndarray]:
        """Gradients of a scalar loss given d loss / d probs.

        Returns (grads, dinput) where grads maps 'layer{i}.gamma' etc. to
        arrays shaped like the parameters.
        """
        layer_caches, last_act, z, in_shape = cache
        d = self.config.d
        dtype = last_act.dtype
        stat_axes = (0,) + tuple(range(2, 2 + d))
        shape = (1, -1) + (1,) * d

        dz = (dprobs * probs * (1.0 - probs)).astype(dtype)
        n = dz.shape[0]
        dzf = dz.reshape(n, 1, -1)
        actf = last_act.reshape(n, last_act.shape[1], -1)
        grads = {
            "head_w": (dzf @ actf.transpose(0, 2, 1)).sum(axis=0)[0]
            .astype(np.float64),
            "head_b": np.array([dz.sum(dtype=np.float64)]),
        }
        dact = dz[:, None] * self.head_w.reshape(shape).astype(dtype)

        for li in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[li]
            xhat, inv_std, feats, pre = layer_caches[li]
            cin, m = feats.shape[1], feats.shape[2]
            dpre = dact * (pre > 0)
            grads[f"layer{li}.bias"] = dpre.sum(axis=stat_axes,
                                                dtype=np.float64)
            dpref = dpre.reshape(n, dpre.shape[1], -1)
            featf = feats.reshape(n, cin * m, -1)
            dw2 = (dpref @ featf.transpose(0, 2, 1)).sum(axis=0)
            grads[f"layer{li}.weight"] = dw2.reshape(
                layer.weight.shape).astype(np.float64)
            w2 = layer.weight.reshape(-1, cin * m).astype(dtype)
            dfeat = (w2.T[None] @ dpref).reshape(feats.shape)
            dnormed = self._features_adjoint(dfeat)
            grads[f"layer{li}.gamma"] = (dnormed * xhat).sum(
                axis=stat_axes, dtype=np.float64)
            grads[f"layer{li}.beta"] = dnormed.sum(axis=stat_axes,
                                                   dtype=np.float64)
            dxhat = dnormed * layer.gamma.reshape(shape).astype(dtype)
            m1 = dxhat.mean(axis=stat_axes, dtype=np.float64).reshape(shape)
            m2 = ((dxhat * xhat).mean(axis=stat_axes, dtype=np.float64)
                  .reshape(shape))
            dact = (inv_std.reshape(shape).astype(dtype)
                    * (dxhat - m1.astype(dtype) - xhat * m2.astype(dtype)))

        return grads, dact[:, 0]

    def grad_list(self, grads: dict) -> list[np.ndarray]:
        """Gradient arrays in :meth:`parameters` order."""
        out = []
        for li in range(len(self.layers)):
            out.extend([grads[f"layer{li}.gamma"], grads[f"layer{li}.beta"],
                        grads[f"layer{li}.weight"], grads[f"layer{li}.bias"]])
        out.append(grads["head_w"])
        out.append(grads["head_b"])
        return out


def riesz_layer_forward(layer: RieszLayer, x: np.ndarray) -> np.ndarray:
    """One Riesz layer on a multichannel image: (C_in, sp) -> (C_out, sp).

    Output channel j is the learned combination of the first- and
    second-order Riesz transforms of every input channel plus one bias (the
    per-pair constant terms collapse into a single per-output-channel bias).
    Linear up to that bias.
    """
    from .riesz import riesz_feature_stack

    x = np.asarray(x, dtype=np.float64)
    d = x.ndim - 1
    cout, cin, m = layer.weight.shape
    if d not in (2, 3) or m != feature_count(d):
        raise VolumeError(f"bank is for d with {m} features, input has d={d}")
    if x.shape[0] != cin:
        raise VolumeError(f"bank expects {cin} channels, input has {x.shape[0]}")
    feats = np.stack([riesz_feature_stack(x[i]) for i in range(cin)])
    flat = feats.reshape(cin * m, -1)
    out = (layer.weight.reshape(cout, cin * m) @ flat).reshape(
        (cout,) + x.shape[1:])
    out += layer.bias.reshape((cout,) + (1,) * d)
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def weighted_bce_loss(pred: np.ndarray, gt: np.ndarray,
                      weight: float) -> tuple[float, np.ndarray]:
    """Class-weighted binary cross-entropy, averaged over all voxels.

    Foreground (crack) terms are scaled by ``weight`` = p0/p1 >= 1 while
    background terms keep weight 1.  Predictions are clamped away from 0/1
    before the logs; the returned analytic gradient is with respect to the
    unclamped prediction (zero where the clamp is active).
    """
    if pred.shape != gt.shape:
        raise VolumeError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if weight < 1.0:
        raise VolumeError(f"class weight must be >= 1, got {weight}")
    y = gt.astype(pred.dtype, copy=False)
    clamped = np.clip(pred, _CLAMP, 1.0 - _CLAMP)
    n = pred.size
    loss = float(np.sum(-(weight * y * np.log(clamped)
                          + (1.0 - y) * np.log1p(-clamped)),
                        dtype=np.float64) / n)
    grad = (-(weight * y / clamped) + (1.0 - y) / (1.0 - clamped)) / n
    grad = np.where((pred > _CLAMP) & (pred < 1.0 - _CLAMP), grad,
                    pred.dtype.type(0.0))
    return loss, grad


def loss_and_grads(net: RieszNetwork, x: np.ndarray, y: np.ndarray,
                   weight: float, update_stats: bool = False,
                   dtype=np.float64):
    """Forward + loss + full backward for one batch.

    Returns (loss, grads dict, dinput).
    """
    probs, cache = net.forward(x, train=True, update_stats=update_stats,
                               dtype=dtype)
    loss, dprobs = weighted_bce_loss(probs, y, weight)
    grads, dinput = net.backward(dprobs, probs, cache)
    return loss, grads, dinput


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 5
    class_weight: float | str = "auto"
    seed: int = 0
    compute_dtype: str = "float32"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise VolumeError("learning rate must be > 0")
        if self.compute_dtype not in ("float32", "float64"):
            raise VolumeError(f"bad compute_dtype {self.compute_dtype!r}")


@dataclass
class TrainResult:
    loss_history: list[float]
    class_weight: float


class Adam:
    """Adaptive-moment gradient descent over a list of arrays."""

    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = []
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            out.append(p - self.lr * mhat / (np.sqrt(vhat) + self.eps))
        return out


def _as_array(image) -> np.ndarray:
    if isinstance(image, VoxelVolume):
        arr = image.data
        return arr[:, :, 0] if image.ndim_spatial == 2 else arr
    if isinstance(image, BinaryMask):
        arr = image.bits
        return arr[:, :, 0] if arr.shape[2] == 1 else arr
    return np.asarray(image)


def pooled_class_weight(masks) -> float:
    ones = total = 0
    for m in masks:
        arr = _as_array(m)
        ones += int(np.sum(arr != 0))
        total += arr.size
    if ones == 0:
        raise VolumeError("undefined weight: no foreground in dataset")
    return max(1.0, (total - ones) / ones)


def train(net: RieszNetwork, dataset, cfg: TrainConfig) -> TrainResult:
    """Mini-batch Adam over (image, mask) pairs.

    The dataset is a sequence of (VoxelVolume | array, BinaryMask | array)
    of identical dims.  Deterministic for a given seed (single threaded).
    Raises TrainingDivergedError when the loss leaves the finite range.
    """
    if not dataset:
        raise VolumeError("empty training dataset")
    images = [np.asarray(_as_array(img), dtype=np.float64) for img, _ in dataset]
    masks = [np.asarray(_as_array(msk), dtype=np.float64) for _, msk in dataset]
    shapes = {im.shape for im in images} | {mk.shape for mk in masks}
    if len(shapes) != 1:
        raise VolumeError(f"training patches must share dims, got {shapes}")
    if images[0].ndim != net.config.d:
        raise VolumeError(f"dataset is {images[0].ndim}D but network is "
                          f"{net.config.d}D")

    if cfg.class_weight == "auto":
        weight = pooled_class_weight(masks)
    else:
        weight = float(cfg.class_weight)
        if weight < 1.0:
            raise VolumeError(f"class weight must be >= 1, got {weight}")

    rng = np.random.default_rng(cfg.seed)
    params = net.parameters()
    opt = Adam([p.shape for p in params], lr=cfg.learning_rate)
    history: list[float] = []
    n = len(images)
    for epoch in range(cfg.epochs):
        opt.lr = cfg.learning_rate * (cfg.lr_decay ** (epoch // cfg.lr_decay_every))
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = np.stack([images[i] for i in idx])
            yb = np.stack([masks[i] for i in idx])
            loss, grads, _ = loss_and_grads(net, xb, yb, weight,
                                            update_stats=True,
                                            dtype=cfg.compute_dtype)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} in epoch {epoch}", history=history)
            params = opt.step(params, net.grad_list(grads))
            net.set_parameters(params)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return TrainResult(loss_history=history, class_weight=weight)


# inference ------------------------------------------------------------------


def _forward_eval_lowmem(net: RieszNetwork, image: np.ndarray) -> np.ndarray:
    """Eval-mode forward for one image, accumulating features channelwise
    to keep peak memory at a few spatial fields."""
    d = net.config.d
    act = image[None].astype(np.float32)  # (1=C, sp)
    for layer in net.layers:
        inv = 1.0 / np.sqrt(layer.run_var + net.bn_eps)
        shp = (-1,) + (1,) * d
        normed = ((act - layer.run_mean.reshape(shp).astype(np.float32))
                  * inv.reshape(shp).astype(np.float32))
        normed = (layer.gamma.reshape(shp).astype(np.float32) * normed
                  + layer.beta.reshape(shp).astype(np.float32))
        cout = layer.weight.shape[0]
        out = np.broadcast_to(
            layer.bias.astype(np.float32).reshape(shp), (cout,) + image.shape
        ).copy()
        for i in range(normed.shape[0]):
            spectrum = _fft.fftn(normed[i])
            for m, idx in enumerate(FEATURE_INDICES[d]):
                feat = _fft.ifftn(
                    multiplier(image.shape, idx, "complex64")
                    * spectrum).real.astype(np.float32)
                out += layer.weight[:, i, m].astype(np.float32).reshape(shp) \
                    * feat[None]
        act = np.maximum(out, 0.0, out=out)
    z = np.tensordot(net.head_w.astype(np.float32), act, axes=1) + net.head_b
    return _sigmoid(z.astype(np.float64))


def predict(net: RieszNetwork, volume: VoxelVolume, threshold: float = 0.5,
            pad: int = 16) -> tuple[BinaryMask, VoxelVolume]:
    """Segment one volume: eval-mode forward, then threshold.

    The volume is mirror-padded by ``pad`` voxels before the transforms and
    cropped after, which suppresses FFT wrap-around streaks at the borders.
    """
    image = _as_array(volume).astype(np.float64)
    if image.ndim != net.config.d:
        raise VolumeError(f"volume is {image.ndim}D but network is {net.config.d}D")
    pads = [min(int(pad), n - 1) if n > 1 else 0 for n in image.shape]
    padded = np.pad(image, [(p, p) for p in pads], mode="reflect") \
        if any(pads) else image
    prob = _forward_eval_lowmem(net, padded)
    crop = tuple(slice(p, p + n) for p, n in zip(pads, image.shape))
    prob = prob[crop]
    if net.config.d == 2:
        prob3 = prob[:, :, None]
    else:
        prob3 = prob
    prob_vol = VoxelVolume(prob3.astype(np.float64), volume.spacing_um)
    mask = BinaryMask(prob3 >= threshold)
    return mask, prob_vol


# model file -----------------------------------------------------------------


def save_model(net: RieszNetwork, path) -> None:
    """Write the documented model format: a JSON header (config, dimension,
    parameter count, batch-norm statistics) followed by a flat little-endian
    f32 block holding bank weights/biases then head weights/bias."""
    header = {
        "format": "rnet",
        "version": 1,
        "channels": list(net.config.channels),
        "d": net.config.d,
        "param_count": count_params(net.config),
        "bn_eps": net.bn_eps,
        "bn_momentum": net.bn_momentum,
        "bn": [{
            "gamma": layer.gamma.tolist(),
            "beta": layer.beta.tolist(),
            "mean": layer.run_mean.tolist(),
            "var": layer.run_var.tolist(),
        } for layer in net.layers],
    }
    blob = json.dumps(header).encode()
    parts = []
    for layer in net.layers:
        parts.append(layer.weight.astype("<f4").ravel())
        parts.append(layer.bias.astype("<f4").ravel())
    parts.append(net.head_w.astype("<f4").ravel())
    parts.append(np.array([net.head_b], dtype="<f4"))
    block = np.concatenate(parts)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(block.tobytes())


def load_model(path) -> RieszNetwork:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise VolumeError(f"not a model file: {path}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        block = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
    config = NetworkConfig(tuple(header["channels"]), d=int(header["d"]))
    expected = count_params(config)
    if header.get("param_count") != expected or len(block) != expected:
        raise VolumeError(
            f"model parameter count mismatch: header {header.get('param_count')},"
            f" block {len(block)}, config needs {expected}")
    net = RieszNetwork.initialize(config, seed=0)
    net.bn_eps = float(header.get("bn_eps", 1e-5))
    net.bn_momentum = float(header.get("bn_momentum", 0.9))
    k = 0
    for layer, bn in zip(net.layers, header["bn"]):
        layer.gamma = np.asarray(bn["gamma"], dtype=np.float64)
        layer.beta = np.asarray(bn["beta"], dtype=np.float64)
        layer.run_mean = np.asarray(bn["mean"], dtype=np.float64)
        layer.run_var = np.asarray(bn["var"], dtype=np.float64)
        size = layer.weight.size
        layer.weight = block[k:k + size].reshape(layer.weight.shape); k += size
        size = layer.bias.size
        layer.bias = block[k:k + size]; k += size
    net.head_w = block[k:k + net.head_w.size]; k += net.head_w.size
    net.head_b = float(block[k])
    return net
