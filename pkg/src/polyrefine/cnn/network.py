"""The polygon-shape classifier network and its on-disk format."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..geometry import Polygon
from ..raster import RESOLUTION, BinaryImage, rasterize
from .layers import (
    BatchNormLayer,
    ConvLayer,
    DenseLayer,
    MaxPoolLayer,
    ReLULayer,
    softmax,
)

# Feature maps of the six Conv->Norm->ReLU(->Pool) blocks; the last block
# has no pooling stage, so 64x64 inputs reach the dense layer as 2x2x64.
FEATURE_MAPS = (2, 4, 8, 16, 32, 64)

_MAGIC = b"POLYCNN1"
_FORMAT_VERSION = 1


class Network:
    """Stack of conv blocks plus a dense softmax head, trained with Adam."""

    def __init__(self, n_classes: int, resolution: int = RESOLUTION, seed: int = 0):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        rng = np.random.default_rng(seed)
        self.n_classes = n_classes
        self.resolution = resolution
        self.layers: list = []
        channels = 1
        size = resolution
        for i, maps in enumerate(FEATURE_MAPS):
            self.layers.append(ConvLayer(channels, maps, k=1, rng=rng))
            self.layers.append(BatchNormLayer(maps))
            self.layers.append(ReLULayer())
            if i < len(FEATURE_MAPS) - 1:
                self.layers.append(MaxPoolLayer(2))
                size = -(-size // 2)
            channels = maps
        self.layers.append(DenseLayer(size * size * channels, n_classes, rng=rng))

    # -- forward / backward ---------------------------------------------------
    def forward_logits(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def forward(self, images: np.ndarray, train: bool = False) -> np.ndarray:
        """Class probabilities for a batch shaped (N, res, res) or (N, res, res, 1)."""
        x = np.asarray(images, dtype=float)
        if x.ndim == 3:
            x = x[..., None]
        return softmax(self.forward_logits(x, train=train))

    def forward_single(self, image) -> np.ndarray:
        """Probability vector for one image (BinaryImage or pixel array)."""
        px = image.pixels if isinstance(image, BinaryImage) else np.asarray(image)
        return self.forward(px[None].astype(float))[0]

    def backward_from_logits(self, dlogits: np.ndarray) -> None:
        g = dlogits
        for layer in reversed(self.layers):
            g = layer.backward(g)

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def refresh_norm_stats(self, images: np.ndarray, batch_size: int = 256) -> None:
        """Replace the running batch-norm statistics with exact aggregates
        over the given images (law of total variance across batches).

        The exponential estimates lag the parameters badly on small datasets
        (few batches per epoch); recomputing them makes inference consistent
        with the final weights.
        """
        x_all = np.asarray(images)
        if x_all.ndim == 3:
            x_all = x_all[..., None]
        norms = [l for l in self.layers if isinstance(l, BatchNormLayer)]
        acc = {id(l): [0.0, 0.0, 0.0] for l in norms}  # count, sum, sum of squares
        for start in range(0, len(x_all), batch_size):
            x = x_all[start : start + batch_size]
            for layer in self.layers:
                if isinstance(layer, BatchNormLayer):
                    mu, var = layer.batch_stats(x)
                    n = x.size / x.shape[-1]
                    a = acc[id(layer)]
                    a[0] += n
                    a[1] = a[1] + n * mu
                    a[2] = a[2] + n * (var + mu * mu)
                    # normalize by this batch's stats (as in training) so the
                    # deeper layers see the distribution they will get
                    x = self._bn_with(layer, x, mu, var)
                else:
                    x = layer.forward(x, train=False)
        for layer in norms:
            count, s1, s2 = acc[id(layer)]
            mean = s1 / count
            layer.running_mean = np.asarray(mean, dtype=np.float64)
            layer.running_var = np.asarray(s2 / count - mean * mean, dtype=np.float64)

    @staticmethod
    def _bn_with(layer: BatchNormLayer, x: np.ndarray, mu, var) -> np.ndarray:
        dt = x.dtype
        inv_std = 1.0 / np.sqrt(var + layer.eps)
        scale = (layer.gamma * inv_std).astype(dt)
        shift = (layer.beta - layer.gamma * mu * inv_std).astype(dt)
        return x * scale + shift

    # -- classification ---------------------------------------------------------
    def classify_image(self, image) -> int:
        """Predicted vertex-count label; argmax ties resolve to the smaller label."""
        probs = self.forward_single(image)
        return int(np.argmax(probs)) + 3

    def classify_polygon(self, p: Polygon) -> int:
        return self.classify_image(rasterize(p))

    # -- persistence -------------------------------------------------------------
    def save(self, path) -> None:
        save_model(self, path)


def _pack_array(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_model(net: Network, path) -> None:
    """Versioned binary dump; parameters and running statistics round-trip
    bit-exactly (little-endian float64 blocks)."""
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<III", _FORMAT_VERSION, net.n_classes, net.resolution)
    out += struct.pack("<I", len(net.layers))
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            out += struct.pack(
                "<BIII", 1, layer.k, layer.in_channels, layer.feature_maps
            )
            out += _pack_array(layer.kernel)
            out += _pack_array(layer.bias)
        elif isinstance(layer, BatchNormLayer):
            out += struct.pack("<BI", 2, layer.channels)
            out += struct.pack("<dd", layer.momentum, layer.eps)
            for arr in (layer.gamma, layer.beta, layer.running_mean, layer.running_var):
                out += _pack_array(arr)
        elif isinstance(layer, ReLULayer):
            out += struct.pack("<B", 3)
        elif isinstance(layer, MaxPoolLayer):
            out += struct.pack("<BI", 4, layer.size)
        elif isinstance(layer, DenseLayer):
            out += struct.pack("<BII", 5, layer.in_features, layer.out_features)
            out += _pack_array(layer.weights)
            out += _pack_array(layer.bias)
        else:
            raise TypeError(f"unknown layer type {type(layer)!r}")
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def unpack(self, fmt: str):
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += struct.calcsize(fmt)
        return vals

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        arr = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos)
        self.pos += count * 8
        return arr.reshape(shape).astype(np.float64)


def load_model(path) -> Network:
    r = _Reader(Path(path).read_bytes())
    if r.data[:8] != _MAGIC:
        raise ValueError("not a polyrefine model file")
    r.pos = 8
    version, n_classes, resolution = r.unpack("<III")
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported model version {version}")
    (n_layers,) = r.unpack("<I")
    net = Network.__new__(Network)
    net.n_classes = n_classes
    net.resolution = resolution
    net.layers = []
    for _ in range(n_layers):
        (tag,) = r.unpack("<B")
        if tag == 1:
            k, c_in, maps = r.unpack("<III")
            layer = ConvLayer(c_in, maps, k=k)
            K = 2 * k + 1
            layer.kernel = r.array((K, K, c_in, maps))
            layer.bias = r.array((maps,))
        elif tag == 2:
            (channels,) = r.unpack("<I")
            momentum, eps = r.unpack("<dd")
            layer = BatchNormLayer(channels, momentum=momentum, eps=eps)
            layer.gamma = r.array((channels,))
            layer.beta = r.array((channels,))
            layer.running_mean = r.array((channels,))
            layer.running_var = r.array((channels,))
        elif tag == 3:
            layer = ReLULayer()
        elif tag == 4:
            (size,) = r.unpack("<I")
            layer = MaxPoolLayer(size)
        elif tag == 5:
            n_in, n_out = r.unpack("<II")
            layer = DenseLayer(n_in, n_out)
            layer.weights = r.array((n_in, n_out))
            layer.bias = r.array((n_out,))
        else:
            raise ValueError(f"unknown layer tag {tag}")
        net.layers.append(layer)
    return net
