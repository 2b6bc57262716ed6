"""From-scratch CNN for polygon shape classification."""
from __future__ import annotations

from ..geometry import Polygon
from ..raster import rasterize
from .data import (
    LabeledImage,
    batch_arrays,
    generate_dataset,
    load_dataset,
    perturbed_polygon,
    save_dataset,
    split_dataset,
)
from .layers import (
    BatchNormLayer,
    ConvLayer,
    DenseLayer,
    MaxPoolLayer,
    ReLULayer,
    batchnorm_forward,
    conv_forward,
    cross_entropy,
    pool_forward,
    relu,
    softmax,
    softmax_cross_entropy,
)
from .network import FEATURE_MAPS, Network, load_model, save_model
from .train import (
    AdamState,
    TrainConfig,
    accuracy,
    adam_step,
    compute_gradients,
    confusion_matrix,
    evaluate,
    train,
)

__all__ = [
    "AdamState",
    "BatchNormLayer",
    "ConvLayer",
    "DenseLayer",
    "FEATURE_MAPS",
    "LabeledImage",
    "MaxPoolLayer",
    "Network",
    "ReLULayer",
    "TrainConfig",
    "accuracy",
    "adam_step",
    "batch_arrays",
    "batchnorm_forward",
    "classify",
    "compute_gradients",
    "confusion_matrix",
    "conv_forward",
    "cross_entropy",
    "evaluate",
    "generate_dataset",
    "load_dataset",
    "load_model",
    "perturbed_polygon",
    "polygon_classifier",
    "pool_forward",
    "relu",
    "save_dataset",
    "save_model",
    "softmax",
    "softmax_cross_entropy",
    "split_dataset",
    "train",
]


def classify(net: Network, p: Polygon) -> int:
    """Rasterize and classify; returns the vertex-count label (>= 3)."""
    return net.classify_image(rasterize(p))


def polygon_classifier(net: Network):
    """Classifier closure for the refinement strategies."""
    return net.classify_polygon
