"""Concrete architectures used by the experiments.

Hidden layers use LeakyReLU(0.2); embedding and output layers stay linear
(classifier outputs get a Softmax). The regularized layer is always the
embedding-style dense layer whose activations feed the penalty.
"""

from __future__ import annotations

from .nn import Conv2D, Dense, LeakyReLU, MaxPool2D, Network, Reshape, Softmax

__all__ = ["autoencoder", "mnist_classifier_basic", "mnist_classifier_conv"]

LEAKY_SLOPE = 0.2


def autoencoder(input_dim: int, widths=(50, 50, 6, 50, 50), seed: int = 0,
                embedding_index: int | None = None) -> Network:
    """Dense autoencoder; widths are the hidden layer sizes, in order.

    The embedding layer (middle width by default) is linear and regularized;
    the final reconstruction layer is linear.
    """
    widths = list(widths)
    if embedding_index is None:
        embedding_index = len(widths) // 2
    sizes = [input_dim] + widths + [input_dim]
    layers = []
    regularized = None
    for i in range(len(sizes) - 1):
        layers.append(Dense(sizes[i], sizes[i + 1]))
        if i == embedding_index:
            regularized = len(layers) - 1
        elif i < len(sizes) - 2:
            layers.append(LeakyReLU(LEAKY_SLOPE))
    return Network(layers, regularized, (input_dim,), seed)


def _mnist_trunk() -> list:
    return [
        Reshape((1, 28, 28)),
        Conv2D(1, 32, patch=5, stride=1, same=True),
        LeakyReLU(LEAKY_SLOPE),
        MaxPool2D(2, 2),
        Conv2D(32, 64, patch=5, stride=1, same=True),
        LeakyReLU(LEAKY_SLOPE),
        MaxPool2D(2, 2),
        Reshape((3136,)),
        Dense(3136, 64),  # smoothing layer, read as an 8x8 grid
    ]


def mnist_classifier_basic(seed: int = 0) -> Network:
    """Two conv/pool stages, a 64-unit dense smoothing layer, then the head."""
    layers = _mnist_trunk()
    regularized = len(layers) - 1
    layers += [Dense(64, 10), Softmax()]
    return Network(layers, regularized, (784,), seed)


def mnist_classifier_conv(seed: int = 0) -> Network:
    """Variant with 3x3 convolutions stacked after the 8x8 smoothing layer."""
    layers = _mnist_trunk()
    regularized = len(layers) - 1
    layers += [
        Reshape((1, 8, 8)),
        Conv2D(1, 16, patch=3, stride=1, same=True),
        LeakyReLU(LEAKY_SLOPE),
        MaxPool2D(2, 2),
        Conv2D(16, 16, patch=3, stride=1, same=True),
        LeakyReLU(LEAKY_SLOPE),
        MaxPool2D(2, 2),
        Conv2D(16, 16, patch=3, stride=1, same=True),
        LeakyReLU(LEAKY_SLOPE),
        Reshape((64,)),
        Dense(64, 10),
        Softmax(),
    ]
    return Network(layers, regularized, (784,), seed)
