"""Parameterised building blocks: linear layers, MLPs, the LSTM cell and the
1x1 channel-mixing stack used by the fusion network."""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from ..errors import ShapeError
from . import tensor as T
from .tensor import Tensor

ACTIVATIONS = {"linear": lambda x: x, "relu": T.relu, "tanh": T.tanh, "sigmoid": T.sigmoid}


def param(data, name: str) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


class Module:
    """Minimal parameter container: subclasses list their children in ``_children``."""

    _children: tuple[str, ...] = ()
    _params: tuple[str, ...] = ()

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name in self._params:
            yield prefix + name, getattr(self, name)
        for name in self._children:
            child = getattr(self, name)
            if isinstance(child, (list, tuple)):
                for i, c in enumerate(child):
                    yield from c.named_parameters(f"{prefix}{name}.{i}.")
            else:
                yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_(self) -> None:
        for p in self.parameters():
            p.data[...] = 0.0


class Linear(Module):
    _params = ("W", "b")

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, activation: str = "linear"):
        bound = 1.0 / np.sqrt(n_in)
        self.W = param(rng.uniform(-bound, bound, size=(n_out, n_in)), "W")
        self.b = param(np.zeros(n_out), "b")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation

    def __call__(self, x) -> Tensor:
        return ACTIVATIONS[self.activation](T.linear(x, self.W, self.b))


class MLP(Module):
    _children = ("layers",)

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, activations: Sequence[str]):
        if len(activations) != len(sizes) - 1:
            raise ShapeError("need one activation per layer")
        self.layers = [Linear(a, b, rng, act) for a, b, act in zip(sizes[:-1], sizes[1:], activations)]

    def __call__(self, x) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


class LSTMCell(Module):
    """Gates ordered (input, forget, cell, output); weights uniform in
    ±1/sqrt(H), zero biases except +1 on the forget gate."""

    _params = ("W_ih", "W_hh", "b")

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.W_ih = param(rng.uniform(-bound, bound, size=(4 * hidden, n_in)), "W_ih")
        self.W_hh = param(rng.uniform(-bound, bound, size=(4 * hidden, hidden)), "W_hh")
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        self.b = param(b, "b")

    def step(self, x, hc) -> Tensor:
        return T.lstm_cell(x, hc, self.W_ih, self.W_hh, self.b)

    def zero_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, 2 * self.hidden)))


def lstm_step(p: LSTMCell, h, c, x) -> tuple[Tensor, Tensor]:
    """Unpacked single step returning ``(h', c')``."""
    H = p.hidden
    hc = p.step(x, T.concat([T.as_tensor(h), T.as_tensor(c)], axis=1))
    return hc[:, :H], hc[:, H:]


class ChannelMix(Module):
    """Three kernel-size-1 convolutions over the pyramid channel axis
    (L -> 8 -> 4 -> 1), ReLU after the first two.  Weights are shared across
    time steps and across the x/y coordinate planes."""

    _children = ("layers",)

    def __init__(self, n_channels: int, rng: np.random.Generator, widths: Sequence[int] = (8, 4, 1)):
        sizes = [n_channels, *widths]
        acts = ["relu"] * (len(widths) - 1) + ["linear"]
        self.n_channels = n_channels
        self.layers = [Linear(a, b, rng, act) for a, b, act in zip(sizes[:-1], sizes[1:], acts)]

    def __call__(self, x) -> Tensor:
        """``x`` is channel-last: ``(..., L)`` -> ``(..., 1)``."""
        if x.shape[-1] != self.n_channels:
            raise ShapeError(f"expected {self.n_channels} channels, got {x.shape[-1]}")
        for layer in self.layers:
            x = layer(x)
        return x


def channel_mix_forward(p: ChannelMix, x) -> Tensor:
    """Channel-first convenience: ``(N, L, 2, t_p)`` -> ``(N, t_p, 2)``."""
    x = T.as_tensor(x)
    if x.ndim != 4 or x.shape[1] != p.n_channels:
        raise ShapeError(f"expected (N, {p.n_channels}, 2, t_p) input, got {x.shape}")
    y = p(T.transpose(x, (0, 3, 2, 1)))
    return T.reshape(y, y.shape[:3])
