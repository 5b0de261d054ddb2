"""Plain numpy multilayer perceptron used by the learning simulation.

ReLU hidden layers, softmax output, categorical cross-entropy loss, trained
with mini-batch gradient descent. Kept dependency-free so aggregation
semantics stay transparent: model parameters are bare arrays and federated
averaging is an explicit weighted mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ModelParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "ModelParams":
        return ModelParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


def init_params(layer_sizes: list[int], rng: np.random.Generator) -> ModelParams:
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights=weights, biases=biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def forward(params: ModelParams, x: np.ndarray) -> list[np.ndarray]:
    """Returns the list of layer activations, input first, probabilities last."""
    activations = [x]
    h = x
    last = len(params.weights) - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = softmax(z) if li == last else np.maximum(z, 0.0)
        activations.append(h)
    return activations


def predict_proba(params: ModelParams, x: np.ndarray) -> np.ndarray:
    return forward(params, x)[-1]


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.clip(picked, 1e-12, None)).mean())


def loss_and_grads(
    params: ModelParams, x: np.ndarray, labels: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over the batch and its parameter gradients."""
    activations = forward(params, x)
    probs = activations[-1]
    batch = len(labels)
    loss = cross_entropy(probs, labels)

    delta = probs.copy()
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch

    grad_w: list[np.ndarray] = [np.empty(0)] * len(params.weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(params.biases)
    for li in range(len(params.weights) - 1, -1, -1):
        grad_w[li] = activations[li].T @ delta
        grad_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ params.weights[li].T) * (activations[li] > 0)
    return loss, grad_w, grad_b


def sgd_train(
    params: ModelParams,
    x: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    learning_rate: float,
    batch_size: int,
    rng: np.random.Generator,
) -> ModelParams:
    """Mini-batch gradient descent; returns updated copies, input untouched."""
    if len(labels) == 0:
        raise ValueError("empty training set")
    out = params.copy()
    n = len(labels)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            _, grad_w, grad_b = loss_and_grads(out, x[idx], labels[idx])
            for li in range(len(out.weights)):
                out.weights[li] -= learning_rate * grad_w[li]
                out.biases[li] -= learning_rate * grad_b[li]
    return out


def accuracy(params: ModelParams, x: np.ndarray, labels: np.ndarray) -> float:
    if len(labels) == 0:
        return 0.0
    preds = predict_proba(params, x).argmax(axis=1)
    return float((preds == labels).mean())


def fedavg_aggregate(updates: list[tuple[ModelParams, int]]) -> ModelParams:
    """Sample-count weighted parameter average of client updates."""
    if not updates:
        raise ValueError("nothing to aggregate")
    total = sum(count for _, count in updates)
    if total <= 0:
        raise ValueError("aggregation weights sum to zero")
    first = updates[0][0]
    weights = [np.zeros_like(w) for w in first.weights]
    biases = [np.zeros_like(b) for b in first.biases]
    for params, count in updates:
        share = count / total
        for li in range(len(weights)):
            weights[li] += share * params.weights[li]
            biases[li] += share * params.biases[li]
    return ModelParams(weights=weights, biases=biases)
