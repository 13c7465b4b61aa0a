"""Adam with decoupled weight decay, written as a pure function.

``adam_step`` consumes a parameter tree, a congruent gradient mapping and
the current optimizer state, and returns a fresh tree plus the advanced
state. Weight decay multiplies the parameters after the adaptive step
(decoupled), so lr=0 leaves parameters untouched regardless of decay.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParameterTree, StructuralError


@dataclass
class AdamState:
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float
    weight_decay: float
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(
    tree: ParameterTree,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> AdamState:
    m = {name: np.zeros_like(t.data) for name, t in tree.items()}
    v = {name: np.zeros_like(t.data) for name, t in tree.items()}
    return AdamState(step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                     weight_decay=weight_decay, m=m, v=v)


def adam_step(
    tree: ParameterTree, grads: dict[str, np.ndarray], state: AdamState
) -> tuple[ParameterTree, AdamState]:
    names = tree.names()
    if sorted(grads) != names:
        raise StructuralError("gradient tree does not match parameter tree")
    if sorted(state.m) != names or sorted(state.v) != names:
        raise StructuralError("optimizer state does not match parameter tree")

    t = state.step + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    decay = 1.0 - state.lr * state.weight_decay

    new_data = {}
    new_m = {}
    new_v = {}
    for name in names:
        theta = tree[name].data
        g = grads[name]
        if g.shape != theta.shape:
            raise StructuralError(
                f"gradient shape {g.shape} does not match parameter {name} {theta.shape}"
            )
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_data[name] = (theta - update) * decay
        new_m[name] = m
        new_v[name] = v

    new_tree = tree.copy_with(new_data)
    new_state = AdamState(
        step=t, lr=state.lr, beta1=state.beta1, beta2=state.beta2,
        eps=state.eps, weight_decay=state.weight_decay, m=new_m, v=new_v,
    )
    return new_tree, new_state
