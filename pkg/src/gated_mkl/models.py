"""Two-layer gated-ReLU and ReLU networks built from convex solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrangements import MaskSet
from .cone import ConeDecomposition


@dataclass
class GatedReluNetwork:
    gates: np.ndarray  # (m, d)
    w1: np.ndarray  # (m, d)
    w2: np.ndarray  # (m,)

    def __post_init__(self):
        self.gates = np.atleast_2d(np.asarray(self.gates, dtype=float))
        self.w1 = np.atleast_2d(np.asarray(self.w1, dtype=float))
        self.w2 = np.asarray(self.w2, dtype=float).reshape(-1)
        if not (len(self.gates) == len(self.w1) == len(self.w2)):
            raise ValueError("gates, first-layer and second-layer weights need the same width")

    @property
    def width(self) -> int:
        return len(self.w2)


@dataclass
class ReluNetwork:
    w1: np.ndarray  # (m, d)
    w2: np.ndarray  # (m,)

    def __post_init__(self):
        self.w1 = np.atleast_2d(np.asarray(self.w1, dtype=float))
        self.w2 = np.asarray(self.w2, dtype=float).reshape(-1)
        if len(self.w2) != len(self.w1):
            raise ValueError("first- and second-layer widths differ")

    @property
    def width(self) -> int:
        return len(self.w2)


def _inputs(Z, d):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != d:
        raise ValueError(f"inputs have {Z.shape[1]} features, network expects {d}")
    return Z


def gated_forward(net: GatedReluNetwork, Z) -> np.ndarray:
    if net.width == 0:
        return np.zeros(np.atleast_2d(Z).shape[0])
    Z = _inputs(Z, net.gates.shape[1])
    on = Z @ net.gates.T >= 0
    return (on * (Z @ net.w1.T)) @ net.w2


def relu_forward(net: ReluNetwork, Z) -> np.ndarray:
    if net.width == 0:
        return np.zeros(np.atleast_2d(Z).shape[0])
    Z = _inputs(Z, net.w1.shape[1])
    return np.maximum(Z @ net.w1.T, 0) @ net.w2


def reparam_forward(Vp, Vm, Z) -> np.ndarray:
    """Unscaled ``sum_j relu(x^T w+_j) - relu(x^T w-_j)``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Vp = np.atleast_2d(Vp)
    Vm = np.atleast_2d(Vm)
    return np.maximum(Z @ Vp.T, 0).sum(axis=1) - np.maximum(Z @ Vm.T, 0).sum(axis=1)


def _balanced(W):
    norms = np.linalg.norm(W, axis=1)
    keep = norms > 0
    root = np.sqrt(norms[keep])
    return keep, W[keep] / root[:, None], root


def network_from_convex(masks: MaskSet, W) -> GatedReluNetwork:
    """One neuron per nonzero group with the balanced split ``w / sqrt|w|``, ``sqrt|w|``."""
    if masks.gates is None:
        raise ValueError("mask set carries no gates")
    W = np.asarray(W, dtype=float)
    keep, w1, w2 = _balanced(W)
    return GatedReluNetwork(masks.gates[keep], w1, w2)


def relu_from_decomposition(decomp: ConeDecomposition, eq_tol: float = 1e-8, cone_tol: float = 1e-10) -> ReluNetwork:
    """Neurons ``(v_i, +)`` and ``(u_i, -)`` with the same balanced split."""
    if not decomp.feasible(eq_tol, cone_tol):
        raise ValueError("cone decomposition is not feasible within tolerance")
    kv, v1, v2 = _balanced(decomp.V)
    ku, u1, u2 = _balanced(decomp.U)
    d = decomp.V.shape[1]
    w1 = np.vstack([v1.reshape(-1, d), u1.reshape(-1, d)])
    w2 = np.r_[v2, -u2]
    return ReluNetwork(w1, w2)


def network_to_text(net) -> str:
    if isinstance(net, GatedReluNetwork):
        d = net.gates.shape[1]
        lines = [f"{net.width} {d} gated"]
        for g, a, b in zip(net.gates, net.w1, net.w2):
            lines.append(" ".join(repr(float(v)) for v in (*g, *a, b)))
    elif isinstance(net, ReluNetwork):
        d = net.w1.shape[1]
        lines = [f"{net.width} {d} relu"]
        for a, b in zip(net.w1, net.w2):
            lines.append(" ".join(repr(float(v)) for v in (*a, b)))
    else:
        raise TypeError(f"unsupported network type {type(net).__name__}")
    return "\n".join(lines) + "\n"


def network_from_text(text: str):
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    m, d, kind = int(rows[0][0]), int(rows[0][1]), rows[0][2]
    width = 2 * d + 1 if kind == "gated" else d + 1
    body = np.array([[float(v) for v in r] for r in rows[1 : 1 + m]], dtype=float).reshape(m, width)
    if kind == "gated":
        return GatedReluNetwork(body[:, :d], body[:, d : 2 * d], body[:, 2 * d])
    if kind == "relu":
        return ReluNetwork(body[:, :d].reshape(m, d), body[:, d])
    raise ValueError(f"unknown network type {kind!r}")
