"""Hyperplane-arrangement masks of a data matrix.

A mask is the 0/1 activation pattern ``1{X g >= 0}`` of a gate vector ``g``
on the training rows. Masks are held as boolean arrays; deduplication keys
are the packed bit patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_CHUNK = 1 << 14


def as_data_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"data matrix must be 2-D with n, d >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix has non-finite entries")
    return X


def mask_key(bits) -> bytes:
    bits = np.asarray(bits, dtype=bool)
    return np.packbits(bits).tobytes() + len(bits).to_bytes(4, "little")


def _row_keys(B: np.ndarray) -> list[bytes]:
    packed = np.packbits(B, axis=1)
    tail = B.shape[1].to_bytes(4, "little")
    return [row.tobytes() + tail for row in packed]


def mask_of_gate(X, g) -> np.ndarray:
    """Activation pattern of gate ``g``; a zero pre-activation counts as on."""
    X = as_data_matrix(X)
    g = np.asarray(g, dtype=float)
    if g.shape != (X.shape[1],):
        raise ValueError(f"gate has shape {g.shape}, expected ({X.shape[1]},)")
    if not np.all(np.isfinite(g)):
        raise ValueError("gate has non-finite entries")
    return X @ g >= 0


@dataclass
class MaskSet:
    """Distinct masks (``p x n`` booleans) with optional witness gates (``p x d``).

    Masks are kept in lexicographic bit-string order so that every consumer
    sees the same indexing.
    """

    masks: np.ndarray
    gates: np.ndarray | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        masks = np.atleast_2d(np.asarray(self.masks, dtype=bool))
        if masks.shape[0] < 1:
            raise ValueError("a MaskSet needs at least one mask")
        gates = None
        if self.gates is not None:
            gates = np.atleast_2d(np.asarray(self.gates, dtype=float))
            if gates.shape[0] != masks.shape[0]:
                raise ValueError("need exactly one gate per mask")
        strings = ["".join("1" if b else "0" for b in row) for row in masks]
        order = sorted(range(len(strings)), key=strings.__getitem__)
        masks = masks[order]
        if gates is not None:
            gates = gates[order]
        keys = _row_keys(masks)
        if len(set(keys)) != len(keys):
            raise ValueError("masks must be pairwise distinct")
        self.masks = masks
        self.gates = gates
        self._index = {k: i for i, k in enumerate(keys)}

    @property
    def p(self) -> int:
        return self.masks.shape[0]

    @property
    def n(self) -> int:
        return self.masks.shape[1]

    def __len__(self) -> int:
        return self.p

    def index_of(self, bits) -> int | None:
        return self._index.get(mask_key(bits))

    def check_gates(self, X) -> bool:
        """True iff every stored gate reproduces its own mask on ``X``."""
        if self.gates is None:
            return False
        X = as_data_matrix(X)
        return bool(np.array_equal(X @ self.gates.T >= 0, self.masks.T))

    def to_text(self) -> str:
        lines = [f"{self.n} {self.p}"]
        lines += ["".join("1" if b else "0" for b in row) for row in self.masks]
        if self.gates is not None:
            lines += [" ".join(repr(float(v)) for v in g) for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MaskSet":
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        n, p = (int(v) for v in rows[0].split())
        masks = np.array([[c == "1" for c in row] for row in rows[1 : 1 + p]], dtype=bool)
        if masks.shape != (p, n):
            raise ValueError(f"expected {p} masks of length {n}")
        gate_rows = rows[1 + p :]
        gates = None
        if gate_rows:
            if len(gate_rows) != p:
                raise ValueError(f"expected {p} gate rows, got {len(gate_rows)}")
            gates = np.array([[float(v) for v in row.split()] for row in gate_rows])
        return cls(masks, gates)


@dataclass
class SimplexWeights:
    """Nonnegative mask weights; ``residual`` is Monte-Carlo mass that hit no mask."""

    eta: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        if np.any(self.eta < 0):
            raise ValueError("simplex weights must be nonnegative")


def enumerate_1d(X) -> MaskSet:
    """All ``2n`` masks of 1-D data lifted with a constant second column.

    Hyperplanes through the origin in the lifted plane cut the sorted points
    into a prefix and a suffix, so the masks are exactly the prefix and
    suffix indicator patterns.
    """
    X = as_data_matrix(X)
    if X.shape[1] != 2 or not np.all(X[:, 1] == 1.0):
        raise ValueError("enumerate_1d expects X = [x, 1] with a constant-one second column")
    x = X[:, 0]
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if np.any(np.diff(xs) == 0):
        raise ValueError("first-column values must be pairwise distinct")

    masks, gates = [], []
    mids = (xs[:-1] + xs[1:]) / 2
    # suffixes {x >= t}: k = number of points switched off from the left
    for k in range(n + 1):
        on = np.zeros(n, dtype=bool)
        on[order[k:]] = True
        if k == 0:
            g = (0.0, 1.0)
        elif k == n:
            g = (0.0, -1.0)
        else:
            g = (1.0, -mids[k - 1])
        masks.append(on)
        gates.append(g)
    # proper prefixes {x <= t}; the empty and full prefixes are already present
    for k in range(1, n):
        on = np.zeros(n, dtype=bool)
        on[order[:k]] = True
        masks.append(on)
        gates.append((-1.0, mids[k - 1]))
    return MaskSet(np.array(masks), np.array(gates))


def sample_arrangements(X, target_count: int, max_draws: int = 100_000, seed=0) -> MaskSet:
    """Unique masks of i.i.d. standard Gaussian gates.

    Stops after ``target_count`` distinct masks or ``max_draws`` gates,
    whichever comes first; the first gate that realised a mask is kept.
    """
    X = as_data_matrix(X)
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    seen: dict[bytes, int] = {}
    masks, gates = [], []
    drawn = 0
    while drawn < max_draws and len(masks) < target_count:
        size = min(_CHUNK, max_draws - drawn)
        G = rng.standard_normal((size, d))
        B = (G @ X.T) >= 0
        drawn += size
        for key, bits, g in zip(_row_keys(B), B, G):
            if key not in seen:
                seen[key] = len(masks)
                masks.append(bits)
                gates.append(g)
                if len(masks) == target_count:
                    break
    return MaskSet(np.array(masks), np.array(gates))


def estimate_ntk_weights(X, masks: MaskSet, samples: int, seed=0) -> SimplexWeights:
    """Monte-Carlo estimate of ``P[1{X h >= 0} = D_i]`` for ``h ~ N(0, I)``.

    Draws whose mask is missing from ``masks`` land in ``residual``; the
    weights plus the residual sum to one exactly.
    """
    X = as_data_matrix(X)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if masks.n != X.shape[0]:
        raise ValueError("mask length does not match the number of rows")
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    counts = np.zeros(masks.p, dtype=np.int64)
    missed = 0
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        B = (rng.standard_normal((size, d)) @ X.T) >= 0
        done += size
        packed = np.packbits(B, axis=1)
        uniq, freq = np.unique(packed, axis=0, return_counts=True)
        tail = B.shape[1].to_bytes(4, "little")
        for row, c in zip(uniq, freq):
            i = masks._index.get(row.tobytes() + tail)
            if i is None:
                missed += int(c)
            else:
                counts[i] += int(c)
    return SimplexWeights(counts / samples, residual=missed / samples)


def exact_weights_2d(X) -> tuple[MaskSet, SimplexWeights]:
    """Exact masks and Gaussian orthant weights for two-dimensional data.

    Each row ``x_i`` flips its bit when the gate direction crosses the two
    normals of ``x_i``; the weight of a mask is the length of its arc over
    ``2 pi``.
    """
    X = as_data_matrix(X)
    if X.shape[1] != 2:
        raise ValueError("exact_weights_2d needs d = 2")
    if np.any(np.all(X == 0, axis=1)):
        raise ValueError("zero rows have a constant mask bit; drop them first")
    two_pi = 2 * np.pi
    phi = np.arctan2(X[:, 1], X[:, 0])
    cuts = np.concatenate([phi + np.pi / 2, phi - np.pi / 2]) % two_pi
    cuts = np.unique(cuts)
    arcs = np.diff(np.append(cuts, cuts[0] + two_pi))
    mids = cuts + arcs / 2
    dirs = np.stack([np.cos(mids), np.sin(mids)], axis=1)
    B = dirs @ X.T >= 0

    weights: dict[bytes, float] = {}
    first: dict[bytes, int] = {}
    for j, key in enumerate(_row_keys(B)):
        weights[key] = weights.get(key, 0.0) + arcs[j] / two_pi
        first.setdefault(key, j)
    idx = list(first.values())
    mset = MaskSet(B[idx], dirs[idx])
    eta = np.zeros(mset.p)
    for key, w in weights.items():
        eta[mset._index[key]] = w
    return mset, SimplexWeights(eta)


def align_weights(source: MaskSet, weights: SimplexWeights, target: MaskSet) -> SimplexWeights:
    """Re-index ``weights`` given on ``source`` onto the order of ``target``.

    Mass on masks absent from ``target`` is moved to the residual.
    """
    eta = np.zeros(target.p)
    residual = weights.residual
    for bits, w in zip(source.masks, weights.eta):
        i = target.index_of(bits)
        if i is None:
            residual += w
        else:
            eta[i] = w
    return SimplexWeights(eta, residual=residual)
