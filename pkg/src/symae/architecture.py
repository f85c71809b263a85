"""Symmetric autoencoder classes: data model, assembly, and execution.

A symmetric autoencoder is a per-layer tuple ``(E_j, D_j, e_j, d_j)`` plus
one shared bilipschitz activation ``rho``.  Encoding applies
``h -> rho(E_j h + e_j)`` from the outside in; decoding applies
``h -> D_j rho_inv(h) + d_j`` from the inside out.  Three nested classes
are supported, plus a conventional autoencoder baseline:

* ``SAE``   - unconstrained weights;
* ``SBAE``  - biorthogonal: ``E_j D_j = I`` and ``E_j d_j = -e_j``, which
  makes the network a nonlinear projector;
* ``SOAE``  - orthogonal: additionally ``E_j = D_j^T``;
* ``PlainAE`` - same shapes, but a standard feed-forward autoencoder that
  applies ``rho_inv`` after every affine map except the output layer.

Constrained classes are trained through unconstrained parametrizations
(:class:`ParamVector`) that satisfy the constraints by construction; the
assembly runs on plain arrays or on autodiff ``Var`` leaves unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activations import Activation, parse_activation
from .autodiff import (
    apply_activation,
    concat_rows,
    diag,
    reciprocal,
    square,
    sum_sq,
    value_of,
)
from .linalg import pi_orth

__all__ = [
    "CLASS_TAGS",
    "LAYER_PARAM_KEYS",
    "Skeleton",
    "Layer",
    "SymmetricAutoencoder",
    "ParamVector",
    "spare_dim",
    "assemble",
    "assemble_layers",
    "encode_columns",
    "decode_columns",
    "reconstruct_columns",
    "loss_on_batch",
    "save_model",
    "load_model",
]

CLASS_TAGS = ("SAE", "SBAE", "SOAE", "PlainAE")

# Canonical per-layer parameter names, fixing leaf order everywhere.
LAYER_PARAM_KEYS = {
    "SAE": ("E", "D", "e", "d"),
    "PlainAE": ("E", "D", "e", "d"),
    "SBAE": ("X", "Y", "Z", "Q", "s", "b"),
    "SOAE": ("A", "b"),
}

BIORTH_TOL = 1e-9
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Skeleton:
    """Dimension sequence ``(n0, n1, ..., nl)`` with ``n0 > n1 >= ... >= nl > 0``."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 2:
            raise ValueError("skeleton needs an input and at least one hidden dimension")
        if any(d <= 0 for d in dims):
            raise ValueError(f"skeleton dimensions must be positive: {dims}")
        if dims[0] <= dims[1]:
            raise ValueError(f"first hidden dimension must shrink the input: {dims}")
        for a, b in zip(dims[1:], dims[2:]):
            if a < b:
                raise ValueError(f"hidden dimensions must be nonincreasing: {dims}")

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def latent_dim(self) -> int:
        return self.dims[-1]

    def layer_shape(self, j: int) -> tuple[int, int]:
        """(input width, output width) of encoder level ``j`` in ``1..depth``."""
        return self.dims[j - 1], self.dims[j]


def spare_dim(n_prev: int, n: int) -> int:
    """Width of the free block in a biorthogonal layer: ``min(n, n_prev - n)``."""
    return min(n, n_prev - n)


@dataclass(frozen=True, eq=False)
class Layer:
    E: np.ndarray
    D: np.ndarray
    e: np.ndarray
    d: np.ndarray


@dataclass(frozen=True, eq=False)
class SymmetricAutoencoder:
    skeleton: Skeleton
    act: Activation
    layers: tuple[Layer, ...]
    class_tag: str
    # Orthonormal directions spanning part of the complement of each D_j,
    # kept by the iterated-SVD initializer to seed biorthogonal lifting.
    complements: tuple[np.ndarray, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise ValueError(f"unknown class tag {self.class_tag!r}")
        _check_shapes(self)
        _check_class_invariants(self)

    # -- execution --------------------------------------------------------

    def encode(self, u):
        cols, was_vec = _as_columns(u, self.skeleton.dims[0])
        out = encode_columns(_layer_tuples(self), self.act, cols, self.class_tag)
        return out[:, 0] if was_vec else out

    def decode(self, c):
        cols, was_vec = _as_columns(c, self.skeleton.latent_dim)
        out = decode_columns(_layer_tuples(self), self.act, cols, self.class_tag)
        return out[:, 0] if was_vec else out

    def reconstruct(self, u):
        cols, was_vec = _as_columns(u, self.skeleton.dims[0])
        out = reconstruct_columns(_layer_tuples(self), self.act, cols, self.class_tag)
        return out[:, 0] if was_vec else out

    def hidden_trajectory(self, u) -> list[np.ndarray]:
        """Partial encodings ``[u, E_1(u), ..., E_l(u)]`` (columnwise)."""
        cols, _ = _as_columns(u, self.skeleton.dims[0])
        levels = [cols]
        h = cols
        for E, _D, e, _d in _layer_tuples(self):
            h = apply_activation(self.act, E @ h + e, inverse=self.class_tag == "PlainAE")
            levels.append(h)
        return levels

    def constraint_residual(self) -> float:
        """``max_j ||E_j D_j - I||_max`` for constrained classes, else 0."""
        if self.class_tag not in ("SBAE", "SOAE"):
            return 0.0
        return max(
            float(np.max(np.abs(l.E @ l.D - np.eye(l.E.shape[0])))) for l in self.layers
        )


def _as_columns(u, expected_rows: int) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=np.float64)
    was_vec = u.ndim == 1
    cols = u.reshape(-1, 1) if was_vec else u
    if cols.ndim != 2 or cols.shape[0] != expected_rows:
        raise ValueError(f"expected {expected_rows} rows, got shape {u.shape}")
    return cols, was_vec


def _layer_tuples(psi: SymmetricAutoencoder):
    return [(l.E, l.D, l.e, l.d) for l in psi.layers]


def _check_shapes(psi: SymmetricAutoencoder):
    dims = psi.skeleton.dims
    if len(psi.layers) != psi.skeleton.depth:
        raise ValueError(
            f"skeleton depth {psi.skeleton.depth} != layer count {len(psi.layers)}"
        )
    for j, layer in enumerate(psi.layers, start=1):
        q, r = dims[j - 1], dims[j]
        checks = {
            "E": (layer.E, (r, q)),
            "D": (layer.D, (q, r)),
            "e": (layer.e, (r, 1)),
            "d": (layer.d, (q, 1)),
        }
        for name, (arr, want) in checks.items():
            if arr.shape != want:
                raise ValueError(
                    f"layer {j} weight {name} has shape {arr.shape}, expected {want}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"layer {j} weight {name} has non-finite entries")


def _check_class_invariants(psi: SymmetricAutoencoder):
    if psi.class_tag not in ("SBAE", "SOAE"):
        return
    for j, layer in enumerate(psi.layers, start=1):
        r = layer.E.shape[0]
        gap = np.max(np.abs(layer.E @ layer.D - np.eye(r)))
        if gap > BIORTH_TOL:
            raise ValueError(
                f"{psi.class_tag} layer {j} violates E D = I (max gap {gap:.3e})"
            )
        bias_gap = np.max(np.abs(layer.E @ layer.d + layer.e))
        if bias_gap > BIORTH_TOL:
            raise ValueError(
                f"{psi.class_tag} layer {j} violates E d = -e (max gap {bias_gap:.3e})"
            )
        if psi.class_tag == "SOAE":
            sym_gap = np.max(np.abs(layer.E - layer.D.T))
            if sym_gap > BIORTH_TOL:
                raise ValueError(
                    f"SOAE layer {j} violates E = D^T (max gap {sym_gap:.3e})"
                )


# -- unconstrained parametrizations --------------------------------------


@dataclass(eq=False)
class ParamVector:
    """Unconstrained optimization-space coordinates for one hypothesis class.

    ``layers[j]`` maps the canonical parameter names of ``class_tag`` to
    arrays: raw ``(E, D, e, d)`` for SAE/PlainAE; ``(A, b)`` for SOAE where
    the decoder matrix is ``pi_orth(A)``; ``(X, Y, Z, Q, s, b)`` for SBAE
    feeding the biorthogonal product construction.
    """

    class_tag: str
    skeleton: Skeleton
    act: Activation
    layers: list[dict[str, np.ndarray]]

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise ValueError(f"unknown class tag {self.class_tag!r}")
        keys = LAYER_PARAM_KEYS[self.class_tag]
        if len(self.layers) != self.skeleton.depth:
            raise ValueError("parameter layer count does not match skeleton depth")
        for j, params in enumerate(self.layers, start=1):
            if set(params) != set(keys):
                raise ValueError(
                    f"layer {j} parameters {sorted(params)} != expected {sorted(keys)}"
                )
            for name, want in _param_shapes(self.class_tag, self.skeleton, j).items():
                if params[name].shape != want:
                    raise ValueError(
                        f"layer {j} parameter {name} has shape {params[name].shape}, "
                        f"expected {want}"
                    )

    def leaves(self) -> list[np.ndarray]:
        """Flat leaf list in canonical order (layer-major)."""
        keys = LAYER_PARAM_KEYS[self.class_tag]
        return [params[k] for params in self.layers for k in keys]

    def with_leaves(self, arrays: list) -> list[dict]:
        """Regroup a flat leaf list (arrays or Vars) into per-layer dicts."""
        keys = LAYER_PARAM_KEYS[self.class_tag]
        out = []
        it = iter(arrays)
        for _ in self.layers:
            out.append({k: next(it) for k in keys})
        return out

    def copy(self) -> "ParamVector":
        return ParamVector(
            self.class_tag,
            self.skeleton,
            self.act,
            [{k: v.copy() for k, v in params.items()} for params in self.layers],
        )


def _param_shapes(class_tag: str, skeleton: Skeleton, j: int) -> dict[str, tuple]:
    q, r = skeleton.layer_shape(j)
    if class_tag in ("SAE", "PlainAE"):
        return {"E": (r, q), "D": (q, r), "e": (r, 1), "d": (q, 1)}
    if class_tag == "SOAE":
        return {"A": (q, r), "b": (q, 1)}
    d = spare_dim(q, r)
    return {
        "X": (q, r + d),
        "Y": (r, r),
        "Z": (r, r),
        "Q": (d, r),
        "s": (r, 1),
        "b": (q, 1),
    }


def _assemble_layer(class_tag: str, params: dict):
    """One layer's ``(E, D, e, d)`` from unconstrained parameters.

    Works on arrays or ``Var`` leaves.  SOAE: ``D = pi_orth(A)``,
    ``E = D^T``.  SBAE: with ``X = pi_orth(X~)`` (q x (r+d)),
    ``Y = pi_orth(Y~)``, ``Z = pi_orth(Z~)`` (r x r) and ``S = diag(s^2)``,

        E^T = X [Y S Z^T; 0],     D = X [Y S^-1 Z^T; Q],

    which gives ``E D = I`` identically.  Biases: ``d = b``, ``e = -E b``.
    """
    if class_tag in ("SAE", "PlainAE"):
        return params["E"], params["D"], params["e"], params["d"]
    if class_tag == "SOAE":
        D = pi_orth(params["A"])
        E = D.T
        b = params["b"]
        return E, D, -(E @ b), b
    s = params["s"]
    if not np.all(value_of(s)):
        raise ValueError("SBAE scale vector must have no zero entries")
    X = pi_orth(params["X"])
    Y = pi_orth(params["Y"])
    Z = pi_orth(params["Z"])
    s2 = square(s)
    r = value_of(s).shape[0]
    d = value_of(params["Q"]).shape[0]
    top = Y @ diag(s2) @ Z.T
    Et = X @ (concat_rows([top, np.zeros((d, r))]) if d else top)
    inv_top = Y @ diag(reciprocal(s2)) @ Z.T
    D = X @ (concat_rows([inv_top, params["Q"]]) if d else inv_top)
    E = Et.T
    b = params["b"]
    return E, D, -(E @ b), b


def assemble_layers(class_tag: str, layer_params: list[dict]) -> list[tuple]:
    """Per-layer ``(E, D, e, d)`` tuples; taped when parameters are Vars."""
    return [_assemble_layer(class_tag, p) for p in layer_params]


def assemble(theta: ParamVector) -> SymmetricAutoencoder:
    """Build and validate the autoencoder realized by ``theta``."""
    layers = tuple(
        Layer(*(np.asarray(w, dtype=np.float64) for w in parts))
        for parts in assemble_layers(theta.class_tag, theta.layers)
    )
    return SymmetricAutoencoder(theta.skeleton, theta.act, layers, theta.class_tag)


# -- generic columnwise execution -----------------------------------------


def encode_columns(layers, act, H, class_tag: str = "SAE"):
    inverse = class_tag == "PlainAE"
    for E, _D, e, _d in layers:
        H = apply_activation(act, E @ H + e, inverse=inverse)
    return H


def decode_columns(layers, act, H, class_tag: str = "SAE"):
    if class_tag == "PlainAE":
        for j in range(len(layers) - 1, -1, -1):
            _E, D, _e, d = layers[j]
            H = D @ H + d
            if j > 0:
                H = apply_activation(act, H, inverse=True)
        return H
    for _E, D, _e, d in reversed(layers):
        H = D @ apply_activation(act, H, inverse=True) + d
    return H


def reconstruct_columns(layers, act, U, class_tag: str = "SAE"):
    return decode_columns(layers, act, encode_columns(layers, act, U, class_tag), class_tag)


def loss_on_batch(class_tag: str, act, layer_params: list[dict], batch):
    """Mean squared reconstruction error of a column batch.

    ``layer_params`` may hold arrays (plain evaluation) or ``Var`` leaves
    (the returned loss is then a taped scalar ready for ``backward``).
    """
    layers = assemble_layers(class_tag, layer_params)
    recon = reconstruct_columns(layers, act, batch, class_tag)
    n_cols = value_of(batch).shape[1]
    return sum_sq(recon - batch) * (1.0 / n_cols)


# -- checkpoint serialization ----------------------------------------------


def _grid(a: np.ndarray) -> list:
    return a.tolist()


def save_model(psi: SymmetricAutoencoder, path, theta: ParamVector | None = None):
    """Write a JSON checkpoint; floats round-trip bit-identically via repr."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "class_tag": psi.class_tag,
        "skeleton": list(psi.skeleton.dims),
        "activation_spec": psi.act.spec(),
        "layers": [
            {"E": _grid(l.E), "D": _grid(l.D), "e": _grid(l.e), "d": _grid(l.d)}
            for l in psi.layers
        ],
    }
    if theta is not None:
        doc["theta"] = {
            "class_tag": theta.class_tag,
            "layers": [
                {k: _grid(v) for k, v in params.items()} for params in theta.layers
            ],
        }
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> tuple[SymmetricAutoencoder, ParamVector | None]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    skeleton = Skeleton(tuple(doc["skeleton"]))
    act = parse_activation(doc["activation_spec"])
    layers = tuple(
        Layer(*(np.asarray(layer[k], dtype=np.float64) for k in ("E", "D", "e", "d")))
        for layer in doc["layers"]
    )
    psi = SymmetricAutoencoder(skeleton, act, layers, doc["class_tag"])
    theta = None
    if "theta" in doc:
        block = doc["theta"]
        theta = ParamVector(
            block["class_tag"],
            skeleton,
            act,
            [
                {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
                for params in block["layers"]
            ],
        )
    return psi, theta
