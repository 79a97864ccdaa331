"""Layer and network abstractions.

Two layer kinds: a plain fully connected layer ("fc") and a modulated dense
layer ("mfcl") whose weight matrix and bias are emitted per sample by an inner
modulation MLP (ReLU hidden units, linear output) from a modulating signal.
The bias is carried as the last column of the generated augmented matrix, so
the modulation output has out_dim * (in_dim + 1) units.

Batches are row-major: X is (batch, in_dim), the modulating signal M is
(batch, mod_input_dim).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numeric import ACTIVATIONS, activation, activation_grad


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "fc" | "mfcl"
    in_dim: int
    out_dim: int
    activation: str
    mod_hidden: tuple[int, ...] = ()
    mod_input_dim: int = 0

    def __post_init__(self):
        if self.kind not in ("fc", "mfcl"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.kind == "mfcl":
            if self.mod_input_dim < 1:
                raise ConfigError("mfcl layer requires mod_input_dim >= 1")
            if any(h < 1 for h in self.mod_hidden):
                raise ConfigError("modulation hidden dims must be >= 1")

    @property
    def mod_dims(self) -> tuple[int, ...]:
        """Full layer-size chain of the modulation MLP."""
        return (self.mod_input_dim, *self.mod_hidden, self.out_dim * (self.in_dim + 1))


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.kind == "mfcl" and i != 0:
                raise ConfigError("mfcl is only supported as the first layer")
            if i > 0 and layer.in_dim != self.layers[i - 1].out_dim:
                raise ConfigError(
                    f"layer {i} in_dim {layer.in_dim} does not match "
                    f"previous out_dim {self.layers[i - 1].out_dim}"
                )

    @property
    def has_mfcl(self) -> bool:
        return self.layers[0].kind == "mfcl"

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


def mlp_spec(dims, hidden_act="relu", out_act="sigmoid", first_layer=None,
             mod_hidden=(), mod_input_dim=0) -> NetworkSpec:
    """Chain of fc layers over ``dims``; optionally swap the first for mfcl."""
    layers = []
    for i in range(len(dims) - 1):
        act = out_act if i == len(dims) - 2 else hidden_act
        kind = "fc"
        kwargs = {}
        if i == 0 and first_layer == "mfcl":
            kind = "mfcl"
            kwargs = {"mod_hidden": tuple(mod_hidden), "mod_input_dim": mod_input_dim}
        layers.append(LayerSpec(kind, dims[i], dims[i + 1], act, **kwargs))
    return NetworkSpec(tuple(layers))


# Parameter containers: a network's params are a list with one entry per layer.
# fc entry:   {"W": (out, in), "b": (out,)}
# mfcl entry: {"mod": [(W, b), ...]} following LayerSpec.mod_dims


def glorot(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


RELU_BIAS_INIT = 0.5


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> list[dict]:
    """Glorot-uniform initialization.

    ReLU fc layers start with a positive bias so every unit is responsive at
    the mean-imputed origin (an all-missing input is all zeros); this avoids
    dead-network collapses at aggressive learning rates. The modulation net's
    final linear layer gets small weights (x0.1) and a bias equal to a
    flattened standard fc initialization, so the initially generated weights
    behave like a freshly initialized fc layer.
    """
    params: list[dict] = []
    for layer in spec.layers:
        if layer.kind == "fc":
            bias = np.full(layer.out_dim,
                           RELU_BIAS_INIT if layer.activation == "relu" else 0.0)
            params.append({
                "W": glorot(rng, layer.out_dim, layer.in_dim),
                "b": bias,
            })
        else:
            dims = layer.mod_dims
            mod = []
            for k in range(len(dims) - 1):
                W = glorot(rng, dims[k + 1], dims[k])
                b = np.zeros(dims[k + 1])
                if k == len(dims) - 2:
                    W = W * 0.1
                    col = RELU_BIAS_INIT if layer.activation == "relu" else 0.0
                    base = np.concatenate(
                        [glorot(rng, layer.out_dim, layer.in_dim),
                         np.full((layer.out_dim, 1), col)], axis=1)
                    b = base.reshape(-1)
                mod.append((W, b))
            params.append({"mod": mod})
    return params


def flatten_params(params: list[dict]) -> list[np.ndarray]:
    """Deterministic flat view used by optimizers and the gradient check."""
    flat: list[np.ndarray] = []
    for entry in params:
        if "W" in entry:
            flat.extend([entry["W"], entry["b"]])
        else:
            for W, b in entry["mod"]:
                flat.extend([W, b])
    return flat


def unflatten_params(template: list[dict], flat: list[np.ndarray]) -> list[dict]:
    out: list[dict] = []
    it = iter(flat)
    for entry in template:
        if "W" in entry:
            out.append({"W": next(it), "b": next(it)})
        else:
            out.append({"mod": [(next(it), next(it)) for _ in entry["mod"]]})
    return out


def _mod_forward(mod_params, M):
    """Forward through the modulation MLP: ReLU hiddens, linear output."""
    acts = [M]
    pre = []
    A = M
    last = len(mod_params) - 1
    for k, (W, b) in enumerate(mod_params):
        Z = A @ W.T + b
        pre.append(Z)
        A = Z if k == last else np.maximum(Z, 0.0)
        acts.append(A)
    return A, (acts, pre)


def _mod_backward(mod_params, cache, dG):
    acts, pre = cache
    grads = [None] * len(mod_params)
    delta = dG
    for k in range(len(mod_params) - 1, -1, -1):
        W, _ = mod_params[k]
        if k != len(mod_params) - 1:
            delta = delta * (pre[k] > 0)
        grads[k] = (delta.T @ acts[k], delta.sum(axis=0))
        delta = delta @ W
    return grads, delta  # delta is now the gradient wrt the modulating signal


def mfcl_forward(layer: LayerSpec, entry: dict, X: np.ndarray, M: np.ndarray):
    """Generate per-sample weights from M and apply them to X.

    Returns (h_out, cache). The cache holds the per-sample augmented weights
    and all intermediates needed for the backward pass.
    """
    if M is None:
        raise ConfigError("mfcl layer requires a modulating signal batch")
    if X.shape[1] != layer.in_dim:
        raise ShapeError(f"mfcl input width {X.shape[1]}, expected {layer.in_dim}")
    if M.shape[1] != layer.mod_input_dim:
        raise ShapeError(
            f"modulating signal width {M.shape[1]}, expected {layer.mod_input_dim}")
    if X.shape[0] != M.shape[0]:
        raise ShapeError(f"batch sizes differ: {X.shape[0]} vs {M.shape[0]}")
    G, mod_cache = _mod_forward(entry["mod"], M)
    B = X.shape[0]
    G3 = G.reshape(B, layer.out_dim, layer.in_dim + 1)
    W_mod = G3[:, :, : layer.in_dim]
    b_mod = G3[:, :, layer.in_dim]
    Z = np.einsum("boi,bi->bo", W_mod, X) + b_mod
    H = activation(layer.activation, Z)
    cache = {"layer": layer, "entry": entry, "X": X, "W_mod": W_mod,
             "Z": Z, "mod_cache": mod_cache}
    return H, cache


def mfcl_backward(cache: dict, dH: np.ndarray):
    """Exact gradients of the modulated layer.

    Returns (grads entry, dX, dM). dM is exposed for completeness but callers
    treat the modulating signal as an input, not a parameter.
    """
    layer = cache["layer"]
    X, W_mod, Z = cache["X"], cache["W_mod"], cache["Z"]
    if dH.shape != Z.shape:
        raise ShapeError(f"upstream gradient {dH.shape}, expected {Z.shape}")
    dZ = dH * activation_grad(layer.activation, Z)
    dX = np.einsum("boi,bo->bi", W_mod, dZ)
    X_aug = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
    dG = np.einsum("bo,bi->boi", dZ, X_aug).reshape(X.shape[0], -1)
    mod_grads, dM = _mod_backward(cache["entry"]["mod"], cache["mod_cache"], dG)
    return {"mod": mod_grads}, dX, dM


def fc_forward(layer: LayerSpec, entry: dict, X: np.ndarray):
    if X.shape[1] != layer.in_dim:
        raise ShapeError(f"fc input width {X.shape[1]}, expected {layer.in_dim}")
    Z = X @ entry["W"].T + entry["b"]
    H = activation(layer.activation, Z)
    return H, {"layer": layer, "entry": entry, "X": X, "Z": Z}


def fc_backward(cache: dict, dH: np.ndarray):
    layer, entry = cache["layer"], cache["entry"]
    dZ = dH * activation_grad(layer.activation, cache["Z"])
    dW = dZ.T @ cache["X"]
    db = dZ.sum(axis=0)
    dX = dZ @ entry["W"]
    return {"W": dW, "b": db}, dX


def network_forward(spec: NetworkSpec, params: list[dict], X: np.ndarray,
                    M: np.ndarray | None = None):
    """Compose layers; M is required iff the spec contains an mfcl layer."""
    if spec.has_mfcl and M is None:
        raise ConfigError("network contains an mfcl layer but no modulating batch")
    caches = []
    H = X
    for layer, entry in zip(spec.layers, params):
        if layer.kind == "mfcl":
            H, cache = mfcl_forward(layer, entry, H, M)
        else:
            H, cache = fc_forward(layer, entry, H)
        caches.append(cache)
    return H, caches


def network_backward(spec: NetworkSpec, params: list[dict], caches: list,
                     dY: np.ndarray):
    grads: list[dict] = [None] * len(spec.layers)
    delta = dY
    for i in range(len(spec.layers) - 1, -1, -1):
        if spec.layers[i].kind == "mfcl":
            grads[i], delta, _ = mfcl_backward(caches[i], delta)
        else:
            grads[i], delta = fc_backward(caches[i], delta)
    return grads, delta


def generated_weights(layer: LayerSpec, entry: dict, m: np.ndarray) -> np.ndarray:
    """Flat augmented weight vector [W | b] generated for one modulating vector."""
    G, _ = _mod_forward(entry["mod"], m.reshape(1, -1))
    return G.reshape(-1)


def weight_delta_table(layer: LayerSpec, entry: dict, baseline_m: np.ndarray,
                       probe_ms: list[np.ndarray]) -> np.ndarray:
    """Percentage change of generated weights for each probe vs the baseline.

    Rows are probes, columns the flattened augmented weight matrix. Cells where
    the baseline magnitude is < 1e-9 are NaN (undefined relative change).
    """
    w0 = generated_weights(layer, entry, np.asarray(baseline_m, dtype=np.float64))
    rows = []
    for m in probe_ms:
        m = np.asarray(m, dtype=np.float64)
        if m.shape != np.asarray(baseline_m).shape:
            raise ShapeError("probe vector dimension differs from baseline")
        wp = generated_weights(layer, entry, m)
        with np.errstate(divide="ignore", invalid="ignore"):
            pct = 100.0 * (wp - w0) / np.abs(w0)
        pct[np.abs(w0) < 1e-9] = np.nan
        rows.append(pct)
    return np.array(rows)


# -- serialization ------------------------------------------------------------

FORMAT_VERSION = 1


def _layer_spec_doc(layer: LayerSpec) -> dict:
    doc = {"kind": layer.kind, "in_dim": layer.in_dim, "out_dim": layer.out_dim,
           "activation": layer.activation}
    if layer.kind == "mfcl":
        doc["mod_hidden"] = list(layer.mod_hidden)
        doc["mod_input_dim"] = layer.mod_input_dim
    return doc


def _layer_spec_from_doc(doc: dict) -> LayerSpec:
    return LayerSpec(
        kind=doc["kind"], in_dim=doc["in_dim"], out_dim=doc["out_dim"],
        activation=doc["activation"],
        mod_hidden=tuple(doc.get("mod_hidden", ())),
        mod_input_dim=doc.get("mod_input_dim", 0),
    )


def params_to_doc(spec: NetworkSpec, params: list[dict]) -> dict:
    """Versioned JSON document with row-major flat arrays; round-trips bit-exactly."""
    layers = []
    for layer, entry in zip(spec.layers, params):
        doc = _layer_spec_doc(layer)
        if layer.kind == "fc":
            doc["W"] = entry["W"].reshape(-1).tolist()
            doc["b"] = entry["b"].tolist()
        else:
            doc["mod"] = [{"W": W.reshape(-1).tolist(), "b": b.tolist()}
                          for W, b in entry["mod"]]
        layers.append(doc)
    return {"format_version": FORMAT_VERSION, "layers": layers}


def params_from_doc(doc: dict) -> tuple[NetworkSpec, list[dict]]:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported params format version {doc.get('format_version')!r}")
    specs = []
    params = []
    for ldoc in doc["layers"]:
        layer = _layer_spec_from_doc(ldoc)
        specs.append(layer)
        if layer.kind == "fc":
            params.append({
                "W": np.array(ldoc["W"]).reshape(layer.out_dim, layer.in_dim),
                "b": np.array(ldoc["b"]),
            })
        else:
            dims = layer.mod_dims
            mod = []
            for k, mdoc in enumerate(ldoc["mod"]):
                mod.append((np.array(mdoc["W"]).reshape(dims[k + 1], dims[k]),
                            np.array(mdoc["b"])))
            params.append({"mod": mod})
    return NetworkSpec(tuple(specs)), params


def save_params(path, spec: NetworkSpec, params: list[dict]) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_doc(spec, params), fh)


def load_params(path) -> tuple[NetworkSpec, list[dict]]:
    with open(path) as fh:
        return params_from_doc(json.load(fh))
