"""Model specifications, construction, forward passes and checkpoints.

Two named architectures are provided:

* ``mlp-yinyang`` -- 2 inputs, three hidden layers of 50 units with
  LeakyReLU + 33% dropout after each, softmax over 2 classes. Every
  weight matrix carries an L2 penalty of 1e-3.
* ``cnn-mnist`` -- four 3x3/16-filter conv blocks (LeakyReLU + 33%
  dropout each), 2x2 max pooling after the second and fourth block,
  then a dense softmax head over 10 classes. Conv kernels carry the
  L2 penalty; the head does not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DimensionError

ARCH_MLP_YINYANG = "mlp-yinyang"
ARCH_CNN_MNIST = "cnn-mnist"

DROPOUT_RATE = 1.0 / 3.0
L2_LAMBDA = 1e-3

CHECKPOINT_FORMAT = 1


@dataclass
class ModelSpec:
    """Architecture id plus an explicit layer list."""

    arch: str
    input_shape: tuple
    n_classes: int
    layers: list = field(default_factory=list)

    def to_dict(self):
        return {
            "arch": self.arch,
            "input_shape": list(self.input_shape),
            "n_classes": self.n_classes,
            "layers": [dict(l) for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            arch=d["arch"],
            input_shape=tuple(d["input_shape"]),
            n_classes=int(d["n_classes"]),
            layers=[dict(l) for l in d["layers"]],
        )


def _dense(units, activation=None, dropout=0.0, l2=0.0):
    return {
        "kind": "dense",
        "units": units,
        "activation": activation,
        "dropout": dropout,
        "l2": l2,
    }


def _conv(filters, activation="leaky_relu", dropout=DROPOUT_RATE, l2=L2_LAMBDA):
    return {
        "kind": "conv3x3",
        "filters": filters,
        "activation": activation,
        "dropout": dropout,
        "l2": l2,
    }


def mlp_yinyang_spec() -> ModelSpec:
    hidden = _dense(50, activation="leaky_relu", dropout=DROPOUT_RATE, l2=L2_LAMBDA)
    return ModelSpec(
        arch=ARCH_MLP_YINYANG,
        input_shape=(2,),
        n_classes=2,
        layers=[dict(hidden), dict(hidden), dict(hidden), _dense(2, l2=L2_LAMBDA)],
    )


def cnn_mnist_spec() -> ModelSpec:
    return ModelSpec(
        arch=ARCH_CNN_MNIST,
        input_shape=(28, 28, 1),
        n_classes=10,
        layers=[
            _conv(16),
            _conv(16),
            {"kind": "maxpool2x2"},
            _conv(16),
            _conv(16),
            {"kind": "maxpool2x2"},
            {"kind": "flatten"},
            _dense(10),
        ],
    )


def custom_mlp_spec(input_dim, hidden, n_classes, dropout=DROPOUT_RATE, l2=L2_LAMBDA):
    """Small fully connected spec for tests and synthetic problems."""
    layers = [
        _dense(h, activation="leaky_relu", dropout=dropout, l2=l2) for h in hidden
    ]
    layers.append(_dense(n_classes, l2=l2))
    return ModelSpec(
        arch="custom", input_shape=(int(input_dim),), n_classes=n_classes, layers=layers
    )


def spec_by_name(name: str) -> ModelSpec:
    if name == ARCH_MLP_YINYANG:
        return mlp_yinyang_spec()
    if name == ARCH_CNN_MNIST:
        return cnn_mnist_spec()
    raise ConfigError(
        f"unknown architecture {name!r}; expected "
        f"{ARCH_MLP_YINYANG!r} or {ARCH_CNN_MNIST!r}"
    )


_VALID_MODES = ("train", "eval", "mc")


class Model:
    """An initialized network: a ModelSpec bound to trainable tensors."""

    def __init__(self, spec: ModelSpec, params, seed: int):
        self.spec = spec
        self.params = params  # list of (name, Tensor); order matches layers
        self.seed = seed
        self._by_name = dict(params)

    @property
    def trainable(self):
        return [t for _, t in self.params]

    def param_count(self) -> int:
        return int(sum(t.size for t in self.trainable))

    def l2_groups(self):
        """Weight tensors grouped by their penalty coefficient (biases excluded)."""
        groups = {}
        i = 0
        for layer in self.spec.layers:
            kind = layer["kind"]
            if kind in ("dense", "conv3x3"):
                lam = float(layer.get("l2", 0.0))
                if lam > 0:
                    groups.setdefault(lam, []).append(self.params[i][1])
                i += 2
        return sorted(groups.items())

    def logits(self, x, mode="eval", rng=None, tape=None):
        """Run the network up to (but not including) the softmax.

        `x` is a batch array shaped (n, *input_shape). train mode applies
        dropout and records on `tape`; mc applies dropout without a tape;
        eval is deterministic.
        """
        if mode not in _VALID_MODES:
            raise ConfigError(f"mode must be one of {_VALID_MODES}, got {mode!r}")
        xd = np.asarray(x)
        if xd.shape[1:] != self.spec.input_shape:
            raise DimensionError(
                f"input batch shape {xd.shape} does not match "
                f"expected (n, {', '.join(map(str, self.spec.input_shape))})"
            )
        if mode == "train" and tape is None:
            raise ConfigError("train mode requires a tape")
        dropout_on = mode in ("train", "mc")
        t = ad.Tensor(xd.astype(self.trainable[0].dtype, copy=False))
        i = 0
        for layer in self.spec.layers:
            kind = layer["kind"]
            if kind == "dense":
                w, b = self.params[i][1], self.params[i + 1][1]
                i += 2
                t = ad.add(ad.matmul(t, w, tape), b, tape)
            elif kind == "conv3x3":
                w, b = self.params[i][1], self.params[i + 1][1]
                i += 2
                t = ad.conv2d(t, w, b, tape)
            elif kind == "maxpool2x2":
                t = ad.maxpool2x2(t, tape)
                continue
            elif kind == "flatten":
                t = ad.reshape(t, (t.shape[0], -1), tape)
                continue
            else:
                raise ConfigError(f"unknown layer kind {kind!r}")
            if layer.get("activation") == "leaky_relu":
                t = ad.leaky_relu(t, tape)
            rate = float(layer.get("dropout", 0.0))
            if rate > 0:
                t = ad.dropout(t, rate, rng=rng, enabled=dropout_on, tape=tape)
        return t

    def forward(self, x, mode="eval", rng=None, tape=None):
        """Class distributions for a batch: softmax of the logits."""
        return ad.softmax(self.logits(x, mode=mode, rng=rng, tape=tape).data)

    def save(self, path):
        """Write a self-describing .npz checkpoint (spec, seed, named tensors)."""
        meta = {
            "format": CHECKPOINT_FORMAT,
            "seed": self.seed,
            "dtype": np.dtype(self.trainable[0].dtype).name,
            "spec": self.spec.to_dict(),
        }
        arrays = {name: t.data for name, t in self.params}
        np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_model(path) -> Model:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError(
                f"unsupported checkpoint format {meta.get('format')!r} in {path}"
            )
        spec = ModelSpec.from_dict(meta["spec"])
        model = build(spec, seed=meta["seed"], dtype=np.dtype(meta["dtype"]))
        for name, t in model.params:
            stored = archive[name]
            if stored.shape != t.data.shape:
                raise ConfigError(f"checkpoint tensor {name} has shape {stored.shape}")
            t.data = stored.astype(t.dtype, copy=False)
    return model


def _validate_spec(spec: ModelSpec):
    if len(spec.input_shape) not in (1, 3):
        raise ConfigError(f"input shape must be (d,) or (h,w,c), got {spec.input_shape}")
    if not spec.layers:
        raise ConfigError("layer list is empty")
    for layer in spec.layers:
        kind = layer.get("kind")
        if kind == "dense":
            if int(layer["units"]) < 1:
                raise ConfigError(f"dense units must be positive, got {layer['units']}")
        elif kind == "conv3x3":
            if int(layer["filters"]) < 1:
                raise ConfigError(
                    f"conv filters must be positive, got {layer['filters']}"
                )
        elif kind not in ("maxpool2x2", "flatten"):
            raise ConfigError(f"unknown layer kind {kind!r}")
    last = spec.layers[-1]
    if last["kind"] != "dense" or int(last["units"]) != spec.n_classes:
        raise ConfigError("final layer must be dense with n_classes units")


def build(spec: ModelSpec, seed: int, dtype=ad.DEFAULT_DTYPE) -> Model:
    """Initialize trainable tensors for `spec` (Glorot weights, zero biases)."""
    _validate_spec(spec)
    rng = np.random.default_rng(seed)
    params = []
    shape = tuple(spec.input_shape)
    for li, layer in enumerate(spec.layers):
        kind = layer["kind"]
        if kind == "dense":
            if len(shape) != 1:
                raise ConfigError(
                    f"dense layer {li} needs a flat input, got shape {shape}"
                )
            fan_in, fan_out = shape[0], int(layer["units"])
            w = ad.glorot_uniform((fan_in, fan_out), fan_in, fan_out, rng, dtype)
            b = np.zeros(fan_out, dtype=dtype)
            params.append((f"l{li:02d}.dense.w", ad.Tensor(w, requires_grad=True)))
            params.append((f"l{li:02d}.dense.b", ad.Tensor(b, requires_grad=True)))
            shape = (fan_out,)
        elif kind == "conv3x3":
            if len(shape) != 3:
                raise ConfigError(
                    f"conv layer {li} needs an image input, got shape {shape}"
                )
            cin, cout = shape[2], int(layer["filters"])
            w = ad.glorot_uniform((3, 3, cin, cout), 9 * cin, 9 * cout, rng, dtype)
            b = np.zeros(cout, dtype=dtype)
            params.append((f"l{li:02d}.conv.w", ad.Tensor(w, requires_grad=True)))
            params.append((f"l{li:02d}.conv.b", ad.Tensor(b, requires_grad=True)))
            shape = (shape[0], shape[1], cout)
        elif kind == "maxpool2x2":
            shape = ((shape[0] + 1) // 2, (shape[1] + 1) // 2, shape[2])
        elif kind == "flatten":
            shape = (int(np.prod(shape)),)
    return Model(spec, params, seed=int(seed))
