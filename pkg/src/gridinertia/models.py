"""Inertia estimator families, training loop, and evaluation metrics.

Four architectures map a PMU window tensor (buses, features, steps) to a
single inertia constant in seconds:

* dnn  -- flatten, then fully connected 128 -> 64 -> 1 with ReLU.
* cnn  -- two conv1d/pool stages over (buses*features) channels, then
          fully connected 64 -> 1.
* lrcn -- the same conv front end feeding an LSTM whose last hidden state
          drives fully connected 64 -> 32 -> 1.
* gcn  -- one graph convolution over the observed buses (renormalised
          adjacency), mean node readout, fully connected 64 -> 128 -> 1.

Training is full-batch-shuffled minibatch SGD on MSE with a
reduce-on-plateau schedule, early stopping, and divergence detection.
All randomness derives from named seed streams, so a (seed, dataset)
pair reproduces training bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CheckpointFormatError, ConfigError, TrainingDiverged
from .nn.checkpoint import read_checkpoint, write_checkpoint
from .nn.graph import induced_adjacency, renormalized_adjacency
from .nn.layers import (LSTM_VARIANTS, Conv1d, Dense, Flatten, GraphConv,
                        Lstm, MaxPool1d, Model, NodeMean, Relu, ToTimeMajor)
from .nn.loss import mse, mse_grad
from .nn.optim import PlateauSchedule, SgdOptimizer
from .seeding import STREAM_BATCH, STREAM_INIT, derive_rng

FAMILIES = ("dnn", "cnn", "lrcn", "gcn")

# Learning rates that keep each architecture stable on normalised inputs
# with raw second-valued labels (tuned on the default sweep).
DEFAULT_BASE_LR = {"dnn": 3e-3, "cnn": 1e-2, "lrcn": 1e-2, "gcn": 1e-2}


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; fully determines the parameter shapes."""
    family: str
    n_buses: int
    n_features: int
    n_steps: int
    conv_channels: tuple = (10, 20)
    kernel_size: int = 3
    lstm_units: int = 32
    lstm_variant: str = "standard"
    dnn_hidden: tuple = (128, 64)
    cnn_fc: tuple = (64,)
    lrcn_fc: tuple = (64, 32)
    gcn_hidden: int = 32
    gcn_fc: tuple = (64, 128)
    conv_activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}")
        for name in ("n_buses", "n_features", "n_steps", "kernel_size",
                     "lstm_units", "gcn_hidden", "seed"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or (
                    value < 0 if name == "seed" else value < 1):
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("conv_channels", "dnn_hidden", "cnn_fc", "lrcn_fc", "gcn_fc"):
            tup = tuple(int(v) for v in getattr(self, name))
            if not tup or any(v < 1 for v in tup):
                raise ConfigError(f"{name} must be positive integers, got {tup}")
            object.__setattr__(self, name, tup)
        if len(self.conv_channels) != 2:
            raise ConfigError("conv_channels must name exactly two stages")
        if self.lstm_variant not in LSTM_VARIANTS:
            raise ConfigError(f"unknown lstm variant {self.lstm_variant!r}")
        if self.conv_activation not in ("relu", "none"):
            raise ConfigError(
                f"conv_activation must be 'relu' or 'none', got {self.conv_activation!r}")

    @property
    def input_size(self):
        return self.n_buses * self.n_features * self.n_steps


def conv_front_lengths(spec):
    """Sequence lengths through conv1 -> pool -> conv2 -> pool."""
    length = spec.n_steps
    lengths = []
    for _ in range(2):
        length = length - spec.kernel_size + 1
        if length < 2:
            raise ConfigError(
                f"window of {spec.n_steps} steps is too short for the conv front end")
        lengths.append(length)
        length //= 2
        lengths.append(length)
    return tuple(lengths)


def _conv_front(spec, rng, layers):
    c_in = spec.n_buses * spec.n_features
    c1, c2 = spec.conv_channels
    layers.append(Conv1d(c_in, c1, spec.kernel_size, rng, "conv1"))
    if spec.conv_activation == "relu":
        layers.append(Relu())
    layers.append(MaxPool1d())
    layers.append(Conv1d(c1, c2, spec.kernel_size, rng, "conv2"))
    if spec.conv_activation == "relu":
        layers.append(Relu())
    layers.append(MaxPool1d())
    return conv_front_lengths(spec)[-1]


def build_model(spec, adjacency=None):
    """Instantiate a Model for spec; weights are seeded from spec.seed.

    The gcn family needs the binary adjacency of the observed buses, in the
    same bus order as the sample tensors.
    """
    rng = derive_rng(spec.seed, STREAM_INIT)
    layers = []
    if spec.family == "dnn":
        d = spec.input_size
        layers.append(Flatten())
        for i, width in enumerate(spec.dnn_hidden, start=1):
            layers.append(Dense(d, width, rng, f"fc{i}"))
            layers.append(Relu())
            d = width
        layers.append(Dense(d, 1, rng, "out"))
        return Model(layers, "flat")
    if spec.family == "cnn":
        tail_len = _conv_front(spec, rng, layers)
        layers.append(Flatten())
        d = spec.conv_channels[1] * tail_len
        for i, width in enumerate(spec.cnn_fc, start=1):
            layers.append(Dense(d, width, rng, f"fc{i}"))
            layers.append(Relu())
            d = width
        layers.append(Dense(d, 1, rng, "out"))
        return Model(layers, "seq")
    if spec.family == "lrcn":
        _conv_front(spec, rng, layers)
        layers.append(ToTimeMajor())
        layers.append(Lstm(spec.conv_channels[1], spec.lstm_units, rng,
                           "lstm", variant=spec.lstm_variant))
        d = spec.lstm_units
        for i, width in enumerate(spec.lrcn_fc, start=1):
            layers.append(Dense(d, width, rng, f"fc{i}"))
            layers.append(Relu())
            d = width
        layers.append(Dense(d, 1, rng, "out"))
        return Model(layers, "seq")
    # gcn
    if adjacency is None:
        raise ConfigError("the gcn family needs the observed-bus adjacency")
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.shape != (spec.n_buses, spec.n_buses):
        raise ConfigError(
            f"adjacency shape {adjacency.shape} does not match {spec.n_buses} buses")
    operator = renormalized_adjacency(adjacency)
    d_node = spec.n_features * spec.n_steps
    layers.append(GraphConv(operator, d_node, spec.gcn_hidden, rng, "gcn1"))
    layers.append(NodeMean())
    d = spec.gcn_hidden
    for i, width in enumerate(spec.gcn_fc, start=1):
        layers.append(Dense(d, width, rng, f"fc{i}"))
        layers.append(Relu())
        d = width
    layers.append(Dense(d, 1, rng, "out"))
    return Model(layers, "graph")


def make_spec(family, dataset, seed=0, **overrides):
    """Build a ModelSpec whose input dimensions match a dataset."""
    shape = dataset.samples[0].tensor.shape
    return ModelSpec(family=family, n_buses=shape[0], n_features=shape[1],
                     n_steps=shape[2], seed=seed, **overrides)


def observed_adjacency(system, buses):
    """Binary adjacency of the subgraph induced by the observed bus ids."""
    idx = [system.bus_index(b) for b in buses]
    return induced_adjacency(system.adjacency(), idx)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    """Evaluation summary.

    acc is the fraction of predictions within mu seconds of the label; r2
    is None when the labels have zero variance (the statistic is undefined
    there, and None keeps that case distinct from a genuine score of 0).
    """
    acc: float
    mse: float
    r2: float | None
    n: int
    mu: float


def regression_metrics(y_true, y_pred, mu=0.5):
    """Compute accuracy-within-mu, MSE, and R^2 for a prediction vector."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ConfigError(
            f"metric inputs must be equal-length vectors, got {y_true.shape} "
            f"and {y_pred.shape}")
    if y_true.size == 0:
        raise ConfigError("metrics need at least one sample")
    if not mu > 0.0:
        raise ConfigError(f"mu must be positive, got {mu}")
    err = y_pred - y_true
    acc = float(np.mean(np.abs(err) <= mu))
    mse_val = float(np.mean(err * err))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = None
    else:
        r2 = 1.0 - float(np.sum(err * err)) / ss_tot
    return Metrics(acc=acc, mse=mse_val, r2=r2, n=int(y_true.size), mu=float(mu))


def predict(model, dataset, split="all", batch_size=256):
    """Predictions for a dataset split, in split order."""
    x, _ = dataset.tensors(split)
    out = np.empty(x.shape[0], dtype=np.float64)
    for start in range(0, x.shape[0], batch_size):
        out[start:start + batch_size] = model.predict(x[start:start + batch_size])
    return out


def evaluate(model, dataset, split="val", mu=0.5):
    """Metrics of a model on one dataset split."""
    _, y = dataset.tensors(split)
    y_pred = predict(model, dataset, split)
    return regression_metrics(y, y_pred, mu=mu)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the SGD loop; defaults follow the evaluation protocol."""
    max_epochs: int = 500
    batch_size: int = 32
    base_lr: float = 1e-3
    momentum: float = 0.0
    lr_factor: float = 0.5
    lr_patience: int = 50
    min_improvement: float = 1e-8
    min_lr: float = 1e-6
    early_stop_patience: int = 200
    divergence_factor: float = 10.0
    divergence_patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not np.isfinite(self.base_lr) or self.base_lr <= 0.0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0.0 < self.lr_factor < 1.0:
            raise ConfigError(f"lr_factor must be in (0, 1), got {self.lr_factor}")
        if self.lr_patience < 1:
            raise ConfigError(f"lr_patience must be >= 1, got {self.lr_patience}")
        if self.min_improvement < 0.0:
            raise ConfigError(
                f"min_improvement must be >= 0, got {self.min_improvement}")
        if not 0.0 < self.min_lr <= self.base_lr:
            raise ConfigError(
                f"min_lr must be in (0, base_lr], got {self.min_lr} "
                f"with base_lr {self.base_lr}")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")
        if self.divergence_factor <= 1.0 or self.divergence_patience < 1:
            raise ConfigError("divergence thresholds must be > 1x and >= 1 epochs")


@dataclass
class TrainResult:
    """Everything train() learned, with the best-epoch weights applied."""
    history: tuple            # rows (epoch, train_mse, val_mse, lr)
    best_epoch: int           # 0 = initialisation was never beaten
    best_val_mse: float
    initial_val_mse: float
    flagged_batches: int = 0
    stopped_early: bool = False
    final_lr: float = 0.0
    epochs_run: int = 0


HISTORY_COLUMNS = ("epoch", "train_mse", "val_mse", "lr")


def train(model, dataset, cfg=None):
    """Fit model on the dataset's train split, tracking the val split.

    The model is left holding the weights of its best validation epoch
    (or the initial weights when max_epochs == 0 or nothing improved).
    Raises TrainingDiverged when validation MSE stays above
    divergence_factor times the initial value for divergence_patience
    consecutive epochs.

    Floating-point overflow warnings are suppressed inside the loop: an
    exploding run produces inf/nan values by design, which the non-finite
    gradient guard and the divergence detector then handle explicitly.
    """
    with np.errstate(all="ignore"):
        return _train_inner(model, dataset, cfg)


def _train_inner(model, dataset, cfg):
    cfg = cfg or TrainConfig()
    x_train_raw, y_train = dataset.tensors("train")
    x_val_raw, y_val = dataset.tensors("val")
    if x_train_raw.shape[0] == 0 or x_val_raw.shape[0] == 0:
        raise ConfigError("training needs non-empty train and val splits")
    x_train = model.prepare(x_train_raw)
    x_val = model.prepare(x_val_raw)
    n_train = x_train.shape[0]

    def val_mse_now():
        preds = np.empty(x_val.shape[0])
        for start in range(0, x_val.shape[0], 256):
            preds[start:start + 256] = model.forward(x_val[start:start + 256])
        return mse(y_val, preds)

    params = model.params()
    initial_val = val_mse_now()
    best_val = initial_val
    best_epoch = 0
    best_params = [p.value.copy() for p in params]
    optimizer = SgdOptimizer(cfg.base_lr, momentum=cfg.momentum)
    schedule = PlateauSchedule(cfg.base_lr, factor=cfg.lr_factor,
                               patience=cfg.lr_patience,
                               min_improvement=cfg.min_improvement,
                               min_lr=cfg.min_lr)
    schedule.update(initial_val)

    history = []
    flagged = 0
    divergent_streak = 0
    stopped_early = False
    epochs_run = 0
    for epoch in range(1, cfg.max_epochs + 1):
        epochs_run = epoch
        lr_used = optimizer.lr
        order = derive_rng(cfg.seed, STREAM_BATCH, epoch).permutation(n_train)
        loss_sum = 0.0
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xb = np.ascontiguousarray(x_train[batch])
            yb = y_train[batch]
            model.zero_grad()
            preds = model.forward(xb)
            loss_sum += mse(yb, preds) * batch.size
            model.backward(mse_grad(yb, preds))
            if not optimizer.step(params):
                flagged += 1
        train_mse = loss_sum / n_train
        val_mse = val_mse_now()
        history.append((epoch, train_mse, val_mse, lr_used))

        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_params = [p.value.copy() for p in params]
        if val_mse > cfg.divergence_factor * initial_val:
            divergent_streak += 1
            if divergent_streak >= cfg.divergence_patience:
                raise TrainingDiverged(
                    f"validation mse {val_mse:.6g} stayed above "
                    f"{cfg.divergence_factor:g}x the initial {initial_val:.6g} "
                    f"for {divergent_streak} consecutive epochs "
                    f"(epoch {epoch}, lr {lr_used:g}); "
                    f"reduce base_lr or check the dataset")
        else:
            divergent_streak = 0
        if epoch - best_epoch >= cfg.early_stop_patience:
            stopped_early = True
            break
        optimizer.lr = schedule.update(val_mse)

    for p, value in zip(params, best_params):
        p.value[...] = value
    return TrainResult(history=tuple(history), best_epoch=best_epoch,
                       best_val_mse=best_val, initial_val_mse=initial_val,
                       flagged_batches=flagged, stopped_early=stopped_early,
                       final_lr=optimizer.lr, epochs_run=epochs_run)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

_SPEC_INT_FIELDS = ("n_buses", "n_features", "n_steps", "kernel_size",
                    "lstm_units", "gcn_hidden", "seed")
_SPEC_TUPLE_FIELDS = ("conv_channels", "dnn_hidden", "cnn_fc", "lrcn_fc",
                      "gcn_fc")
_SPEC_STR_FIELDS = ("family", "lstm_variant", "conv_activation")


def _spec_to_meta(spec):
    meta = {}
    for name in _SPEC_STR_FIELDS:
        meta[f"spec.{name}"] = getattr(spec, name)
    for name in _SPEC_INT_FIELDS:
        meta[f"spec.{name}"] = str(getattr(spec, name))
    for name in _SPEC_TUPLE_FIELDS:
        meta[f"spec.{name}"] = ",".join(str(v) for v in getattr(spec, name))
    return meta


def _spec_from_meta(meta):
    kwargs = {}
    try:
        for name in _SPEC_STR_FIELDS:
            kwargs[name] = meta[f"spec.{name}"]
        for name in _SPEC_INT_FIELDS:
            kwargs[name] = int(meta[f"spec.{name}"])
        for name in _SPEC_TUPLE_FIELDS:
            kwargs[name] = tuple(int(v) for v in meta[f"spec.{name}"].split(","))
    except KeyError as exc:
        raise CheckpointFormatError(f"checkpoint header missing {exc}") from exc
    except ValueError as exc:
        raise CheckpointFormatError(f"malformed checkpoint header: {exc}") from exc
    return ModelSpec(**kwargs)


def save_model(path, model, spec, *, adjacency=None, best_epoch=0,
               bundle_fingerprint="", train_seed=0, extra_meta=None):
    """Write a model checkpoint.

    The header records the architecture spec, the training seed and best
    epoch, and the fingerprint of the dataset the model was trained on; the
    payload holds every parameter tensor plus, for gcn models, the raw
    observed-bus adjacency so evaluation does not need the original case.
    """
    meta = {"format": "model-checkpoint"}
    meta.update(_spec_to_meta(spec))
    meta["train.seed"] = str(int(train_seed))
    meta["train.best_epoch"] = str(int(best_epoch))
    meta["data.fingerprint"] = bundle_fingerprint or "-"
    for key, value in (extra_meta or {}).items():
        meta[f"x.{key}"] = str(value)
    tensors = [(p.name, p.value) for p in model.params()]
    if spec.family == "gcn":
        if adjacency is None:
            raise ConfigError("saving a gcn checkpoint needs the raw adjacency")
        tensors.append(("graph.adjacency",
                        np.asarray(adjacency, dtype=np.float64)))
    write_checkpoint(path, meta, tensors)


def load_model(path):
    """Read a checkpoint; returns (model, spec, meta, adjacency).

    The model is rebuilt from the stored spec and its parameters overwritten
    with the stored tensors; a header/payload mismatch raises
    CheckpointFormatError.  adjacency is None except for gcn models.
    """
    meta, tensors = read_checkpoint(path)
    if meta.get("format") != "model-checkpoint":
        raise CheckpointFormatError(f"{path}: not a model checkpoint")
    spec = _spec_from_meta(meta)
    adjacency = None
    if spec.family == "gcn":
        adjacency = tensors.get("graph.adjacency")
        if adjacency is None:
            raise CheckpointFormatError(
                f"{path}: gcn checkpoint lacks the graph adjacency")
    model = build_model(spec, adjacency=adjacency)
    for p in model.params():
        stored = tensors.get(p.name)
        if stored is None:
            raise CheckpointFormatError(f"{path}: missing tensor {p.name!r}")
        if stored.shape != p.value.shape:
            raise CheckpointFormatError(
                f"{path}: tensor {p.name!r} has shape {stored.shape}, "
                f"expected {p.value.shape}")
        p.value[...] = stored
    return model, spec, meta, adjacency
