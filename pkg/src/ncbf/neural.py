"""A small fully-connected network trainer for weight-vector regression.

Two estimators share this machinery: a phase network trained with a circular
mean-absolute-error loss (radians) and a magnitude network trained with a
per-sample RMSE loss on dB labels. Everything is plain numpy: ReLU hidden
layers, linear output, Adam with per-epoch exponential learning-rate decay.
Training arithmetic is float64; checkpoints store parameters as float32.
"""

import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .beamformer import NcbfWeights

TWO_PI = 2.0 * np.pi

LOSS_CMAE = "cmae"
LOSS_RMSE = "rmse"
_LOSS_KINDS = (LOSS_CMAE, LOSS_RMSE)

# Rows with RMSE below this are treated as exact fits (zero gradient).
_RMSE_GRAD_FLOOR = 1e-12

CHECKPOINT_FORMAT_VERSION = 1
_PARAMS_FILE = "params.f32"


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss stops being finite."""


class CheckpointFormatError(RuntimeError):
    """Raised when a model checkpoint is malformed, truncated, or from an
    unsupported format version."""


@dataclass(frozen=True)
class MlpModel:
    """A fully-connected ReLU network with a linear output layer.

    `weights[l]` has shape (layer_sizes[l], layer_sizes[l+1]); `biases[l]` has
    shape (layer_sizes[l+1],). Batches are row vectors: forward computes
    x @ W + b per layer.
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
        weights = tuple(np.ascontiguousarray(w) for w in self.weights)
        biases = tuple(np.ascontiguousarray(b) for b in self.biases)
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("need one weight matrix and one bias per layer transition")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[l], sizes[l + 1]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l}: parameter shapes do not match layer_sizes")
            w.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return forward(self, batch)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    loss_kind: str
    epochs: int
    batch_size: int = 1024
    learning_rate: float = 0.01
    lr_decay: float = 0.99
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.loss_kind not in _LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {_LOSS_KINDS}, got {self.loss_kind!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass
class LossHistory:
    """Per-epoch loss curves of one run (same units as the loss itself)."""

    loss_kind: str
    train_loss: list
    test_loss: list
    learning_rates: list

    def write_csv(self, path) -> None:
        lines = ["epoch,train_loss,test_loss"]
        for e, (tr, te) in enumerate(zip(self.train_loss, self.test_loss)):
            lines.append(f"{e},{tr!r},{te!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def init_model(layer_sizes: Sequence[int], seed: int) -> MlpModel:
    """He-initialize a network: weights drawn normal with variance 2/fan_in,
    biases zero. Deterministic in (layer_sizes, seed)."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))


def _check_batch(model_input_dim: int, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim != 2:
        raise ValueError(f"batch must be 2-D (rows are samples), got ndim={batch.ndim}")
    if batch.shape[1] != model_input_dim:
        raise ValueError(f"batch has {batch.shape[1]} columns, model expects {model_input_dim}")
    return batch


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Run a batch through the network. ReLU on every hidden layer, identity
    on the output layer. The dtype of `batch` and the parameters is preserved,
    so a float32 model on float32 input stays in float32 end to end."""
    h = _check_batch(model.input_dim, batch)
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if l != last:
            np.maximum(h, 0.0, out=h)
    return h


def _forward_cached(weights, biases, batch):
    """Forward pass keeping layer inputs and hidden pre-activations for
    backprop. Returns (prediction, layer_inputs, hidden_preacts)."""
    layer_inputs = [batch]
    preacts = []
    h = batch
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if l != last:
            preacts.append(z)
            h = np.maximum(z, 0.0)
            layer_inputs.append(h)
        else:
            h = z
    return h, layer_inputs, preacts


def rmse_loss(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Mean over the batch of per-sample root-mean-square error across the
    output entries."""
    predicted, truth = _check_pair(predicted, truth)
    per_row = np.sqrt(np.mean((predicted - truth) ** 2, axis=1))
    return float(np.mean(per_row))


def wrap_to_pi(delta) -> np.ndarray:
    """Wrap angle differences into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(delta, dtype=np.float64), TWO_PI)


def cmae_loss(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Mean circular absolute error in radians: per entry the shorter arc
    between prediction and truth, averaged over outputs then over the batch.
    Invariant to shifting any entry by whole turns."""
    predicted, truth = _check_pair(predicted, truth)
    m = np.mod(np.abs(predicted - truth), TWO_PI)
    dist = np.minimum(m, TWO_PI - m)
    return float(np.mean(np.mean(dist, axis=1)))


def _check_pair(predicted, truth):
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape or predicted.ndim != 2:
        raise ValueError("predicted and truth must be 2-D arrays of the same shape")
    return predicted, truth


def loss_gradient(loss_kind: str, predicted: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Gradient of the batch loss with respect to the predictions.

    For "rmse", rows already fitting to within 1e-12 get a zero gradient
    (the loss is not differentiable at an exact fit). For "cmae" the gradient
    is the sign of the wrapped difference; the kink at a half turn takes the
    positive side.
    """
    predicted, truth = _check_pair(predicted, truth)
    b, n = predicted.shape
    if loss_kind == LOSS_RMSE:
        diff = predicted - truth
        per_row = np.sqrt(np.mean(diff**2, axis=1))
        safe = np.where(per_row < _RMSE_GRAD_FLOOR, 1.0, per_row)
        grad = diff / (b * n * safe[:, None])
        grad[per_row < _RMSE_GRAD_FLOOR] = 0.0
        return grad
    if loss_kind == LOSS_CMAE:
        return np.sign(wrap_to_pi(predicted - truth)) / (b * n)
    raise ValueError(f"unknown loss_kind {loss_kind!r}")


def _loss_value(loss_kind, predicted, truth):
    return cmae_loss(predicted, truth) if loss_kind == LOSS_CMAE else rmse_loss(predicted, truth)


def _loss_and_grads(weights, biases, batch, truth, loss_kind):
    """One forward/backward pass. Returns (loss, weight_grads, bias_grads)."""
    pred, layer_inputs, preacts = _forward_cached(weights, biases, batch)
    loss = _loss_value(loss_kind, pred, truth)
    g = loss_gradient(loss_kind, pred, truth)
    weight_grads = [None] * len(weights)
    bias_grads = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        weight_grads[l] = layer_inputs[l].T @ g
        bias_grads[l] = g.sum(axis=0)
        if l > 0:
            g = (g @ weights[l].T) * (preacts[l - 1] > 0)
    return loss, weight_grads, bias_grads


class _Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _epoch_loss(weights, biases, x, y, loss_kind, chunk=8192):
    """Loss over a full set, evaluated in chunks, sample-weighted."""
    total = 0.0
    for start in range(0, x.shape[0], chunk):
        xb = x[start : start + chunk]
        pred, _, _ = _forward_cached(weights, biases, xb)
        total += _loss_value(loss_kind, pred, y[start : start + chunk]) * xb.shape[0]
    return total / x.shape[0]


def train(model: MlpModel, dataset, config: TrainConfig):
    """Train `model` on `dataset` and return (trained_model, LossHistory).

    The dataset's seeded split supplies the train/test partition; the label
    table is picked by the loss kind ("cmae" trains on phase labels, "rmse"
    on magnitude dB labels). Batches are reshuffled every epoch from
    `config.seed`; the learning rate decays as lr * lr_decay**epoch. All
    arithmetic runs in float64.

    Raises
    ------
    TrainingDivergedError
        If a train or test loss stops being finite.
    """
    labels = dataset.phase_labels if config.loss_kind == LOSS_CMAE else dataset.magnitude_labels_db
    if model.input_dim != dataset.feature_dim or model.output_dim != dataset.label_dim:
        raise ValueError(
            f"model [{model.input_dim}->{model.output_dim}] does not fit dataset "
            f"[{dataset.feature_dim}->{dataset.label_dim}]"
        )
    train_idx, test_idx = dataset.split(config.train_fraction)
    if train_idx.size == 0 or test_idx.size == 0:
        raise ValueError("dataset too small for the requested split")
    x_train = dataset.features[train_idx].astype(np.float64)
    y_train = labels[train_idx].astype(np.float64)
    x_test = dataset.features[test_idx].astype(np.float64)
    y_test = labels[test_idx].astype(np.float64)

    weights = [w.astype(np.float64) for w in model.weights]
    biases = [b.astype(np.float64) for b in model.biases]
    params = weights + biases
    adam = _Adam(params)
    rng = np.random.default_rng(config.seed)
    history = LossHistory(config.loss_kind, [], [], [])

    n = x_train.shape[0]
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay**epoch
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            pick = order[start : start + config.batch_size]
            loss, gw, gb = _loss_and_grads(
                weights, biases, x_train[pick], y_train[pick], config.loss_kind
            )
            running += loss * pick.size
            adam.step(params, gw + gb, lr)
        train_loss = running / n
        test_loss = _epoch_loss(weights, biases, x_test, y_test, config.loss_kind)
        if not (np.isfinite(train_loss) and np.isfinite(test_loss)):
            raise TrainingDivergedError(
                f"non-finite {config.loss_kind} loss at epoch {epoch}: "
                f"train={train_loss}, test={test_loss}"
            )
        history.train_loss.append(train_loss)
        history.test_loss.append(test_loss)
        history.learning_rates.append(lr)

    trained = MlpModel(
        layer_sizes=model.layer_sizes,
        weights=tuple(w.copy() for w in weights),
        biases=tuple(b.copy() for b in biases),
    )
    return trained, history


@dataclass(frozen=True)
class TuneResult:
    """Cross-seed outcome of one candidate architecture."""

    layer_sizes: tuple
    mean_test_loss: float
    run_losses: tuple
    failures: tuple


def tune_architectures(
    candidates: Sequence[Sequence[int]],
    dataset,
    config: TrainConfig,
    repeats: int = 5,
):
    """Train every candidate `repeats` times with seeds config.seed + r and
    rank by mean final test loss (ascending; candidates whose runs all failed
    sort last with an infinite mean). Failures are recorded per run, not
    raised."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    results = []
    for cand in candidates:
        sizes = tuple(int(s) for s in cand)
        losses, failures = [], []
        for r in range(repeats):
            run_seed = config.seed + r
            try:
                model = init_model(sizes, seed=run_seed)
                _, history = train(model, dataset, replace(config, seed=run_seed))
                losses.append(history.test_loss[-1])
            except Exception as exc:
                failures.append(f"run {r}: {exc}")
        mean = float(np.mean(losses)) if losses else np.inf
        results.append(
            TuneResult(
                layer_sizes=sizes,
                mean_test_loss=mean,
                run_losses=tuple(losses),
                failures=tuple(failures),
            )
        )
    return sorted(results, key=lambda res: res.mean_test_loss)


def reconstruct_weights(phase: np.ndarray, magnitude_db: np.ndarray) -> NcbfWeights:
    """Rebuild a unit-power complex weight vector from predicted phases
    (radians) and magnitudes (power dB). Inverts the label encoding up to the
    arbitrary reference phase."""
    phase = np.asarray(phase, dtype=np.float64)
    mag_db = np.asarray(magnitude_db, dtype=np.float64)
    if phase.shape != mag_db.shape or phase.ndim != 1:
        raise ValueError("phase and magnitude_db must be 1-D arrays of the same shape")
    mags = 10.0 ** (mag_db / 20.0)
    norm = np.linalg.norm(mags)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("magnitudes do not define a normalizable weight vector")
    return NcbfWeights((mags / norm) * np.exp(1j * phase))


def save_model(model: MlpModel, path, loss_kind=None, seed=None,
               train_config: TrainConfig = None, final_train_loss=None,
               final_test_loss=None, canonical_features=None) -> None:
    """Write a checkpoint directory: model.json plus params.f32 (little-endian
    float32, per layer the weight matrix row-major then the bias vector)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    chunks = []
    for w, b in zip(model.weights, model.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "layer_sizes": list(model.layer_sizes),
        "param_count": model.param_count,
        "loss_kind": loss_kind,
        "seed": seed,
        "optimizer": "adam",
        "train_config": None if train_config is None else {
            "loss_kind": train_config.loss_kind,
            "epochs": train_config.epochs,
            "batch_size": train_config.batch_size,
            "learning_rate": train_config.learning_rate,
            "lr_decay": train_config.lr_decay,
            "seed": train_config.seed,
            "train_fraction": train_config.train_fraction,
        },
        "final_train_loss": final_train_loss,
        "final_test_loss": final_test_loss,
        "canonical_features": canonical_features,
        "params_file": _PARAMS_FILE,
    }
    (path / "model.json").write_text(json.dumps(meta, indent=2) + "\n")
    (path / _PARAMS_FILE).write_bytes(b"".join(chunks))


def load_model(path):
    """Read a checkpoint directory. Returns (MlpModel, metadata dict); the
    parameters come back as float64 copies of the stored float32 values.

    Raises
    ------
    CheckpointFormatError
        On a missing or malformed model.json, an unsupported format version,
        or a params file whose size disagrees with the layer sizes.
    """
    path = Path(path)
    meta_path = path / "model.json"
    if not meta_path.is_file():
        raise CheckpointFormatError(f"no model.json in {path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"model.json is not valid JSON: {exc}") from exc
    version = meta.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointFormatError(
            f"unsupported checkpoint format version {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    try:
        sizes = tuple(int(s) for s in meta["layer_sizes"])
        params_path = path / meta.get("params_file", _PARAMS_FILE)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"malformed checkpoint metadata: {exc}") from exc
    if len(sizes) < 2:
        raise CheckpointFormatError(f"layer_sizes {sizes} is not a valid network shape")
    if not params_path.is_file():
        raise CheckpointFormatError(f"missing parameter file {params_path.name}")
    raw = params_path.read_bytes()
    expected = sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:])) * 4
    if len(raw) != expected:
        raise CheckpointFormatError(
            f"{params_path.name}: expected {expected} bytes for layers {sizes}, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(flat[pos : pos + fan_out])
        pos += fan_out
    model = MlpModel(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))
    return model, meta
