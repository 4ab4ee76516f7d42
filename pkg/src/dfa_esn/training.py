"""Supervised training: delta-rule readout, DFA hidden updates, batching.

The readout is trained by the delta rule on a mean-squared one-hot loss;
hidden input matrices receive direct-feedback-alignment updates, the output
error projected through a fixed random matrix per layer. Updates from every
sampled step of every series are accumulated over an epoch, averaged over
the total sample count, and applied once.

A finite-difference oracle over probed weight coordinates supports checking
that update directions stay within 90 degrees of the true gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import NumericsError, ShapeError, SpecError
from .numerics import SeededRng, Uniform, as_matrix, as_vector, outer
from .reservoir import DeepEsn, build_deep_esn, forward_stack, sample_indices

# series per forward batch; fixed (not configurable) so accumulation order
# and therefore results are reproducible
CHUNK = 64

FD_SIZE_CAP = 64

DFA_VARIANTS = ("projected-outer", "paper-literal")


@dataclass
class TrainConfig:
    """All training hyperparameters. Washout may be an absolute step count
    (int) or a fraction of the series length (float in [0, 1))."""

    epochs: int = 50
    eta: float = 0.01
    eta_decay_per_epoch: float = 1e-7
    weight_decay: float = 1e-9
    leak_alpha: float = 0.1
    reservoir_size: int = 800
    depth: int = 4
    target_rho: float = 0.9
    washout: int | float = 0.1
    sample_every: int | None = None
    seed: int = 0
    dfa_variant: str = "projected-outer"
    use_activation_derivative: bool = True
    loss: str = "mse-one-hot"
    activation: str = "tanh"
    input_scale: float = 0.5
    inter_scale: float | None = None
    feedback_scale: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise SpecError("epochs", f"must be >= 1, got {self.epochs}")
        if self.eta <= 0:
            raise SpecError("eta", f"must be > 0, got {self.eta}")
        if self.eta_decay_per_epoch < 0 or self.weight_decay < 0:
            raise SpecError("decay", "decay values must be >= 0")
        if self.depth < 1:
            raise SpecError("depth", f"must be >= 1, got {self.depth}")
        if self.reservoir_size < 1:
            raise SpecError("reservoir_size", f"must be >= 1, got {self.reservoir_size}")
        if not 0.0 < self.leak_alpha <= 1.0:
            raise SpecError("leak_alpha", f"must be in (0, 1], got {self.leak_alpha}")
        if not 0.0 < self.target_rho < 1.0:
            raise SpecError("target_rho", f"must be in (0, 1), got {self.target_rho}")
        if isinstance(self.washout, float) and not 0.0 <= self.washout < 1.0:
            raise SpecError("washout", f"fraction must be in [0, 1), got {self.washout}")
        if isinstance(self.washout, int) and self.washout < 0:
            raise SpecError("washout", f"must be >= 0, got {self.washout}")
        if self.sample_every is not None and self.sample_every < 1:
            raise SpecError("sample_every", f"must be >= 1, got {self.sample_every}")
        if self.dfa_variant not in DFA_VARIANTS:
            raise SpecError("dfa_variant", f"expected one of {DFA_VARIANTS}, got {self.dfa_variant!r}")
        if self.loss != "mse-one-hot":
            raise SpecError("loss", f"only 'mse-one-hot' is supported, got {self.loss!r}")
        if self.activation not in ("sigmoid", "tanh"):
            raise SpecError("activation", f"expected 'sigmoid' or 'tanh', got {self.activation!r}")

    def washout_steps(self, length: int) -> int:
        if isinstance(self.washout, float):
            return int(self.washout * length)
        return self.washout

    def sample_stride(self, length: int) -> int:
        """Explicit value, or a stride giving roughly eight samples."""
        if self.sample_every is not None:
            return self.sample_every
        return max(1, (length - self.washout_steps(length)) // 8)

    def sample_times(self, length: int) -> list[int]:
        return sample_indices(length, self.washout_steps(length), self.sample_stride(length))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def build_model(cfg: TrainConfig, input_dim: int, output_dim: int, variant: str = "dfa-deep") -> DeepEsn:
    """Construct the stack a variant trains: ``single-reservoir`` forces depth
    one, ``deep-no-dfa`` zeroes the feedback matrices (hidden layers frozen)."""
    if variant not in ("single-reservoir", "deep-no-dfa", "dfa-deep"):
        raise SpecError("variant", f"unknown variant {variant!r}")
    depth = 1 if variant == "single-reservoir" else cfg.depth
    inter = None
    if cfg.inter_scale is not None:
        inter = Uniform(-cfg.inter_scale, cfg.inter_scale)
    fb_scale = cfg.feedback_scale
    return build_deep_esn(
        SeededRng(cfg.seed),
        depth,
        cfg.reservoir_size,
        input_dim,
        output_dim,
        cfg.leak_alpha,
        cfg.target_rho,
        Uniform(-cfg.input_scale, cfg.input_scale),
        inter_dist=inter,
        activation=cfg.activation,
        feedback="zero" if variant == "deep-no-dfa" else "random",
        feedback_dist=Uniform(-fb_scale, fb_scale),
    )


def error_at_sample(y_pred, label: int, num_classes: int) -> np.ndarray:
    """Error signal e = prediction - onehot(label) for the one-hot MSE loss."""
    y_pred = as_vector(y_pred, "prediction")
    if y_pred.shape[0] != num_classes:
        raise ShapeError(f"prediction length {y_pred.shape[0]} != num_classes {num_classes}")
    if not 0 <= label < num_classes:
        raise NumericsError(f"label {label} out of range for {num_classes} classes")
    e = y_pred.copy()
    e[label] -= 1.0
    return e


def delta_rule_update(e, x_last, eta: float) -> np.ndarray:
    """Readout update -eta (e x^T): gradient descent on 0.5 ||e||^2."""
    return -eta * outer(e, x_last)


def _fprime(preact: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        a = np.tanh(preact)
        return 1.0 - a * a
    a = 1.0 / (1.0 + np.exp(-np.clip(preact, -709, 709)))
    return a * (1.0 - a)


def dfa_update(
    e,
    b_i,
    u_i,
    preact_i,
    eta: float,
    variant: str = "projected-outer",
    use_fprime: bool = True,
    activation: str = "sigmoid",
) -> np.ndarray:
    """Hidden-layer update from the output error projected through B_i.

    projected-outer (default): -eta ((B_i e) * g) u_i^T with g = f'(preact)
    when ``use_fprime`` else ones. paper-literal: the projected error
    broadcast across all input columns, -eta (B_i e) 1^T, kept for ablation
    (no presynaptic factor; both routes share the descent sign convention).
    """
    e = as_vector(e, "error")
    b_i = as_matrix(b_i, "feedback")
    u_i = as_vector(u_i, "layer input")
    preact_i = as_vector(preact_i, "preactivation")
    if b_i.shape[1] != e.shape[0]:
        raise ShapeError(f"feedback has {b_i.shape[1]} columns but error has length {e.shape[0]}")
    if b_i.shape[0] != preact_i.shape[0]:
        raise ShapeError(
            f"feedback has {b_i.shape[0]} rows but layer has {preact_i.shape[0]} units"
        )
    if variant not in DFA_VARIANTS:
        raise NumericsError(f"unknown dfa variant {variant!r}")
    projected = b_i @ e
    if variant == "paper-literal":
        return -eta * outer(projected, np.ones(u_i.shape[0]))
    if use_fprime:
        projected = projected * _fprime(preact_i, activation)
    return -eta * outer(projected, u_i)


@dataclass
class UpdateBatch:
    """Accumulated (summed) updates for one epoch, plus the sample count."""

    d_w_out: np.ndarray
    d_w_in: list[np.ndarray | None]  # per layer; None = layer not trained
    samples: int = 0


@dataclass
class EpochReport:
    epoch: int
    mean_loss: float
    train_accuracy: float | None = None
    test_accuracy: float | None = None
    eta_effective: float = 0.0
    alignment: dict[str, float] | None = None


def effective_eta(cfg: TrainConfig, epoch: int) -> float:
    return cfg.eta * (1.0 - cfg.eta_decay_per_epoch) ** epoch


def _trained_layers(esn: DeepEsn) -> list[int]:
    """Non-terminal layers with a nonzero feedback matrix. All-zero feedback
    carries no error, so those layers stay frozen (no update, no decay)."""
    return [i for i, fb in enumerate(esn.feedback) if np.any(fb)]


def _targets(labels: np.ndarray, num_classes: int) -> np.ndarray:
    t = np.zeros((labels.shape[0], num_classes))
    t[np.arange(labels.shape[0]), labels] = 1.0
    return t


def _batch_values(series_list) -> tuple[np.ndarray, np.ndarray]:
    """Stack equal-length series into (T, S, D) plus the label vector."""
    values = np.stack([np.asarray(s.values, dtype=np.float64) for s in series_list], axis=1)
    labels = np.array([s.label for s in series_list], dtype=np.int64)
    return np.ascontiguousarray(values), labels


def _chunks(series_list):
    for i in range(0, len(series_list), CHUNK):
        yield series_list[i : i + CHUNK]


def accumulate_epoch(esn: DeepEsn, train_set, cfg: TrainConfig, eta_k: float) -> tuple[UpdateBatch, float]:
    """One full forward pass over the training set, summing per-sample updates.

    Series are processed in dataset order (chunked for memory), samples in
    time order: the accumulation order is fixed, so results are reproducible
    bit-for-bit.
    """
    if not train_set:
        raise NumericsError("training set is empty")
    num_classes = esn.output_dim
    trained = _trained_layers(esn)
    batch = UpdateBatch(
        d_w_out=np.zeros_like(esn.w_out),
        d_w_in=[np.zeros_like(esn.layers[i].w_in) if i in trained else None for i in range(esn.depth)],
    )
    loss_sum = 0.0
    for chunk in _chunks(train_set):
        values, labels = _batch_values(chunk)
        length = values.shape[0]
        if length <= cfg.washout_steps(length):
            raise NumericsError(
                f"series {chunk[0].source_id}: length {length} too short for "
                f"washout {cfg.washout_steps(length)}"
            )
        times = np.array(cfg.sample_times(length))
        seqs = forward_stack(esn, values)
        x_last = seqs[-1][times]  # (k, S, N)
        errors = x_last @ esn.w_out.T - _targets(labels, num_classes)[None, :, :]
        loss_sum += float(0.5 * np.sum(errors * errors))
        batch.samples += errors.shape[0] * errors.shape[1]
        batch.d_w_out += -eta_k * np.einsum("ksb,ksn->bn", errors, x_last)
        for i in trained:
            layer = esn.layers[i]
            u = values[times] if i == 0 else seqs[i - 1][times]
            projected = errors @ esn.feedback[i].T  # (k, S, N_i)
            if cfg.dfa_variant == "paper-literal":
                summed = np.einsum("ksn->n", projected)
                batch.d_w_in[i] += -eta_k * np.outer(summed, np.ones(layer.input_dim))
                continue
            if cfg.use_activation_derivative:
                prev = np.zeros_like(seqs[i][times])
                nonzero = times > 0
                prev[nonzero] = seqs[i][times[nonzero] - 1]
                preact = u @ layer.w_in.T + prev @ layer.w_rec.T
                projected = projected * _fprime(preact, layer.activation)
            batch.d_w_in[i] += -eta_k * np.einsum("ksn,ksa->na", projected, u)
    return batch, loss_sum / batch.samples


def apply_batch(esn: DeepEsn, batch: UpdateBatch, weight_decay: float):
    """W <- W (1 - decay) + mean update, for the trained matrices only."""
    if batch.samples < 1:
        raise NumericsError("update batch holds no samples")
    esn.w_out = esn.w_out * (1.0 - weight_decay) + batch.d_w_out / batch.samples
    for i, delta in enumerate(batch.d_w_in):
        if delta is None:
            continue
        layer = esn.layers[i]
        layer.w_in = layer.w_in * (1.0 - weight_decay) + delta / batch.samples


def evaluate(esn: DeepEsn, series_list, cfg: TrainConfig) -> float:
    """Percent of series whose mean-readout argmax matches the true label."""
    if not series_list:
        raise NumericsError("cannot evaluate an empty dataset")
    correct = 0
    for chunk in _chunks(series_list):
        values, labels = _batch_values(chunk)
        times = np.array(cfg.sample_times(values.shape[0]))
        states = forward_stack(esn, values)[-1]
        scores = np.mean(states[times] @ esn.w_out.T, axis=0)  # (S, B)
        correct += int(np.sum(np.argmax(scores, axis=1) == labels))
    return 100.0 * correct / len(series_list)


def train_epoch(esn: DeepEsn, train_set, cfg: TrainConfig, epoch: int) -> EpochReport:
    """One batched epoch: accumulate over the train set, apply once, then
    measure training accuracy with the updated weights. The caller fills in
    test accuracy if it wants it reported."""
    eta_k = effective_eta(cfg, epoch)
    batch, mean_loss = accumulate_epoch(esn, train_set, cfg, eta_k)
    apply_batch(esn, batch, cfg.weight_decay)
    return EpochReport(
        epoch=epoch,
        mean_loss=mean_loss,
        train_accuracy=evaluate(esn, train_set, cfg),
        eta_effective=eta_k,
    )


# ---------------------------------------------------------------------------
# finite-difference oracle and alignment angles


@dataclass
class GradSketch:
    """Values of a gradient (or update) at probed weight coordinates."""

    coords: np.ndarray  # (k, 2) int row/col indices
    values: np.ndarray  # (k,)


def _series_sample_errors(esn: DeepEsn, series, cfg: TrainConfig):
    values, labels = _batch_values([series])
    times = np.array(cfg.sample_times(values.shape[0]))
    seqs = forward_stack(esn, values)
    errors = seqs[-1][times, 0] @ esn.w_out.T  # (k, B)
    errors[:, series.label] -= 1.0
    return values, times, seqs, errors


def series_loss(esn: DeepEsn, series, cfg: TrainConfig) -> float:
    """Total squared-error loss over the sampled steps of one series."""
    _, _, _, errors = _series_sample_errors(esn, series, cfg)
    return float(0.5 * np.sum(errors * errors))


def _check_probe_target(esn: DeepEsn, layer: int, wrt: str) -> tuple[int, int]:
    if any(l.size > FD_SIZE_CAP for l in esn.layers):
        raise NumericsError(
            f"finite differences are guarded to layers of <= {FD_SIZE_CAP} units"
        )
    if wrt == "w_out":
        rows, cols = esn.w_out.shape
    else:
        if not 0 <= layer < esn.depth:
            raise NumericsError(f"layer index {layer} out of range")
        rows, cols = esn.layers[layer].w_in.shape
    return rows, cols


def probe_coords(esn: DeepEsn, cfg: TrainConfig, layer: int, probe_count: int, wrt: str = "w_in") -> np.ndarray:
    """Deterministic sample of weight coordinates to probe (all, if few)."""
    rows, cols = _check_probe_target(esn, layer, wrt)
    total = rows * cols
    if probe_count >= total:
        flat = np.arange(total)
    else:
        stream = SeededRng(cfg.seed).stream(f"fd-probe/{wrt}/{layer}")
        flat = stream.choice(total, size=probe_count, replace=False)
        flat.sort()
    return np.stack(np.unravel_index(flat, (rows, cols)), axis=1)


def finite_difference_grad(
    esn: DeepEsn,
    series,
    cfg: TrainConfig,
    layer: int,
    probe_count: int,
    h: float = 1e-5,
    wrt: str = "w_in",
) -> GradSketch:
    """Central-difference gradient of the series loss at probed coordinates.

    Perturbs one weight at a time and re-simulates, so recurrent knock-on
    effects across the remaining time steps are fully included.
    """
    if h <= 0:
        raise NumericsError(f"finite-difference step must be > 0, got {h}")
    coords = probe_coords(esn, cfg, layer, probe_count, wrt)
    target = esn.w_out if wrt == "w_out" else esn.layers[layer].w_in
    values = np.empty(len(coords))
    for k, (i, j) in enumerate(coords):
        original = target[i, j]
        target[i, j] = original + h
        up = series_loss(esn, series, cfg)
        target[i, j] = original - h
        down = series_loss(esn, series, cfg)
        target[i, j] = original
        values[k] = (up - down) / (2.0 * h)
    return GradSketch(coords, values)


def series_update_sketch(
    esn: DeepEsn, series, cfg: TrainConfig, layer: int, coords: np.ndarray, wrt: str = "w_in"
) -> GradSketch:
    """The update this series would contribute (summed over its samples),
    evaluated at the probed coordinates."""
    values_, times, seqs, errors = _series_sample_errors(esn, series, cfg)
    if wrt == "w_out":
        x_last = seqs[-1][times, 0]
        update = -cfg.eta * errors.T @ x_last
    else:
        layer_obj = esn.layers[layer]
        u = values_[times, 0] if layer == 0 else seqs[layer - 1][times, 0]
        projected = errors @ esn.feedback[layer].T
        if cfg.dfa_variant == "paper-literal":
            update = -cfg.eta * np.outer(projected.sum(axis=0), np.ones(layer_obj.input_dim))
        else:
            if cfg.use_activation_derivative:
                prev = np.zeros((len(times), layer_obj.size))
                nonzero = times > 0
                prev[nonzero] = seqs[layer][times[nonzero] - 1, 0]
                preact = u @ layer_obj.w_in.T + prev @ layer_obj.w_rec.T
                projected = projected * _fprime(preact, layer_obj.activation)
            update = -cfg.eta * projected.T @ u
    return GradSketch(coords, update[coords[:, 0], coords[:, 1]])


def alignment_angle(update, grad) -> float | None:
    """Angle in degrees between an update direction and the descent direction
    (negative gradient): 0 = aligned, 90 = orthogonal, 180 = ascent.
    Returns None when either vector has zero norm (undefined angle)."""
    u = update.values if isinstance(update, GradSketch) else np.asarray(update, dtype=float)
    g = grad.values if isinstance(grad, GradSketch) else np.asarray(grad, dtype=float)
    u = u.ravel()
    g = -g.ravel()
    nu, ng = np.linalg.norm(u), np.linalg.norm(g)
    if nu == 0.0 or ng == 0.0:
        return None
    cos = float(np.dot(u, g) / (nu * ng))
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
