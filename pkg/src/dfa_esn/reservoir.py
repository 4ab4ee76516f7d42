"""Reservoir layers and deep stacks: construction, forward dynamics, sampling.

A layer follows the leaky update

    x_t = (1 - alpha) x_{t-1} + alpha f(W_in u_t + W_rec x_{t-1})

with a fixed random recurrent matrix rescaled below unit spectral radius.
Layers stack synchronously: layer i's input at step t is layer i-1's state at
step t. Only the terminal layer feeds the linear readout y = W_out x.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._kernels import ACTIVATION_IDS, layer_sequence
from .errors import NumericsError, ShapeError
from .numerics import (
    SeededRng,
    Uniform,
    as_matrix,
    as_vector,
    power_iteration,
    rng_matrix,
)

log = logging.getLogger(__name__)

ACTIVATIONS = tuple(ACTIVATION_IDS)

# w_rec is drawn from this and then rescaled, so only its shape of support matters
REC_DIST = Uniform(-1.0, 1.0)

# power-iteration budget for construction-time radius checks; estimates for
# complex-dominant spectra stabilise well before this
RADIUS_MAX_ITERS = 1000
RADIUS_TOL = 1e-8


def _activation_id(name: str) -> int:
    if name not in ACTIVATION_IDS:
        raise NumericsError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")
    return ACTIVATION_IDS[name]


def _measure_radius(m: np.ndarray) -> float:
    """Construction-time radius estimate; complex-dominant spectra only
    stabilise in modulus, which is all sub-unit scaling needs."""
    result = power_iteration(m, tol=RADIUS_TOL, max_iters=RADIUS_MAX_ITERS)
    if not result.converged:
        log.debug(
            "power iteration oscillating (complex-dominant spectrum); "
            "using modulus average %.6g",
            result.value,
        )
    return result.value


@dataclass
class ReservoirLayer:
    """One reservoir: weights, leak rate, and current state.

    ``enforce_stability`` rejects recurrent matrices whose measured spectral
    radius is >= 1; tests that demonstrate the unstable regime may disable it.
    """

    w_in: np.ndarray
    w_rec: np.ndarray
    leak_alpha: float
    activation: str = "sigmoid"
    enforce_stability: bool = True
    state: np.ndarray = field(init=False)
    measured_rho: float = field(init=False)

    def __post_init__(self):
        self.w_in = np.ascontiguousarray(as_matrix(self.w_in, "w_in"))
        self.w_rec = np.ascontiguousarray(as_matrix(self.w_rec, "w_rec"))
        n, a = self.w_in.shape
        if self.w_rec.shape != (n, n):
            raise ShapeError(
                f"w_rec must be square with side {n} (w_in is {n}x{a}), "
                f"got {self.w_rec.shape[0]}x{self.w_rec.shape[1]}"
            )
        if not 0.0 < self.leak_alpha <= 1.0:
            raise NumericsError(f"leak_alpha must be in (0, 1], got {self.leak_alpha}")
        _activation_id(self.activation)
        self.measured_rho = _measure_radius(self.w_rec)
        if self.enforce_stability and self.measured_rho >= 1.0:
            raise NumericsError(
                f"recurrent matrix spectral radius {self.measured_rho:.4f} >= 1"
            )
        self.state = np.zeros(n)

    @property
    def size(self) -> int:
        return self.w_in.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]

    def reset(self):
        self.state = np.zeros(self.size)

    def step(self, u) -> np.ndarray:
        """Advance one time step; returns (and stores) the new state."""
        u = as_vector(u, "input")
        if u.shape[0] != self.input_dim:
            raise ShapeError(
                f"input length {u.shape[0]} != w_in columns {self.input_dim}"
            )
        out = np.empty((1, 1, self.size))
        layer_sequence(
            self.w_in,
            self.w_rec,
            np.ascontiguousarray(u.reshape(1, 1, -1)),
            self.leak_alpha,
            _activation_id(self.activation),
            out,
            np.ascontiguousarray(self.state.reshape(1, -1)),
        )
        self.state = out[0, 0]
        return self.state


def step_layer(layer: ReservoirLayer, u) -> np.ndarray:
    """Functional alias for ``layer.step(u)``."""
    return layer.step(u)


def build_layer(
    rng: SeededRng,
    n: int,
    input_dim: int,
    leak_alpha: float,
    target_rho: float,
    dist: Uniform,
    activation: str = "sigmoid",
    label: str = "layer",
) -> ReservoirLayer:
    """Construct a layer with w_rec rescaled to ``target_rho`` and zero state.

    A degenerate recurrent draw (zero spectral radius) is redrawn once.
    """
    if n < 1 or input_dim < 1:
        raise NumericsError(f"layer needs n >= 1 and input_dim >= 1, got {n}, {input_dim}")
    if not 0.0 < target_rho < 1.0:
        raise NumericsError(f"target_rho must be in (0, 1), got {target_rho}")
    w_in = rng_matrix(rng, n, input_dim, dist, label=f"{label}/w_in")
    w_rec = None
    for attempt in ("", "/redraw"):
        candidate = rng_matrix(rng, n, n, REC_DIST, label=f"{label}/w_rec{attempt}")
        rho = _measure_radius(candidate)
        if rho > 0.0:
            w_rec = candidate * (target_rho / rho)
            break
    if w_rec is None:
        raise NumericsError(f"{label}: recurrent draw has zero spectral radius twice")
    return ReservoirLayer(w_in, w_rec, leak_alpha, activation=activation)


@dataclass
class DeepEsn:
    """Stack of reservoir layers, terminal readout, per-layer feedback matrices.

    ``feedback[i]`` carries the output error to non-terminal layer i
    (i in 0..depth-2); an all-zero matrix means that layer is not trained.
    """

    layers: list[ReservoirLayer]
    w_out: np.ndarray
    feedback: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("DeepEsn needs at least one layer")
        for i in range(1, len(self.layers)):
            got = self.layers[i].input_dim
            want = self.layers[i - 1].size
            if got != want:
                raise ShapeError(
                    f"layer {i} expects input length {got} but layer {i - 1} "
                    f"has {want} units"
                )
        self.w_out = np.ascontiguousarray(as_matrix(self.w_out, "w_out"))
        n_last = self.layers[-1].size
        if self.w_out.shape[1] != n_last:
            raise ShapeError(
                f"w_out has {self.w_out.shape[1]} columns but the terminal "
                f"layer has {n_last} units"
            )
        if len(self.feedback) != max(len(self.layers) - 1, 0):
            raise ShapeError(
                f"expected {max(len(self.layers) - 1, 0)} feedback matrices "
                f"(one per non-terminal layer), got {len(self.feedback)}"
            )
        b = self.output_dim
        for i, fb in enumerate(self.feedback):
            fb = np.ascontiguousarray(as_matrix(fb, f"feedback[{i}]"))
            want = (self.layers[i].size, b)
            if fb.shape != want:
                raise ShapeError(
                    f"feedback[{i}] must be {want[0]}x{want[1]}, "
                    f"got {fb.shape[0]}x{fb.shape[1]}"
                )
            self.feedback[i] = fb

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.w_out.shape[0]

    def reset(self):
        for layer in self.layers:
            layer.reset()


def build_deep_esn(
    rng: SeededRng,
    depth: int,
    n: int,
    input_dim: int,
    output_dim: int,
    leak_alpha: float,
    target_rho: float,
    input_dist: Uniform,
    inter_dist: Uniform | None = None,
    activation: str = "sigmoid",
    feedback: str = "random",
    feedback_dist: Uniform = Uniform(-1.0, 1.0),
) -> DeepEsn:
    """Build a stack of ``depth`` layers plus a zero-initialised readout.

    ``inter_dist`` is the draw for hidden-layer input matrices; the default
    scales the input-layer bounds by 1/sqrt(fan_in) so that hidden
    pre-activations stay in the responsive range of the activation.
    ``feedback`` is "random" (DFA training) or "zero" (hidden layers frozen).
    """
    if depth < 1:
        raise NumericsError(f"depth must be >= 1, got {depth}")
    if feedback not in ("random", "zero"):
        raise NumericsError(f"feedback must be 'random' or 'zero', got {feedback!r}")
    if inter_dist is None:
        half = 4.0 * max(abs(input_dist.lo), abs(input_dist.hi)) / np.sqrt(n)
        inter_dist = Uniform(-half, half)
    layers = []
    for i in range(depth):
        layers.append(
            build_layer(
                rng,
                n,
                input_dim if i == 0 else layers[i - 1].size,
                leak_alpha,
                target_rho,
                input_dist if i == 0 else inter_dist,
                activation=activation,
                label=f"layer{i}",
            )
        )
    w_out = np.zeros((output_dim, layers[-1].size))
    fbs = []
    for i in range(depth - 1):
        if feedback == "random":
            fbs.append(
                rng_matrix(rng, layers[i].size, output_dim, feedback_dist, label=f"feedback{i}")
            )
        else:
            fbs.append(np.zeros((layers[i].size, output_dim)))
    return DeepEsn(layers, w_out, fbs)


@dataclass
class StateTrace:
    """Per-layer states and inputs recorded at the sampled time steps."""

    sample_times: list[int]
    states: list[list[np.ndarray]]  # [sample][layer]
    inputs: list[list[np.ndarray]]  # [sample][layer]

    def __post_init__(self):
        times = self.sample_times
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ShapeError("sample_times must be strictly increasing")


def sample_indices(length: int, washout: int, sample_every: int) -> list[int]:
    """Steps t >= washout on the sample_every grid, plus the final step."""
    if sample_every < 1:
        raise NumericsError(f"sample_every must be >= 1, got {sample_every}")
    if washout < 0 or washout >= length:
        raise NumericsError(
            f"washout must be in [0, series length), got {washout} for length {length}"
        )
    times = list(range(washout, length, sample_every))
    if times[-1] != length - 1:
        times.append(length - 1)
    return times


def _series_values(series) -> tuple[np.ndarray, str]:
    values = getattr(series, "values", series)
    name = getattr(series, "source_id", "<array>")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"series {name}: expected (steps, dims) array, got {values.shape}")
    return np.ascontiguousarray(values), name


def forward_stack(esn: DeepEsn, inputs: np.ndarray) -> list[np.ndarray]:
    """Run a batch through every layer; returns per-layer state sequences.

    ``inputs`` is time-major (T, S, input_dim); each returned array is
    (T, S, layer size). Weights are read-only; per-layer ``state`` attributes
    are not touched (batch simulation owns its state buffers).
    """
    if inputs.ndim != 3 or inputs.shape[2] != esn.input_dim:
        raise ShapeError(
            f"batch inputs must be (steps, series, {esn.input_dim}), got {inputs.shape}"
        )
    seq = np.ascontiguousarray(inputs, dtype=np.float64)
    out = []
    for layer in esn.layers:
        states = np.empty((seq.shape[0], seq.shape[1], layer.size))
        layer_sequence(
            layer.w_in,
            layer.w_rec,
            seq,
            layer.leak_alpha,
            _activation_id(layer.activation),
            states,
            np.zeros((seq.shape[1], layer.size)),
        )
        out.append(states)
        seq = states
    return out


def run_series(esn: DeepEsn, series, washout: int, sample_every: int) -> StateTrace:
    """Feed one series through the stack from zero state and sample it.

    Records, at each sampled step, every layer's state and every layer's
    input at that step (the raw input for layer 0, the preceding layer's
    state otherwise). Washout steps are never sampled.
    """
    values, name = _series_values(series)
    length = values.shape[0]
    if length <= washout:
        raise NumericsError(
            f"series {name}: length {length} too short for washout {washout}"
        )
    times = sample_indices(length, washout, sample_every)
    seqs = forward_stack(esn, values[:, None, :])
    states = [[seqs[i][t, 0].copy() for i in range(esn.depth)] for t in times]
    inputs = [
        [values[t].copy() if i == 0 else seqs[i - 1][t, 0].copy() for i in range(esn.depth)]
        for t in times
    ]
    return StateTrace(times, states, inputs)


def readout(w_out, x) -> np.ndarray:
    """Linear readout y = W_out x (no activation)."""
    w_out = as_matrix(w_out, "w_out")
    x = as_vector(x, "state")
    if x.shape[0] != w_out.shape[1]:
        raise ShapeError(f"state length {x.shape[0]} != w_out columns {w_out.shape[1]}")
    return w_out @ x


def classify(esn: DeepEsn, trace: StateTrace) -> tuple[int, np.ndarray]:
    """Label a series from a trace: mean readout over samples, argmax score.

    Exact ties break to the lowest class index.
    """
    if not trace.sample_times:
        raise ShapeError("cannot classify an empty trace")
    scores = np.mean(
        [readout(esn.w_out, per_layer[-1]) for per_layer in trace.states], axis=0
    )
    return int(np.argmax(scores)), scores
