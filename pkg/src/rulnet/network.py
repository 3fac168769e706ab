"""MLP -> LSTM -> MLP sequence regressor with an analytic BPTT backward pass.

The feature MLP is applied to every cycle with shared weights, a single LSTM
layer runs over the whole sequence from a zero state, and the regression MLP
maps each hidden state to a scalar.  Every MLP layer, the final one included,
uses tanh.

Parameters live in a plain ``dict[str, ndarray]``:

    feat.{k}.W  (fan_in, fan_out)     feat.{k}.b  (fan_out,)
    lstm.Wx     (in, 4H)              lstm.Wh     (H, 4H)       lstm.b (4H,)
    reg.{k}.W   (fan_in, fan_out)     reg.{k}.b   (fan_out,)

LSTM gate blocks are ordered input, forget, candidate, output.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .numerics import Params, check_finite, glorot_uniform, seeded_rng


@dataclass(frozen=True)
class ModelArchitecture:
    input_dim: int = 24
    feature_mlp_dims: tuple[int, ...] = (100, 50, 50)
    lstm_cells: int = 60
    regression_mlp_dims: tuple[int, ...] = (60, 30, 1)
    activation: str = "tanh"
    dropout: float = 0.0
    ablate_feature_mlp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "feature_mlp_dims", tuple(int(d) for d in self.feature_mlp_dims))
        object.__setattr__(self, "regression_mlp_dims", tuple(int(d) for d in self.regression_mlp_dims))
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not self.regression_mlp_dims or self.regression_mlp_dims[-1] != 1:
            raise ValueError("regression MLP must end in a single unit")
        if not self.ablate_feature_mlp and not self.feature_mlp_dims:
            raise ValueError("feature MLP needs at least one layer unless ablated")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if min((self.input_dim, self.lstm_cells) + self.feature_mlp_dims + self.regression_mlp_dims) < 1:
            raise ValueError("all layer sizes must be positive")

    @property
    def lstm_input_dim(self) -> int:
        return self.input_dim if self.ablate_feature_mlp else self.feature_mlp_dims[-1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_mlp_dims"] = list(self.feature_mlp_dims)
        d["regression_mlp_dims"] = list(self.regression_mlp_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArchitecture":
        return cls(**d)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Tensor shapes, in canonical order, from the layer sizes alone."""
        shapes: dict[str, tuple[int, ...]] = {}
        prev = self.input_dim
        if not self.ablate_feature_mlp:
            for k, width in enumerate(self.feature_mlp_dims):
                shapes[f"feat.{k}.W"] = (prev, width)
                shapes[f"feat.{k}.b"] = (width,)
                prev = width
        hidden = self.lstm_cells
        shapes["lstm.Wx"] = (prev, 4 * hidden)
        shapes["lstm.Wh"] = (hidden, 4 * hidden)
        shapes["lstm.b"] = (4 * hidden,)
        prev = hidden
        for k, width in enumerate(self.regression_mlp_dims):
            shapes[f"reg.{k}.W"] = (prev, width)
            shapes[f"reg.{k}.b"] = (width,)
            prev = width
        return shapes


SHRUNKEN = ModelArchitecture(input_dim=3, feature_mlp_dims=(4, 3), lstm_cells=5,
                             regression_mlp_dims=(3, 1))


def init_params(arch: ModelArchitecture, rng: np.random.Generator) -> Params:
    """Glorot-uniform weights, zero biases, LSTM forget-gate bias 1."""
    params: Params = {}
    H = arch.lstm_cells
    for name, shape in arch.param_shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name in ("lstm.Wx", "lstm.Wh"):
            # each gate block is its own (fan_in, H) layer
            params[name] = glorot_uniform(rng, shape[0], H, shape)
        else:
            params[name] = glorot_uniform(rng, shape[0], shape[1])
    params["lstm.b"][H:2 * H] = 1.0
    return params


@dataclass
class Model:
    arch: ModelArchitecture
    params: Params

    def predict(self, sequence) -> np.ndarray:
        return forward(self.params, self.arch, sequence).output

    def trace(self, sequence) -> "ForwardTrace":
        return forward(self.params, self.arch, sequence)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    feature_acts: list[np.ndarray]      # one (T, width) array per feature-MLP layer
    gates: np.ndarray                   # (T, 4H) activated i, f, g, o
    cells: np.ndarray                   # (T, H)
    hidden: np.ndarray                  # (T, H)
    regression_acts: list[np.ndarray]   # one (T, width) array per regression layer
    masks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def features(self) -> np.ndarray | None:
        return self.feature_acts[-1] if self.feature_acts else None

    @property
    def lstm_input(self) -> np.ndarray:
        return self.feature_acts[-1] if self.feature_acts else self.inputs

    @property
    def output(self) -> np.ndarray:
        return self.regression_acts[-1][:, 0]

    def __len__(self) -> int:
        return self.inputs.shape[0]


def _mlp_forward(params: Params, prefix: str, n_layers: int, x: np.ndarray,
                 dropout: float, rng: np.random.Generator | None,
                 masks: dict[str, np.ndarray]) -> list[np.ndarray]:
    acts = []
    for k in range(n_layers):
        x = np.tanh(x @ params[f"{prefix}.{k}.W"] + params[f"{prefix}.{k}.b"])
        last_overall = prefix == "reg" and k == n_layers - 1
        if dropout > 0.0 and rng is not None and not last_overall:
            mask = (rng.random(x.shape) >= dropout) / (1.0 - dropout)
            masks[f"{prefix}.{k}"] = mask
            x = x * mask
        acts.append(x)
    return acts


def forward(params: Params, arch: ModelArchitecture, sequence,
            dropout_rng: np.random.Generator | None = None) -> ForwardTrace:
    """Run the whole sequence; predictions are ``trace.output`` (one per cycle).

    Dropout masks are drawn only when ``dropout_rng`` is given, i.e. in training.
    """
    x = np.ascontiguousarray(sequence, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("sequence must be a non-empty (T, n) array")
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"expected {arch.input_dim} features per cycle, got {x.shape[1]}")

    masks: dict[str, np.ndarray] = {}
    feature_acts = [] if arch.ablate_feature_mlp else _mlp_forward(
        params, "feat", len(arch.feature_mlp_dims), x, arch.dropout, dropout_rng, masks)
    lstm_in = feature_acts[-1] if feature_acts else x

    T, H = x.shape[0], arch.lstm_cells
    pre = lstm_in @ params["lstm.Wx"] + params["lstm.b"]
    Wh = params["lstm.Wh"]
    gates = np.empty((T, 4 * H))
    cells = np.empty((T, H))
    hidden = np.empty((T, H))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        z = pre[t] + h @ Wh
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = _sigmoid(z[3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H], gates[t, 3 * H:] = i, f, g, o
        cells[t] = c
        hidden[t] = h

    regression_acts = _mlp_forward(params, "reg", len(arch.regression_mlp_dims), hidden,
                                   arch.dropout, dropout_rng, masks)
    check_finite("prediction", regression_acts[-1])
    return ForwardTrace(x, feature_acts, gates, cells, hidden, regression_acts, masks)


def _mlp_backward(params: Params, prefix: str, acts: list[np.ndarray], x_in: np.ndarray,
                  grad_out: np.ndarray, masks: dict[str, np.ndarray],
                  grads: Params, need_input_grad: bool) -> np.ndarray | None:
    da = grad_out
    for k in range(len(acts) - 1, -1, -1):
        a = acts[k]
        mask = masks.get(f"{prefix}.{k}")
        if mask is not None:
            # acts hold the masked value; recover tanh output for the derivative
            da = da * mask
            a = np.divide(a, mask, out=np.zeros_like(a), where=mask != 0)
        dz = da * (1.0 - a * a)
        a_prev = acts[k - 1] if k > 0 else x_in
        grads[f"{prefix}.{k}.W"] = a_prev.T @ dz
        grads[f"{prefix}.{k}.b"] = dz.sum(axis=0)
        if k > 0 or need_input_grad:
            da = dz @ params[f"{prefix}.{k}.W"].T
    return da if need_input_grad else None


def backward_from_output(params: Params, arch: ModelArchitecture, trace: ForwardTrace,
                         grad_output: np.ndarray) -> Params:
    """Reverse-mode gradients given dLoss/d(prediction) for every cycle."""
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != (len(trace),):
        raise ValueError(f"grad_output must have shape ({len(trace)},)")
    grads: Params = {}
    H = arch.lstm_cells
    T = len(trace)

    dH = _mlp_backward(params, "reg", trace.regression_acts, trace.hidden,
                       grad_output[:, None], trace.masks, grads, need_input_grad=True)

    gates, cells, hidden = trace.gates, trace.cells, trace.hidden
    Wh_T = params["lstm.Wh"].T
    dZ = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    zero = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i, f, g, o = gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H], gates[t, 3 * H:]
        c_prev = cells[t - 1] if t > 0 else zero
        tanh_c = np.tanh(cells[t])
        dh = dH[t] + dh_next
        dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
        dZ[t, :H] = dc * g * i * (1.0 - i)
        dZ[t, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dZ[t, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dZ[t, 3 * H:] = dh * tanh_c * o * (1.0 - o)
        dh_next = dZ[t] @ Wh_T
        dc_next = dc * f

    h_prev = np.vstack([np.zeros((1, H)), hidden[:-1]])
    lstm_in = trace.lstm_input
    grads["lstm.Wx"] = lstm_in.T @ dZ
    grads["lstm.Wh"] = h_prev.T @ dZ
    grads["lstm.b"] = dZ.sum(axis=0)

    if not arch.ablate_feature_mlp:
        dF = dZ @ params["lstm.Wx"].T
        _mlp_backward(params, "feat", trace.feature_acts, trace.inputs, dF, trace.masks,
                      grads, need_input_grad=False)

    for name, g in grads.items():
        check_finite(f"gradient {name}", g)
    return {name: grads[name] for name in params}


def sequence_rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def backward(params: Params, arch: ModelArchitecture, sequence, targets,
             dropout_rng: np.random.Generator | None = None) -> tuple[float, Params]:
    """Per-sequence RMSE loss and its exact gradient w.r.t. every parameter.

    At zero loss the RMSE is not differentiable; the subgradient 0 is returned.
    """
    trace = forward(params, arch, sequence, dropout_rng)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (len(trace),):
        raise ValueError(f"targets must have shape ({len(trace)},), got {targets.shape}")
    resid = trace.output - targets
    loss = sequence_rmse(trace.output, targets)
    scale = 0.0 if loss == 0.0 else 1.0 / (len(trace) * loss)
    return loss, backward_from_output(params, arch, trace, resid * scale)


def gradient_check(arch: ModelArchitecture, seed: int, T: int, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Parameters, inputs and targets are random (biases included, so no gradient
    is structurally zero).  Relative error is |a-n| / max(|a|, |n|, 1e-8).
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")
    if arch.dropout > 0.0:
        raise ValueError("gradient check needs a deterministic forward (dropout 0)")
    rng = seeded_rng(seed)
    params = init_params(arch, rng)
    for name in params:
        params[name] = params[name] + rng.uniform(-0.5, 0.5, size=params[name].shape)
    x = rng.uniform(0.0, 1.0, size=(T, arch.input_dim))
    y = rng.uniform(0.0, 1.0, size=T)

    _, analytic = backward(params, arch, x, y)

    def loss_at() -> float:
        return sequence_rmse(forward(params, arch, x).output, y)

    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        ga = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss_at()
            flat[idx] = orig - eps
            down = loss_at()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * eps)
            err = abs(ga[idx] - numeric) / max(abs(ga[idx]), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
