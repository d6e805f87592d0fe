"""Trainable sequence regressors and the shape MLP.

SequenceRegressor is the shared architecture: linear input layer, two
recurrent layers (GRU by default, LSTM optional), linear output layer.
Training is MSE (or BCE for contact heads) with truncated backpropagation
through time; all randomness is seeded and CPU-deterministic.
"""

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn as nn

from . import config
from .container import ContainerError, read_container, write_container


@dataclass
class TrainConfig:
    hidden_dim: int = 64
    num_layers: int = 2
    cell: str = "gru"
    dropout: float = 0.4
    batch_size: int = 32
    epochs: int = 60
    lr: float = 1e-3
    lr_decay: float = 0.99
    seed: int = 0
    val_fraction: float = 0.2
    tbptt_window: int = 60
    loss: str = "mse"

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.hidden_dim <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("sizes must be positive")
        if self.cell not in ("gru", "lstm"):
            raise ValueError(f"unknown cell {self.cell!r}")
        if self.loss not in ("mse", "bce"):
            raise ValueError(f"unknown loss {self.loss!r}")

    @staticmethod
    def preset(name, **overrides):
        p = config.PRESETS[name]
        cfg = TrainConfig(hidden_dim=p["hidden_dim"], batch_size=p["batch_size"],
                          dropout=p["dropout"], tbptt_window=p["tbptt_window"])
        return replace(cfg, **overrides)


class SequenceRegressor(nn.Module):
    """Linear -> 2 recurrent layers -> linear, causal by construction."""

    def __init__(self, input_dim, output_dim, hidden_dim=64, num_layers=2,
                 cell="gru", dropout=0.4, seed=0):
        super().__init__()
        torch.manual_seed(seed)
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.cell = cell
        self.dropout = dropout
        self.lin_in = nn.Linear(input_dim, hidden_dim)
        rnn_cls = nn.GRU if cell == "gru" else nn.LSTM
        self.rnn = rnn_cls(hidden_dim, hidden_dim, num_layers=num_layers,
                           dropout=dropout if num_layers > 1 else 0.0)
        self.lin_out = nn.Linear(hidden_dim, output_dim)

    def forward(self, x, state=None):
        """x: (T, B, input_dim) -> (T, B, output_dim), next state."""
        h = torch.relu(self.lin_in(x))
        h, state = self.rnn(h, state)
        return self.lin_out(h), state

    def run_numpy(self, X):
        """Whole-sequence inference on a (T, input_dim) array."""
        if X.shape[0] == 0:
            return np.zeros((0, self.output_dim), dtype=np.float32)
        self.eval()
        with torch.no_grad():
            x = torch.as_tensor(np.asarray(X, dtype=np.float32))[:, None, :]
            y, _ = self.forward(x)
        return y[:, 0].numpy()

    def meta(self):
        return {"input_dim": self.input_dim, "output_dim": self.output_dim,
                "hidden_dim": self.hidden_dim, "num_layers": self.num_layers,
                "cell": self.cell, "dropout": self.dropout}


class RegressorStream:
    """Causal frame-by-frame inference with persistent recurrent state.

    Resetting and re-running a stream reproduces the same outputs exactly.
    """

    def __init__(self, model):
        self.model = model
        self.model.eval()
        self.state = None

    def reset(self):
        self.state = None

    def step(self, frame):
        frame = np.asarray(frame, dtype=np.float32)
        if frame.shape != (self.model.input_dim,):
            raise ValueError(f"expected frame of dim {self.model.input_dim}, "
                             f"got {frame.shape}")
        with torch.no_grad():
            x = torch.as_tensor(frame)[None, None, :]
            y, self.state = self.model(x, self.state)
        return y[0, 0].numpy()


class ShapeMlp(nn.Module):
    """4-layer MLP regressing shape parameters from window statistics."""

    def __init__(self, input_dim, output_dim=11, hidden_dim=128, seed=0):
        super().__init__()
        torch.manual_seed(seed)
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.hidden_dim = hidden_dim
        self.layers = nn.Sequential(
            nn.Linear(input_dim, hidden_dim), nn.ReLU(),
            nn.Linear(hidden_dim, hidden_dim), nn.ReLU(),
            nn.Linear(hidden_dim, hidden_dim), nn.ReLU(),
            nn.Linear(hidden_dim, output_dim),
        )

    def forward(self, x):
        return self.layers(x)

    def run_numpy(self, X):
        self.eval()
        with torch.no_grad():
            return self.layers(torch.as_tensor(
                np.asarray(X, dtype=np.float32))).numpy()

    def meta(self):
        return {"input_dim": self.input_dim, "output_dim": self.output_dim,
                "hidden_dim": self.hidden_dim}


def _loss_fn(kind):
    return nn.MSELoss() if kind == "mse" else nn.BCEWithLogitsLoss()


def _batched(indices, size):
    for i in range(0, len(indices), size):
        yield indices[i:i + size]


def train_regressor(dataset, cfg, input_dim=None, output_dim=None,
                    verbose=False):
    """Train a SequenceRegressor on [(X (T, in), Y (T, out)), ...].

    Sequences are split train/validation by sequence, batched by equal
    length, and optimized with Adam + TBPTT.  Returns (model, history) with
    the best-validation parameters restored.  Deterministic given cfg.seed.
    """
    if len(dataset) == 0:
        raise ValueError("empty corpus")
    X0, Y0 = dataset[0]
    input_dim = input_dim or X0.shape[1]
    output_dim = output_dim or Y0.shape[1]
    for X, Y in dataset:
        if X.shape[1] != input_dim or Y.shape[1] != output_dim or len(X) != len(Y):
            raise ValueError("inconsistent sequence dimensions in corpus")

    torch.manual_seed(cfg.seed)
    model = SequenceRegressor(input_dim, output_dim, cfg.hidden_dim,
                              cfg.num_layers, cfg.cell, cfg.dropout,
                              seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(dataset))
    n_val = max(1, int(round(cfg.val_fraction * len(dataset))))
    if n_val >= len(dataset):
        train_idx = val_idx = order
    else:
        val_idx, train_idx = order[:n_val], order[n_val:]

    tensors = [(torch.as_tensor(np.asarray(X, dtype=np.float32)),
                torch.as_tensor(np.asarray(Y, dtype=np.float32)))
               for X, Y in dataset]
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=cfg.lr_decay)
    loss_fn = _loss_fn(cfg.loss)

    by_len = {}
    for i in train_idx:
        by_len.setdefault(len(tensors[i][0]), []).append(i)

    history = {"train_loss": [], "val_loss": []}
    best_val, best_state = math.inf, None
    for epoch in range(cfg.epochs):
        model.train()
        epoch_loss, n_batches = 0.0, 0
        groups = [np.array(v)[rng.permutation(len(v))] for _, v in
                  sorted(by_len.items())]
        for group in groups:
            for batch in _batched(group, cfg.batch_size):
                x = torch.stack([tensors[i][0] for i in batch], dim=1)
                y = torch.stack([tensors[i][1] for i in batch], dim=1)
                state = None
                for s in range(0, len(x), cfg.tbptt_window):
                    xw = x[s:s + cfg.tbptt_window]
                    yw = y[s:s + cfg.tbptt_window]
                    opt.zero_grad()
                    out, state = model(xw, state)
                    loss = loss_fn(out, yw)
                    if not torch.isfinite(loss):
                        raise RuntimeError(
                            f"NaN loss at epoch {epoch}, window start {s}: "
                            f"lr={sched.get_last_lr()[0]:.3g}")
                    loss.backward()
                    opt.step()
                    if isinstance(state, tuple):
                        state = tuple(t.detach() for t in state)
                    else:
                        state = state.detach()
                    epoch_loss += float(loss)
                    n_batches += 1
        sched.step()

        model.eval()
        with torch.no_grad():
            val = 0.0
            for i in val_idx:
                out, _ = model(tensors[i][0][:, None, :])
                val += float(loss_fn(out, tensors[i][1][:, None, :]))
            val /= len(val_idx)
        history["train_loss"].append(epoch_loss / max(n_batches, 1))
        history["val_loss"].append(val)
        if val < best_val:
            best_val = val
            best_state = copy.deepcopy(model.state_dict())
        if verbose:
            print(f"epoch {epoch:3d} train {history['train_loss'][-1]:.5f} "
                  f"val {val:.5f}")
    model.load_state_dict(best_state)
    model.eval()
    history["best_val"] = best_val
    return model, history


def train_mlp(X, Y, cfg, hidden_dim=None, verbose=False):
    """Train a ShapeMlp on (N, in) -> (N, out) rows. Deterministic per seed."""
    X = np.asarray(X, dtype=np.float32)
    Y = np.asarray(Y, dtype=np.float32)
    if len(X) == 0:
        raise ValueError("empty training set")
    torch.manual_seed(cfg.seed)
    model = ShapeMlp(X.shape[1], Y.shape[1],
                     hidden_dim or cfg.hidden_dim, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(X))
    n_val = max(1, int(round(cfg.val_fraction * len(X))))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        train_idx = val_idx
    xt = torch.as_tensor(X)
    yt = torch.as_tensor(Y)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = nn.MSELoss()
    history = {"train_loss": [], "val_loss": []}
    best_val, best_state = math.inf, None
    for epoch in range(cfg.epochs):
        model.train()
        perm = train_idx[rng.permutation(len(train_idx))]
        total, nb = 0.0, 0
        for batch in _batched(perm, cfg.batch_size):
            opt.zero_grad()
            loss = loss_fn(model(xt[batch]), yt[batch])
            if not torch.isfinite(loss):
                raise RuntimeError(f"NaN loss at epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss)
            nb += 1
        model.eval()
        with torch.no_grad():
            val = float(loss_fn(model(xt[val_idx]), yt[val_idx]))
        history["train_loss"].append(total / max(nb, 1))
        history["val_loss"].append(val)
        if val < best_val:
            best_val, best_state = val, copy.deepcopy(model.state_dict())
        if verbose:
            print(f"epoch {epoch:3d} train {history['train_loss'][-1]:.5f} "
                  f"val {val:.5f}")
    model.load_state_dict(best_state)
    model.eval()
    history["best_val"] = best_val
    return model, history


_MODEL_KINDS = {"sequence_regressor": SequenceRegressor, "shape_mlp": ShapeMlp}


def save_model(model, path):
    """Serialize weights to the binary container (JSON header + payload)."""
    if isinstance(model, SequenceRegressor):
        kind = "sequence_regressor"
    elif isinstance(model, ShapeMlp):
        kind = "shape_mlp"
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    arrays = {k: v.numpy() for k, v in model.state_dict().items()}
    return write_container(path, kind, model.meta(), arrays)


def load_model(path, expect_input_dim=None, expect_output_dim=None,
               expect_kind=None):
    """Load a model container; dimension/kind mismatches raise."""
    kind, meta, arrays = read_container(path)
    if kind not in _MODEL_KINDS:
        raise ContainerError(f"{path}: not a model container (kind={kind!r})")
    if expect_kind is not None and kind != expect_kind:
        raise ContainerError(f"{path}: kind {kind!r}, expected {expect_kind!r}")
    if expect_input_dim is not None and meta["input_dim"] != expect_input_dim:
        raise ContainerError(f"{path}: input_dim {meta['input_dim']}, "
                             f"expected {expect_input_dim}")
    if expect_output_dim is not None and meta["output_dim"] != expect_output_dim:
        raise ContainerError(f"{path}: output_dim {meta['output_dim']}, "
                             f"expected {expect_output_dim}")
    if kind == "sequence_regressor":
        model = SequenceRegressor(meta["input_dim"], meta["output_dim"],
                                  meta["hidden_dim"], meta["num_layers"],
                                  meta["cell"], meta["dropout"])
    else:
        model = ShapeMlp(meta["input_dim"], meta["output_dim"],
                         meta["hidden_dim"])
    state = {k: torch.as_tensor(v) for k, v in arrays.items()}
    try:
        model.load_state_dict(state)
    except RuntimeError as e:
        raise ContainerError(f"{path}: weights do not match architecture "
                             f"({e})") from None
    model.eval()
    return model


def state_dict_bytes(model):
    """Canonical byte string of all parameters (for determinism checks)."""
    return b"".join(v.numpy().tobytes() for _, v in
                    sorted(model.state_dict().items()))
