"""A small fully connected ReLU ResNet trained by plain SGD on the square loss.

h_0 = W_in x + b_in, h_j = h_{j-1} + relu(W_j h_{j-1} + b_j), out = w_out . h_D + b_out.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .fourier import eval_monomial, column_label
from .sampling import LabeledStream, derive_key, sample_points

DIVERGENCE_LOSS = 1e6
TEST_SIZE = 30_000


@dataclass(frozen=True)
class ResNetConfig:
    n: int
    width: int = 40
    depth: int = 5
    init_std: float = 0.5
    step_size: float = 0.01
    batch: int = 20
    steps: int = 300_000
    seed: int = 0
    eval_interval: int = 1000
    test_size: int = TEST_SIZE
    out_init_std: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.width < 1 or self.depth < 1:
            raise ValueError("n, width and depth must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.batch < 1 or self.steps < 0 or self.eval_interval < 1:
            raise ValueError("batch >= 1, steps >= 0 and eval_interval >= 1 required")


@dataclass
class ResNetParams:
    W_in: np.ndarray
    b_in: np.ndarray
    Wb: np.ndarray
    bb: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray  # shape (1,)

    FIELDS = ("W_in", "b_in", "Wb", "bb", "w_out", "b_out")

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f) for f in self.FIELDS]

    def copy(self) -> "ResNetParams":
        return ResNetParams(*[a.copy() for a in self.arrays()])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, vec: np.ndarray) -> None:
        i = 0
        for a in self.arrays():
            a[...] = vec[i : i + a.size].reshape(a.shape)
            i += a.size

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def zero_resnet(n: int, width: int, depth: int) -> ResNetParams:
    return ResNetParams(
        np.zeros((width, n)), np.zeros(width), np.zeros((depth, width, width)), np.zeros((depth, width)), np.zeros(width), np.zeros(1)
    )


def init_resnet(config: ResNetConfig) -> ResNetParams:
    """Gaussian weights with std init_std / sqrt(fan_in); zero biases."""
    rng = np.random.Generator(np.random.Philox(key=derive_key(config.seed, "resnet-init")))
    n, w, d = config.n, config.width, config.depth
    out_std = config.init_std if config.out_init_std is None else config.out_init_std
    p = zero_resnet(n, w, d)
    p.W_in[...] = rng.normal(0.0, config.init_std / math.sqrt(n), (w, n))
    p.Wb[...] = rng.normal(0.0, config.init_std / math.sqrt(w), (d, w, w))
    p.w_out[...] = rng.normal(0.0, out_std / math.sqrt(w), w)
    return p


def resnet_forward(params: ResNetParams, x) -> tuple[np.ndarray, dict]:
    """Outputs for a batch of rows (or one point) plus the cached activations."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != params.W_in.shape[1]:
        raise ValueError(f"expected inputs of length {params.W_in.shape[1]}, got {x.shape[1]}")
    hs = [x @ params.W_in.T + params.b_in]
    us = []
    for l in range(params.Wb.shape[0]):
        u = hs[-1] @ params.Wb[l].T + params.bb[l]
        us.append(u)
        hs.append(hs[-1] + np.maximum(u, 0.0))
    out = hs[-1] @ params.w_out + params.b_out[0]
    cache = {"x": x, "hs": hs, "us": us}
    return (out[:1] if single else out), cache


def resnet_loss_grad(params: ResNetParams, x, y) -> tuple[float, ResNetParams]:
    """Mean of 0.5 (out - y)^2 over the batch and its exact gradient."""
    out, c = resnet_forward(params, np.atleast_2d(x))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    err = out - y
    B = err.size
    loss = 0.5 * float(np.mean(err * err))
    err = err / B
    g = zero_resnet(params.W_in.shape[1], params.W_in.shape[0], params.Wb.shape[0])
    hs, us = c["hs"], c["us"]
    g.w_out[...] = hs[-1].T @ err
    g.b_out[0] = err.sum()
    dh = np.outer(err, params.w_out)
    for l in range(params.Wb.shape[0] - 1, -1, -1):
        du = dh * (us[l] > 0.0)
        g.Wb[l] = du.T @ hs[l]
        g.bb[l] = du.sum(axis=0)
        dh = dh + du @ params.Wb[l]
    g.W_in[...] = dh.T @ c["x"]
    g.b_in[...] = dh.sum(axis=0)
    return loss, g


@dataclass
class ResNetTrace:
    tracked: list
    target_coefs: list
    rows: list = field(default_factory=list)
    diverged: bool = False
    diverged_at: int | None = None

    def header(self) -> list[str]:
        return ["step", "train_loss", "test_mse"] + [f"f_hat_{column_label(S)}" for S in self.tracked]

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.header())
        for step, tl, mse, coefs in self.rows:
            wr.writerow([step, repr(tl), repr(mse)] + [repr(c) for c in coefs])
        return buf.getvalue() if fh is None else None

    @property
    def initial_mse(self) -> float:
        return self.rows[0][2]

    @property
    def final_mse(self) -> float:
        return self.rows[-1][2]

    def steps_to_mse(self, threshold: float) -> int | None:
        for step, _, mse, _ in self.rows:
            if mse < threshold:
                return step
        return None

    def min_mse(self) -> float:
        return min(r[2] for r in self.rows)

    def crossing_times(self, fraction: float = 0.5) -> list[float]:
        """First logged step with |f_hat(S_i)| >= fraction * |g_hat(S_i)|, per tracked set (inf if never)."""
        out = []
        for i, gi in enumerate(self.target_coefs):
            t = math.inf
            for step, _, _, coefs in self.rows:
                if abs(coefs[i]) >= fraction * abs(gi):
                    t = step
                    break
            out.append(t)
        return out


def count_inversions(times) -> int:
    """Adjacent descents t_{i+1} < t_i."""
    return sum(1 for a, b in zip(times, times[1:]) if b < a)


def sgd_train(
    config: ResNetConfig,
    stream: LabeledStream,
    tracked=(),
    target_coefs=(),
    features=None,
    params: ResNetParams | None = None,
    backend=None,
) -> tuple[ResNetParams, ResNetTrace]:
    """Constant-step minibatch SGD on 0.5 (out - y)^2.

    The stream supplies training batches (cyclic over a fixed dataset, or
    fresh samples). Every ``eval_interval`` steps the trace gets the mean
    training loss since the last row, the MSE on a fresh test set from the
    same measure, and the test-set estimates of E[f(x) chi_S(features(x))]
    for each tracked S. Stops early with ``diverged`` set if the minibatch
    loss exceeds 1e6 or stops being finite.
    """
    kern = _kernels if backend is None else _kernels.get_backend(backend)
    p = init_resnet(config) if params is None else params.copy()
    tracked = [int(S) for S in tracked]
    trace = ResNetTrace(tracked, [float(c) for c in target_coefs] or [0.0] * len(tracked))
    feat = features if features is not None else (lambda x: x)
    x_test = sample_points(stream.measure, config.seed, "test", 0, config.test_size)
    y_test = np.asarray(stream.target(x_test), dtype=float)
    chis = [eval_monomial(S, feat(x_test)) for S in tracked]

    def evaluate(step, train_loss):
        out, _ = resnet_forward(p, x_test)
        mse = float(np.mean((out - y_test) ** 2))
        trace.rows.append((step, train_loss, mse, [float(np.mean(out * c)) for c in chis]))

    evaluate(0, math.nan)
    if stream.data is not None:
        X, y = stream.data
    losses = np.zeros(config.eval_interval)
    step = 0
    while step < config.steps:
        k = min(config.eval_interval, config.steps - step)
        if stream.data is not None:
            pos, done = kern.resnet_sgd(
                *p.arrays(), X, y, stream.counter, k, config.batch, config.step_size, losses
            )
            stream.counter = int(pos)
        else:
            xb, yb = stream.draw(k * config.batch)
            pos, done = kern.resnet_sgd(
                *p.arrays(), np.ascontiguousarray(xb), np.ascontiguousarray(yb), 0, k, config.batch, config.step_size, losses
            )
        if done < k or not p.all_finite():
            trace.diverged = True
            trace.diverged_at = step + int(done)
            break
        step += k
        evaluate(step, float(losses[:k].mean()))
    return p, trace


def dumps_resnet(params: ResNetParams) -> str:
    """Versioned text dump with hex-exact floats."""
    lines = ["resnet 1"]
    for name in ResNetParams.FIELDS:
        a = getattr(params, name)
        lines.append(f"{name} {' '.join(map(str, a.shape))}")
        lines.append(" ".join(float(v).hex() for v in a.ravel()))
    return "\n".join(lines) + "\n"


def loads_resnet(text: str) -> ResNetParams:
    lines = text.splitlines()
    if lines[0].split() != ["resnet", "1"]:
        raise ValueError("not a version-1 resnet dump")
    arrays = []
    for i in range(1, len(lines), 2):
        name, *shape = lines[i].split()
        vals = np.array([float.fromhex(t) for t in lines[i + 1].split()])
        arrays.append(vals.reshape([int(s) for s in shape]))
    return ResNetParams(*arrays)
