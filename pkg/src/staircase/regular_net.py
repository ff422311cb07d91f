"""Sparse layered network with quadratic activations.

Neuron ids: ``0`` is the constant-1 input, ``1..n`` are the coordinate
inputs, and hidden neuron ``j`` of layer ``i`` (1-based layer, 0-based j)
has id ``n + 1 + (i - 1) * W + j``. Edges are stored as parallel ``src`` /
``dst`` arrays sorted by (dst, src); parameters are flat arrays aligned
with them, so ``params.a[e]`` is the weight of edge ``e`` and
``params.b[v - n - 1]`` the bias of hidden neuron ``v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import cube
from .sampling import derive_key

FORMAT_VERSION = 1


@dataclass
class NetworkTopology:
    n: int
    W: int
    L: int
    p1: float
    p2: float
    seed: int
    src: np.ndarray
    dst: np.ndarray
    in_edges: list = field(init=False, repr=False)
    out_edges: list = field(init=False, repr=False)

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        order = np.lexsort((self.src, self.dst))
        self.src, self.dst = self.src[order], self.dst[order]
        total = self.num_neurons
        self.in_edges = [[] for _ in range(total)]
        self.out_edges = [[] for _ in range(total)]
        for e, (u, v) in enumerate(zip(self.src.tolist(), self.dst.tolist())):
            if not self._allowed(u, v):
                raise ValueError(f"edge ({u}, {v}) is not an input->layer or layer i->i+1 edge")
            self.in_edges[v].append(e)
            self.out_edges[u].append(e)
        self.in_edges = [np.array(x, dtype=np.int64) for x in self.in_edges]
        self.out_edges = [np.array(x, dtype=np.int64) for x in self.out_edges]

    @property
    def num_inputs(self) -> int:
        return self.n + 1

    @property
    def num_hidden(self) -> int:
        return self.W * self.L

    @property
    def num_neurons(self) -> int:
        return self.num_inputs + self.num_hidden

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def hidden(self) -> range:
        return range(self.num_inputs, self.num_neurons)

    def layer_neurons(self, i: int) -> range:
        start = self.num_inputs + (i - 1) * self.W
        return range(start, start + self.W)

    def layer_of(self, v: int) -> int:
        """0 for inputs, 1..L for hidden neurons."""
        if v < self.num_inputs:
            return 0
        return (v - self.num_inputs) // self.W + 1

    def is_input(self, v: int) -> bool:
        return v < self.num_inputs

    def parents(self, v: int) -> np.ndarray:
        return self.src[self.in_edges[v]]

    def children(self, v: int) -> np.ndarray:
        return self.dst[self.out_edges[v]]

    def _allowed(self, u: int, v: int) -> bool:
        if not 0 <= u < self.num_neurons or not 0 <= v < self.num_neurons:
            return False
        lv = self.layer_of(v)
        if lv == 0:
            return False
        lu = self.layer_of(u)
        return lu == 0 or lu == lv - 1

    def edge_index(self, u: int, v: int) -> int:
        for e in self.in_edges[v]:
            if self.src[e] == u:
                return int(e)
        raise KeyError(f"no edge ({u}, {v})")

    def input_edge_mask(self) -> np.ndarray:
        return self.src < self.num_inputs


def build_topology(n: int, W: int, L: int, p1: float, p2: float, seed: int) -> NetworkTopology:
    """Random layered graph; each candidate edge gets its own independent coin."""
    if n < 1 or W < 1 or L < 1:
        raise ValueError("n, W, L must be positive")
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    rng = np.random.Generator(np.random.Philox(key=derive_key(seed, "topology")))
    coins_in = rng.random((L * W, n + 1)) < p1
    coins_hid = rng.random((max(L - 1, 0) * W, W)) < p2
    src, dst = [], []
    first = n + 1
    for h in range(L * W):
        v = first + h
        for u in np.flatnonzero(coins_in[h]):
            src.append(int(u))
            dst.append(v)
        if h >= W:
            prev0 = first + (h // W - 1) * W
            for j in np.flatnonzero(coins_hid[h - W]):
                src.append(prev0 + int(j))
                dst.append(v)
    return NetworkTopology(n, W, L, p1, p2, seed, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))


@dataclass
class NetworkParams:
    a: np.ndarray
    b: np.ndarray

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.a.copy(), self.b.copy())

    def __eq__(self, other) -> bool:
        return np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)


def zero_params(topology: NetworkTopology) -> NetworkParams:
    return NetworkParams(np.zeros(topology.num_edges), np.zeros(topology.num_hidden))


def gaussian_params(topology: NetworkTopology, std: float, seed: int) -> NetworkParams:
    """Isotropic Gaussian weights, zero biases."""
    rng = np.random.Generator(np.random.Philox(key=derive_key(seed, "init")))
    return NetworkParams(rng.normal(0.0, std, topology.num_edges), np.zeros(topology.num_hidden))


def neuron_params(topology: NetworkTopology, params: NetworkParams, v: int) -> np.ndarray:
    """w_v as one vector: incoming edge weights (in edge order) then the bias."""
    return np.append(params.a[topology.in_edges[v]], params.b[v - topology.num_inputs])


def set_neuron_params(topology: NetworkTopology, params: NetworkParams, v: int, wv: np.ndarray) -> None:
    params.a[topology.in_edges[v]] = wv[:-1]
    params.b[v - topology.num_inputs] = wv[-1]


@dataclass
class ForwardRecord:
    values: np.ndarray  # (batch, num_neurons): f_v(x; w) for every neuron
    pre: np.ndarray  # (batch, num_neurons): the weighted input sum before squaring
    output: np.ndarray  # (batch,)


def forward(topology: NetworkTopology, params: NetworkParams, x, debug: bool = False) -> ForwardRecord:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != topology.n:
        raise ValueError(f"expected points of length {topology.n}, got {x.shape[1]}")
    m = x.shape[0]
    vals = np.zeros((m, topology.num_neurons))
    pre = np.zeros((m, topology.num_neurons))
    vals[:, 0] = 1.0
    vals[:, 1 : topology.n + 1] = x
    first = topology.num_inputs
    for v in topology.hidden():
        edges = topology.in_edges[v]
        z = vals[:, topology.src[edges]] @ params.a[edges] if edges.size else np.zeros(m)
        pre[:, v] = z
        vals[:, v] = z * z + params.b[v - first]
    out = vals[:, first:].sum(axis=1)
    if debug:
        assert np.allclose(out, np.sum([vals[:, v] for v in topology.hidden()], axis=0))
    if single:
        return ForwardRecord(vals[0], pre[0], out[:1])
    return ForwardRecord(vals, pre, out)


def network_output(topology: NetworkTopology, params: NetworkParams, x) -> np.ndarray:
    return forward(topology, params, np.atleast_2d(x)).output


def regularizer(topology: NetworkTopology, params: NetworkParams, lam1: float, lam2: float) -> float:
    """0.5 * sum(lam1 a_e^2) over input edges + 0.5 * sum(lam2 a_e^2) over neuron edges."""
    inp = topology.input_edge_mask()
    a2 = params.a * params.a
    return 0.5 * lam1 * float(a2[inp].sum()) + 0.5 * lam2 * float(a2[~inp].sum())


def edge_reg(topology: NetworkTopology, edges: np.ndarray, lam1: float, lam2: float) -> np.ndarray:
    return np.where(topology.src[edges] < topology.num_inputs, lam1, lam2)


def pointwise_loss(topology, params, x, label, lam1: float, lam2: float):
    out = network_output(topology, params, x)
    loss = 0.5 * (out - np.asarray(label, dtype=float)) ** 2 + regularizer(topology, params, lam1, lam2)
    return float(loss[0]) if np.ndim(x) == 1 else loss


def population_loss(
    topology, params, target, lam1: float = 0.0, lam2: float = 0.0, samples: int = 200_000, seed: int = 0
) -> float:
    """Exact cube average of 0.5 (f - g)^2 (+ R) for n <= 20, Monte Carlo otherwise.

    ``target`` is any callable on a batch of points (a SparsePolynomial works).
    """
    if topology.n <= 20:
        x = cube(topology.n)
    else:
        from .sampling import Measure, sample_points

        x = sample_points(Measure("unbiased", topology.n), seed, "population", 0, samples)
    res = network_output(topology, params, x) - np.asarray(target(x), dtype=float)
    return 0.5 * float(np.mean(res * res)) + regularizer(topology, params, lam1, lam2)


def neuron_grad(topology, params, v: int, x, label, lam1: float, lam2: float) -> np.ndarray:
    """Gradient of the (batch-averaged) regularized loss with respect to w_v.

    Returned in the layout of ``neuron_params``: incoming edges, then bias.
    Exact backpropagation, so it is also correct when v has nonzero
    outgoing weights; with zero outgoing weights the bias entry is just the
    average residual f(x) - g(x).
    """
    if topology.is_input(v) or not 0 <= v < topology.num_neurons:
        raise KeyError(f"{v} is not a hidden neuron")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    label = np.atleast_1d(np.asarray(label, dtype=float))
    rec = forward(topology, params, x)
    res = rec.output - label
    # delta[u] = d loss / d f_u; only v and its descendants are needed
    delta = {}
    lv = topology.layer_of(v)
    for layer in range(topology.L, lv - 1, -1):
        for u in topology.layer_neurons(layer):
            if layer == lv and u != v:
                continue
            d = res.copy()
            for e in topology.out_edges[u]:
                w_ = int(topology.dst[e])
                if w_ in delta:
                    d += delta[w_] * 2.0 * rec.pre[:, w_] * params.a[e]
            delta[u] = d
    dv = delta[v]
    edges = topology.in_edges[v]
    parent_vals = rec.values[:, topology.src[edges]]
    g_a = ((dv * 2.0 * rec.pre[:, v])[:, None] * parent_vals).mean(axis=0)
    g_a += edge_reg(topology, edges, lam1, lam2) * params.a[edges]
    return np.append(g_a, dv.mean())


@dataclass
class Hyperparams:
    """Training hyperparameters for the layerwise algorithm.

    ``batch_mode`` picks how NeuronSGD minibatches are realised: ``"samples"``
    draws B points, ``"histogram"`` draws their multinomial counts over the
    cube (identical in distribution, cost independent of B), ``"auto"``
    uses histograms whenever the cube is small enough.
    """

    W: int | float
    L: int
    p1: float
    p2: float
    lam1: float
    lam2: float
    eta: float
    B: int | float
    eps_stop: float
    alpha: float
    tau: float
    max_inner_iters: int = 10**6
    batch_mode: str = "auto"
    max_active_parents: int = 2
    on_violation: str = "abort"
    log10: dict | None = None
    diagnostics: tuple = ()

    def validate(self) -> None:
        for name in ("W", "L", "lam1", "lam2", "eta", "B", "eps_stop", "alpha", "tau", "max_inner_iters"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("p1", "p2"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.batch_mode not in ("auto", "samples", "histogram"):
            raise ValueError(f"unknown batch_mode {self.batch_mode!r}")
        if self.on_violation not in ("abort", "report"):
            raise ValueError(f"unknown on_violation {self.on_violation!r}")


def _from_log10(name: str, lg: float, diagnostics: list) -> float:
    if lg > 308:
        diagnostics.append(f"{name} = 10^{lg:.4g} overflows float64; stored as inf")
        return math.inf
    if lg < -307:
        diagnostics.append(f"{name} = 10^{lg:.4g} underflows float64; stored as 0")
        return 0.0
    return 10.0**lg


def theorem_hyperparams(
    n: int,
    s: float,
    M: float,
    eps: float,
    delta: float,
    c_lambda: float = 1e-3,
    c_stop: float = 1e-3,
    c_alpha: float = 1e-3,
    c_B: float = 1e3,
) -> Hyperparams:
    """The hyperparameter setting of the formal guarantee, evaluated verbatim.

    Everything is computed in log10 space (kept in ``.log10``); values that
    leave the float64 range are stored as inf / 0 and listed in
    ``.diagnostics``. These numbers document the guarantee; they are not
    meant to be run.
    """
    if not (s > 1 and M > 1):
        raise ValueError("the guarantee assumes s > 1 and M > 1")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    lg = {}
    L = n
    lg["L"] = math.log10(L)
    base = math.log10(64 * M**2 * (n + s + 1) ** 3 * L / delta)
    lg["W"] = 24 * base
    lg["p1"] = -9 * base
    lg["p2"] = -13 * base
    lg["tau"] = -(20 * math.log10(2) + 7 * math.log10(M) + math.log10(L))
    lg["eta"] = math.log10(4) + lg["tau"]
    lg["kappa"] = lg["W"] + math.log10(L * M * s / (eps * delta))
    lg["lam2"] = math.log10(c_lambda) - 28 * lg["kappa"]
    # sqrt(lam1 / lam2) = 1 / (64 M^2 L)
    lg["lam1"] = lg["lam2"] - 2 * math.log10(64 * M**2 * L)
    lg["eps_stop"] = math.log10(c_stop) - 430 * lg["kappa"]
    lg["alpha"] = math.log10(c_alpha) + 5 * (lg["lam1"] + lg["lam2"]) - 72 * lg["kappa"]
    lg["B"] = math.log10(c_B) - 4 * (lg["lam1"] + lg["lam2"]) + 910 * lg["kappa"]
    diag: list[str] = []
    vals = {k: _from_log10(k, v, diag) for k, v in lg.items() if k != "L"}
    return Hyperparams(
        W=vals["W"],
        L=L,
        p1=vals["p1"],
        p2=vals["p2"],
        lam1=vals["lam1"],
        lam2=vals["lam2"],
        eta=vals["eta"],
        B=vals["B"],
        eps_stop=vals["eps_stop"],
        alpha=vals["alpha"],
        tau=vals["tau"],
        log10=lg,
        diagnostics=tuple(diag),
    )


def dumps_checkpoint(topology: NetworkTopology, params: NetworkParams) -> str:
    """Text checkpoint: header, edge list with weights, bias table. Floats are hex-exact."""
    lines = [
        f"regular-net {FORMAT_VERSION}",
        f"n {topology.n}",
        f"W {topology.W}",
        f"L {topology.L}",
        f"p1 {float(topology.p1).hex()}",
        f"p2 {float(topology.p2).hex()}",
        f"seed {topology.seed}",
        f"edges {topology.num_edges}",
    ]
    for u, v, a in zip(topology.src.tolist(), topology.dst.tolist(), params.a.tolist()):
        lines.append(f"{u} {v} {float(a).hex()}")
    lines.append(f"biases {topology.num_hidden}")
    for i, b in enumerate(params.b.tolist()):
        lines.append(f"{topology.num_inputs + i} {float(b).hex()}")
    return "\n".join(lines) + "\n"


def loads_checkpoint(text: str) -> tuple[NetworkTopology, NetworkParams]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    tag, version = lines[0].split()
    if tag != "regular-net":
        raise ValueError("not a regular-net checkpoint")
    if int(version) != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    head = {}
    i = 1
    while not lines[i].startswith("edges"):
        key, val = lines[i].split()
        head[key] = val
        i += 1
    ne = int(lines[i].split()[1])
    rows = [ln.split() for ln in lines[i + 1 : i + 1 + ne]]
    src = np.array([int(r[0]) for r in rows], dtype=np.int64)
    dst = np.array([int(r[1]) for r in rows], dtype=np.int64)
    a = np.array([float.fromhex(r[2]) for r in rows])
    i += 1 + ne
    nb = int(lines[i].split()[1])
    brows = [ln.split() for ln in lines[i + 1 : i + 1 + nb]]
    topo = NetworkTopology(
        int(head["n"]),
        int(head["W"]),
        int(head["L"]),
        float.fromhex(head["p1"]),
        float.fromhex(head["p2"]),
        int(head["seed"]),
        src,
        dst,
    )
    # the constructor re-sorts edges; realign weights to the stored order
    order = np.lexsort((src, dst))
    b = np.zeros(topo.num_hidden)
    for r in brows:
        b[int(r[0]) - topo.num_inputs] = float.fromhex(r[1])
    return topo, NetworkParams(a[order], b)
