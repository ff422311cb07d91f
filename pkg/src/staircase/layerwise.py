"""Layer-wise block-coordinate training of a regular network.

``train_network_layerwise`` zero-initializes the network and trains one
neuron at a time (layers in order, neurons by ascending id). Each neuron is
perturbed, driven to an approximate stationary point of the regularized loss
by minibatch SGD on its own incoming weights and bias, then pruned.

Minibatches over the cube can be realised as multinomial counts over the
2**n points (``batch_mode="histogram"``). That is the same random gradient
as averaging B drawn points, but its cost does not grow with B, which lets
B be large enough for the stopping threshold to sit well above the
gradient noise.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .fourier import MAX_EXACT_VARS, cube, estimate_fourier, column_label, walsh_hadamard
from .regular_net import (
    Hyperparams,
    NetworkParams,
    NetworkTopology,
    build_topology,
    edge_reg,
    forward,
    neuron_params,
    regularizer,
    set_neuron_params,
    zero_params,
)
from .sampling import HIST_CHUNK, LabeledStream, Measure, derive_key, sample_points

BLANK_TOL = 1e-12
REPRESENT_TOL = 0.25
SAMPLE_CHUNK = 1 << 16


class NeuronDiverged(FloatingPointError):
    """NeuronSGD produced non-finite weights (step size too large for the landscape)."""


class SparsityViolation(RuntimeError):
    """A neuron acquired more active hidden parents than allowed."""

    def __init__(self, message: str, trace: "TrainingTrace | None" = None, params: NetworkParams | None = None):
        super().__init__(message)
        self.trace = trace
        self.params = params


@dataclass(frozen=True)
class MonomialFit:
    S: int
    r: float
    eps_rel: float

    @property
    def represents(self) -> bool:
        return self.eps_rel <= REPRESENT_TOL


@dataclass(frozen=True)
class NeuronStatus:
    active: bool
    fit: MonomialFit | None = None
    exact: bool = True

    @property
    def tag(self) -> str:
        return "Active" if self.active else "Blank"


class SGDResult(NamedTuple):
    params: NetworkParams
    iters: int
    stationary: bool


def practical_preset(**overrides) -> Hyperparams:
    """Desk-scale hyperparameters for n around 8 and low-degree staircases.

    The stopping threshold is below lam1 * tau / 2, so a neuron with nothing
    useful to learn relaxes to within tau of zero before SGD stops. The
    residual left by a fitted product is about sqrt(lam1 * lam2) / 2; weights
    that later neurons grow to chase it stay well under tau and are pruned.
    eta = 4 tau. B is large enough that gradient noise is negligible at the
    stopping threshold (affordable because minibatches are histograms).
    """
    base = dict(
        W=128,
        L=3,
        p1=0.15,
        p2=0.2,
        lam1=4e-3,
        lam2=8e-3,
        eta=0.4,
        B=10**12,
        eps_stop=1e-4,
        alpha=0.1,
        tau=0.1,
        max_inner_iters=200_000,
        batch_mode="auto",
    )
    base.update(overrides)
    hp = Hyperparams(**base)
    hp.validate()
    return hp


class CubeState:
    """Every neuron's value at every cube point, kept in sync with the params.

    Used whenever the input measure lives on the cube and n is small: it is
    both the evaluation oracle and the source of minibatch gradients.
    """

    def __init__(self, topology: NetworkTopology, params: NetworkParams, measure: Measure, target):
        self.topology = topology
        self.x = cube(topology.n)
        self.probs = measure.point_probabilities()
        self.labels = np.asarray(target(self.x), dtype=float)
        rec = forward(topology, params, self.x)
        self.values = rec.values
        self.pre = rec.pre
        self.output = rec.output

    def update_neuron(self, v: int, params: NetworkParams) -> None:
        """Recompute f_v; assumes v's outgoing weights are zero so nothing downstream moves."""
        edges = self.topology.in_edges[v]
        z = self.values[:, self.topology.src[edges]] @ params.a[edges] if edges.size else np.zeros(len(self.x))
        new = z * z + params.b[v - self.topology.num_inputs]
        self.output += new - self.values[:, v]
        self.values[:, v] = new
        self.pre[:, v] = z

    def loss(self) -> float:
        res = self.output - self.labels
        return 0.5 * float(self.probs @ (res * res))

    def residual(self) -> np.ndarray:
        return self.output - self.labels


def _check_layerwise(topology: NetworkTopology, params: NetworkParams, v: int) -> None:
    if topology.is_input(v) or not 0 <= v < topology.num_neurons:
        raise KeyError(f"{v} is not a hidden neuron")
    out = topology.out_edges[v]
    if out.size and np.any(params.a[out] != 0.0):
        raise ValueError(f"neuron {v} has nonzero outgoing weights; layerwise training needs them zero")


def _use_histograms(stream: LabeledStream, hyper: Hyperparams) -> bool:
    feasible = stream.measure.on_cube and stream.data is None and stream.measure.n <= 16
    if hyper.batch_mode == "histogram":
        if not feasible:
            raise ValueError("histogram minibatches need a fresh-sample cube measure with n <= 16")
        return True
    return hyper.batch_mode == "auto" and feasible


def _grouped_rows(state: CubeState, parents: np.ndarray, v: int):
    """Merge cube points that give v identical (parent values, residual) rows.

    The minibatch gradient only sees these rows, so a multinomial over the
    merged cells (with summed probabilities) gives exactly the same gradient
    distribution as one over all points, at a fraction of the cost.
    """
    rows = np.column_stack([state.values[:, parents], state.output - state.values[:, v] - state.labels])
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    probs = np.bincount(inv.reshape(-1), weights=state.probs, minlength=uniq.shape[0])
    keep = probs > 0
    uniq, probs = uniq[keep], probs[keep]
    return np.ascontiguousarray(uniq[:, :-1]), np.ascontiguousarray(uniq[:, -1]), probs / probs.sum()


def neuron_sgd(
    topology: NetworkTopology,
    params: NetworkParams,
    v: int,
    stream: LabeledStream,
    hyper: Hyperparams,
    state: CubeState | None = None,
) -> SGDResult:
    """Minibatch SGD on w_v until the minibatch gradient norm is <= eps_stop.

    Returns a copy of the parameters with only w_v changed. ``stationary``
    is False when ``max_inner_iters`` ran out first; a diverging iterate
    raises NeuronDiverged.
    """
    _check_layerwise(topology, params, v)
    out = params.copy()
    edges = topology.in_edges[v]
    parents = topology.src[edges]
    w = neuron_params(topology, out, v)
    reg = np.ascontiguousarray(edge_reg(topology, edges, hyper.lam1, hyper.lam2), dtype=float)
    cap = int(hyper.max_inner_iters)
    it = 0
    stopped = False
    if _use_histograms(stream, hyper):
        if state is None:
            state = CubeState(topology, params, stream.measure, stream.target)
        P, r0, probs = _grouped_rows(state, parents, v)
        B = int(hyper.B)
        while it < cap and not stopped:
            K = min(HIST_CHUNK - stream.hist_counter % HIST_CHUNK, cap - it)
            weights = stream.draw_histograms(K, B, probs) / float(B)
            k, stopped = _kernels.neuron_sgd_weighted(P, r0, weights, w, reg, hyper.alpha, hyper.eps_stop)
            stream.advance_histograms(k + 1 if stopped else k)
            it += k
            if not np.all(np.isfinite(w)) or (not stopped and k < K):
                break
    else:
        B = int(hyper.B)
        if B > SAMPLE_CHUNK:
            raise ValueError(f"B={B} is too large for explicit sample batches; use histogram mode")
        while it < cap and not stopped:
            K = max(1, min(cap - it, SAMPLE_CHUNK // B))
            start = stream.counter
            x, y = stream.draw(K * B)
            rec = forward(topology, out, x)
            P = np.ascontiguousarray(rec.values[:, parents])
            r0 = np.ascontiguousarray(rec.output - rec.values[:, v] - y)
            k, stopped = _kernels.neuron_sgd_batched(P, r0, B, w, reg, hyper.alpha, hyper.eps_stop)
            if stream.data is None:
                stream.counter = start + (k + 1 if stopped else k) * B
            it += k
            if not np.all(np.isfinite(w)) or (not stopped and k < K):
                break
    if not np.all(np.isfinite(w)):
        raise NeuronDiverged(f"neuron {v}: weights became non-finite after {it} iterations")
    set_neuron_params(topology, out, v, w)
    return SGDResult(out, it, stopped)


def _perturb_rng(stream: LabeledStream, v: int, seed: int | None) -> np.random.Generator:
    base = stream.seed if seed is None else seed
    return np.random.Generator(np.random.Philox(key=derive_key(base, f"perturb/{v}")))


def train_neuron(
    topology: NetworkTopology,
    params: NetworkParams,
    v: int,
    stream: LabeledStream,
    hyper: Hyperparams,
    state: CubeState | None = None,
    seed: int | None = None,
) -> SGDResult:
    """Perturb w_v by Unif[-eta, eta] noise, run NeuronSGD, prune |entries| < tau to zero."""
    _check_layerwise(topology, params, v)
    start = params.copy()
    w0 = neuron_params(topology, start, v)
    noise = _perturb_rng(stream, v, seed).uniform(-hyper.eta, hyper.eta, size=w0.size)
    set_neuron_params(topology, start, v, w0 + noise)
    res = neuron_sgd(topology, start, v, stream, hyper, state)
    w = neuron_params(topology, res.params, v)
    w[np.abs(w) < hyper.tau] = 0.0
    set_neuron_params(topology, res.params, v, w)
    return res


def _fit_from_values(values: np.ndarray, n: int) -> MonomialFit:
    coefs = walsh_hadamard(values)
    S = int(np.argmax(np.abs(coefs)))  # first maximum = smallest mask
    r = float(coefs[S])
    if r == 0.0:
        return MonomialFit(0, 0.0, math.inf)
    chi = cube_chi(S, n)
    return MonomialFit(S, r, float(np.max(np.abs(values - r * chi)) / abs(r)))


def cube_chi(S: int, n: int) -> np.ndarray:
    """chi_S at every cube point in bitmask order."""
    p = np.arange(1 << n, dtype=np.int64)
    parity = np.zeros(p.size, dtype=np.int64)
    masked = p & S
    while np.any(masked):
        parity ^= masked & 1
        masked >>= 1
    return 1.0 - 2.0 * parity


def _incident_zero(topology: NetworkTopology, params: NetworkParams, v: int) -> bool:
    inc = np.concatenate([topology.in_edges[v], topology.out_edges[v]])
    return bool(np.all(params.a[inc] == 0.0)) and params.b[v - topology.num_inputs] == 0.0


def classify_neuron(
    topology: NetworkTopology,
    params: NetworkParams,
    v: int,
    values: np.ndarray | None = None,
    samples: int = 1 << 14,
    seed: int = 0,
) -> NeuronStatus:
    """Blank or Active, with the best single-monomial description when Active.

    Exact for n <= 20 (whole-cube enumeration; ``values`` may pass f_v on the
    cube to skip the forward pass). For larger n the fit is estimated from
    samples over candidate monomials built from the parents' own fits, and
    the status carries ``exact=False``.
    """
    if topology.is_input(v):
        S = 0 if v == 0 else 1 << (v - 1)
        return NeuronStatus(True, MonomialFit(S, 1.0, 0.0))
    n = topology.n
    if n <= 20:
        if values is None:
            values = forward(topology, params, cube(n)).values[:, v]
        if np.max(np.abs(values)) <= BLANK_TOL and _incident_zero(topology, params, v):
            return NeuronStatus(False)
        return NeuronStatus(True, _fit_from_values(values, n))
    return _classify_sampled(topology, params, v, samples, seed, {})


def _classify_sampled(topology, params, v, samples, seed, memo) -> NeuronStatus:
    if v in memo:
        return memo[v]
    if topology.is_input(v):
        st = classify_neuron(topology, params, v)
        memo[v] = st
        return st
    x = sample_points(Measure("unbiased", topology.n), seed, "classify", 0, samples)
    vals = forward(topology, params, x).values[:, v]
    if np.max(np.abs(vals)) <= BLANK_TOL and _incident_zero(topology, params, v):
        st = NeuronStatus(False, exact=False)
        memo[v] = st
        return st
    parent_sets = []
    for u in topology.parents(v):
        ps = _classify_sampled(topology, params, int(u), samples, seed, memo)
        if ps.active and ps.fit is not None:
            parent_sets.append(ps.fit.S)
    cands = sorted({a ^ b for a in parent_sets for b in parent_sets} | {0})
    best_S, best_r = 0, 0.0
    for S in cands:
        r, _ = estimate_fourier((x, vals), S)
        if abs(r) > abs(best_r):
            best_S, best_r = S, r
    if best_r == 0.0:
        fit = MonomialFit(0, 0.0, math.inf)
    else:
        chi = np.prod(x[:, [i for i in range(topology.n) if best_S >> i & 1]], axis=1)
        fit = MonomialFit(best_S, best_r, float(np.max(np.abs(vals - best_r * chi)) / abs(best_r)))
    st = NeuronStatus(True, fit, exact=False)
    memo[v] = st
    return st


def error_spectrum(
    topology: NetworkTopology,
    params: NetworkParams,
    target,
    subsets,
    mode: str | tuple = "exact",
    seed: int = 0,
) -> dict[int, float]:
    """Fourier coefficients of the error f(.; w) - g under the uniform measure.

    ``mode`` is ``"exact"`` (cube enumeration) or ``("sampled", m)``; the
    sampled mode returns ``{S: (estimate, stderr)}``.
    """
    subsets = [int(S) for S in subsets]
    if mode == "exact":
        x = cube(topology.n)
        err = forward(topology, params, x).output - np.asarray(target(x), dtype=float)
        coefs = walsh_hadamard(err)
        return {S: float(coefs[S]) for S in subsets}
    kind, m = mode
    if kind != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    x = sample_points(Measure("unbiased", topology.n), seed, "spectrum", 0, int(m))
    err = forward(topology, params, x).output - np.asarray(target(x), dtype=float)
    return {S: estimate_fourier((x, err), S) for S in subsets}


def idealized_loss(
    a1: float,
    a2: float,
    b: float,
    r1: float,
    r2: float,
    S1: int,
    S2: int,
    spectrum: dict[int, float],
    lam1: float,
    lam2: float,
    parent_is_input: tuple[bool, bool] = (False, False),
    regularized: bool = True,
) -> float:
    """Loss of neuron v if its two parents computed r1 chi_S1 and r2 chi_S2 exactly.

    ``spectrum`` maps subsets to the residual coefficients at the starting
    parameters (v blank); missing subsets count as zero. The regularizer
    uses lam1 for a parent that is an input and lam2 otherwise.
    """
    z0 = spectrum.get(0, 0.0)
    if S1 != S2:
        S = S1 ^ S2
        val = 0.5 * (2 * r1 * r2 * a1 * a2 + spectrum.get(S, 0.0)) ** 2
        val += 0.5 * ((r1 * a1) ** 2 + (r2 * a2) ** 2 + b + z0) ** 2
        val += 0.5 * sum(c * c for T, c in spectrum.items() if T not in (0, S))
    else:
        val = 0.5 * ((r1 * a1 + r2 * a2) ** 2 + b + z0) ** 2
        val += 0.5 * sum(c * c for T, c in spectrum.items() if T != 0)
    if regularized:
        g1 = lam1 if parent_is_input[0] else lam2
        g2 = lam1 if parent_is_input[1] else lam2
        val += 0.5 * (g1 * a1 * a1 + g2 * a2 * a2)
    return val


def active_hidden_parents(topology: NetworkTopology, active: np.ndarray, v: int) -> int:
    par = topology.parents(v)
    par = par[par >= topology.num_inputs]
    return int(np.count_nonzero(active[par]))


@dataclass
class TraceRow:
    iteration: int
    layer: int
    neuron: int
    loss: float
    active_count: int
    zeta_hat: tuple
    inner_iters: int
    stationary: bool
    represented: frozenset


@dataclass
class TrainingTrace:
    tracked: list
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    not_stationary: list = field(default_factory=list)
    sparsity_violations: list = field(default_factory=list)
    loss_increases: list = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError("trace iterations must increase")
        self.rows.append(row)

    @property
    def final_loss(self) -> float:
        return self.rows[-1].loss

    def header(self) -> list[str]:
        cols = ["iteration", "layer", "neuron", "loss", "active_count"]
        cols += [f"zeta_hat_{column_label(S)}" for S in self.tracked]
        return cols + ["inner_iters", "stationary"]

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.header())
        for r in self.rows:
            wr.writerow(
                [r.iteration, r.layer, r.neuron, repr(r.loss), r.active_count]
                + [repr(z) for z in r.zeta_hat]
                + [r.inner_iters, int(r.stationary)]
            )
        return buf.getvalue() if fh is None else None

    def representation_monotone(self) -> bool:
        return all(a.represented <= b.represented for a, b in zip(self.rows, self.rows[1:]))


def train_network_layerwise(
    n: int,
    stream: LabeledStream,
    hyper: Hyperparams,
    seed: int,
    tracked=None,
    topology: NetworkTopology | None = None,
) -> tuple[NetworkParams, TrainingTrace, NetworkTopology]:
    """Train every neuron once, layer by layer, starting from all-zero parameters.

    Needs a cube measure with n <= MAX_EXACT_VARS (the trace uses exact
    losses and spectra). Raises SparsityViolation (carrying the partial
    trace) when a neuron gets more than ``hyper.max_active_parents`` active
    hidden parents and ``hyper.on_violation == "abort"``.
    """
    hyper.validate()
    if not stream.measure.on_cube or n > MAX_EXACT_VARS:
        raise ValueError("layerwise training needs a cube measure with small n")
    if topology is None:
        topology = build_topology(n, int(hyper.W), int(hyper.L), hyper.p1, hyper.p2, seed)
    params = zero_params(topology)
    state = CubeState(topology, params, stream.measure, stream.target)
    tracked = list(tracked) if tracked is not None else []
    trace = TrainingTrace(tracked)
    active = np.zeros(topology.num_neurons, dtype=bool)
    active[: topology.num_inputs] = True
    fits: dict[int, MonomialFit] = {}

    def snapshot(t, layer, v, iters, stationary):
        coefs = walsh_hadamard(state.residual())
        rep = frozenset(f.S for f in fits.values() if f.represents)
        trace.append(
            TraceRow(
                t,
                layer,
                v,
                state.loss(),
                int(active[topology.num_inputs :].sum()),
                tuple(float(coefs[S]) for S in tracked),
                iters,
                stationary,
                rep,
            )
        )

    snapshot(0, 0, -1, 0, True)
    t = 0
    for layer in range(1, topology.L + 1):
        for v in topology.layer_neurons(layer):
            t += 1
            before = state.loss() + regularizer(topology, params, hyper.lam1, hyper.lam2)
            res = train_neuron(topology, params, v, stream, hyper, state)
            params = res.params
            state.update_neuron(v, params)
            status = classify_neuron(topology, params, v, values=state.values[:, v])
            active[v] = status.active
            if status.active:
                fits[v] = status.fit
            else:
                fits.pop(v, None)
            trace.fits = dict(fits)
            if not res.stationary:
                trace.not_stationary.append((v, res.iters))
            after = state.loss() + regularizer(topology, params, hyper.lam1, hyper.lam2)
            if after > before + 10 * hyper.eps_stop:
                trace.loss_increases.append((v, before, after))
            snapshot(t, layer, v, res.iters, res.stationary)
            bad = [
                (u, active_hidden_parents(topology, active, u))
                for u in [v, *topology.children(v).tolist()]
                if active_hidden_parents(topology, active, u) > hyper.max_active_parents
            ]
            if bad:
                msg = "; ".join(f"neuron {u} has {c} active hidden parents" for u, c in bad)
                trace.sparsity_violations.append((t, msg))
                if hyper.on_violation == "abort":
                    raise SparsityViolation(msg, trace, params)
    return params, trace, topology
