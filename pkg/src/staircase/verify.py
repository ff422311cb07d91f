"""Property suites: gradient checks, Fourier algebra, the staircase checker,
single-neuron training behaviour, the idealized loss, end-to-end runs and
the theorem hyperparameter formulas.

Each suite returns a list of ``Check`` records (measured value against a
threshold); ``run_suites`` prints one line per check and returns an exit
status.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .fourier import (
    SparsePolynomial,
    check_staircase,
    chain,
    cube_values,
    estimate_fourier,
    exact_fourier,
    parseval_norm,
    subset,
)
from .layerwise import (
    classify_neuron,
    error_spectrum,
    idealized_loss,
    practical_preset,
    train_network_layerwise,
    train_neuron,
)
from .regular_net import (
    NetworkParams,
    NetworkTopology,
    build_topology,
    gaussian_params,
    neuron_grad,
    neuron_params,
    pointwise_loss,
    population_loss,
    regularizer,
    set_neuron_params,
    theorem_hyperparams,
    zero_params,
)
from .resnet import ResNetConfig, count_inversions, init_resnet, resnet_loss_grad, sgd_train
from .sampling import Measure, make_cyclic_dataset, make_stream
from .targets import TargetSpec, make_double, make_parity, make_staircase

FD_STEP = 1e-5
GRAD_TOL = 1e-5
GRAD_FLOOR = 1e-6


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    threshold: float
    op: str  # how measured must compare to threshold: "<", "<=", ">=" or "=="
    detail: str = ""

    @property
    def passed(self) -> bool:
        m, t = self.measured, self.threshold
        return {"<": m < t, "<=": m <= t, ">=": m >= t, "==": m == t}[self.op]

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  [{self.detail}]" if self.detail else ""
        return f"{tag}  {self.suite}: {self.name}: measured {self.measured:.6g} (need {self.op} {self.threshold:g}){extra}"


def _rng(seed: int, tag: str) -> np.random.Generator:
    from .sampling import derive_key

    return np.random.Generator(np.random.Philox(key=derive_key(seed, "verify/" + tag)))


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = GRAD_FLOOR) -> float:
    """Largest entrywise |a - b| / max(|a|, |b|, floor)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def central_difference(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


# gradient checks ---------------------------------------------------------


def regular_net_gradcheck(seed: int) -> float:
    rng = _rng(seed, "grad-net")
    n, W, L = int(rng.integers(2, 6)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
    top = build_topology(n, W, L, float(rng.uniform(0.5, 1)), float(rng.uniform(0.5, 1)), seed)
    params = gaussian_params(top, 0.7, seed)
    params.b[:] = rng.normal(0, 0.5, params.b.size)
    v = int(rng.choice(list(top.hidden())))
    m = int(rng.integers(1, 5))
    x = rng.choice([-1.0, 1.0], size=(m, n))
    y = rng.normal(size=m)
    lam1, lam2 = rng.uniform(0, 0.1, 2)
    analytic = neuron_grad(top, params, v, x, y, lam1, lam2)

    def loss(wv):
        p = params.copy()
        set_neuron_params(top, p, v, wv)
        return float(np.mean(pointwise_loss(top, p, x, y, lam1, lam2)))

    return rel_error(analytic, central_difference(loss, neuron_params(top, params, v)))


def resnet_gradcheck(seed: int) -> float:
    rng = _rng(seed, "grad-resnet")
    n, width, depth = int(rng.integers(2, 7)), int(rng.integers(2, 7)), int(rng.integers(1, 4))
    params = init_resnet(ResNetConfig(n=n, width=width, depth=depth, init_std=1.0, seed=seed))
    params.b_in[:] = rng.normal(0, 0.3, width)
    params.bb[:] = rng.normal(0, 0.3, params.bb.shape)
    params.b_out[:] = rng.normal(0, 0.3, 1)
    m = int(rng.integers(1, 5))
    x = rng.choice([-1.0, 1.0], size=(m, n))
    y = rng.normal(size=m)
    _, g = resnet_loss_grad(params, x, y)
    flat = params.flat()

    def loss(vec):
        p = params.copy()
        p.set_flat(vec)
        return resnet_loss_grad(p, x, y)[0]

    return rel_error(g.flat(), central_difference(loss, flat))


def suite_gradcheck(instances: int = 100) -> list[Check]:
    net = max(regular_net_gradcheck(s) for s in range(instances))
    res = max(resnet_gradcheck(s) for s in range(instances))
    return [
        Check("gradcheck", f"regular-net per-neuron gradient, max rel error over {instances} instances", net, GRAD_TOL, "<"),
        Check("gradcheck", f"ResNet backprop, max rel error over {instances} instances", res, GRAD_TOL, "<"),
    ]


# Fourier algebra ---------------------------------------------------------


def random_sparse_polynomial(rng: np.random.Generator, n: int, max_terms: int = 10) -> SparsePolynomial:
    count = int(rng.integers(1, max_terms + 1))
    masks = rng.integers(0, 1 << n, size=count)
    terms = {int(S): float(rng.normal()) for S in masks}
    return SparsePolynomial(n, {S: c for S, c in terms.items() if c != 0.0})


def suite_fourier(polys: int = 50, trials: int = 200, m: int = 2000) -> list[Check]:
    rng = _rng(0, "fourier")
    worst_rt, worst_pv = 0.0, 0.0
    for _ in range(polys):
        n = int(rng.integers(1, 13))
        g = random_sparse_polynomial(rng, n)
        h = exact_fourier(g)
        for S in set(g.terms) | set(h.terms):
            worst_rt = max(worst_rt, abs(g.coefficient(S) - h.coefficient(S)))
        vals = cube_values(g)
        worst_pv = max(worst_pv, abs(float(np.mean(vals * vals)) - parseval_norm(g)) / max(parseval_norm(g), 1.0))
    inside = 0
    for t in range(trials):
        n = int(rng.integers(2, 13))
        g = random_sparse_polynomial(rng, n, 6)
        S = int(rng.choice(list(g.terms))) if t % 2 == 0 else int(rng.integers(0, 1 << n))
        x = rng.choice([-1.0, 1.0], size=(m, n))
        est, se = estimate_fourier((x, g(x)), S)
        # the floor absorbs round-off when g chi_S is constant and se is ~1e-18
        inside += abs(est - g.coefficient(S)) <= 3 * se + 1e-12
    return [
        Check("fourier", f"exact_fourier roundtrip, max coefficient error over {polys} polynomials", worst_rt, 1e-10, "<="),
        Check("fourier", "Parseval, max relative gap", worst_pv, 1e-9, "<="),
        Check("fourier", f"sampled estimates within 3 stderr, fraction of {trials} trials", inside / trials, 0.95, ">="),
    ]


# staircase checker -------------------------------------------------------


def suite_staircase() -> list[Check]:
    n = 12
    passing = [make_staircase(n, k) for k in range(1, 11)] + [make_double(n, k, l) for k in range(1, 6) for l in range(1, 6)]
    ok = sum(check_staircase(g, 1.0).satisfies for g in passing)
    failing = [(make_parity(n, k), chain(1, k)) for k in range(2, 11)]
    failing.append((SparsePolynomial(n, {subset(1): 1.0, subset(1, 2, 3): 1.0}), subset(1, 2, 3)))
    right = 0
    wrong = []
    for g, witness in failing:
        rep = check_staircase(g, 1.0)
        if not rep.satisfies and rep.violating_subset == witness:
            right += 1
        else:
            wrong.append(g.to_text().splitlines()[-1])
    return [
        Check("staircase", f"S_k and S_(k,l) accepted with M=1 (of {len(passing)})", ok, len(passing), "=="),
        Check("staircase", f"parities and x1 + x1x2x3 rejected with the right witness (of {len(failing)})", right, len(failing), "==", "; ".join(wrong)),
    ]


# single-neuron probes ----------------------------------------------------


@dataclass
class Probe:
    """A two-layer network around one blank neuron v in layer 2.

    Layer 1 holds neurons that compute r * chi_S exactly (|S| <= 2) and
    blank neurons; v's parents are a chosen mix of the constant, inputs and
    layer-1 neurons. ``parent_sets`` / ``parent_coefs`` describe what each
    parent of v computes (None for blank parents).
    """

    topology: NetworkTopology
    params: NetworkParams
    v: int
    parents: list
    parent_sets: list
    parent_coefs: list


def _monomial_weights(S: int, r: float) -> tuple[list[int], list[float], float]:
    """Incoming sources, weights and bias so that (sum)^2 + b = r chi_S with |S| in {1, 2}."""
    idx = [i + 1 for i in range(S.bit_length()) if S >> i & 1]
    a = math.sqrt(abs(r) / 2)
    if len(idx) == 1:
        srcs = [0, idx[0]]
    else:
        srcs = idx
    # (a u1 + s a u2)^2 = 2a^2 + 2 s a^2 u1 u2 for u in {+-1}
    sign = 1.0 if r > 0 else -1.0
    return srcs, [a, sign * a], -abs(r)


def build_probe(n: int, hidden: list, parents: list, blank_fanin: int = 2, seed: int = 0) -> Probe:
    """``hidden``: list of (S, r) or None (blank) for layer 1.
    ``parents``: entries 0..n for the constant and inputs, ("h", j) for layer-1 neuron j.
    """
    W = max(1, len(hidden))
    first = n + 1
    v = first + W
    rng = _rng(seed, "probe")
    src, dst, wts, bias = [], [], {}, np.zeros(2 * W)
    for j, spec in enumerate(hidden):
        u = first + j
        if spec is None:
            for s in rng.choice(n + 1, size=min(blank_fanin, n + 1), replace=False):
                src.append(int(s))
                dst.append(u)
            continue
        S, r = spec
        srcs, ws, b = _monomial_weights(S, r)
        for s, w in zip(srcs, ws):
            src.append(s)
            dst.append(u)
            wts[(s, u)] = w
        bias[j] = b
    sets, coefs, ids = [], [], []
    for p in parents:
        if isinstance(p, tuple):
            u = first + p[1]
            spec = hidden[p[1]]
            sets.append(None if spec is None else spec[0])
            coefs.append(None if spec is None else spec[1])
        else:
            u = int(p)
            sets.append(0 if u == 0 else 1 << (u - 1))
            coefs.append(1.0)
        ids.append(u)
        src.append(u)
        dst.append(v)
    top = NetworkTopology(n, W, 2, 1.0, 1.0, seed, np.array(src), np.array(dst))
    params = zero_params(top)
    for (s, u), w in wts.items():
        params.a[top.edge_index(s, u)] = w
    params.b[:] = bias
    return Probe(top, params, v, ids, sets, coefs)


def _random_monomial(rng, n: int) -> int:
    size = int(rng.integers(1, 3))
    return int(sum(1 << int(i) for i in rng.choice(n, size=size, replace=False)))


def _random_coef(rng) -> float:
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5))


def _active_parent(rng, n: int, hidden: list):
    """One active parent spec: constant, an input, or a fresh exact monomial neuron."""
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return 0
    if kind == 1:
        return int(rng.integers(1, n + 1))
    hidden.append((_random_monomial(rng, n), _random_coef(rng)))
    return ("h", len(hidden) - 1)


def _extra_terms(rng, n: int, exclude: set, count: int) -> dict:
    terms = {}
    for _ in range(count):
        S = int(rng.integers(1, 1 << n))
        if S not in exclude:
            terms[S] = _random_coef(rng)
    return terms


def _network_function(probe: Probe) -> SparsePolynomial:
    from .regular_net import network_output

    n = probe.topology.n
    return exact_fourier(lambda x: network_output(probe.topology, probe.params, x), n)


def _probe_case(seed: int, active: int, product_coef: float | None, n: int = 6) -> tuple[Probe, SparsePolynomial, int]:
    """Probe with ``active`` active parents (0, 1 or 2) plus blank ones, and an
    unbiased target. With two active parents the residual coefficient on the
    product set is -product_coef (0 means "not useful")."""
    rng = _rng(seed, f"case/{active}")
    hidden: list = []
    parents = []
    while len(parents) < active:
        p = _active_parent(rng, n, hidden)
        if p not in parents:
            parents.append(p)
    for _ in range(int(rng.integers(0, 3))):
        hidden.append(None)
        parents.append(("h", len(hidden) - 1))
    if not hidden:
        hidden.append(None)
    order = rng.permutation(len(parents))
    parents = [parents[i] for i in order]
    probe = build_probe(n, hidden, parents, seed=seed)
    f0 = _network_function(probe)
    prod = 0
    act = [S for S in probe.parent_sets if S is not None]
    if len(act) == 2:
        prod = act[0] ^ act[1]
    extra = _extra_terms(rng, n, {0, prod}, int(rng.integers(0, 4)))
    terms = dict(f0.terms)
    terms.pop(0, None)
    for S, c in extra.items():
        terms[S] = terms.get(S, 0.0) + c
    if product_coef and prod:
        terms[prod] = terms.get(prod, 0.0) + product_coef
    target = SparsePolynomial(n, {S: c for S, c in terms.items() if c != 0.0})
    # make the residual unbiased: target constant = network constant
    if f0.coefficient(0):
        target = target + SparsePolynomial(n, {0: f0.coefficient(0)})
    return probe, target, prod


def _train_probe(probe: Probe, target: SparsePolynomial, seed: int, hyper):
    stream = make_stream(Measure("unbiased", probe.topology.n), target, seed)
    res = train_neuron(probe.topology, probe.params, probe.v, stream, hyper, seed=seed)
    return res


def suite_blank_persistence(trials: int = 100) -> list[Check]:
    hyper = practical_preset()
    unchanged = 0
    for s in range(trials):
        probe, target, _ = _probe_case(s, active=s % 2, product_coef=None)
        res = _train_probe(probe, target, s, hyper)
        unchanged += res.params == probe.params
    return [Check("blank-persistence", f"neurons with <= 1 active parent left untouched (of {trials})", unchanged, trials, "==")]


def suite_not_useful(trials: int = 100) -> list[Check]:
    hyper = practical_preset()
    blank = 0
    for s in range(trials):
        probe, target, _ = _probe_case(s, active=2, product_coef=0.0)
        res = _train_probe(probe, target, s, hyper)
        blank += not classify_neuron(probe.topology, res.params, probe.v).active
    return [Check("not-useful", f"neurons left blank when their product is useless (of {trials})", blank, 98, ">=")]


def suite_product_frequency(trials: int = 200) -> list[Check]:
    hyper = practical_preset()
    success, bad = 0, []
    for s in range(trials):
        probe, target, S = _probe_case(s, active=2, product_coef=1.0)
        res = _train_probe(probe, target, s, hyper)
        st = classify_neuron(probe.topology, res.params, probe.v)
        if not (st.active and st.fit.S == S):
            continue
        success += 1
        z0 = error_spectrum(probe.topology, res.params, target, [0])[0]
        if not (abs(st.fit.r - 1) <= 0.25 and st.fit.eps_rel <= 0.25 and abs(z0) <= 12 * hyper.eps_stop):
            bad.append(f"seed {s}: r={st.fit.r:.4g} eps_rel={st.fit.eps_rel:.3g} zeta0={z0:.3g}")
    return [
        Check("product-frequency", f"fraction of {trials} seeds learning the useful product", success / trials, 0.15, ">="),
        Check("product-frequency", "successes violating |r-1|<=0.25, eps_rel<=0.25, |zeta(empty)|<=12 eps_stop", len(bad), 0, "==", "; ".join(bad[:3])),
    ]


def suite_idealized_loss(configs: int = 50) -> list[Check]:
    hyper = practical_preset()
    worst, worst_r = 0.0, 0.0
    for s in range(configs):
        rng = _rng(s, "ideal")
        n = 5
        hidden: list = []
        p1 = _active_parent(rng, n, hidden)
        if s % 5 == 0:
            # same monomial on both parents
            if isinstance(p1, tuple):
                hidden.append((hidden[p1[1]][0], _random_coef(rng)))
            else:
                S1 = 0 if p1 == 0 else 1 << (p1 - 1)
                hidden.append((S1, _random_coef(rng)) if S1 else (subset(1), 1.0))
                if not S1:
                    p1 = 1
            p2 = ("h", len(hidden) - 1)
        else:
            p2 = p1
            while p2 == p1:
                p2 = _active_parent(rng, n, hidden)
        probe = build_probe(n, hidden, [p1, p2], seed=s)
        target = random_sparse_polynomial(rng, n, 6)
        blank = probe.params.copy()
        spectrum = {S: c for S, c in error_spectrum(probe.topology, blank, target, range(1 << n)).items() if c != 0.0}
        a1, a2, b = rng.uniform(-1, 1, 3)
        p = blank.copy()
        set_neuron_params(probe.topology, p, probe.v, np.array([a1, a2, b]) if probe.parents[0] < probe.parents[1] else np.array([a2, a1, b]))
        exact = population_loss(probe.topology, p, target)
        S1, S2 = probe.parent_sets
        r1, r2 = probe.parent_coefs
        inputs = tuple(u < probe.topology.num_inputs for u in probe.parents)
        ideal = idealized_loss(a1, a2, b, r1, r2, S1, S2, spectrum, hyper.lam1, hyper.lam2, inputs, regularized=False)
        worst = max(worst, abs(exact - ideal))
        exact_r = population_loss(probe.topology, p, target, hyper.lam1, hyper.lam2) - regularizer(probe.topology, blank, hyper.lam1, hyper.lam2)
        ideal_r = idealized_loss(a1, a2, b, r1, r2, S1, S2, spectrum, hyper.lam1, hyper.lam2, inputs)
        worst_r = max(worst_r, abs(exact_r - ideal_r))
    return [
        Check("idealized-loss", f"max |ideal - exact| loss over {configs} configurations", worst, 1e-9, "<="),
        Check("idealized-loss", "same, regularized (terms depending on w_v)", worst_r, 1e-9, "<="),
    ]


# end-to-end --------------------------------------------------------------


def layerwise_seed(seed: int, n: int = 8, k: int = 3, **overrides) -> dict:
    hyper = practical_preset(**overrides)
    g = make_staircase(n, k)
    stream = make_stream(Measure("unbiased", n), g, seed)
    from .layerwise import SparsityViolation

    try:
        params, trace, top = train_network_layerwise(n, stream, hyper, seed)
    except SparsityViolation as exc:
        return dict(seed=seed, loss=math.nan, ok=False, monotone=None, violation=str(exc))
    loss = population_loss(top, params, g)
    return dict(seed=seed, loss=loss, ok=loss <= 0.05, monotone=trace.representation_monotone(), violation=None)


def suite_layerwise(seeds: int = 10) -> list[Check]:
    runs = [layerwise_seed(s) for s in range(seeds)]
    ok = sum(r["ok"] for r in runs)
    finished = [r for r in runs if r["violation"] is None]
    mono = sum(bool(r["monotone"]) for r in finished)
    detail = "; ".join(f"seed {r['seed']}: " + (r["violation"] or f"loss {r['loss']:.3g}") for r in runs if not r["ok"])
    return [
        Check("layerwise", f"seeds with final population loss <= 0.05 on S_3, n=8 (of {seeds})", ok, 8, ">=", detail),
        Check("layerwise", f"finished runs with a monotone represented set (of {len(finished)})", mono, len(finished), "=="),
    ]


def resnet_seed(seed: int, family: str, n: int, k: int, width: int, depth: int, steps: int, m: int | None, eval_interval: int = 1000) -> dict:
    spec = TargetSpec(family, n, k, normalize=True)
    measure = Measure("unbiased", n)
    if m is None:
        stream = make_stream(measure, spec.evaluator(), seed)
    else:
        stream = make_cyclic_dataset(measure, spec.evaluator(), m, seed)
    tracked = [chain(1, i) for i in range(1, k + 1)] if family == "staircase" else [chain(1, k)]
    g = spec.polynomial()
    cfg = ResNetConfig(n=n, width=width, depth=depth, batch=20, steps=steps, seed=seed, eval_interval=eval_interval)
    _, trace = sgd_train(cfg, stream, tracked, [g.coefficient(S) for S in tracked])
    return dict(
        seed=seed,
        initial=trace.initial_mse,
        final=trace.final_mse,
        min=trace.min_mse(),
        rows=trace.rows,
        crossings=trace.crossing_times(),
        diverged=trace.diverged,
        trace=trace,
    )


def suite_resnet(seeds: int = 10) -> list[Check]:
    """Fast variant: S_5 / sqrt(5), n=16, width 32, depth 4, 5e4 steps, m = 6e4."""
    runs = [resnet_seed(s, "staircase", 16, 5, 32, 4, 50_000, 60_000) for s in range(seeds)]
    hits = [r for r in runs if r["trace"].steps_to_mse(0.15) is not None]
    inv = [count_inversions(r["crossings"]) for r in hits]
    worst = max(inv) if inv else 0
    return [
        Check("resnet", f"seeds reaching test MSE < 0.15 within 5e4 steps (of {seeds})", len(hits), 8, ">="),
        Check("resnet", "max Fourier crossing inversions on successful runs", worst, 1, "<="),
    ]


def suite_resnet_slow(seeds: int = 10) -> list[Check]:
    """S_10 / sqrt(10) vs chi_{1:10}, n=30, width 40, depth 5, B=20, 3e5 steps on m = 6e4 samples."""
    stair = [resnet_seed(s, "staircase", 30, 10, 40, 5, 300_000, 60_000) for s in range(seeds)]
    par = [resnet_seed(s, "parity", 30, 10, 40, 5, 300_000, 60_000) for s in range(seeds)]
    hits = [r for r in stair if r["trace"].steps_to_mse(0.1) is not None]
    inv = [count_inversions(r["crossings"]) for r in hits]
    stuck = sum(min(row[2] for row in r["rows"]) > 0.8 * r["initial"] for r in par)
    return [
        Check("resnet-slow", f"staircase seeds reaching test MSE < 0.1 within 3e5 steps (of {seeds})", len(hits), 8, ">="),
        Check("resnet-slow", "max Fourier crossing inversions on successful staircase runs", max(inv) if inv else 0, 1, "<="),
        Check("resnet-slow", f"parity seeds staying above 0.8x initial test MSE throughout (of {seeds})", stuck, seeds, "=="),
    ]


# theorem hyperparameters -------------------------------------------------


def suite_theorem_hyperparams(tuples: int = 20) -> list[Check]:
    rng = _rng(0, "theorem")
    worst = 0.0
    L_ok = 0
    for _ in range(tuples):
        n = int(rng.integers(2, 200))
        s = float(rng.uniform(1.5, 50))
        M = float(rng.uniform(1.01, 10))
        eps = float(rng.uniform(1e-3, 0.5))
        delta = float(rng.uniform(1e-3, 0.5))
        hp = theorem_hyperparams(n, s, M, eps, delta)
        lg = hp.log10
        L_ok += hp.L == n
        tau = 1.0 / (2.0**20 * M**7 * n)
        ratio = 1.0 / (64 * M * M * n)
        gaps = [
            abs(hp.eta / hp.tau - 4.0) / 4.0,
            abs(hp.tau - tau) / tau,
            abs((lg["eta"] - lg["tau"]) - math.log10(4.0)),
            abs(0.5 * (lg["lam1"] - lg["lam2"]) - math.log10(ratio)),
        ]
        if hp.lam1 > 0 and hp.lam2 > 0:
            gaps.append(abs(math.sqrt(hp.lam1 / hp.lam2) - ratio) / ratio)
        worst = max(worst, *gaps)
    return [
        Check("theorem-hyperparams", f"tuples with L = n (of {tuples})", L_ok, tuples, "=="),
        Check("theorem-hyperparams", "max relative gap in eta = 4 tau, tau, sqrt(lam1/lam2)", worst, 1e-12, "<="),
    ]


SUITES = {
    "gradcheck": suite_gradcheck,
    "fourier": suite_fourier,
    "parseval": suite_fourier,
    "staircase": suite_staircase,
    "blank-persistence": suite_blank_persistence,
    "not-useful": suite_not_useful,
    "product-frequency": suite_product_frequency,
    "idealized-loss": suite_idealized_loss,
    "layerwise": suite_layerwise,
    "theorem-hyperparams": suite_theorem_hyperparams,
    "resnet": suite_resnet,
    "resnet-slow": suite_resnet_slow,
}
# "all" skips the alias and the hour-long reproduction, which must be asked for by name
ALL = [s for s in SUITES if s not in ("parseval", "resnet-slow")]


def expand(names) -> list[str]:
    out = []
    for name in names:
        if name == "all":
            out.extend(ALL)
        elif name in SUITES:
            out.append(name)
        else:
            raise KeyError(name)
    return list(dict.fromkeys(out))


def run_suites(names, out=print) -> int:
    """Run the named suites, print one line per check, return 0 iff all pass."""
    failed = 0
    for name in expand(names):
        t0 = time.time()
        checks = SUITES[name]()
        for c in checks:
            out(c.line())
            failed += not c.passed
        out(f"      {name}: {time.time() - t0:.1f} s")
    out(f"{'OK' if failed == 0 else 'FAILED'}: {failed} failing check(s)")
    return 0 if failed == 0 else 1

