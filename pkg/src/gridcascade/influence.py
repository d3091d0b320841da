"""Influence models for link-failure and load-shed prediction.

Two Markovian predictors are trained from a cascade sample pool:

* a link model whose weight matrix mixes pairwise branch-to-branch
  transition probabilities to predict the next network state, and
* a load model whose weight matrix mixes branch-to-bus service
  probabilities to predict which buses keep full service.

Weights live on the probability simplex and are fitted per output index by
projected gradient descent on a least-squares objective; binarization
thresholds are chosen per index to minimize training misclassification.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .sampler import SamplePool

__all__ = [
    "Transitions",
    "LinkFailureIM",
    "LoadShedIM",
    "PredictionOutcome",
    "link_transitions",
    "load_pairs",
    "estimate_transitions",
    "fit_influence_weights",
    "fit_thresholds",
    "train_link_model",
    "train_load_model",
    "predict_next_state",
    "predict_cascade",
    "predict_load_shed",
    "baseline_predict",
    "save_model",
    "load_model",
    "export_matrices_csv",
]

PGD_MAX_ITER = 10_000
PGD_TOL = 1e-9
_SMOOTHING = 1.0  # Laplace prior for unseen conditioning events


@dataclass
class Transitions:
    a11: np.ndarray  # (N_br, N_br), [j, i] = P(s_i[t+1]=1 | s_j[t]=1)
    a01: np.ndarray  # (N_br, N_br), [j, i] = P(s_i[t+1]=1 | s_j[t]=0)
    b11: np.ndarray  # (N_br, N),   [j, i] = P(l_i[t]=1 | s_j[t]=1)
    b01: np.ndarray  # (N_br, N),   [j, i] = P(l_i[t]=1 | s_j[t]=0)


@dataclass
class LinkFailureIM:
    a11: np.ndarray
    a01: np.ndarray
    d: np.ndarray  # (N_br, N_br); column i = weights over source links j
    epsilon: np.ndarray  # (N_br,)
    meta: dict = field(default_factory=dict)

    @property
    def n_branches(self):
        return self.d.shape[0]


@dataclass
class LoadShedIM:
    b11: np.ndarray
    b01: np.ndarray
    e: np.ndarray  # (N, N_br); row i = weights over source links j
    delta: np.ndarray  # (N,)
    always_served: np.ndarray  # bool per bus: no demand seen in training
    meta: dict = field(default_factory=dict)

    @property
    def n_buses(self):
        return self.e.shape[0]


@dataclass
class PredictionOutcome:
    probabilities: np.ndarray
    binarized: np.ndarray


# ---------------------------------------------------------------------------
# data assembly


def link_transitions(traces) -> tuple[np.ndarray, np.ndarray]:
    """Stack all consecutive (s[t], s[t+1]) pairs from the traces."""
    xs, ys = [], []
    for tr in traces:
        if tr.states.shape[0] >= 2:
            xs.append(tr.states[:-1])
            ys.append(tr.states[1:])
    if not xs:
        n = traces[0].states.shape[1] if traces else 0
        return np.zeros((0, n)), np.zeros((0, n))
    return (
        np.vstack(xs).astype(float),
        np.vstack(ys).astype(float),
    )


def load_pairs(traces) -> tuple[np.ndarray, np.ndarray]:
    """Stack all same-time (s[t], l[t]) pairs from the traces."""
    return (
        np.vstack([tr.states for tr in traces]).astype(float),
        np.vstack([tr.load_bits for tr in traces]).astype(float),
    )


# ---------------------------------------------------------------------------
# training


def estimate_transitions(pool: SamplePool) -> Transitions:
    """Empirical pairwise transition frequencies over the training split,
    with additive smoothing so unseen conditioning events fall back to 1/2."""
    train = pool.train_traces()
    if not train:
        raise ValueError("train split is empty")
    X, Y = link_transitions(train)
    S, L = load_pairs(train)
    a = _SMOOTHING

    n1 = X.sum(axis=0)
    n0 = (1.0 - X).sum(axis=0)
    a11 = (X.T @ Y + a) / (n1[:, None] + 2 * a)
    a01 = ((1.0 - X).T @ Y + a) / (n0[:, None] + 2 * a)

    m1 = S.sum(axis=0)
    m0 = (1.0 - S).sum(axis=0)
    b11 = (S.T @ L + a) / (m1[:, None] + 2 * a)
    b01 = ((1.0 - S).T @ L + a) / (m0[:, None] + 2 * a)
    return Transitions(a11=a11, a01=a01, b11=b11, b01=b01)


def _project_simplex(v):
    """Euclidean projection onto {w >= 0, sum w = 1} (sorting method)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.flatnonzero(u + (1.0 - css) / np.arange(1, u.size + 1) > 0)[-1]
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


def _pgd_simplex(G, g, max_iter=PGD_MAX_ITER, tol=PGD_TOL):
    """Minimize w'Gw - 2 g'w over the probability simplex.

    Returns (w, objective history, converged).  The step is halved whenever
    a move would increase the objective, so the history is non-increasing.
    """
    n = G.shape[0]
    w = np.full(n, 1.0 / n)
    lam = float(np.linalg.eigvalsh(G)[-1]) if n > 1 else float(G[0, 0])
    step = 1.0 / (2.0 * lam) if lam > 0 else 1.0
    obj = float(w @ G @ w - 2.0 * g @ w)
    history = [obj]
    converged = False
    for _ in range(max_iter):
        grad = 2.0 * (G @ w - g)
        while True:
            w_new = _project_simplex(w - step * grad)
            obj_new = float(w_new @ G @ w_new - 2.0 * g @ w_new)
            if obj_new <= obj or step < 1e-16:
                break
            step *= 0.5
        history.append(min(obj_new, obj))
        if obj - obj_new < tol:
            w = w_new if obj_new <= obj else w
            converged = True
            break
        w, obj = w_new, obj_new
    return w, history, converged


def _link_design(X, a11, a01, i):
    return X * a11[:, i][None, :] + (1.0 - X) * a01[:, i][None, :]


def _load_design(S, b11, b01, i):
    return S * b11[:, i][None, :] + (1.0 - S) * b01[:, i][None, :]


def fit_influence_weights(
    pool: SamplePool, transitions: Transitions, target: str
) -> tuple[np.ndarray, dict]:
    """Fit the simplex-constrained weight matrix for ``target`` in
    {"link", "load"}; returns (matrix, metadata with convergence flags)."""
    train = pool.train_traces()
    meta = {"non_converged": []}
    if target == "link":
        X, Y = link_transitions(train)
        n = transitions.a11.shape[0]
        D = np.zeros((n, n))
        for i in range(n):
            rows = X[:, i] == 1  # once failed, the monotonicity mask decides
            M = _link_design(X[rows], transitions.a11, transitions.a01, i)
            y = Y[rows, i]
            if M.shape[0] == 0:
                D[:, i] = 1.0 / n
                continue
            G = M.T @ M
            g = M.T @ y
            w, _, ok = _pgd_simplex(G, g)
            D[:, i] = w
            if not ok:
                meta["non_converged"].append(i)
        return D, meta
    if target == "load":
        S, L = load_pairs(train)
        n_br, n_bus = transitions.b11.shape
        E = np.zeros((n_bus, n_br))
        for i in range(n_bus):
            M = _load_design(S, transitions.b11, transitions.b01, i)
            y = L[:, i]
            G = M.T @ M
            g = M.T @ y
            w, _, ok = _pgd_simplex(G, g)
            E[i, :] = w
            if not ok:
                meta["non_converged"].append(i)
        return E, meta
    raise ValueError(f"unknown target {target!r}")


def _best_threshold(p, y):
    """Threshold minimizing misclassification of (predict 1 iff p >= thr).

    Ties are broken toward the larger threshold; the returned value is the
    midpoint of the optimal threshold interval.  Degenerate targets (all
    outcomes identical) give (0.5, True).
    """
    y = np.asarray(y, dtype=bool)
    if y.size == 0 or y.all() or not y.any():
        return 0.5, True
    vals = np.unique(p)
    # candidate intervals: [0, v0], (v0, v1], ..., (v_{m-1}, 1]
    edges_low = np.concatenate([[0.0], vals])
    edges_high = np.concatenate([vals, [1.0]])
    best_err, best_k = None, None
    for k in range(vals.size + 1):
        pred = (p >= vals[k]) if k < vals.size else np.zeros_like(y)
        err = int(np.count_nonzero(pred != y))
        # <= so later (larger) intervals win ties: predict failure more readily
        if best_err is None or err <= best_err:
            best_err, best_k = err, k
    lo, hi = edges_low[best_k], edges_high[best_k]
    return float(np.clip(0.5 * (lo + hi), 0.0, 1.0)), False


def fit_thresholds(pool: SamplePool, model, target: str) -> tuple[np.ndarray, dict]:
    """Per-index binarization thresholds minimizing training error."""
    train = pool.train_traces()
    meta = {"degenerate": []}
    if target == "link":
        X, Y = link_transitions(train)
        n = model.d.shape[0]
        eps = np.zeros(n)
        P = _link_probabilities(model, X)
        for i in range(n):
            rows = X[:, i] == 1
            thr, flagged = _best_threshold(P[rows, i], Y[rows, i])
            eps[i] = thr
            if flagged:
                meta["degenerate"].append(i)
        return eps, meta
    if target == "load":
        S, L = load_pairs(train)
        n_bus = model.e.shape[0]
        delta = np.zeros(n_bus)
        P = _load_probabilities(model, S)
        for i in range(n_bus):
            thr, flagged = _best_threshold(P[:, i], L[:, i])
            delta[i] = thr
            if flagged:
                meta["degenerate"].append(i)
        return delta, meta
    raise ValueError(f"unknown target {target!r}")


def train_link_model(pool: SamplePool, transitions: Transitions | None = None) -> LinkFailureIM:
    if transitions is None:
        transitions = estimate_transitions(pool)
    D, fit_meta = fit_influence_weights(pool, transitions, "link")
    model = LinkFailureIM(
        a11=transitions.a11, a01=transitions.a01, d=D, epsilon=np.zeros(D.shape[0])
    )
    eps, thr_meta = fit_thresholds(pool, model, "link")
    model.epsilon = eps
    model.meta = {
        "seed": pool.config.seed,
        "n_train": len(pool.train_idx),
        "non_converged": fit_meta["non_converged"],
        "degenerate_thresholds": thr_meta["degenerate"],
    }
    return model


def train_load_model(pool: SamplePool, transitions: Transitions | None = None) -> LoadShedIM:
    if transitions is None:
        transitions = estimate_transitions(pool)
    E, fit_meta = fit_influence_weights(pool, transitions, "load")
    demand = np.vstack([tr.demand for tr in pool.train_traces()])
    always_served = demand.max(axis=0) <= 0
    model = LoadShedIM(
        b11=transitions.b11,
        b01=transitions.b01,
        e=E,
        delta=np.zeros(E.shape[0]),
        always_served=always_served,
    )
    delta, thr_meta = fit_thresholds(pool, model, "load")
    model.delta = delta
    model.meta = {
        "seed": pool.config.seed,
        "n_train": len(pool.train_idx),
        "non_converged": fit_meta["non_converged"],
        "degenerate_thresholds": thr_meta["degenerate"],
    }
    return model


# ---------------------------------------------------------------------------
# prediction


def _link_probabilities(model: LinkFailureIM, S: np.ndarray) -> np.ndarray:
    W1 = model.d * model.a11
    W0 = model.d * model.a01
    return S @ W1 + (1.0 - S) @ W0


def _load_probabilities(model: LoadShedIM, S: np.ndarray) -> np.ndarray:
    W1 = model.e.T * model.b11
    W0 = model.e.T * model.b01
    return S @ W1 + (1.0 - S) @ W0


def predict_next_state(model: LinkFailureIM, s: np.ndarray) -> PredictionOutcome:
    """One-step link prediction; already-failed links stay failed."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    S = s[None, :] if single else s
    P = _link_probabilities(model, S)
    B = ((P >= model.epsilon[None, :]) & (S == 1)).astype(np.int8)
    if single:
        return PredictionOutcome(P[0], B[0])
    return PredictionOutcome(P, B)


def predict_cascade(model: LinkFailureIM, s0: np.ndarray) -> np.ndarray:
    """Iterate one-step predictions to the fixpoint; the monotonicity mask
    bounds the sequence length by the branch count."""
    seq = [np.asarray(s0, dtype=np.int8)]
    for _ in range(model.n_branches + 1):
        nxt = predict_next_state(model, seq[-1]).binarized
        if np.array_equal(nxt, seq[-1]):
            break
        seq.append(nxt)
    return np.array(seq, dtype=np.int8)


def predict_load_shed(model: LoadShedIM, s: np.ndarray) -> PredictionOutcome:
    """Service-bit prediction for a network state; zero-demand buses are
    always predicted at full service."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    S = s[None, :] if single else s
    P = _load_probabilities(model, S)
    B = (P >= model.delta[None, :]).astype(np.int8)
    B[:, model.always_served] = 1
    if single:
        return PredictionOutcome(P[0], B[0])
    return PredictionOutcome(P, B)


def baseline_predict(kind: str, pool: SamplePool, target: str) -> np.ndarray:
    """Flow-free baselines over the test split.

    UNIFORM deterministically predicts each index's training-majority
    outcome; RANDOM flips per-index coins weighted by the training marginal
    frequency (seeded from the pool config).
    """
    kind = kind.upper()
    if kind not in ("RANDOM", "UNIFORM"):
        raise ValueError(f"unknown baseline {kind!r}")
    train, test = pool.train_traces(), pool.test_traces()
    if not test:
        raise ValueError("test split is empty")
    if target == "link":
        _, Y_train = link_transitions(train)
        X_test, _ = link_transitions(test)
        n_rows = X_test.shape[0]
        freq = Y_train.mean(axis=0) if Y_train.size else np.ones(Y_train.shape[1])
    elif target == "load":
        _, L_train = load_pairs(train)
        S_test, _ = load_pairs(test)
        n_rows = S_test.shape[0]
        freq = L_train.mean(axis=0) if L_train.size else np.ones(L_train.shape[1])
    else:
        raise ValueError(f"unknown target {target!r}")
    if kind == "UNIFORM":
        pred = (freq >= 0.5).astype(np.int8)
        return np.tile(pred, (n_rows, 1))
    rng = np.random.Generator(np.random.Philox(key=pool.config.seed ^ 0xBA5EBA11))
    return (rng.random((n_rows, freq.size)) < freq[None, :]).astype(np.int8)


# ---------------------------------------------------------------------------
# persistence


def save_model(model, path=None) -> str:
    """Serialize a trained model to a single JSON document (row-major)."""
    if isinstance(model, LinkFailureIM):
        doc = {
            "kind": "link_failure_im",
            "n_branches": model.n_branches,
            "a11": model.a11.ravel().tolist(),
            "a01": model.a01.ravel().tolist(),
            "d": model.d.ravel().tolist(),
            "epsilon": model.epsilon.tolist(),
            "meta": model.meta,
        }
    elif isinstance(model, LoadShedIM):
        doc = {
            "kind": "load_shed_im",
            "n_branches": model.b11.shape[0],
            "n_buses": model.n_buses,
            "b11": model.b11.ravel().tolist(),
            "b01": model.b01.ravel().tolist(),
            "e": model.e.ravel().tolist(),
            "delta": model.delta.tolist(),
            "always_served": model.always_served.astype(int).tolist(),
            "meta": model.meta,
        }
    else:
        raise TypeError(f"not a trained model: {type(model)!r}")
    text = json.dumps(doc, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_model(source):
    """Load a model from a JSON string or file path."""
    text = source
    if not str(source).lstrip().startswith("{"):
        with open(source) as fh:
            text = fh.read()
    doc = json.loads(text)
    if doc["kind"] == "link_failure_im":
        n = doc["n_branches"]
        return LinkFailureIM(
            a11=np.array(doc["a11"]).reshape(n, n),
            a01=np.array(doc["a01"]).reshape(n, n),
            d=np.array(doc["d"]).reshape(n, n),
            epsilon=np.array(doc["epsilon"]),
            meta=doc.get("meta", {}),
        )
    if doc["kind"] == "load_shed_im":
        n_br, n_bus = doc["n_branches"], doc["n_buses"]
        return LoadShedIM(
            b11=np.array(doc["b11"]).reshape(n_br, n_bus),
            b01=np.array(doc["b01"]).reshape(n_br, n_bus),
            e=np.array(doc["e"]).reshape(n_bus, n_br),
            delta=np.array(doc["delta"]),
            always_served=np.array(doc["always_served"], dtype=bool),
            meta=doc.get("meta", {}),
        )
    raise ValueError(f"unknown model kind {doc.get('kind')!r}")


def export_matrices_csv(model) -> dict[str, str]:
    """Matrix CSV exports for heatmap inspection."""
    out = {}

    def to_csv(mat):
        buf = io.StringIO()
        writer = csv.writer(buf)
        for row in np.asarray(mat):
            writer.writerow([f"{v:.6g}" for v in row])
        return buf.getvalue()

    if isinstance(model, LinkFailureIM):
        out["d"] = to_csv(model.d)
        out["a11"] = to_csv(model.a11)
        out["a01"] = to_csv(model.a01)
    elif isinstance(model, LoadShedIM):
        out["e"] = to_csv(model.e)
        out["b11"] = to_csv(model.b11)
        out["b01"] = to_csv(model.b01)
    else:
        raise TypeError(f"not a trained model: {type(model)!r}")
    return out
