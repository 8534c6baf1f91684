"""Adapters that turn trained models into next-view policies.

Each adapter scores the eight directions from the current state vector and
takes the best-scoring one that stays inside the workspace.
"""
from __future__ import annotations

import numpy as np

from ..policies import PolicyContext, PolicyDecision
from ..sim import ExplorationState
from ..viewsphere import DIRECTION_ORDER, neighbor_pose
from .features import state_vector
from .io import load_model
from .linear import LDAClassifier, LogisticClassifier, PCAModel, pca_transform
from .qnet import QNetwork

__all__ = [
    "make_classifier_policy",
    "make_q_policy",
    "policy_from_file",
    "save_classifier",
    "save_qnet",
]


def _pick_valid(scores: np.ndarray, state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    order = np.argsort(-scores, kind="stable")
    for a in order:
        d = DIRECTION_ORDER[int(a)]
        pose = neighbor_pose(state.pose, d, ctx.cfg.viewsphere)
        if pose is not None:
            return PolicyDecision(pose, 1, d, info={"score": float(scores[a])})
    raise RuntimeError("no valid move from pose")


def make_classifier_policy(pca: PCAModel, clf):
    """Policy from a direction classifier operating in PCA space."""

    def policy(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
        ml = ctx.cfg.ml
        s = state_vector(state.model, state.pose, ml.haf_grid_n, ml.haf_region_m)
        z = pca_transform(pca, s[None, :])
        scores = clf.decision_scores(z)[0]
        return _pick_valid(scores, state, ctx)

    return policy


def make_q_policy(net: QNetwork):
    """Greedy policy over a trained Q-network."""

    def policy(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
        ml = ctx.cfg.ml
        s = state_vector(state.model, state.pose, ml.haf_grid_n, ml.haf_region_m)
        scores = net.forward(s)[0]
        return _pick_valid(scores, state, ctx)

    return policy


def save_classifier(path, pca: PCAModel, clf, meta: dict) -> None:
    from .io import save_model

    arrays = {"pca_mean": pca.mean, "pca_components": pca.components}
    if isinstance(clf, LogisticClassifier):
        kind = "logreg"
        arrays["W"] = clf.W
        arrays["b"] = clf.b
    elif isinstance(clf, LDAClassifier):
        kind = "lda"
        arrays["means"] = clf.means
        arrays["precision"] = clf.precision
        arrays["log_priors"] = clf.log_priors
    else:
        raise TypeError(f"unsupported classifier {type(clf).__name__}")
    save_model(path, kind, arrays, meta)


def save_qnet(path, net: QNetwork, meta: dict) -> None:
    from .io import save_model

    arrays = {}
    for i, (w, b) in enumerate(zip(net.W, net.b)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    meta = dict(meta)
    meta["sizes"] = list(net.sizes)
    save_model(path, "qnet", arrays, meta)


def policy_from_file(path) -> tuple[str, object, dict]:
    """Load any saved model and wrap it as a policy.

    Returns (kind, policy callable, meta). meta["objects"] lists the meshes
    the model was trained on, for train/test separation checks.
    """
    kind, arrays, meta = load_model(path)
    if kind in ("logreg", "lda"):
        pca = PCAModel(arrays["pca_mean"], arrays["pca_components"])
        if kind == "logreg":
            clf = LogisticClassifier(arrays["b"].shape[0])
            clf.W = arrays["W"]
            clf.b = arrays["b"]
        else:
            clf = LDAClassifier(arrays["means"].shape[0])
            clf.means = arrays["means"]
            clf.precision = arrays["precision"]
            clf.log_priors = arrays["log_priors"]
        return kind, make_classifier_policy(pca, clf), meta
    if kind == "qnet":
        net = QNetwork(meta["sizes"], seed=0)
        net.W = [arrays[f"W{i}"] for i in range(len(net.sizes) - 1)]
        net.b = [arrays[f"b{i}"] for i in range(len(net.sizes) - 1)]
        return kind, make_q_policy(net), meta
    raise ValueError(f"unknown model kind {kind!r}")
