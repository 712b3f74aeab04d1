"""Power-control regressors: the end-to-end MLP and the unfolded cascade.

Both follow the scikit-learn estimator protocol (``fit``/``predict``,
``get_params``/``set_params``) and predict powers in W from FPC features.
Training minimizes the MAE between normalized predictions and normalized
labels with mini-batch Adam and keeps the best-validation parameters.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .mlp import (E2E_DL_HIDDEN, UNFOLDED_HIDDEN, AdamConfig, MlpParams, MlpSpec, adam_init,
                  adam_step, backward, forward, init_params)
from .normalize import InputNormalizer, OutputNormalizer

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "train_network",
    "PowerMLPRegressor",
    "UnfoldedPowerNet",
    "save_model",
    "load_model",
]

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    lr_decay: float = 0.1
    decay_epochs: tuple = (30, 45)
    max_epochs: int = 50
    batch_size: int = 256
    l2: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "decay_epochs", tuple(int(e) for e in self.decay_epochs))
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")

    def lr_at(self, epoch):
        """Learning rate for 0-based ``epoch``."""
        drops = sum(1 for e in self.decay_epochs if epoch >= e)
        return self.lr * self.lr_decay ** drops

    def to_dict(self):
        d = asdict(self)
        d["decay_epochs"] = list(self.decay_epochs)
        return d


def train_network(spec: MlpSpec, X, Y, tcfg: TrainConfig, X_val=None, Y_val=None):
    """Mini-batch Adam on the MAE loss; inputs and labels already normalized.

    The validation pair only selects the checkpoint; it never enters an
    update. Without it the training loss is used for the selection.

    Returns
    -------
    params : MlpParams
        Best-validation parameters.
    history : list of dict
        One record per epoch: ``epoch``, ``lr``, ``train_loss``, ``val_loss``.
    """
    rng = np.random.default_rng(tcfg.seed)
    # labels live in [0, 1]; starting the output ReLUs mid-range keeps them
    # from being dead at initialization
    params = init_params(spec, rng, output_bias=0.5)
    state = adam_init(params)
    adam = AdamConfig(tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps)
    n = X.shape[0]
    best, best_loss = params.copy(), np.inf
    history = []
    for epoch in range(tcfg.max_epochs):
        lr = tcfg.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tcfg.batch_size):
            idx = order[start:start + tcfg.batch_size]
            loss, grads = backward(params, spec, X[idx], Y[idx], tcfg.l2)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch offset {start}")
            params, state = adam_step(params, grads, state, adam, lr=lr)
            total += loss * idx.size
        train_loss = total / max(n, 1)
        if X_val is not None and len(X_val):
            val_loss = float(np.mean(np.abs(forward(params, spec, X_val) - Y_val)))
        else:
            val_loss = float("nan")
        score = val_loss if np.isfinite(val_loss) else train_loss
        if score < best_loss:
            best, best_loss = params.copy(), score
        history.append({"epoch": epoch + 1, "lr": lr, "train_loss": train_loss,
                        "val_loss": val_loss})
        log.debug("epoch %d lr %.1e train %.5f val %.5f", epoch + 1, lr, train_loss, val_loss)
    return best, history


class PowerMLPRegressor(RegressorMixin, BaseEstimator):
    """Fully-connected map from FPC powers to optimized powers (both in W).

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers. The first hidden layer is linear, the
        later ones and the output use ReLU.
    learning_rate, lr_decay, decay_epochs, max_epochs, batch_size, l2 :
        Training schedule, see :class:`TrainConfig`.
    floor_dbm : float
        Output dB floor.
    random_state : int
        Seeds initialization and shuffling; equal seeds give identical fits.
    """

    def __init__(self, hidden_layer_sizes=E2E_DL_HIDDEN, learning_rate=1e-3, lr_decay=0.1,
                 decay_epochs=(30, 45), max_epochs=50, batch_size=256, l2=1e-4,
                 floor_dbm=-80.0, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.decay_epochs = decay_epochs
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.l2 = l2
        self.floor_dbm = floor_dbm
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(lr=self.learning_rate, lr_decay=self.lr_decay,
                           decay_epochs=tuple(self.decay_epochs), max_epochs=self.max_epochs,
                           batch_size=self.batch_size, l2=self.l2,
                           seed=int(self.random_state or 0))

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, multi_output=True, dtype=np.float64)
        y = y.reshape(len(y), -1)
        self.input_norm_ = InputNormalizer().fit(X)
        self.output_norm_ = OutputNormalizer(self.floor_dbm).fit(y)
        self.spec_ = MlpSpec.pyramid(X.shape[1], tuple(self.hidden_layer_sizes), y.shape[1])
        Xv = Yv = None
        if X_val is not None:
            X_val, y_val = check_X_y(X_val, y_val, multi_output=True, dtype=np.float64)
            Xv = self.input_norm_.transform(X_val)
            Yv = self.output_norm_.transform(y_val.reshape(len(y_val), -1))
        self.params_, self.history_ = train_network(
            self.spec_, self.input_norm_.transform(X), self.output_norm_.transform(y),
            self.train_config(), Xv, Yv)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_normalized(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return forward(self.params_, self.spec_, self.input_norm_.transform(X))

    def predict(self, X):
        # the label range is [0, 1] after normalization; clip before leaving dB
        return self.output_norm_.inverse_transform(np.clip(self.predict_normalized(X), 0.0, 1.0))

    def normalized_mae(self, X, y):
        """MAE in the normalized label space (the training loss without l2)."""
        target = self.output_norm_.transform(np.asarray(y, dtype=float).reshape(len(y), -1))
        return float(np.mean(np.abs(self.predict_normalized(X) - target)))

    # serialization ----------------------------------------------------------
    def _state(self):
        return {
            "spec": self.spec_.to_dict(),
            "weights": [w.ravel().tolist() for w in self.params_.weights],
            "biases": [b.tolist() for b in self.params_.biases],
            "input_normalizer": self.input_norm_.state(),
            "output_normalizer": self.output_norm_.state(),
            "history": self.history_,
        }

    @classmethod
    def _from_state(cls, state, params):
        obj = cls(**params)
        spec = MlpSpec(tuple(state["spec"]["layer_sizes"]), tuple(state["spec"]["activations"]))
        s = spec.layer_sizes
        weights = [np.asarray(w, dtype=float).reshape(s[i], s[i + 1])
                   for i, w in enumerate(state["weights"])]
        obj.params_ = MlpParams(weights, [np.asarray(b, dtype=float) for b in state["biases"]])
        obj.params_.check(spec)
        obj.spec_ = spec
        obj.input_norm_ = InputNormalizer.from_state(state["input_normalizer"])
        obj.output_norm_ = OutputNormalizer.from_state(state["output_normalizer"])
        obj.history_ = state.get("history", [])
        obj.n_features_in_ = spec.n_inputs
        return obj


def _carry(stage, X):
    """What one unfolded stage hands to the next."""
    return np.clip(stage.predict_normalized(X), 0.0, 1.0)


class UnfoldedPowerNet(RegressorMixin, BaseEstimator):
    """Cascade of small networks, each refining the previous power estimate.

    Stage 1 reads the FPC powers; stage ``i`` reads the powers predicted by
    stage ``i - 1``, passed on in the normalized label space (clipped to
    ``[0, 1]``) so every later stage sees bounded inputs. Every stage is
    trained, in order, against the final optimized powers.
    """

    def __init__(self, n_stages=3, hidden_layer_sizes=UNFOLDED_HIDDEN, learning_rate=1e-3,
                 lr_decay=0.1, decay_epochs=(30, 45), max_epochs=50, batch_size=256, l2=1e-4,
                 floor_dbm=-80.0, random_state=0):
        self.n_stages = n_stages
        self.hidden_layer_sizes = hidden_layer_sizes
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.decay_epochs = decay_epochs
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.l2 = l2
        self.floor_dbm = floor_dbm
        self.random_state = random_state

    def _stage(self, i):
        params = self.get_params()
        params.pop("n_stages")
        params["random_state"] = int(self.random_state or 0) + i
        return PowerMLPRegressor(**params)

    def fit(self, X, y, X_val=None, y_val=None):
        if self.n_stages < 1:
            raise ValueError("n_stages must be >= 1")
        X, y = check_X_y(X, y, multi_output=True, dtype=np.float64)
        has_val = X_val is not None
        self.stages_ = []
        inputs, val_inputs = X, X_val
        for i in range(self.n_stages):
            stage = self._stage(i).fit(inputs, y, val_inputs, y_val if has_val else None)
            self.stages_.append(stage)
            inputs = _carry(stage, inputs)
            if has_val:
                val_inputs = _carry(stage, val_inputs)
        self.n_features_in_ = X.shape[1]
        return self

    def staged_predict(self, X):
        """Yield the power estimate after each stage."""
        check_is_fitted(self, "stages_")
        current = check_array(X, dtype=np.float64)
        for stage in self.stages_:
            yield stage.predict(current)
            current = _carry(stage, current)

    def predict(self, X, n_stages=None):
        n_stages = n_stages or len(self.stages_)
        out = None
        for i, out in enumerate(self.staged_predict(X), start=1):
            if i == n_stages:
                break
        return out

    def staged_normalized_mae(self, X, y, per_sample=False):
        """Test MAE (normalized label space) after each stage.

        With ``per_sample`` each entry is the per-row MAE array instead of the mean.
        """
        check_is_fitted(self, "stages_")
        maes, current = [], check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=float).reshape(len(y), -1)
        for stage in self.stages_:
            err = np.abs(stage.predict_normalized(current) - stage.output_norm_.transform(y))
            maes.append(err.mean(axis=1) if per_sample else float(err.mean()))
            current = _carry(stage, current)
        return maes


def save_model(path, model, provenance=None):
    """Write ``model`` as one JSON document (temp file then rename)."""
    if isinstance(model, UnfoldedPowerNet):
        check_is_fitted(model, "stages_")
        stages = [s._state() for s in model.stages_]
        kind = "unfolded"
    else:
        check_is_fitted(model, "params_")
        stages = [model._state()]
        kind = "e2e"
    params = model.get_params()
    params["hidden_layer_sizes"] = list(params["hidden_layer_sizes"])
    params["decay_epochs"] = list(params["decay_epochs"])
    doc = {"format": "cfemf-model-1", "kind": kind, "estimator_params": params,
           "stages": stages, "provenance": provenance or {}}
    tmp = f"{path}.part"
    try:
        with open(tmp, "w") as fh:
            json.dump(doc, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(model, provenance)``."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "cfemf-model-1":
        raise ValueError(f"{path}: not a model file")
    params = dict(doc["estimator_params"])
    params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
    params["decay_epochs"] = tuple(params["decay_epochs"])
    if doc["kind"] == "unfolded":
        model = UnfoldedPowerNet(**params)
        stage_params = dict(params)
        stage_params.pop("n_stages")
        model.stages_ = [PowerMLPRegressor._from_state(s, stage_params) for s in doc["stages"]]
        model.n_features_in_ = model.stages_[0].n_features_in_
    else:
        model = PowerMLPRegressor._from_state(doc["stages"][0], params)
    return model, doc.get("provenance", {})
