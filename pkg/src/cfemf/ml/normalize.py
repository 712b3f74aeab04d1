"""Feature scaling for the power-control networks.

Inputs are centered on the median and divided by the interquartile range;
outputs (powers in W) go to dB with a floor and are then min-max scaled per
feature.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.preprocessing import RobustScaler
from sklearn.utils.validation import check_array, check_is_fitted

from ..scenario import dbm_to_watt

__all__ = ["InputNormalizer", "OutputNormalizer"]


class InputNormalizer(TransformerMixin, BaseEstimator):
    """Median/IQR scaling (quartiles by linear interpolation).

    Features whose IQR is zero are only centered; their indices are kept in
    ``flagged_``.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        scaler = RobustScaler(quantile_range=(25.0, 75.0)).fit(X)
        q1, q3 = np.percentile(X, [25.0, 75.0], axis=0)
        self.center_ = scaler.center_.copy()
        self.iqr_ = q3 - q1
        self.flagged_ = np.flatnonzero(self.iqr_ <= 0)
        self.scale_ = np.where(self.iqr_ > 0, self.iqr_, 1.0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.center_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        return np.asarray(X, dtype=float) * self.scale_ + self.center_

    def state(self):
        return {"center": self.center_.tolist(), "iqr": self.iqr_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls()
        obj.center_ = np.asarray(state["center"], dtype=float)
        obj.iqr_ = np.asarray(state["iqr"], dtype=float)
        obj.flagged_ = np.flatnonzero(obj.iqr_ <= 0)
        obj.scale_ = np.where(obj.iqr_ > 0, obj.iqr_, 1.0)
        obj.n_features_in_ = obj.center_.size
        return obj


class OutputNormalizer(TransformerMixin, BaseEstimator):
    """Powers (W) -> dB clamped at ``floor_dbm`` -> per-feature min-max.

    Parameters
    ----------
    floor_dbm : float
        Powers below this level are treated as the floor (zero would map to
        minus infinity).
    """

    def __init__(self, floor_dbm=-80.0):
        self.floor_dbm = floor_dbm

    def _db(self, Y):
        floor = dbm_to_watt(self.floor_dbm)
        return 10.0 * np.log10(np.maximum(np.asarray(Y, dtype=float), floor))

    def fit(self, Y, y=None):
        Y = check_array(Y, dtype=np.float64)
        db = self._db(Y)
        self.min_ = db.min(axis=0)
        self.max_ = db.max(axis=0)
        # a constant feature has no range; keep a unit span so min < max holds
        self.flagged_ = np.flatnonzero(self.max_ <= self.min_)
        self.max_ = np.where(self.max_ > self.min_, self.max_, self.min_ + 1.0)
        self.n_features_in_ = Y.shape[1]
        return self

    def transform(self, Y):
        check_is_fitted(self, "min_")
        Y = check_array(Y, dtype=np.float64)
        return (self._db(Y) - self.min_) / (self.max_ - self.min_)

    def inverse_transform(self, Z):
        check_is_fitted(self, "min_")
        db = np.asarray(Z, dtype=float) * (self.max_ - self.min_) + self.min_
        return 10.0 ** (db / 10.0)

    def state(self):
        return {"floor_dbm": float(self.floor_dbm), "min": self.min_.tolist(),
                "max": self.max_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(floor_dbm=state["floor_dbm"])
        obj.min_ = np.asarray(state["min"], dtype=float)
        obj.max_ = np.asarray(state["max"], dtype=float)
        obj.flagged_ = np.array([], dtype=int)
        obj.n_features_in_ = obj.min_.size
        return obj
