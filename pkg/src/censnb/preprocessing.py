from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    """Column means and scales learned on training covariates.

    Constant columns get scale 1 so they map to 0 instead of dividing by 0.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            return cls(np.zeros(X.shape[1]), np.ones(X.shape[1]))
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["mean"], dtype=float),
                   np.asarray(doc["scale"], dtype=float))
