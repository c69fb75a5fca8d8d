"""JSON model documents.

Floats are written with Python's shortest round-trip repr, so
``dumps(loads(text)) == text`` for any document this module wrote.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .solver import predict_at, resolve_lambda_index

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    pass


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _finite_or_str(v: float):
    # JSON has no inf/nan; keep them readable and reversible
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def plain(obj):
    """Convert numpy scalars/arrays inside a tree to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite_or_str(float(obj))
    return obj


@dataclass
class ModelDocument:
    """Everything needed to inspect a fitted path and predict from it.

    ``coefficients`` is p x m on the original feature scale; ``theta`` is
    None for a plain elastic-net fit.
    """

    config: dict
    lambdas: np.ndarray
    intercepts: np.ndarray
    coefficients: np.ndarray
    weights: np.ndarray
    theta: Optional[np.ndarray] = None
    history: Optional[np.ndarray] = None
    cv: Optional[dict] = None
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return self.config.get("family", "gaussian")

    def lambda_index(self, lambda_index=None, lambda_value=None) -> int:
        if lambda_index is None and lambda_value is None:
            if self.cv is None:
                raise DocumentError("no lambda given and the document has no CV summary")
            return int(self.cv["index_min"])
        return resolve_lambda_index(self.lambdas, lambda_index, lambda_value)

    def predict(self, x_new, lambda_index=None, lambda_value=None):
        idx = self.lambda_index(lambda_index, lambda_value)
        return predict_at(self.intercepts[idx], self.coefficients[:, idx], x_new, self.family)

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        tree: dict[str, Any] = {
            "schema_version": self.schema_version,
            "config": plain(self.config),
            "theta": None if self.theta is None else _floats(self.theta),
            "weights": _floats(self.weights),
            "lambdas": _floats(self.lambdas),
            "intercepts": _floats(self.intercepts),
            "coefficients": [_floats(row) for row in np.asarray(self.coefficients, dtype=float)],
            "history": None if self.history is None else [_finite_or_str(v) for v in _floats(self.history)],
            "cv": plain(self.cv),
        }
        if self.extra:
            tree["extra"] = plain(self.extra)
        return tree

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, tree: dict) -> "ModelDocument":
        try:
            version = tree["schema_version"]
            if version != SCHEMA_VERSION:
                raise DocumentError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
            lambdas = np.array(tree["lambdas"], dtype=float)
            m = lambdas.size
            coefs = np.array(tree["coefficients"], dtype=float).reshape(-1, m)
            doc = cls(
                config=tree["config"],
                lambdas=lambdas,
                intercepts=np.array(tree["intercepts"], dtype=float),
                coefficients=coefs,
                weights=np.array(tree["weights"], dtype=float),
                theta=None if tree["theta"] is None else np.array(tree["theta"], dtype=float),
                history=None if tree["history"] is None else np.array([float(v) for v in tree["history"]]),
                cv=tree.get("cv"),
                schema_version=version,
                extra=tree.get("extra", {}),
            )
        except (KeyError, TypeError) as exc:
            raise DocumentError(f"malformed model document: {exc!r}") from None
        if doc.intercepts.size != m:
            raise DocumentError(f"{doc.intercepts.size} intercepts for {m} lambdas")
        if doc.weights.size != coefs.shape[0]:
            raise DocumentError(f"{doc.weights.size} weights for {coefs.shape[0]} features")
        return doc

    @classmethod
    def loads(cls, text: str) -> "ModelDocument":
        try:
            tree = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"not a JSON document: {exc}") from None
        return cls.from_dict(tree)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def read(cls, path) -> "ModelDocument":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def document_from_fit(fit, config: dict, theta=None, history=None, cv=None) -> ModelDocument:
    """Build a document from an ElnetFit (original-scale path)."""
    b0, beta = fit.coef_path()
    return ModelDocument(
        config=dict(config),
        lambdas=np.array(fit.lambdas, dtype=float),
        intercepts=np.array(b0, dtype=float),
        coefficients=np.array(beta, dtype=float),
        weights=np.array(fit.weights, dtype=float),
        theta=None if theta is None else np.array(theta, dtype=float),
        history=None if history is None else np.array(history, dtype=float),
        cv=cv,
    )


def read_theta(path) -> np.ndarray:
    """theta from a bare JSON list, ``{"theta": [...]}``, or a model document."""
    try:
        with open(path, encoding="utf-8") as fh:
            tree = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: not JSON ({exc})") from None
    if isinstance(tree, dict):
        tree = tree.get("theta")
    if tree is None:
        raise DocumentError(f"{path}: no theta found")
    try:
        theta = np.array(tree, dtype=float).ravel()
    except (TypeError, ValueError):
        raise DocumentError(f"{path}: theta must be a list of numbers") from None
    return theta
