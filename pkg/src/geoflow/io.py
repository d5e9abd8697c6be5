"""Model files, trajectory CSV files and atomic writes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .algebra import PAULI_SCALE, KrausSet, dagger
from .errors import DimensionError, GeoflowError, InvariantError
from .fields import GKLSModel
from .stability import SemigroupFamily, build_generator
from .statespace import diagnostics
from .flow import Trajectory


class ModelParseError(GeoflowError):
    """Model file is missing, not JSON, or fails the schema."""


_MATRIX = {
    "type": "object",
    "required": ["re"],
    "properties": {
        "re": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "im": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "additionalProperties": False,
}
_SCALAR = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "required": ["re"], "additionalProperties": False,
         "properties": {"re": {"type": "number"}, "im": {"type": "number"}}},
    ]
}

MODEL_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["n"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "n": {"type": "integer", "minimum": 2},
        "basis_convention": {"enum": ["orthonormal", "pauli"]},
        "hamiltonian": _MATRIX,
        "kraus": {"type": "array", "minItems": 1, "items": _MATRIX},
        "V": _MATRIX,
        "semigroup": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["poisson", "weighted_poisson", "gaussian",
                                  "weighted_gaussian", "random_unitary"]},
                "unitaries": {"type": "array", "items": _MATRIX},
                "vs": {"type": "array", "items": _MATRIX},
                "es": {"type": "array", "items": _MATRIX},
                "weights": {"type": "array", "items": _SCALAR},
                "beta": {"type": "number", "minimum": 0},
                "probs": {"type": "array", "items": {"type": "number"}},
                "hamiltonian": _MATRIX,
            },
            "additionalProperties": False,
        },
    },
    "oneOf": [{"required": ["kraus"]}, {"required": ["semigroup"]}],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["command", "basis_convention", "n"],
    "properties": {
        "command": {"enum": ["simulate", "decompose", "lasalle", "verify"]},
        "basis_convention": {"enum": ["orthonormal", "pauli"]},
        "n": {"type": "integer", "minimum": 2},
    },
}

CONVENTION_NOTES = {
    "orthonormal": "xi = I/n + sum_j x_j e_j with Tr(e_i e_j) = delta_ij (generalized Gell-Mann)",
    "pauli": "rho = (I + x . sigma)/2; x_pauli = sqrt(2) * x_orthonormal",
}


def _matrix(obj, n: int, what: str) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != (n, n) or im.shape != (n, n):
        raise DimensionError(f"{what} must be {n}x{n}, got re {re.shape}, im {im.shape}")
    return re + 1j * im


def _scalar(obj) -> complex:
    if isinstance(obj, dict):
        return complex(obj["re"], obj.get("im", 0.0))
    return complex(obj)


def encode_matrix(a) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


@dataclass
class ModelSpec:
    doc: dict
    model: GKLSModel
    family: SemigroupFamily | None
    convention: str

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def name(self) -> str:
        return self.doc.get("name", "unnamed")

    def to_internal(self, x) -> np.ndarray:
        """Convert user coordinates in the file's convention to orthonormal ones."""
        x = np.asarray(x, dtype=float)
        return x / PAULI_SCALE if self.convention == "pauli" else x

    def to_external(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * PAULI_SCALE if self.convention == "pauli" else x


def _family(spec: dict, n: int) -> SemigroupFamily:
    kind = spec["type"]
    mats = lambda key: [_matrix(m, n, f"semigroup.{key}") for m in spec.get(key, [])]  # noqa: E731
    H = _matrix(spec["hamiltonian"], n, "semigroup.hamiltonian") if "hamiltonian" in spec else None
    weights = [_scalar(w) for w in spec.get("weights", [])]
    if kind == "poisson":
        us = mats("unitaries")
        if len(us) != 1:
            raise InvariantError("poisson needs exactly one unitary")
        return SemigroupFamily.poisson(us[0])
    if kind == "gaussian":
        vs = mats("vs")
        if len(vs) != 1:
            raise InvariantError("gaussian needs exactly one operator in 'vs'")
        return SemigroupFamily.gaussian(vs[0])
    if kind == "weighted_poisson":
        return SemigroupFamily.weighted_poisson(weights, mats("unitaries"), H)
    if kind == "weighted_gaussian":
        return SemigroupFamily.weighted_gaussian(weights, mats("vs"), H)
    alphas = []
    for w in weights:
        if abs(w.imag) > 0:
            raise InvariantError("random_unitary weights alpha_j must be real")
        alphas.append(w.real)
    return SemigroupFamily.random_unitary(alphas, mats("es"), spec.get("beta", 0.0),
                                          spec.get("probs", []), mats("unitaries"), H)


def parse_model(doc: dict) -> ModelSpec:
    """Validate a model document and build the model. Schema problems raise ModelParseError."""
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ModelParseError(f"model file invalid: {exc.message}") from exc
    n = doc["n"]
    convention = doc.get("basis_convention", "orthonormal")
    if convention == "pauli" and n != 2:
        raise ModelParseError("basis_convention 'pauli' requires n = 2")
    family = None
    if "semigroup" in doc:
        family = _family(doc["semigroup"], n)
        model = build_generator(family)
    else:
        H = _matrix(doc["hamiltonian"], n, "hamiltonian") if "hamiltonian" in doc else None
        ks = KrausSet([_matrix(k, n, f"kraus[{i}]") for i, k in enumerate(doc["kraus"])])
        model = GKLSModel.build(H, ks)
    if "V" in doc:
        V = _matrix(doc["V"], n, "V")
        if np.abs(V - dagger(V)).max() > 1e-12:
            raise InvariantError("declared V is not self-adjoint")
        if np.linalg.eigvalsh(0.5 * (V + dagger(V)))[0] < -1e-10:
            raise InvariantError("declared V is not positive semidefinite")
        if np.abs(V - model.V).max() > 1e-10:
            raise InvariantError("declared V differs from the sum of v_j^† v_j")
    return ModelSpec(doc, model, family, convention)


def load_model(path) -> ModelSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelParseError(f"cannot read model file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"model file is not JSON: {exc}") from exc
    return parse_model(doc)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def atomic_write(path, data: str | bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_header(m: int) -> list[str]:
    return ["tau"] + [f"x_{j}" for j in range(1, m + 1)] + ["purity", "rank", "min_eig"]


def trajectory_csv(traj: Trajectory, basis, spec: ModelSpec | None = None) -> str:
    """CSV text; coordinates are written in the model's convention."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(basis.m))
    for tau, x in zip(traj.times, traj.points):
        d = diagnostics(x, basis)
        xo = spec.to_external(x) if spec is not None else x
        w.writerow([repr(float(tau))] + [repr(float(v)) for v in xo]
                   + [repr(d.purity), str(d.rank), repr(d.min_eigenvalue)])
    return buf.getvalue()


@dataclass
class TrajectoryTable:
    times: np.ndarray
    points: np.ndarray
    purity: np.ndarray
    rank: np.ndarray
    min_eig: np.ndarray


def read_trajectory_csv(path_or_text, is_text: bool = False) -> TrajectoryTable:
    text = path_or_text if is_text else Path(path_or_text).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ModelParseError("empty trajectory file")
    head = rows[0]
    if len(head) < 5 or head[0] != "tau" or head[-3:] != ["purity", "rank", "min_eig"]:
        raise ModelParseError(f"unexpected trajectory header {head}")
    m = len(head) - 4
    if head != csv_header(m):
        raise ModelParseError(f"unexpected trajectory header {head}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(head))
    except ValueError as exc:
        raise ModelParseError(f"malformed trajectory row: {exc}") from exc
    return TrajectoryTable(data[:, 0], data[:, 1:1 + m], data[:, -3], data[:, -2].astype(int), data[:, -1])
