"""Plant model, cost weights and constraint structure of the control problem.

The stage cost is ``0.5 * (x'Qx + u'Ru + 2 x'Su)`` with terminal weight
``Q_N`` and, when soft-constrained state components exist, the slack penalty
``sigma1 * 1'delta + sigma2 * ||delta||^2`` added per stage.  State components
are partitioned into free, hard-box and soft-interval index sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, ValidationError

PSD_TOL = -1e-10


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def _frozen_idx(a) -> np.ndarray:
    out = np.array(sorted(a), dtype=int)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LtiModel:
    """Discrete-time update ``x+ = a_d x + b_d u``."""

    a_d: np.ndarray
    b_d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a_d", _frozen(self.a_d))
        object.__setattr__(self, "b_d", _frozen(self.b_d))
        if self.a_d.ndim != 2 or self.a_d.shape[0] != self.a_d.shape[1]:
            raise DimensionError("a_d must be square")
        if self.b_d.ndim != 2 or self.b_d.shape[0] != self.a_d.shape[0]:
            raise DimensionError("b_d row count must match a_d")

    @property
    def n_x(self) -> int:
        return self.a_d.shape[0]

    @property
    def n_u(self) -> int:
        return self.b_d.shape[1]


@dataclass(frozen=True)
class CostWeights:
    q: np.ndarray
    r: np.ndarray
    s: np.ndarray
    q_n: np.ndarray
    sigma1: float = 0.0
    sigma2: float = 0.0

    def __post_init__(self):
        for name in ("q", "r", "s", "q_n"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n_x, n_u = self.q.shape[0], self.r.shape[0]
        if self.q.shape != (n_x, n_x) or self.q_n.shape != (n_x, n_x):
            raise DimensionError("q and q_n must be square with equal size")
        if self.r.shape != (n_u, n_u):
            raise DimensionError("r must be square")
        if self.s.shape != (n_x, n_u):
            raise DimensionError("s must be n_x by n_u")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValidationError("sigma1 and sigma2 must be nonnegative")


@dataclass(frozen=True)
class ConstraintSpec:
    """Input box plus the free/hard/soft partition of the state components.

    Index sets are 0-based here; the JSON interchange format is 1-based.
    ``x_min``/``x_max`` run over the hard set, ``x_center``/``x_radius`` over
    the soft set, both in index order.
    """

    u_min: np.ndarray
    u_max: np.ndarray
    free_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    hard_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    soft_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    x_min: np.ndarray = field(default_factory=lambda: np.array([]))
    x_max: np.ndarray = field(default_factory=lambda: np.array([]))
    x_center: np.ndarray = field(default_factory=lambda: np.array([]))
    x_radius: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self):
        for name in ("u_min", "u_max", "x_min", "x_max", "x_center", "x_radius"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("free_idx", "hard_idx", "soft_idx"):
            object.__setattr__(self, name, _frozen_idx(getattr(self, name)))
        if self.u_min.shape != self.u_max.shape or self.u_min.ndim != 1:
            raise DimensionError("u_min/u_max must be 1-d with equal length")
        if not (self.u_min < self.u_max).all():
            raise ValidationError("u_min must be strictly below u_max")
        if self.x_min.shape != (len(self.hard_idx),) or self.x_max.shape != (len(self.hard_idx),):
            raise DimensionError("x_min/x_max must match the hard index set")
        if len(self.hard_idx) and not (self.x_min < self.x_max).all():
            raise ValidationError("x_min must be strictly below x_max")
        if self.x_center.shape != (len(self.soft_idx),) or self.x_radius.shape != (len(self.soft_idx),):
            raise DimensionError("x_center/x_radius must match the soft index set")
        if len(self.soft_idx) and not (self.x_radius > 0).all():
            raise ValidationError("soft radii must be positive")

    @property
    def n_u(self) -> int:
        return len(self.u_min)

    def check_partition(self, n_x: int):
        union = np.concatenate([self.free_idx, self.hard_idx, self.soft_idx])
        if len(union) != len(set(union.tolist())):
            raise ValidationError("free/hard/soft index sets must be pairwise disjoint")
        if sorted(union.tolist()) != list(range(n_x)):
            raise ValidationError(f"index sets must partition 0..{n_x - 1}")


@dataclass(frozen=True)
class MpcProblem:
    model: LtiModel
    weights: CostWeights
    constraints: ConstraintSpec
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.weights.q.shape[0] != self.model.n_x:
            raise DimensionError("weight dimensions do not match the model state size")
        if self.weights.r.shape[0] != self.model.n_u:
            raise DimensionError("weight dimensions do not match the model input size")
        if self.constraints.n_u != self.model.n_u:
            raise DimensionError("input bound dimensions do not match the model")
        self.constraints.check_partition(self.model.n_x)

    @property
    def n_x(self) -> int:
        return self.model.n_x

    @property
    def n_u(self) -> int:
        return self.model.n_u

    @property
    def n_soft(self) -> int:
        return len(self.constraints.soft_idx)

    def input_constrained_only(self) -> bool:
        return len(self.constraints.hard_idx) == 0 and self.n_soft == 0


@dataclass(frozen=True)
class CheckResult:
    name: str
    min_eig: float
    ok: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]
    ok: bool

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]


def validate(p: MpcProblem) -> ValidationReport:
    """Eigenvalue checks for joint convexity; returns a report, never raises.

    Q and Q_N must be positive semidefinite, R positive definite, and the
    stacked stage-cost matrix [[Q, S], [S', R]] positive semidefinite.
    """
    w = p.weights
    joint = np.block([[w.q, w.s], [w.s.T, w.r]])
    checks = []
    for name, mat, strict in (
        ("Q", w.q, False),
        ("Q_N", w.q_n, False),
        ("R", w.r, True),
        ("[Q S; S' R]", joint, False),
    ):
        min_eig = float(np.linalg.eigvalsh(0.5 * (mat + mat.T)).min())
        ok = min_eig > abs(PSD_TOL) if strict else min_eig >= PSD_TOL
        checks.append(CheckResult(name, min_eig, ok))
    return ValidationReport(tuple(checks), all(c.ok for c in checks))


def require_valid(p: MpcProblem) -> MpcProblem:
    report = validate(p)
    if not report.ok:
        raise ValidationError(f"convexity validation failed for: {', '.join(report.failures())}")
    return p


def discretize_zoh(a_c: np.ndarray, b_c: np.ndarray, ts: float) -> LtiModel:
    """Zero-order-hold discretization via the augmented matrix exponential.

    ``expm([[A, B], [0, 0]] * Ts)`` holds ``A_d`` in the top-left block and
    ``B_d = (int_0^Ts e^{A tau} dtau) B`` in the top-right block.
    """
    a_c = np.asarray(a_c, dtype=float)
    b_c = np.asarray(b_c, dtype=float)
    if a_c.ndim != 2 or a_c.shape[0] != a_c.shape[1]:
        raise DimensionError("a_c must be square")
    if b_c.ndim != 2 or b_c.shape[0] != a_c.shape[0]:
        raise DimensionError("b_c row count must match a_c")
    if ts <= 0:
        raise ValidationError("sampling time must be positive")
    n_x, n_u = a_c.shape[0], b_c.shape[1]
    aug = np.zeros((n_x + n_u, n_x + n_u))
    aug[:n_x, :n_x] = a_c
    aug[:n_x, n_x:] = b_c
    phi = expm(aug * ts)
    return LtiModel(a_d=phi[:n_x, :n_x], b_d=phi[:n_x, n_x:])


def augment_for_rate_constraints(p: MpcProblem, du_min, du_max) -> MpcProblem:
    """Remodel input-rate bounds as an augmented-state problem.

    The new state is (x, u_prev), the new input is du, with
    ``x+ = A x + B (u_prev + du)`` and ``u_prev+ = u_prev + du``.  The former
    input box becomes hard state bounds on the u_prev components, and the
    weights are transformed so the cost on the original (x, u) trajectory is
    preserved exactly.
    """
    du_min = np.asarray(du_min, dtype=float)
    du_max = np.asarray(du_max, dtype=float)
    if du_min.shape != (p.n_u,) or du_max.shape != (p.n_u,):
        raise DimensionError("rate bounds must have length n_u")
    if not (du_min < du_max).all():
        raise ValidationError("du_min must be strictly below du_max")

    n_x, n_u = p.n_x, p.n_u
    a, b = p.model.a_d, p.model.b_d
    a_aug = np.block([[a, b], [np.zeros((n_u, n_x)), np.eye(n_u)]])
    b_aug = np.vstack([b, np.eye(n_u)])

    w = p.weights
    # Stage cost with u = u_prev + du:
    #   x'Qx + u'Ru + 2 x'Su
    # = [x;u_prev]' [[Q, S],[S', R]] [x;u_prev] + 2 [x;u_prev]' [[S],[R]] du + du'R du
    q_aug = np.block([[w.q, w.s], [w.s.T, w.r]])
    s_aug = np.vstack([w.s, w.r])
    qn_aug = np.block(
        [[w.q_n, np.zeros((n_x, n_u))], [np.zeros((n_u, n_x)), np.zeros((n_u, n_u))]]
    )
    weights = CostWeights(q=q_aug, r=w.r, s=s_aug, q_n=qn_aug, sigma1=w.sigma1, sigma2=w.sigma2)

    c = p.constraints
    uprev_idx = np.arange(n_x, n_x + n_u)
    constraints = ConstraintSpec(
        u_min=du_min,
        u_max=du_max,
        free_idx=c.free_idx,
        hard_idx=np.concatenate([c.hard_idx, uprev_idx]),
        soft_idx=c.soft_idx,
        x_min=np.concatenate([c.x_min, c.u_min]),
        x_max=np.concatenate([c.x_max, c.u_max]),
        x_center=c.x_center,
        x_radius=c.x_radius,
    )
    aug = MpcProblem(LtiModel(a_aug, b_aug), weights, constraints, p.horizon)
    return require_valid(aug)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

_INF = {"inf": np.inf, "-inf": -np.inf}


def _bounds_in(values) -> list[float]:
    out = []
    for v in values:
        if isinstance(v, str):
            if v not in _INF:
                raise ValidationError(f"bad bound sentinel {v!r}; use 'inf' or '-inf'")
            out.append(_INF[v])
        else:
            out.append(float(v))
    return out


def _bounds_out(values: np.ndarray) -> list:
    return [("inf" if v == np.inf else "-inf" if v == -np.inf else float(v)) for v in values]


def _take(d: dict, section: str, keys: dict[str, bool]):
    unknown = set(d) - set(keys)
    if unknown:
        raise ValidationError(f"unknown keys in {section}: {sorted(unknown)}")
    missing = {k for k, required in keys.items() if required} - set(d)
    if missing:
        raise ValidationError(f"missing keys in {section}: {sorted(missing)}")


def problem_from_dict(doc: dict) -> MpcProblem:
    """Build and validate a problem from its JSON document form.

    Matrices are row-major nested arrays, index sets are 1-based, bounds may
    use the "inf"/"-inf" sentinels.  Unknown keys are rejected.
    """
    _take(doc, "problem", {"name": False, "model": True, "weights": True, "constraints": True, "horizon": True})
    _take(doc["model"], "model", {"a_d": True, "b_d": True})
    _take(
        doc["weights"],
        "weights",
        {"q": True, "r": True, "s": False, "q_n": True, "sigma1": False, "sigma2": False},
    )
    _take(
        doc["constraints"],
        "constraints",
        {
            "u_min": True,
            "u_max": True,
            "free": False,
            "hard": False,
            "soft": False,
            "x_min": False,
            "x_max": False,
            "x_center": False,
            "x_radius": False,
        },
    )
    model = LtiModel(np.array(doc["model"]["a_d"]), np.array(doc["model"]["b_d"]))
    wd = doc["weights"]
    s = np.array(wd["s"]) if "s" in wd else np.zeros((model.n_x, model.n_u))
    weights = CostWeights(
        q=np.array(wd["q"]),
        r=np.array(wd["r"]),
        s=s,
        q_n=np.array(wd["q_n"]),
        sigma1=float(wd.get("sigma1", 0.0)),
        sigma2=float(wd.get("sigma2", 0.0)),
    )
    cd = doc["constraints"]

    def idx(key):
        return np.array([int(i) - 1 for i in cd.get(key, [])], dtype=int)

    constraints = ConstraintSpec(
        u_min=np.array(_bounds_in(cd["u_min"])),
        u_max=np.array(_bounds_in(cd["u_max"])),
        free_idx=idx("free"),
        hard_idx=idx("hard"),
        soft_idx=idx("soft"),
        x_min=np.array(_bounds_in(cd.get("x_min", []))),
        x_max=np.array(_bounds_in(cd.get("x_max", []))),
        x_center=np.array([float(v) for v in cd.get("x_center", [])]),
        x_radius=np.array([float(v) for v in cd.get("x_radius", [])]),
    )
    return require_valid(MpcProblem(model, weights, constraints, int(doc["horizon"])))


def problem_to_dict(p: MpcProblem, name: str | None = None) -> dict:
    c = p.constraints
    doc = {
        "model": {"a_d": p.model.a_d.tolist(), "b_d": p.model.b_d.tolist()},
        "weights": {
            "q": p.weights.q.tolist(),
            "r": p.weights.r.tolist(),
            "s": p.weights.s.tolist(),
            "q_n": p.weights.q_n.tolist(),
            "sigma1": p.weights.sigma1,
            "sigma2": p.weights.sigma2,
        },
        "constraints": {
            "u_min": _bounds_out(c.u_min),
            "u_max": _bounds_out(c.u_max),
            "free": [int(i) + 1 for i in c.free_idx],
            "hard": [int(i) + 1 for i in c.hard_idx],
            "soft": [int(i) + 1 for i in c.soft_idx],
            "x_min": _bounds_out(c.x_min),
            "x_max": _bounds_out(c.x_max),
            "x_center": c.x_center.tolist(),
            "x_radius": c.x_radius.tolist(),
        },
        "horizon": p.horizon,
    }
    if name:
        doc["name"] = name
    return doc


def load_problem(path: str | Path) -> MpcProblem:
    with open(path) as f:
        return problem_from_dict(json.load(f))


def save_problem(p: MpcProblem, path: str | Path, name: str | None = None):
    with open(path, "w") as f:
        json.dump(problem_to_dict(p, name), f, indent=2)
