"""Random standard-form LP instances with certified optima.

Instances follow the classic construction: draw a constraint matrix ``A``
with i.i.d. mean-zero unit-variance entries, pick complementary nonnegative
vectors ``x_hat = (u1, 0)`` and ``s_hat = (0, u2)``, and set ``b = A x_hat``
and ``c = s_hat`` so that ``(x_hat, s_hat)`` is a primal-dual optimal pair by
construction.  When the basis block ``B`` (the first m columns) is
numerically full-rank and ``u > 0``, the optimum is unique and the optimal
basis is the first m indices.

Optionally the objective is replaced during assembly by the minimum-norm
equivalent ``c_bar = s_hat + A^T y_hat`` (which satisfies ``A c_bar = 0``),
with the dual certificate ``y_star = y_hat``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernel
from .errors import CertificationError, InstanceParseError, InstanceValidationError
from .linalg import min_norm_presolve
from .rng import derive_seed, folded_normals, make_rng, standard_normals

__all__ = [
    "MatrixDistribution",
    "SolutionDistribution",
    "LpInstance",
    "sample_matrix",
    "sample_entries",
    "sample_solution",
    "assemble",
    "gen_instance",
    "gen_disparity",
    "disparity_ratio_level",
    "save_instance",
    "load_instance",
    "write_mps",
    "validate_instance",
]

MATRIX_KINDS = ("gaussian", "rademacher", "uniform_unit_var")
SOLUTION_KINDS = ("folded_gaussian", "fixed_vector", "disparity_level")

# Default sub-Gaussian parameters per matrix entry law (informational).
_SIGMA_A = {"gaussian": 1.0, "rademacher": 1.0, "uniform_unit_var": float(np.sqrt(3.0))}

FORMAT_VERSION = 1

# Certification threshold: singular values of B below this fraction of
# sigma_max(B) count as zero, mirroring the rank threshold in linalg.
CERT_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class MatrixDistribution:
    """Entry law for the constraint matrix (i.i.d., mean zero, unit variance)."""

    kind: str = "gaussian"
    sigma_A: float = 0.0  # 0 means "use the default for the kind"

    def __post_init__(self):
        if self.kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix distribution {self.kind!r}; choose from {MATRIX_KINDS}")
        if self.sigma_A == 0.0:
            object.__setattr__(self, "sigma_A", _SIGMA_A[self.kind])
        if self.sigma_A <= 0.0:
            raise ValueError("sigma_A must be positive")


@dataclass(frozen=True)
class SolutionDistribution:
    """Law for the positive optimal-solution components ``u``."""

    kind: str = "folded_gaussian"
    fixed_values: Optional[np.ndarray] = None
    level_l: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SOLUTION_KINDS:
            raise ValueError(f"unknown solution distribution {self.kind!r}; choose from {SOLUTION_KINDS}")
        if self.kind == "fixed_vector":
            if self.fixed_values is None:
                raise ValueError("fixed_vector requires fixed_values")
            vals = np.asarray(self.fixed_values, dtype=np.float64)
            if vals.ndim != 1 or np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError("fixed_values must be a finite nonnegative vector")
            object.__setattr__(self, "fixed_values", vals)
        if self.kind == "disparity_level":
            if self.level_l is None or int(self.level_l) < 0:
                raise ValueError("disparity_level requires level_l >= 0")
            object.__setattr__(self, "level_l", int(self.level_l))


@dataclass
class LpInstance:
    """Standard-form LP ``min c'x s.t. Ax = b, x >= 0`` with certified optimum.

    ``basis`` holds the zero-based optimal basis column indices ({0..m-1}
    unless the instance was generated with a column shuffle).  ``meta``
    records distribution descriptors and the certification outcome.
    """

    m: int
    n: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x_star: np.ndarray
    s_star: np.ndarray
    y_star: np.ndarray
    basis: np.ndarray
    seed: int
    presolved: bool
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.n - self.m

    @property
    def certified(self) -> bool:
        return bool(self.meta.get("certified", False))


def sample_entries(m: int, n: int, dist: MatrixDistribution, rng: np.random.Generator) -> np.ndarray:
    """m-by-n array of i.i.d. entries from ``dist`` (no shape constraints)."""
    size = int(m) * int(n)
    if dist.kind == "gaussian":
        flat = standard_normals(rng, size)
    elif dist.kind == "rademacher":
        flat = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    else:  # uniform on [-sqrt(3), sqrt(3)], unit variance
        flat = (2.0 * rng.random(size) - 1.0) * np.sqrt(3.0)
    return np.ascontiguousarray(flat.reshape(int(m), int(n)))


def sample_matrix(m: int, n: int, dist: MatrixDistribution, seed: int) -> np.ndarray:
    """Constraint matrix with i.i.d. entries from ``dist``; deterministic in ``seed``.

    Requires ``1 <= m < n`` (a standard-form LP needs at least one nonbasic
    column).
    """
    if not 1 <= m < n:
        raise ValueError(f"sample_matrix: need 1 <= m < n, got m={m}, n={n}")
    return sample_entries(m, n, dist, make_rng(seed))


def _disparity_u(m: int, level: int) -> np.ndarray:
    small = m // 2
    return np.concatenate([np.full(small, 4.0 ** (-level)), np.ones(m - small)])


def disparity_ratio_level(m: int, level: int) -> float:
    """Disparity ratio of the level-``level`` family: mean(u)/min(u) for n = 2m.

    With ``k = floor(m/2)`` small entries of ``4**-level`` in each block,
    the mean is ``(k 4**-level + (m-k)) / m`` and the min is ``4**-level``,
    so the ratio is ``k/m + (1 - k/m) 4**level`` (1 at level 0, roughly
    ``4**level / 2`` for large levels).
    """
    frac = (m // 2) / m
    return frac + (1.0 - frac) * 4.0 ** level


def sample_solution(m: int, d: int, dist: SolutionDistribution, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Optimal-solution pair ``x_hat = (u1, 0_d)``, ``s_hat = (0_m, u2)``.

    ``u = (u1, u2)`` is drawn from ``dist``: folded standard normals, a fixed
    nonnegative vector of length ``m + d``, or the two-block disparity family
    (which requires ``d == m`` and uses the same block for ``u1`` and ``u2``).
    """
    if m < 1 or d < 1:
        raise ValueError(f"sample_solution: need m >= 1 and d >= 1, got m={m}, d={d}")
    n = m + d
    if dist.kind == "folded_gaussian":
        u = folded_normals(make_rng(seed), n)
    elif dist.kind == "fixed_vector":
        u = np.asarray(dist.fixed_values, dtype=np.float64)
        if u.shape != (n,):
            raise ValueError(f"fixed_values has length {u.size}, expected m + d = {n}")
    else:  # disparity_level
        if d != m:
            raise ValueError(f"disparity_level requires d == m (n = 2m), got m={m}, d={d}")
        block = _disparity_u(m, dist.level_l)
        u = np.concatenate([block, block])
    x_hat = np.concatenate([u[:m], np.zeros(d)])
    s_hat = np.concatenate([np.zeros(m), u[m:]])
    return x_hat, s_hat


def _certify_basis(B: np.ndarray) -> tuple[bool, float, float]:
    """Full-rank check on the basis block via its full singular spectrum."""
    eigs = kernel.jacobi_eigvals(B @ B.T)
    sigmas = np.sqrt(np.clip(eigs, 0.0, None))
    sigma_max = float(sigmas.max())
    sigma_min = float(sigmas.min())
    ok = sigma_max > 0.0 and sigma_min > CERT_RANK_RTOL * sigma_max
    return ok, sigma_max, sigma_min


def assemble(A, x_hat, s_hat, presolve: bool = False, seed: int = 0, *,
             dist_meta: Optional[dict] = None, presolve_rel_tol: float = 1e-10,
             shuffle_seed: Optional[int] = None) -> LpInstance:
    """Build a certified instance from a matrix and a complementary pair.

    Sets ``b = A x_hat`` and ``c = s_hat``, or the minimum-norm equivalent
    objective when ``presolve`` is set (then ``y_star`` is the presolve
    multiplier).  Certifies the unique-optimum precondition (full-rank basis
    block and strictly positive ``u``) and records the outcome in ``meta``.

    Raises ``CertificationError`` when the basis block is numerically
    singular; the caller may resample.  Never retries internally, so seeds
    stay meaningful.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    m, n = A.shape
    x_hat = np.asarray(x_hat, dtype=np.float64)
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if x_hat.shape != (n,) or s_hat.shape != (n,):
        raise ValueError("assemble: x_hat and s_hat must have length n")
    if n - m < 1:
        raise ValueError(f"assemble: need n - m >= 1, got m={m}, n={n}")
    if np.any(x_hat < 0) or np.any(s_hat < 0):
        raise ValueError("assemble: x_hat and s_hat must be nonnegative")
    if float(x_hat @ s_hat) != 0.0:
        raise ValueError("assemble: x_hat and s_hat must have disjoint supports")

    basis_ok, sig_max_b, sig_min_b = _certify_basis(A[:, :m])
    if not basis_ok:
        raise CertificationError(
            f"assemble: basis block numerically singular (sigma_min={sig_min_b:.3e}, sigma_max={sig_max_b:.3e})"
        )
    u = x_hat + s_hat
    certified = bool(u.min() > 0.0)

    b = A @ x_hat
    if presolve:
        y_star, c = min_norm_presolve(A, s_hat, presolve_rel_tol)
    else:
        y_star = np.zeros(m)
        c = s_hat.copy()

    meta = {
        "certified": certified,
        "sigma_max_B": sig_max_b,
        "sigma_min_B": sig_min_b,
        "min_u": float(u.min()),
    }
    if presolve:
        meta["presolve_rel_tol"] = presolve_rel_tol
    if dist_meta:
        meta.update(dist_meta)

    x_star = x_hat.copy()
    s_star = s_hat.copy()
    basis = np.arange(m, dtype=np.int64)
    if shuffle_seed is not None:
        perm = make_rng(shuffle_seed).permutation(n)
        A = np.ascontiguousarray(A[:, perm])
        c = c[perm]
        x_star = x_star[perm]
        s_star = s_star[perm]
        basis = np.nonzero(perm < m)[0].astype(np.int64)
        meta["shuffle_perm"] = [int(p) for p in perm]

    inst = LpInstance(m=m, n=n, A=A, b=b, c=c, x_star=x_star, s_star=s_star,
                      y_star=y_star, basis=basis, seed=int(seed), presolved=bool(presolve),
                      meta=meta)
    validate_instance(inst)
    return inst


def gen_instance(m: int, n: int, matrix_dist: MatrixDistribution,
                 solution_dist: SolutionDistribution, seed: int,
                 presolve: bool = False, shuffle: bool = False) -> LpInstance:
    """Sample a full instance from one seed.

    The seed is split into independent child streams for the matrix, the
    solution vector and the optional column shuffle, so the instance is a
    pure function of its arguments.
    """
    A = sample_matrix(m, n, matrix_dist, derive_seed(seed, 0))
    x_hat, s_hat = sample_solution(m, n - m, solution_dist, derive_seed(seed, 1))
    dist_meta = {
        "matrix_dist": {"kind": matrix_dist.kind, "sigma_A": matrix_dist.sigma_A},
        "solution_dist": {"kind": solution_dist.kind, "level_l": solution_dist.level_l},
    }
    return assemble(A, x_hat, s_hat, presolve=presolve, seed=seed, dist_meta=dist_meta,
                    shuffle_seed=derive_seed(seed, 2) if shuffle else None)


def gen_disparity(m: int, level: int, matrix_dist: MatrixDistribution, seed: int,
                  presolve: bool = False) -> tuple[LpInstance, float]:
    """Instance of the disparity-controlled family (n = 2m) and its ratio.

    The positive components are ``floor(m/2)`` copies of ``4**-level`` padded
    with ones, used for both the primal and the dual block, so
    ``min_i(x*_i + s*_i) = 4**-level`` and the disparity ratio follows
    ``disparity_ratio_level``.
    """
    if m < 2:
        raise ValueError(f"gen_disparity: need m >= 2, got m={m}")
    if level < 0:
        raise ValueError(f"gen_disparity: need level >= 0, got {level}")
    sol = SolutionDistribution(kind="disparity_level", level_l=level)
    inst = gen_instance(m, 2 * m, matrix_dist, sol, seed, presolve=presolve)
    inst.meta["level_l"] = int(level)
    return inst, disparity_ratio_level(m, level)


def validate_instance(inst: LpInstance) -> None:
    """Check every structural invariant; raise ``InstanceValidationError`` if violated."""
    m, n = inst.m, inst.n
    A = inst.A
    if A.shape != (m, n):
        raise InstanceValidationError(f"A has shape {A.shape}, expected ({m}, {n})")
    if n - m < 1:
        raise InstanceValidationError(f"need d = n - m >= 1, got m={m}, n={n}")
    for name in ("A", "b", "c", "x_star", "s_star", "y_star"):
        arr = getattr(inst, name)
        if not np.all(np.isfinite(arr)):
            raise InstanceValidationError(f"{name} contains non-finite entries")
    if inst.b.shape != (m,) or inst.y_star.shape != (m,):
        raise InstanceValidationError("b and y_star must have length m")
    for name in ("c", "x_star", "s_star"):
        if getattr(inst, name).shape != (n,):
            raise InstanceValidationError(f"{name} must have length n")
    if np.any(inst.x_star < 0) or np.any(inst.s_star < 0):
        raise InstanceValidationError("x_star and s_star must be nonnegative")

    basis = np.asarray(inst.basis, dtype=np.int64)
    if basis.shape != (m,) or len(np.unique(basis)) != m or basis.min() < 0 or basis.max() >= n:
        raise InstanceValidationError("basis must be m distinct column indices")
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    if np.any(inst.x_star[~in_basis] != 0.0):
        raise InstanceValidationError("x_star must vanish outside the basis")
    if np.any(inst.s_star[in_basis] != 0.0):
        raise InstanceValidationError("s_star must vanish on the basis")

    if float(inst.x_star @ inst.s_star) != 0.0:
        raise InstanceValidationError("complementarity x_star' s_star = 0 must hold exactly")

    feas = np.linalg.norm(A @ inst.x_star - inst.b)
    feas_bound = 1e-12 * (1.0 + np.linalg.norm(A) * np.linalg.norm(inst.x_star))
    if feas > feas_bound:
        raise InstanceValidationError(f"primal feasibility residual {feas:.3e} exceeds {feas_bound:.3e}")

    dual = np.linalg.norm(A.T @ inst.y_star + inst.s_star - inst.c)
    dual_bound = 1e-10 * (1.0 + np.linalg.norm(inst.c))
    if dual > dual_bound:
        raise InstanceValidationError(f"dual feasibility residual {dual:.3e} exceeds {dual_bound:.3e}")

    if inst.presolved:
        ac = np.linalg.norm(A @ inst.c)
        ac_bound = 1e-8 * np.linalg.norm(A) * (1.0 + np.linalg.norm(inst.c))
        if ac > ac_bound:
            raise InstanceValidationError(f"presolve residual ||A c|| = {ac:.3e} exceeds {ac_bound:.3e}")


def _encode_reals(arr: np.ndarray) -> dict:
    """Lossless hex strings plus a decimal shadow for human readers."""
    if arr.ndim == 1:
        return {"hex": [float(v).hex() for v in arr], "dec": [float(v) for v in arr]}
    return {"hex": [[float(v).hex() for v in row] for row in arr],
            "dec": [[float(v) for v in row] for row in arr]}


def _decode_reals(obj, shape) -> np.ndarray:
    try:
        hexes = obj["hex"]
        if len(shape) == 1:
            vals = [float.fromhex(h) for h in hexes]
        else:
            vals = [[float.fromhex(h) for h in row] for row in hexes]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"bad real-array field: {exc}") from exc
    arr = np.asarray(vals, dtype=np.float64)
    if arr.shape != shape:
        raise InstanceParseError(f"real-array field has shape {arr.shape}, expected {shape}")
    return np.ascontiguousarray(arr)


def save_instance(inst: LpInstance, path) -> None:
    """Write the instance as self-describing JSON; the round trip is bit-exact."""
    doc = {
        "format_version": FORMAT_VERSION,
        "m": inst.m,
        "n": inst.n,
        "seed": inst.seed,
        "presolved": inst.presolved,
        "dist": {
            "matrix": inst.meta.get("matrix_dist"),
            "solution": inst.meta.get("solution_dist"),
        },
        "basis": [int(i) for i in inst.basis],
        "A": _encode_reals(inst.A),
        "b": _encode_reals(inst.b),
        "c": _encode_reals(inst.c),
        "x_star": _encode_reals(inst.x_star),
        "s_star": _encode_reals(inst.s_star),
        "y_star": _encode_reals(inst.y_star),
        "meta": {k: v for k, v in inst.meta.items() if k not in ("matrix_dist", "solution_dist")},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_instance(path) -> LpInstance:
    """Read an instance file; parse errors carry the offending position.

    Raises ``InstanceParseError`` for malformed files and
    ``InstanceValidationError`` when the decoded instance violates an
    invariant.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"not valid JSON: {exc.msg}", line=exc.lineno, offset=exc.colno) from exc
    if not isinstance(doc, dict):
        raise InstanceParseError("top-level JSON value must be an object")
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise InstanceParseError(f"unsupported format_version {version}")
        m = int(doc["m"])
        n = int(doc["n"])
        meta = dict(doc.get("meta", {}))
        dist = doc.get("dist", {})
        if dist.get("matrix") is not None:
            meta["matrix_dist"] = dist["matrix"]
        if dist.get("solution") is not None:
            meta["solution_dist"] = dist["solution"]
        inst = LpInstance(
            m=m,
            n=n,
            A=_decode_reals(doc["A"], (m, n)),
            b=_decode_reals(doc["b"], (m,)),
            c=_decode_reals(doc["c"], (n,)),
            x_star=_decode_reals(doc["x_star"], (n,)),
            s_star=_decode_reals(doc["s_star"], (n,)),
            y_star=_decode_reals(doc["y_star"], (m,)),
            basis=np.asarray(doc["basis"], dtype=np.int64),
            seed=int(doc["seed"]),
            presolved=bool(doc["presolved"]),
            meta=meta,
        )
    except InstanceParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"missing or malformed field: {exc}") from exc
    validate_instance(inst)
    return inst


def write_mps(inst: LpInstance, path, name: str = "RPDHGLAB") -> None:
    """Export (A, b, c) in fixed-format MPS with objective row COST.

    Carries no optimum metadata; variables keep the default x >= 0 bounds.
    """

    def fld(text, width):
        return str(text).ljust(width)

    def num(v):
        return f"{v:.6G}"

    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    for i in range(inst.m):
        lines.append(f" E  R{i + 1}")
    lines.append("COLUMNS")
    for j in range(inst.n):
        entries = []
        if inst.c[j] != 0.0:
            entries.append(("COST", inst.c[j]))
        for i in range(inst.m):
            if inst.A[i, j] != 0.0:
                entries.append((f"R{i + 1}", inst.A[i, j]))
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            line = "    " + fld(f"X{j + 1}", 10) + fld(pair[0][0], 10) + num(pair[0][1])
            if len(pair) == 2:
                line = line.ljust(39) + " " + fld(pair[1][0], 10) + num(pair[1][1])
            lines.append(line)
    lines.append("RHS")
    entries = [(f"R{i + 1}", inst.b[i]) for i in range(inst.m) if inst.b[i] != 0.0]
    for k in range(0, len(entries), 2):
        pair = entries[k : k + 2]
        line = "    " + fld("RHS", 10) + fld(pair[0][0], 10) + num(pair[0][1])
        if len(pair) == 2:
            line = line.ljust(39) + " " + fld(pair[1][0], 10) + num(pair[1][1])
        lines.append(line)
    lines.append("ENDATA")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
