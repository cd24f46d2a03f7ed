"""Closed-form nulling beamformers for near-field multiuser scenarios.

Weights are synthesized against normalized near-field steering vectors. The
received-gain convention is g(p) = w.T @ h(p) (no conjugation in the pairing),
so the distortionless/null constraint set C^H w = d uses conjugated steering
vectors as columns of C.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import lapack

from .array_model import ArrayConfig, PolarPosition, SteeringVector, steering_matrix

TWO_PI = 2.0 * np.pi

# Gram matrices estimated worse-conditioned than this are rejected.
CONDITION_LIMIT = 1e12


class DegenerateScenarioError(ValueError):
    """Raised when a constraint set is too ill-conditioned to invert reliably."""


def wrap_to_two_pi(x) -> np.ndarray:
    """Wrap angles into [0, 2*pi). np.mod can emit exactly 2*pi for tiny
    negative inputs, so those are snapped back to 0."""
    out = np.mod(np.asarray(x, dtype=np.float64), TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True)
class NcbfWeights:
    """A complex weight vector across the array.

    Takes ownership of the input buffer when it is already complex and
    contiguous: the array is marked read-only rather than copied.
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if entries.ndim != 1 or entries.size == 0:
            raise ValueError("weights must be a non-empty 1-D complex vector")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def num_elements(self) -> int:
        return self.entries.size

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.entries)

    @property
    def phases(self) -> np.ndarray:
        """Per-element phases wrapped into [0, 2*pi)."""
        return wrap_to_two_pi(np.angle(self.entries))


@dataclass(frozen=True)
class ScenarioConstraints:
    """Linear constraint set C^H w = d for one multiuser scenario.

    Column k of `constraint_matrix` is the conjugated steering vector of user
    k, so C^H w evaluates the received gains w.T @ h_k. `gain_vector` holds the
    target gains (one-hot at `desired_index` for a nulling scenario, but any
    real vector is accepted).
    """

    constraint_matrix: np.ndarray
    gain_vector: np.ndarray
    desired_index: int

    def __post_init__(self):
        c = np.ascontiguousarray(self.constraint_matrix, dtype=np.complex128)
        d = np.ascontiguousarray(self.gain_vector, dtype=np.float64)
        if c.ndim != 2:
            raise ValueError("constraint_matrix must be 2-D (num_elements, num_users)")
        if d.ndim != 1 or d.size != c.shape[1]:
            raise ValueError("gain_vector length must match the number of constraint columns")
        if c.shape[1] > c.shape[0]:
            raise ValueError(
                f"over-constrained scenario: {c.shape[1]} constraints for {c.shape[0]} elements"
            )
        if not 0 <= self.desired_index < c.shape[1]:
            raise ValueError(f"desired_index {self.desired_index} out of range for {c.shape[1]} users")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "constraint_matrix", c)
        object.__setattr__(self, "gain_vector", d)

    @property
    def num_elements(self) -> int:
        return self.constraint_matrix.shape[0]

    @property
    def num_users(self) -> int:
        return self.constraint_matrix.shape[1]


def mdb_weights(desired: SteeringVector) -> NcbfWeights:
    """Matched-filter beam toward one user: conjugate of its steering vector,
    normalized to unit power. Maximizes gain at the user but controls nothing
    elsewhere."""
    return unit_power_normalize(NcbfWeights(np.conj(desired.entries)))


def build_constraints(
    cfg: ArrayConfig, positions: Sequence[PolarPosition], desired_index: int
) -> ScenarioConstraints:
    """Assemble the nulling constraint set for one desired user and nulls at
    every other position.

    Raises
    ------
    DegenerateScenarioError
        If two positions coincide exactly (the constraint set would be singular).
    ValueError
        If there are more users than elements or `desired_index` is out of range.
    """
    positions = list(positions)
    if not positions:
        raise ValueError("at least one user position is required")
    if not 0 <= desired_index < len(positions):
        raise ValueError(f"desired_index {desired_index} out of range for {len(positions)} users")
    seen = set()
    for p in positions:
        key = (float(p.angle), float(p.range_m))
        if key in seen:
            raise DegenerateScenarioError(f"duplicate user position {key}")
        seen.add(key)
    angles = [p.angle for p in positions]
    ranges = [p.range_m for p in positions]
    c = np.conj(steering_matrix(cfg, angles, ranges))
    d = np.zeros(len(positions))
    d[desired_index] = 1.0
    return ScenarioConstraints(constraint_matrix=c, gain_vector=d, desired_index=desired_index)


def _cholesky_factor(g: np.ndarray):
    """Cholesky-factor a Hermitian positive-definite matrix and estimate its
    condition number (1-norm reciprocal estimate). Returns (factor, cond)."""
    anorm = np.abs(g).sum(axis=0).max()
    factor, info = lapack.zpotrf(g, lower=0, overwrite_a=0)
    if info != 0:
        return None, np.inf
    rcond, info = lapack.zpocon(factor, anorm)
    if info != 0 or rcond <= 0:
        return factor, np.inf
    return factor, 1.0 / rcond


def gram_condition_estimate(constraints: ScenarioConstraints, covariance=None) -> float:
    """Condition-number estimate of the Gram matrix C^H R^-1 C that
    lcmv_weights must invert. Returns inf if the Gram is not positive
    definite. Sampling code uses this as its acceptance guard so that every
    surviving scenario is solvable."""
    _, gram = _whitened_columns(constraints, covariance)
    _, cond = _cholesky_factor(gram)
    return cond


def _whitened_columns(constraints: ScenarioConstraints, covariance):
    """Return (R^-1 C, C^H R^-1 C). With covariance None, R is identity."""
    c = constraints.constraint_matrix
    if covariance is None:
        x = c
    else:
        r = np.asarray(covariance, dtype=np.complex128)
        if r.shape != (c.shape[0], c.shape[0]):
            raise ValueError(f"covariance must have shape {(c.shape[0], c.shape[0])}, got {r.shape}")
        _, x, info = lapack.zposv(r, c, lower=0)
        if info != 0:
            raise ValueError("covariance matrix is not positive definite")
    gram = c.conj().T @ x
    return x, gram


def lcmv_weights(constraints: ScenarioConstraints, covariance=None) -> NcbfWeights:
    """Minimum-variance weights meeting every gain constraint exactly:
    w = R^-1 C (C^H R^-1 C)^-1 d, computed with Cholesky solves.

    Parameters
    ----------
    constraints : ScenarioConstraints
        Constraint set, K <= num_elements.
    covariance : ndarray, optional
        Hermitian positive-definite interference-plus-noise covariance
        (num_elements x num_elements). None means identity, which turns the
        cost into plain output power.

    Raises
    ------
    DegenerateScenarioError
        If the Gram matrix C^H R^-1 C is singular or conditioned worse than
        CONDITION_LIMIT.
    """
    x, gram = _whitened_columns(constraints, covariance)
    factor, cond = _cholesky_factor(gram)
    if factor is None or not cond < CONDITION_LIMIT:
        raise DegenerateScenarioError(
            f"constraint Gram matrix is degenerate (condition estimate {cond:.3e})"
        )
    y, info = lapack.zpotrs(factor, constraints.gain_vector.astype(np.complex128), lower=0)
    if info != 0:
        raise DegenerateScenarioError("Cholesky back-substitution failed")
    return NcbfWeights(x @ y)


def unit_power_normalize(weights: NcbfWeights) -> NcbfWeights:
    """Scale weights to unit total power (sum of squared magnitudes equals 1)."""
    norm = np.linalg.norm(weights.entries)
    if norm == 0.0:
        raise ValueError("cannot normalize an all-zero weight vector")
    return NcbfWeights(weights.entries / norm)


def decompose(weights: NcbfWeights) -> tuple[np.ndarray, np.ndarray]:
    """Split weights into (magnitudes, phases), phases wrapped into [0, 2*pi)."""
    return weights.magnitudes, weights.phases
