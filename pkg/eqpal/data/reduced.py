"""Module handling reduced bases, reduced solutions and EQP weights."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Dict, Optional, Tuple

import numpy as np
import numpy.typing as npt
from aenum import Enum

ORTHONORMALITY_TOLERANCE = 1e-10


class ConstraintFamily(Enum):  # pylint: disable=too-few-public-methods
    """Families of accuracy constraints of the EQP training problem."""

    _init_ = "value __doc__"
    DV = "dv", "domain volume"
    RP = "rp", "reduced primal residual"
    LRA = "lra", "Lagrangian part of the reduced adjoint residual"
    LGA = "lga", "Lagrangian part of the adjoint gradient"
    C = "c", "side constraints"
    DCMU = "dcmu", "partial derivative of the constraints w.r.t. mu"
    DCY = "dcy", "partial derivative of the constraints w.r.t. y"
    RS = "rs", "reduced sensitivity residual"
    LQ = "lq", "Lagrangian quantity of interest"


PENALTY_FAMILIES = (
    ConstraintFamily.C,
    ConstraintFamily.DCMU,
    ConstraintFamily.DCY,
)


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal reduced basis with optional affine offset.

    Reduced states y describe the full state u = offset + columns @ y.

    Args:
        columns (npt.NDArray[np.float64]): basis Phi, shape (N_u, n)
        offset (Optional[npt.NDArray[np.float64]]): affine offset, zero if
            None
        tags (Tuple[str, ...]): provenance of each column
    """

    columns: npt.NDArray[np.float64]
    offset: Optional[npt.NDArray[np.float64]] = None
    tags: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        """Validates orthonormality and the offset, freezes the arrays."""
        columns = np.array(self.columns, dtype=float)
        if columns.ndim != 2:
            raise ValueError(
                f"basis must be a matrix, got {columns.ndim} dimensions."
            )
        n_state, size = columns.shape
        offset = (
            np.zeros(n_state)
            if self.offset is None
            else np.array(self.offset, dtype=float).ravel()
        )
        if offset.size != n_state:
            raise ValueError(
                f"offset has length {offset.size}, expected {n_state}."
            )
        gram_error = np.abs(columns.T @ columns - np.eye(size))
        if size > 0 and gram_error.max() > ORTHONORMALITY_TOLERANCE:
            raise ValueError(
                "basis columns are not orthonormal, max deviation "
                f"{gram_error.max():.3e}."
            )
        tags = tuple(self.tags) if self.tags else ("",) * size
        if len(tags) != size:
            raise ValueError(
                f"got {len(tags)} provenance tags for {size} columns."
            )

        columns.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "tags", tags)

    @property
    def size(self) -> int:
        """Number of basis vectors n."""
        return int(self.columns.shape[1])

    @property
    def n_state(self) -> int:
        """Length N_u of the represented state vectors."""
        return int(self.columns.shape[0])

    def reconstruct(
        self, y: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        """Full state offset + Phi y."""
        return np.asarray(self.offset + self.columns @ y)

    def project(self, u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Reduced coordinates Phi^T (u - offset)."""
        return np.asarray(self.columns.T @ (u - self.offset))


@dataclass(frozen=True)
class ReducedSolution:
    """Reduced primal, adjoint and sensitivity solution at one parameter.

    Attributes:
        y_hat (npt.NDArray[np.float64]): reduced coordinates
        lambda_hat (npt.NDArray[np.float64]): reduced adjoint
        sens_hat (npt.NDArray[np.float64]): reduced sensitivity (n x N_mu)
    """

    y_hat: npt.NDArray[np.float64]
    lambda_hat: npt.NDArray[np.float64]
    sens_hat: npt.NDArray[np.float64]


@dataclass(frozen=True)
class EqpWeights:
    """Nonnegative element weights of the empirical quadrature.

    Args:
        rho (npt.NDArray[np.float64]): element weights
    """

    rho: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        """Validates the weights and freezes them."""
        rho = np.array(self.rho, dtype=float).ravel()
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("EQP weights must be finite and nonnegative.")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @staticmethod
    def ones(n_elements: int) -> EqpWeights:
        """Unit weights, reproducing the reduced model exactly."""
        return EqpWeights(rho=np.ones(n_elements))

    @property
    def active_set(self) -> npt.NDArray[np.int64]:
        """Indices of the elements with positive weight."""
        return np.flatnonzero(self.rho > 0)

    @property
    def usage_fraction(self) -> float:
        """Share of elements with positive weight."""
        if self.rho.size == 0:
            return 0.0
        return float(self.active_set.size / self.rho.size)


@dataclass(frozen=True)
class EqpTolerances:  # pylint: disable=too-many-instance-attributes
    """Tolerances delta of the nine EQP accuracy constraint families."""

    delta_dv: float = 0.0
    delta_rp: float = 0.0
    delta_lra: float = 0.0
    delta_lga: float = 0.0
    delta_c: float = 0.0
    delta_dcmu: float = 0.0
    delta_dcy: float = 0.0
    delta_rs: float = 0.0
    delta_lq: float = 0.0

    def __post_init__(self) -> None:
        """Validates that all tolerances are nonnegative."""
        for tolerance in fields(self):
            value = getattr(self, tolerance.name)
            if not value >= 0:
                raise ValueError(
                    f"{tolerance.name} must be nonnegative, got {value}."
                )

    def for_family(self, family: ConstraintFamily) -> float:
        """Tolerance of the given constraint family."""
        return float(getattr(self, f"delta_{family.value}"))

    def as_dict(self) -> Dict[str, float]:
        """Tolerances keyed by family name."""
        return {
            family.value: self.for_family(family)
            for family in ConstraintFamily
        }


@dataclass(frozen=True)
class TrainingPoint:
    """Parameter of the training set with its reduced solution."""

    mu: npt.NDArray[np.float64]
    solution: ReducedSolution


@dataclass(frozen=True)
class TrainingSet:
    """Training parameters of the EQP, the first one is the TR center.

    Args:
        points (Tuple[TrainingPoint, ...]): training points with their
            precomputed reduced solutions
    """

    points: Tuple[TrainingPoint, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        """Validates that the training set contains the center."""
        if len(self.points) == 0:
            raise ValueError("training set must contain at least the center.")
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def center(self) -> npt.NDArray[np.float64]:
        """Trust-region center mu_k."""
        return self.points[0].mu

    @property
    def xi(self) -> Tuple[npt.NDArray[np.float64], ...]:
        """All training parameters."""
        return tuple(point.mu for point in self.points)
