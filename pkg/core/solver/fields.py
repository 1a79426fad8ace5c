# core/solver/fields.py
from typing import Literal, Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.mesh.generator import TriangleMesh
from core.utils.models import ArrayModel

Quantity = Literal["u", "v", "log_u", "eigenfunction", "distance"]
Regime = Literal["torsion", "sublinear", "eigen", "superlinear"]


class ScalarField(ArrayModel):
    """Nodal values on a mesh, with what they represent."""
    mesh: TriangleMesh = Field(exclude=True, repr=False)
    values: np.ndarray
    quantity: Quantity = "u"
    p: Optional[float] = None
    normalization: str = "none"
    eigenvalue: Optional[float] = None
    # vertices where the values are meaningful (v blows up on the boundary for p >= 1)
    valid: Optional[np.ndarray] = None

    @property
    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(len(self.values), dtype=bool)
        return self.valid

    @property
    def max_value(self) -> float:
        return float(self.values[self.valid_mask].max())

    def with_values(self, values: np.ndarray, **changes) -> "ScalarField":
        return self.model_copy(update={"values": values, **changes})


class SolveReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    p: float
    regime: Regime
    max_value: float
    iterations: int
    residual_norm: float
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    m_p: Optional[float] = None
    nehari_ratio: Optional[float] = None
    certified: bool = True
    converged: bool = True
    wall_time: float = Field(default=0.0, exclude=True)
