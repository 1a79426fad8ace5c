# core/utils/models.py
from pydantic import BaseModel, ConfigDict


class ArrayModel(BaseModel):
    """Pydantic model allowed to carry numpy arrays (and other plain Python objects)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)
