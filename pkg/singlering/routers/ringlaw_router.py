from fastapi import APIRouter, HTTPException
from typing import Dict, Any
import logging

from singlering.models import MeasureDocument
from singlering.services.errors import SingleRingError
from singlering.services.measures import DiscreteMeasure
from singlering.services.ringlaw import ring_support

router = APIRouter(prefix="/ringlaw", tags=["Ring law"])
logger = logging.getLogger(__name__)


@router.post("/support")
async def support(theta: MeasureDocument) -> Dict[str, Any]:
    """
    Support annulus {a <= |z| <= b} of the limiting law μ_A.
    """
    try:
        a, b = ring_support(DiscreteMeasure.from_atoms(theta.atoms))
        return {"status": "success", "a": a, "b": b}
    except SingleRingError as e:
        logger.error(f"Error computing ring support: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
