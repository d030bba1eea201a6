from fastapi import APIRouter, HTTPException
from typing import Dict, Any
import logging

from singlering.models import EtaRequest
from singlering.services.errors import SingleRingError
from singlering.services.rdiagonal import bound_params

router = APIRouter(prefix="/rdiagonal", tags=["R-diagonal"])
logger = logging.getLogger(__name__)


@router.post("/eta")
async def eta(request: EtaRequest) -> Dict[str, Any]:
    """
    Admissible perturbation size η(eps, c0) for an R-diagonal element with ‖A‖₂ = s.
    """
    try:
        params = bound_params(request.eps, request.c0, request.s, request.C)
        return {
            "status": "success",
            "gamma": params.gamma,
            "F": params.F,
            "eta": params.eta,
            "margin": params.margin,
        }
    except SingleRingError as e:
        logger.error(f"Error computing eta: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
