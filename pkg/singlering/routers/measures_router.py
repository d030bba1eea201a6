from fastapi import APIRouter, HTTPException
from typing import Dict, Any
import logging

from singlering.models import DiagnosticsRequest, MeasureDocument
from singlering.services.errors import SingleRingError
from singlering.services.measures import DiscreteMeasure, regularity_diagnostics, ring_radii

router = APIRouter(prefix="/measures", tags=["Measures"])
logger = logging.getLogger(__name__)


@router.post("/ring-radii")
async def compute_ring_radii(theta: MeasureDocument) -> Dict[str, Any]:
    """
    Inner and outer radii of the single ring generated by Θ.
    """
    try:
        radii = ring_radii(DiscreteMeasure.from_atoms(theta.atoms))
        return {"status": "success", **radii.as_dict()}
    except SingleRingError as e:
        logger.error(f"Error computing ring radii: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/diagnostics")
async def diagnostics(request: DiagnosticsRequest) -> Dict[str, Any]:
    """
    Norm-bound and Stieltjes-density regularity diagnostics for L_{T_n}.
    """
    try:
        mu = DiscreteMeasure.from_atoms(request.theta.atoms)
        report = regularity_diagnostics(mu, request.n, request.kappa, request.M)
        return {"status": "success", **report.as_dict()}
    except SingleRingError as e:
        logger.error(f"Error computing diagnostics: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
