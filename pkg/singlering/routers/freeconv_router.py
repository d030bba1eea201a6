from fastapi import APIRouter, HTTPException
from typing import Dict, Any
import logging

from singlering.models import GapProbeRequest, SolveRequest
from singlering.config import settings
from singlering.services import freeconv
from singlering.services.errors import BranchError, NumericalFailure, SingleRingError
from singlering.services.measures import DiscreteMeasure, symmetrize

router = APIRouter(prefix="/freeconv", tags=["Free convolution"])
logger = logging.getLogger(__name__)


def _complex(value: complex) -> Dict[str, float]:
    return {"re": value.real, "im": value.imag}


@router.post("/solve")
async def solve(request: SolveRequest) -> Dict[str, Any]:
    """
    Solve the limit Schwinger-Dyson system at z1 = re + i*im for the symmetrized Θ.
    """
    try:
        theta_sym = symmetrize(DiscreteMeasure.from_atoms(request.theta.atoms))
        state = freeconv.solve_sd(
            theta_sym,
            request.rho,
            complex(request.re, request.im),
            request.tol,
            principal_only=request.principal_only,
        )
        return {
            "status": "success",
            "G": _complex(state.G),
            "G_U": _complex(state.G_U),
            "psi": _complex(state.psi),
            "branch_ok": state.branch_ok,
            "path_branch_ok": state.path_branch_ok,
            "residual": state.residual,
            "iterations": state.iterations,
        }
    except BranchError as e:
        logger.warning(f"Branch lost during solve: {str(e)}")
        raise HTTPException(status_code=422, detail=str(e))
    except NumericalFailure as e:
        logger.error(f"Solver failure: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
    except SingleRingError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/gap-probe")
async def gap_probe(request: GapProbeRequest) -> Dict[str, Any]:
    """
    Check whether ν^z carries (numerically) no mass near 0.
    """
    try:
        theta_sym = symmetrize(DiscreteMeasure.from_atoms(request.theta.atoms))
        peak = freeconv.max_density_near_zero(theta_sym, request.rho, request.halfwidth)
        return {"status": "success", "gap": peak < settings.GAP_THRESHOLD, "max_density": peak}
    except NumericalFailure as e:
        logger.error(f"Gap probe failure: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
    except SingleRingError as e:
        raise HTTPException(status_code=400, detail=str(e))
