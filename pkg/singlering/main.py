from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from singlering.routers import (
    measures_router,
    freeconv_router,
    ringlaw_router,
    rdiagonal_router,
)
from singlering.config import settings
from singlering.utils.logger import setup_logging

# Set up logging
setup_logging()

app = FastAPI(
    title=settings.APP_NAME,
    description="Numerical toolkit for the single ring theorem: ring radii, free convolution solves and R-diagonal bounds",
    version="0.1.0"
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include all routes
app.include_router(measures_router.router)
app.include_router(freeconv_router.router)
app.include_router(ringlaw_router.router)
app.include_router(rdiagonal_router.router)

@app.get("/")
def root():
    """Root endpoint that returns a welcome message."""
    return {
        "message": f"{settings.APP_NAME} API is running",
        "docs": "/docs",
        "redoc": "/redoc"
    }

@app.get("/health")
async def health_check():
    """Health check endpoint for monitoring."""
    return {"status": "ok", "environment": settings.ENVIRONMENT}
