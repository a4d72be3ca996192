from fastapi import FastAPI
from fastapi.staticfiles import StaticFiles
from fastapi.middleware.cors import CORSMiddleware
from pathlib import Path
import logging, sys, os, uvicorn

# Add parent directory to path so we can import ls_sparsify
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ls_sparsify import __version__, configure_logging
from ls_sparsify.session import Session

WEB_DIR = Path(__file__).resolve().parent
CONFIG_DIR = WEB_DIR.parent / "configs"

logger = logging.getLogger("ls_sparsify.web")

# solver session shared by all requests
session_instance = Session()


def available_configs():
    """Config manifests shipped in configs/, by file name"""
    if not CONFIG_DIR.is_dir():
        return []
    return sorted(p.name for p in CONFIG_DIR.glob("*.ini"))


app = FastAPI(
    title="Lippmann-Schwinger Solver Web Interface",
    description="Sparsifying-preconditioned GMRES with a browser front end",
    version=__version__,
)

# CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Mount static files
app.mount("/static", StaticFiles(directory=str(WEB_DIR / "static")), name="static")

# Import and include routes AFTER defining session_instance
from web_app.routes import router
app.include_router(router)


@app.on_event("startup")
async def startup_event():
    # level from LS_SPARSIFY_LOG_LEVEL
    configure_logging()
    logger.info("web session ready, %d config manifests available", len(available_configs()))


if __name__ == "__main__":
    port = int(os.environ.get("PORT", 8000))
    uvicorn.run("web_app.main:app", host="0.0.0.0", port=port, reload=False)
