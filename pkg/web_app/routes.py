from fastapi import APIRouter, Request, Form
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse, RedirectResponse
from fastapi.templating import Jinja2Templates
from web_app.main import session_instance as session, available_configs, CONFIG_DIR, WEB_DIR
from ls_sparsify.config_parser import load_run_config, parse_overrides
from ls_sparsify.report import format_report, SolveReport
from ls_sparsify.runner import run_info, report_summary
from pathlib import Path
import html, logging, shlex

logger = logging.getLogger("ls_sparsify.web")

router = APIRouter()

# Templates
templates = Jinja2Templates(directory=str(WEB_DIR / "templates"))

# form field -> dotted config key
FORM_KEYS = {
    "kind": "problem.kind",
    "dim": "problem.dim",
    "omega": "problem.omega",
    "direction": "problem.direction",
    "n": "grid.n",
    "ppw": "grid.ppw",
    "shape": "grid.shape",
    "medium": "medium.name",
    "buffer_b": "medium.buffer_b",
    "stencil_mode": "stencil.mode",
    "tol": "gmres.tol",
    "maxit": "gmres.maxit",
}
ACTIONS = ("solve", "validate", "info")


def config_path(name):
    """Resolve a manifest name from the form to a path inside configs/"""
    if not name:
        return None
    if name not in available_configs():
        raise ValueError(f"Error: unknown config '{name}'")
    return str(CONFIG_DIR / name)


def build_command(action, config, fields, emit_plots=False):
    """
    Turn the solve form into a session command line.
    Empty fields keep the config/default value.
    """
    if action not in ACTIONS:
        raise ValueError(f"Error: unknown action '{action}'")
    tokens = [action]
    path = config_path(config)
    if path:
        tokens += ["--config", path]
    for field, key in FORM_KEYS.items():
        value = (fields.get(field) or "").strip()
        if value:
            tokens += [f"--{key}", value]
    if emit_plots:
        tokens.append("--emit-plots")
    return " ".join(shlex.quote(t) for t in tokens)


def render_index(request, error=None, info=None, status_code=200):
    return templates.TemplateResponse(
        request,
        "index.html",
        {
            "request": request,
            "reports": list(enumerate(session.reports)),
            "configs": available_configs(),
            "cached_setups": len(session.setups),
            "error": error,
            "info": info,
        },
        status_code=status_code,
    )


# HOME / DASHBOARD

@router.get("/", response_class=HTMLResponse)
async def index(request: Request):
    return render_index(request)


@router.post("/run")
async def run(
    request: Request,
    action: str = Form("solve"),
    config: str = Form(""),
    kind: str = Form(""),
    dim: str = Form(""),
    omega: str = Form(""),
    direction: str = Form(""),
    n: str = Form(""),
    ppw: str = Form(""),
    shape: str = Form(""),
    medium: str = Form(""),
    buffer_b: str = Form(""),
    stencil_mode: str = Form(""),
    tol: str = Form(""),
    maxit: str = Form(""),
    emit_plots: str = Form(""),
):
    fields = {"kind": kind, "dim": dim, "omega": omega, "direction": direction, "n": n,
              "ppw": ppw, "shape": shape, "medium": medium, "buffer_b": buffer_b,
              "stencil_mode": stencil_mode, "tol": tol, "maxit": maxit}
    try:
        command = build_command(action, config, fields, emit_plots=bool(emit_plots))
        logger.info("web command: %s", command)
        result = session.execute(command)
    except Exception as e:
        # show the error on the dashboard instead of a 500
        return render_index(request, error=str(e), status_code=400)

    if isinstance(result, SolveReport):
        return RedirectResponse(f"/reports/{len(session.reports) - 1}", status_code=303)
    return render_index(request, info=result)


# REPORTS

@router.get("/reports", response_class=HTMLResponse)
async def reports_list(request: Request):
    return HTMLResponse(f"<pre>{html.escape(report_summary(session.reports))}</pre>")


@router.get("/reports/{index}", response_class=HTMLResponse)
async def report_page(request: Request, index: int):
    report = session.get_report(index)
    if report is None:
        return render_index(request, error=f"Error: no report #{index}", status_code=404)
    plots = [(k, Path(p).name) for k, p in enumerate(report.fields) if p.endswith(".pgm")]
    return templates.TemplateResponse(
        request,
        "report.html",
        {
            "request": request,
            "index": index,
            "report": report,
            "text": format_report(report),
            "history": list(enumerate(report.residual_history, start=1)),
            "plots": plots,
        },
    )


@router.get("/reports/{index}/plot/{k}")
async def report_plot(index: int, k: int):
    report = session.get_report(index)
    if report is None or not 0 <= k < len(report.fields) or not report.fields[k].endswith(".pgm"):
        return JSONResponse({"status": "error", "message": "no such plot"}, status_code=404)
    path = Path(report.fields[k])
    if not path.is_file():
        return JSONResponse({"status": "error", "message": "plot file is gone"}, status_code=404)
    return FileResponse(path, media_type="image/x-portable-graymap", filename=path.name)


@router.post("/cache/clear")
async def clear_cache():
    session.execute("clear cache")
    return RedirectResponse("/", status_code=303)


# JSON API

@router.get("/info")
def info(config: str = "", overrides: str = ""):
    """Derived sizes for a config; overrides use the CLI spelling, e.g. '--grid.n 32'"""
    try:
        dotted, _ = parse_overrides(shlex.split(overrides))
        run_config = load_run_config(config_path(config), dotted)
        details = run_info(run_config)
    except Exception as e:
        return JSONResponse({"status": "error", "message": str(e)}, status_code=400)
    return {
        "message": "Lippmann-Schwinger sparsifying solver API",
        "configs": available_configs(),
        "reports": len(session.reports),
        "cached_setups": len(session.setups),
        "run": {k: (float(v) if hasattr(v, "dtype") else v) for k, v in details.items()},
    }


@router.get("/reports.json")
def reports_json():
    return [
        {k: v for k, v in r.to_dict().items() if k != "residual_history"}
        for r in session.reports
    ]
