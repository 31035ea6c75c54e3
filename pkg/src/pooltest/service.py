"""HTTP/JSON facade over the optimizer, zones, heuristics, and sessions.

Sessions live in memory with write-through JSON snapshots under the data
directory, so a guided run survives a service restart. Zone maps are
content-addressed by (n, resolution, mode): an existing file that passes
its integrity check is reused, otherwise a background job computes it and
polling clients see 202 plus a progress figure.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Union

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import core, enumeration, optimizer, probability, session as sessions, zones
from .errors import PoolTestError, SessionError, UnsupportedSizeError

DEFAULT_ADDR = "127.0.0.1:8471"
ENV_DATA_DIR = "POOLTEST_DATA_DIR"
ENV_ADDR = "POOLTEST_ADDR"

# Zone maps at or above this n are computed in a background job.
ASYNC_ZONES_FROM = 3
MAX_COUNTS_N = 5
MAX_SIM_TRIALS = 2_000_000


@dataclass
class ServiceConfig:
    data_dir: Path
    optimizer_max_n: int = optimizer.MAX_OPTIMAL_N
    resolutions: dict[int, int] = field(default_factory=lambda: dict(zones.DEFAULT_RESOLUTIONS))
    zone_mode: str = "float"
    ui_dir: Path | None = None

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        (self.data_dir / "sessions").mkdir(exist_ok=True)
        if self.optimizer_max_n < 1:
            raise ValueError("optimizer size limit must be positive")


class ZoneStore:
    """Disk-backed zone maps with background computation and progress."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.cache: dict[int, zones.ZoneMap] = {}
        self.jobs: dict[int, dict] = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=1)

    def path_for(self, n: int) -> Path:
        res = self.config.resolutions.get(n, zones.DEFAULT_RESOLUTIONS.get(n, 64))
        return self.config.data_dir / f"zonemap_n{n}_r{res}_{self.config.zone_mode}.json"

    def peek(self, n: int) -> zones.ZoneMap | None:
        """Return the map if available (memory or verified file), else None."""
        with self.lock:
            if n in self.cache:
                return self.cache[n]
        path = self.path_for(n)
        if path.exists():
            zonemap = zones.load_zonemap(path)
            with self.lock:
                self.cache[n] = zonemap
            return zonemap
        return None

    def get_or_schedule(self, n: int) -> tuple[zones.ZoneMap | None, dict | None]:
        """(zonemap, None) when ready; (None, job info) while computing."""
        if not 1 <= n <= zones.MAX_ZONES_N:
            raise UnsupportedSizeError(
                f"zone maps are supported for n <= {zones.MAX_ZONES_N}",
                limit=zones.MAX_ZONES_N,
                n=n,
            )
        ready = self.peek(n)
        if ready is not None:
            return ready, None
        if n < ASYNC_ZONES_FROM:
            self._compute(n)
            return self.peek(n), None
        with self.lock:
            job = self.jobs.get(n)
            if job is None or job["status"] == "error":
                job = {"status": "pending", "progress": 0.0, "error": None}
                self.jobs[n] = job
                self.executor.submit(self._run_job, n)
            return None, dict(job)

    def _run_job(self, n: int) -> None:
        def progress(p: float) -> None:
            with self.lock:
                self.jobs[n]["progress"] = round(float(p), 4)

        try:
            self._compute(n, progress)
            with self.lock:
                self.jobs[n] = {"status": "ready", "progress": 1.0, "error": None}
        except Exception as exc:  # surfaced through the job record
            with self.lock:
                self.jobs[n] = {"status": "error", "progress": 0.0, "error": str(exc)}

    def _compute(self, n: int, progress=None) -> None:
        res = self.config.resolutions.get(n, zones.DEFAULT_RESOLUTIONS.get(n, 64))
        zonemap = zones.compute_metaprocedure(
            n, res, mode=self.config.zone_mode, progress=progress
        )
        zones.save_zonemap(zonemap, self.path_for(n))
        with self.lock:
            self.cache[n] = zonemap

    def as_mapping(self) -> Mapping[int, zones.ZoneMap]:
        return _ZoneMapView(self)


class _ZoneMapView(Mapping):
    """Lazy n -> ZoneMap view over whatever the store already has on disk."""

    def __init__(self, store: ZoneStore):
        self.store = store

    def __getitem__(self, n: int) -> zones.ZoneMap:
        zonemap = self.store.peek(n)
        if zonemap is None:
            raise KeyError(n)
        return zonemap

    def __contains__(self, n) -> bool:
        return self.store.peek(n) is not None

    def __iter__(self):
        return iter(())

    def __len__(self) -> int:
        return len(self.store.cache)


class SessionStore:
    """In-memory sessions with write-through snapshots and per-id locks."""

    def __init__(self, config: ServiceConfig, zone_store: ZoneStore):
        self.config = config
        self.zone_store = zone_store
        self.lock = threading.Lock()
        self.locks: dict[str, threading.Lock] = {}
        self.states: dict[str, sessions.SessionState | dict] = {}
        self._load_snapshots()

    def _dir(self) -> Path:
        return self.config.data_dir / "sessions"

    def _load_snapshots(self) -> None:
        import json

        for path in sorted(self._dir().glob("*.json")):
            try:
                snapshot = json.loads(path.read_text())
                self.states[snapshot["id"]] = snapshot
            except (OSError, ValueError, KeyError):
                continue

    def _persist(self, state: sessions.SessionState) -> None:
        import json

        path = self._dir() / f"{state.session_id}.json"
        path.write_text(json.dumps(sessions.to_snapshot(state), sort_keys=True))

    def lock_for(self, session_id: str) -> threading.Lock:
        with self.lock:
            return self.locks.setdefault(session_id, threading.Lock())

    def create(self, priors, strategy) -> sessions.SessionState:
        state = sessions.start_session(
            priors, strategy, zonemaps=self.zone_store.as_mapping()
        )
        with self.lock:
            self.states[state.session_id] = state
        self._persist(state)
        return state

    def get(self, session_id: str) -> sessions.SessionState:
        with self.lock:
            entry = self.states.get(session_id)
        if entry is None:
            raise KeyError(session_id)
        if isinstance(entry, dict):
            state = sessions.restore_session(entry, zonemaps=self.zone_store.as_mapping())
            with self.lock:
                self.states[session_id] = state
            return state
        return entry

    def update(self, state: sessions.SessionState) -> None:
        with self.lock:
            self.states[state.session_id] = state
        self._persist(state)

    def delete(self, session_id: str) -> None:
        with self.lock:
            if session_id not in self.states:
                raise KeyError(session_id)
            del self.states[session_id]
            self.locks.pop(session_id, None)
        path = self._dir() / f"{session_id}.json"
        if path.exists():
            path.unlink()


# ---------------------------------------------------------------------------
# request bodies


class OptimalRequest(BaseModel):
    priors: list[Union[float, str]]
    mode: str = "auto"


class SessionRequest(BaseModel):
    priors: list[float]
    strategy: Union[str, dict]


class ResultRequest(BaseModel):
    result: str
    step: int | None = Field(
        default=None,
        description="Expected tests_used before applying; mismatch yields 409.",
    )


class SimulationRequest(BaseModel):
    strategy: Union[str, dict]
    trials: int = Field(ge=1)
    seed: int = 0
    priors: list[float] | None = None
    prior_distribution: str | None = None
    n: int | None = None


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    if config is None:
        config = ServiceConfig(data_dir=Path(os.environ.get(ENV_DATA_DIR, "./pooltest-data")))
    app = FastAPI(title="pooltest", version="0.1.0")
    zone_store = ZoneStore(config)
    session_store = SessionStore(config, zone_store)
    app.state.config = config
    app.state.zones = zone_store
    app.state.sessions = session_store

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(ValueError)
    async def value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(UnsupportedSizeError)
    async def too_big(request: Request, exc: UnsupportedSizeError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(SessionError)
    async def session_conflict(request: Request, exc: SessionError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(PoolTestError)
    async def domain_error(request: Request, exc: PoolTestError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.post("/v1/procedures/optimal")
    def optimal(body: OptimalRequest):
        priors = [
            probability.parse_prior(p, exact=(body.mode == "exact"))
            if isinstance(p, str)
            else p
            for p in body.priors
        ]
        tree = optimizer.find_optimal(priors, mode=body.mode, max_n=config.optimizer_max_n)
        value = probability.expected_length(tree, priors, mode=body.mode)
        out = {
            "procedure": core.encode(tree),
            "expected_length": float(value),
            "n": len(priors),
        }
        if body.mode == "exact":
            out["expected_length_exact"] = str(value)
        return out

    @app.get("/v1/zones/{n}")
    def zone_meta(n: int):
        zonemap, job = app.state.zones.get_or_schedule(n)
        if zonemap is None:
            return JSONResponse(status_code=202, content={"n": n, **job})
        return zonemap.metadata()

    @app.get("/v1/zones/{n}/slice")
    def zone_slice(n: int, plane: str, value: float, res: int = 128):
        zonemap, job = app.state.zones.get_or_schedule(n)
        if zonemap is None:
            return JSONResponse(status_code=202, content={"n": n, **job})
        result = zones.slice_zonemap(zonemap, f"{plane}={value}", res)
        return {
            "n": n,
            "plane": result.plane,
            "resolution": result.resolution,
            "outside": int(zones.SliceResult.OUTSIDE),
            "ids": result.ids.tolist(),
            "legend": {str(k): v for k, v in sorted(result.legend.items())},
        }

    @app.get("/v1/zones/{n}/map")
    def zone_square_map(n: int, res: int = 192):
        zonemap, job = app.state.zones.get_or_schedule(n)
        if zonemap is None:
            return JSONResponse(status_code=202, content={"n": n, **job})
        result = zones.square_map(zonemap, res)
        return {
            "n": n,
            "resolution": result.resolution,
            "ids": result.ids.tolist(),
            "legend": {str(k): v for k, v in sorted(result.legend.items())},
        }

    @app.get("/v1/zones/{n}/frontiers")
    def zone_frontiers(n: int):
        if n != 2:
            raise UnsupportedSizeError("analytic frontiers are defined for n=2", n=n)
        fr = zones.frontier_n2()
        samples = 257
        xs = [i / (samples - 1) for i in range(samples)]
        return {
            "triple_point": list(fr.triple_point),
            "ab": [[x, fr.ab_curve(x)] for x in xs if x >= fr.triple_point[0]],
            "ac": [[x, fr.ac_curve(x)] for x in xs if x <= fr.triple_point[0]],
            "bc": [[x, x] for x in xs if x <= fr.triple_point[0]],
        }

    @app.post("/v1/sessions")
    def create_session(body: SessionRequest):
        state = session_store.create(body.priors, body.strategy)
        return sessions.to_snapshot(state)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return sessions.to_snapshot(session_store.get(session_id))
        except KeyError:
            return JSONResponse(status_code=404, content={"error": f"unknown session {session_id}"})

    @app.post("/v1/sessions/{session_id}/result")
    def post_result(session_id: str, body: ResultRequest):
        lock = session_store.lock_for(session_id)
        if not lock.acquire(timeout=10):
            return JSONResponse(status_code=409, content={"error": "session is busy"})
        try:
            try:
                state = session_store.get(session_id)
            except KeyError:
                return JSONResponse(
                    status_code=404, content={"error": f"unknown session {session_id}"}
                )
            if body.step is not None and body.step != state.tests_used:
                return JSONResponse(
                    status_code=409,
                    content={
                        "error": f"session is at step {state.tests_used}, not {body.step}"
                    },
                )
            state = sessions.record_result(state, body.result)
            session_store.update(state)
            return sessions.to_snapshot(state)
        finally:
            lock.release()

    @app.delete("/v1/sessions/{session_id}")
    def delete_session(session_id: str):
        try:
            session_store.delete(session_id)
        except KeyError:
            return JSONResponse(status_code=404, content={"error": f"unknown session {session_id}"})
        return {"deleted": session_id}

    @app.post("/v1/simulations")
    def run_simulation(body: SimulationRequest):
        if body.trials > MAX_SIM_TRIALS:
            raise UnsupportedSizeError(
                f"simulations are limited to {MAX_SIM_TRIALS} trials", limit=MAX_SIM_TRIALS
            )
        report = sessions.simulate(
            body.priors,
            body.strategy,
            body.trials,
            body.seed,
            n=body.n,
            prior_distribution=body.prior_distribution,
            zonemaps=zone_store.as_mapping(),
        )
        return report.to_dict()

    @app.get("/v1/meta/counts")
    def counts(n: int):
        if n > MAX_COUNTS_N:
            raise UnsupportedSizeError(
                f"counts are served for n <= {MAX_COUNTS_N}", limit=MAX_COUNTS_N, n=n
            )
        out = {
            "n": n,
            "procedures": enumeration.count_procedures(n).value,
            "naive": enumeration.count_naive(n).value,
        }
        zonemap = zone_store.peek(n) if n <= zones.MAX_ZONES_N else None
        out["zones"] = zonemap.zone_count if zonemap is not None else None
        return out

    ui_dir = config.ui_dir
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = candidate if candidate.is_dir() else None
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(addr: str | None = None, data_dir: str | None = None) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    addr = addr or os.environ.get(ENV_ADDR, DEFAULT_ADDR)
    host, _, port = addr.partition(":")
    config = ServiceConfig(
        data_dir=Path(data_dir or os.environ.get(ENV_DATA_DIR, "./pooltest-data"))
    )
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8471))
