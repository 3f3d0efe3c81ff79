"""HTTP JSON API over the scene store.

Routes mirror the review workflow: enqueue, browse, correct, approve,
export. Optional static bearer token; permissive CORS so a local frontend
can talk to it directly.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, HTTPException, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .. import scenegraph
from .store import (
    Correction,
    DuplicateImageError,
    InvalidEditError,
    NotReviewedError,
    SceneStore,
    StaleBaseError,
    UnknownSceneError,
)


class SceneIn(BaseModel):
    image: str
    objects: list[str] = []
    proposal: dict | None = None


class CorrectionIn(BaseModel):
    base_revision_id: str
    ops: list[dict] = []


class ApproveIn(BaseModel):
    accept_as_is: bool = False


def create_app(store: SceneStore, token: str | None = None) -> FastAPI:
    app = FastAPI(title="scene review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def check_auth(request: Request):
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid token")

    auth = Depends(check_auth)

    def scene_doc(record) -> dict:
        return {
            "scene_id": record.scene_id,
            "image": record.image,
            "objects": record.objects,
            "status": record.status,
            "revisions": [
                {
                    "revision_id": rev.revision_id,
                    "author": rev.author,
                    "graph": scenegraph.graph_to_doc(rev.graph),
                    "ts": rev.timestamp,
                }
                for rev in record.revisions
            ],
        }

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/scenes", status_code=201)
    def create_scene(body: SceneIn, _=auth):
        proposal = None
        if body.proposal is not None:
            try:
                proposal = scenegraph.parse_graph(body.proposal)
            except scenegraph.SceneGraphError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        try:
            scene_id = store.enqueue_scene(body.image, body.objects, proposal)
        except DuplicateImageError as exc:
            raise HTTPException(
                status_code=409,
                detail={"kind": "duplicate_image", "scene_id": exc.scene_id},
            )
        return {"scene_id": scene_id}

    @app.get("/scenes")
    def list_scenes(
        status: str | None = Query(default=None),
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=50, ge=1, le=500),
        _=auth,
    ):
        return {"scenes": store.queue(status=status, page=page, page_size=page_size)}

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str, _=auth):
        try:
            return scene_doc(store.get(scene_id))
        except UnknownSceneError:
            raise HTTPException(status_code=404, detail="unknown scene")

    @app.post("/scenes/{scene_id}/corrections")
    def post_correction(scene_id: str, body: CorrectionIn, _=auth):
        correction = Correction(body.base_revision_id, tuple(body.ops))
        try:
            revision_id = store.apply_correction(scene_id, correction)
        except UnknownSceneError:
            raise HTTPException(status_code=404, detail="unknown scene")
        except StaleBaseError as exc:
            raise HTTPException(
                status_code=409, detail={"kind": "stale_base", "latest": exc.latest}
            )
        except InvalidEditError as exc:
            raise HTTPException(
                status_code=422, detail={"kind": "invalid_edit", "reason": str(exc)}
            )
        return {"revision_id": revision_id}

    @app.post("/scenes/{scene_id}/approve")
    def approve(scene_id: str, body: ApproveIn | None = None, _=auth):
        accept_as_is = bool(body and body.accept_as_is)
        try:
            record = store.approve(scene_id, accept_as_is=accept_as_is)
        except UnknownSceneError:
            raise HTTPException(status_code=404, detail="unknown scene")
        except NotReviewedError as exc:
            raise HTTPException(status_code=409, detail={"kind": "not_reviewed", "reason": str(exc)})
        except InvalidEditError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"scene_id": scene_id, "status": record.status}

    @app.get("/export")
    def export(status: str = Query(default="approved"), _=auth):
        if status != "approved":
            raise HTTPException(status_code=422, detail="only status=approved is exportable")
        return Response(content=store.export_jsonl(), media_type="application/jsonl")

    @app.post("/blobs")
    async def put_blob(request: Request, _=auth):
        data = await request.body()
        return {"ref": store.put_blob(data)}

    @app.get("/blobs/{ref}")
    def get_blob(ref: str, _=auth):
        data = store.get_blob(ref)
        if data is None:
            raise HTTPException(status_code=404, detail="unknown blob")
        return Response(content=data, media_type="application/octet-stream")

    return app
