/**
 * Thin client for the scene review service HTTP API. All server state
 * changes flow through these calls; the UI holds no authoritative state.
 */

import type { CorrectionOp, GraphDoc } from "./graph.js";

export interface SceneSummary {
  scene_id: string;
  status: "pending" | "in_review" | "approved";
  revision_count: number;
  object_count: number;
}

export interface Revision {
  revision_id: string;
  author: "model" | "human";
  graph: GraphDoc;
  ts: number;
}

export interface Scene {
  scene_id: string;
  image: string;
  objects: string[];
  status: SceneSummary["status"];
  revisions: Revision[];
}

export type CorrectionResult =
  | { ok: true; revisionId: string }
  | { ok: false; kind: "stale_base"; latest: string }
  | { ok: false; kind: "invalid_edit"; reason: string };

export class ServiceError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
  ) {}

  private headers(json = true): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["content-type"] = "application/json";
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    return response;
  }

  async listScenes(status?: string, page = 0): Promise<SceneSummary[]> {
    const query = new URLSearchParams({ page: String(page) });
    if (status) query.set("status", status);
    const response = await this.request(`/scenes?${query}`, { headers: this.headers(false) });
    if (!response.ok) throw new ServiceError(`list failed (${response.status})`, response.status);
    const body = (await response.json()) as { scenes: SceneSummary[] };
    return body.scenes;
  }

  async getScene(sceneId: string): Promise<Scene> {
    const response = await this.request(`/scenes/${sceneId}`, { headers: this.headers(false) });
    if (!response.ok) throw new ServiceError(`scene fetch failed (${response.status})`, response.status);
    return (await response.json()) as Scene;
  }

  async createScene(image: string, objects: string[], proposal: GraphDoc | null): Promise<string> {
    const response = await this.request("/scenes", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ image, objects, proposal }),
    });
    if (!response.ok) throw new ServiceError(`create failed (${response.status})`, response.status);
    const body = (await response.json()) as { scene_id: string };
    return body.scene_id;
  }

  async postCorrection(
    sceneId: string,
    baseRevisionId: string,
    ops: CorrectionOp[],
  ): Promise<CorrectionResult> {
    const response = await this.request(`/scenes/${sceneId}/corrections`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ base_revision_id: baseRevisionId, ops }),
    });
    if (response.status === 409) {
      const body = (await response.json()) as { detail: { latest: string } };
      return { ok: false, kind: "stale_base", latest: body.detail.latest };
    }
    if (response.status === 422) {
      const body = (await response.json()) as { detail: { reason?: string } };
      return { ok: false, kind: "invalid_edit", reason: body.detail.reason ?? "invalid edit" };
    }
    if (!response.ok) {
      throw new ServiceError(`correction failed (${response.status})`, response.status);
    }
    const body = (await response.json()) as { revision_id: string };
    return { ok: true, revisionId: body.revision_id };
  }

  async approve(sceneId: string, acceptAsIs = false): Promise<void> {
    const response = await this.request(`/scenes/${sceneId}/approve`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ accept_as_is: acceptAsIs }),
    });
    if (!response.ok) throw new ServiceError(`approve failed (${response.status})`, response.status);
  }

  async exportApproved(): Promise<string> {
    const response = await this.request("/export?status=approved", {
      headers: this.headers(false),
    });
    if (!response.ok) throw new ServiceError(`export failed (${response.status})`, response.status);
    return response.text();
  }

  blobUrl(ref: string): string {
    return `${this.baseUrl}/blobs/${ref}`;
  }
}
