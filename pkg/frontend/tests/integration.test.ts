/**
 * Drives the full review loop against a real service instance: queue ->
 * editor -> one move edit -> approve -> export. The service is spawned
 * from the installed Python package; these tests are skipped when it is
 * not available.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { EditorState } from "../src/editor.js";
import { GraphDoc, toTriples, tripleDiff } from "../src/graph.js";

const PYTHON = process.env.PYTHON ?? "python3";

const serviceAvailable =
  spawnSync(PYTHON, ["-c", "import roomkit.service"], { stdio: "ignore" }).status === 0;

const PROPOSAL: GraphDoc = {
  ceiling: {},
  wall: { hang: [{ "art frame": {} }] },
  floor: {
    support: [
      { bookshelf_0: {} },
      { desk: { support: [{ mug: {} }, { notebook: {} }] } },
      { chair: {} },
    ],
  },
};

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        probe.close(() => reject(new Error("no port")));
      }
    });
  });
}

async function waitForHealth(baseUrl: string, timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${baseUrl}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error(`service at ${baseUrl} did not become healthy`);
}

describe.skipIf(!serviceAvailable)("review loop against the live service", () => {
  let child: ChildProcess;
  let storeDir: string;
  let api: ServiceClient;

  beforeAll(async () => {
    storeDir = mkdtempSync(join(tmpdir(), "scene-store-"));
    const port = await freePort();
    child = spawn(
      PYTHON,
      ["-m", "roomkit.cli", "serve", "--store", storeDir, "--port", String(port)],
      { stdio: "ignore" },
    );
    const baseUrl = `http://127.0.0.1:${port}`;
    await waitForHealth(baseUrl);
    api = new ServiceClient(baseUrl);
  });

  afterAll(() => {
    child?.kill("SIGTERM");
    rmSync(storeDir, { recursive: true, force: true });
  });

  it("loads a pending scene, applies one move, approves, and exports one changed triple", async () => {
    const image = "sha256:" + "cd".repeat(32);
    const sceneId = await api.createScene(image, ["mug", "desk"], PROPOSAL);

    const queue = await api.listScenes("pending");
    expect(queue.map((s) => s.scene_id)).toContain(sceneId);

    const editor = new EditorState(await api.getScene(sceneId));
    const edit = editor.moveSubtree("mug", "floor", "support");
    expect(edit).toEqual({ ok: true });
    expect(editor.dirtyOps).toHaveLength(1);

    const outcome = await editor.submitAndApprove(api);
    expect(outcome.status).toBe("approved");

    const refreshed = await api.getScene(sceneId);
    expect(refreshed.status).toBe("approved");
    expect(refreshed.revisions.map((r) => r.revision_id)).toEqual(["r0", "r1"]);

    const exportText = await api.exportApproved();
    const lines = exportText.split("\n").filter(Boolean);
    expect(lines).toHaveLength(1);
    const record = JSON.parse(lines[0]!) as { id: string; payload: GraphDoc; answer: string };
    expect(record.id).toBe(sceneId);

    const { removed, added } = tripleDiff(toTriples(PROPOSAL), toTriples(record.payload));
    expect(removed).toHaveLength(1);
    expect(added).toHaveLength(1);
    expect(removed[0]).toEqual({ parent: "desk", relation: "support", child: "mug" });
    expect(added[0]).toEqual({ parent: "floor", relation: "support", child: "mug" });
  });

  it("handles a concurrent edit through the stale-base path", async () => {
    const image = "sha256:" + "ef".repeat(32);
    const sceneId = await api.createScene(image, ["mug"], PROPOSAL);

    const first = new EditorState(await api.getScene(sceneId));
    const second = new EditorState(await api.getScene(sceneId));

    first.rename("chair", "stool");
    expect((await first.submitAndApprove(api)).status).toBe("approved");

    second.moveSubtree("notebook", "floor", "support");
    const stale = await second.submitAndApprove(api);
    expect(stale.status).toBe("stale_rebased");
    if (stale.status === "stale_rebased") {
      expect(stale.latest).toBe("r1");
      expect(stale.droppedOps).toHaveLength(0); // the move still applies
    }
    expect(second.dirtyOps).toHaveLength(1);

    // after re-review the replayed ops submit cleanly
    const retried = await second.submitAndApprove(api);
    expect(retried.status).toBe("approved");

    const refreshed = await api.getScene(sceneId);
    const latest = refreshed.revisions[refreshed.revisions.length - 1]!;
    const triples = toTriples(latest.graph);
    expect(triples).toContainEqual({ parent: "floor", relation: "support", child: "notebook" });
    expect(triples.some((t) => t.child === "stool")).toBe(true);
  });

  it("surfaces service rejections verbatim", async () => {
    const image = "sha256:" + "09".repeat(32);
    const sceneId = await api.createScene(image, ["mug"], PROPOSAL);
    const result = await api.postCorrection(sceneId, "r0", [
      { op: "rename", old: "ghost", new: "spirit" },
    ]);
    expect(result.ok).toBe(false);
    if (!result.ok && result.kind === "invalid_edit") {
      expect(result.reason).toMatch(/ghost/);
    }
  });
});
