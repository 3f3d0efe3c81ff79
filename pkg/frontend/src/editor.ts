/**
 * Editor state for one scene.
 *
 * The working graph is always the base revision plus the queued ops, so
 * replaying `dirtyOps` onto the base reproduces it exactly; every edit is
 * validated by that replay before it is accepted. Submission posts the
 * queued ops against the base revision id; on a stale base the editor
 * reloads the latest revision and re-queues whichever ops still apply,
 * leaving them for re-review instead of resubmitting blindly.
 */

import type { Scene, ServiceClient } from "./api.js";
import {
  applyOps,
  CorrectionOp,
  GraphEditError,
  Relation,
  toDoc,
  toTriples,
  Triple,
} from "./graph.js";

export type Selection =
  | { kind: "node"; label: string }
  | { kind: "edge"; parent: string; child: string }
  | null;

export type EditOutcome = { ok: true } | { ok: false; reason: string };

export type SubmitOutcome =
  | { status: "approved"; revisionId: string | null }
  | { status: "stale_rebased"; latest: string; droppedOps: CorrectionOp[] }
  | { status: "invalid"; reason: string }
  | { status: "nothing_to_submit" };

export class EditorState {
  readonly sceneId: string;
  baseRevisionId: string;
  private baseTriples: Triple[];
  dirtyOps: CorrectionOp[] = [];
  selection: Selection = null;

  constructor(scene: Scene) {
    const latest = scene.revisions[scene.revisions.length - 1];
    if (!latest) {
      throw new Error(`scene ${scene.scene_id} has no revision to edit`);
    }
    this.sceneId = scene.scene_id;
    this.baseRevisionId = latest.revision_id;
    this.baseTriples = toTriples(latest.graph);
  }

  get workingTriples(): Triple[] {
    return applyOps(this.baseTriples, this.dirtyOps);
  }

  workingDoc() {
    return toDoc(this.workingTriples);
  }

  get dirty(): boolean {
    return this.dirtyOps.length > 0;
  }

  private queue(op: CorrectionOp): EditOutcome {
    try {
      applyOps(this.baseTriples, [...this.dirtyOps, op]);
    } catch (err) {
      if (err instanceof GraphEditError) return { ok: false, reason: err.message };
      throw err;
    }
    this.dirtyOps.push(op);
    return { ok: true };
  }

  addRelation(parent: string, relation: Relation, child: string): EditOutcome {
    return this.queue({ op: "add_relation", parent, relation, child });
  }

  removeRelation(parent: string, child: string): EditOutcome {
    return this.queue({ op: "remove_relation", parent, child });
  }

  moveSubtree(child: string, newParent: string, relation: Relation): EditOutcome {
    return this.queue({ op: "move_subtree", child, new_parent: newParent, relation });
  }

  rename(oldLabel: string, newLabel: string): EditOutcome {
    return this.queue({ op: "rename", old: oldLabel, new: newLabel });
  }

  setRelation(parent: string, child: string, relation: Relation): EditOutcome {
    return this.queue({ op: "set_relation", parent, child, relation });
  }

  undo(): void {
    this.dirtyOps.pop();
  }

  /** Rebase onto the latest revision, keeping every op that still applies. */
  rebase(scene: Scene): CorrectionOp[] {
    const latest = scene.revisions[scene.revisions.length - 1];
    if (!latest) throw new Error("scene lost its revisions");
    this.baseRevisionId = latest.revision_id;
    this.baseTriples = toTriples(latest.graph);
    const dropped: CorrectionOp[] = [];
    const kept: CorrectionOp[] = [];
    for (const op of this.dirtyOps) {
      try {
        applyOps(this.baseTriples, [...kept, op]);
        kept.push(op);
      } catch (err) {
        if (err instanceof GraphEditError) dropped.push(op);
        else throw err;
      }
    }
    this.dirtyOps = kept;
    return dropped;
  }

  /**
   * Post the queued correction and approve on success. With no queued ops,
   * approval requires an explicit accept-as-is.
   */
  async submitAndApprove(api: ServiceClient, acceptAsIs = false): Promise<SubmitOutcome> {
    if (!this.dirty) {
      if (!acceptAsIs) return { status: "nothing_to_submit" };
      await api.approve(this.sceneId, true);
      return { status: "approved", revisionId: null };
    }
    const result = await api.postCorrection(this.sceneId, this.baseRevisionId, this.dirtyOps);
    if (!result.ok && result.kind === "stale_base") {
      const scene = await api.getScene(this.sceneId);
      const droppedOps = this.rebase(scene);
      return { status: "stale_rebased", latest: this.baseRevisionId, droppedOps };
    }
    if (!result.ok) {
      return { status: "invalid", reason: result.reason };
    }
    await api.approve(this.sceneId);
    this.baseRevisionId = result.revisionId;
    this.baseTriples = applyOps(this.baseTriples, this.dirtyOps);
    this.dirtyOps = [];
    return { status: "approved", revisionId: result.revisionId };
  }
}
