/**
 * DOM rendering: a queue view and a tree editor.
 *
 * The tree renders as an indented collapsible list with a relation badge
 * per edge. Nodes are draggable; dropping one node onto another queues a
 * move_subtree op with the relation chosen in the toolbar. All edits give
 * inline feedback and nothing is written anywhere except through the
 * service API on submit.
 */

import { Scene, SceneSummary, ServiceClient, ServiceError } from "./api.js";
import { EditorState } from "./editor.js";
import { isRelation, Relation, RELATIONS, Triple } from "./graph.js";

type OpenScene = (sceneId: string) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export function renderQueue(
  container: HTMLElement,
  summaries: SceneSummary[],
  openScene: OpenScene,
): void {
  container.replaceChildren();
  if (!summaries.length) {
    container.append(el("p", { class: "empty" }, "No scenes in the queue."));
    return;
  }
  const table = el("table", { class: "queue" });
  table.append(
    el(
      "tr",
      {},
      el("th", {}, "scene"),
      el("th", {}, "status"),
      el("th", {}, "revisions"),
      el("th", {}, "objects"),
    ),
  );
  for (const summary of summaries) {
    const row = el(
      "tr",
      { class: "queue-row" },
      el("td", {}, summary.scene_id),
      el("td", {}, el("span", { class: `status status-${summary.status}` }, summary.status)),
      el("td", {}, String(summary.revision_count)),
      el("td", {}, String(summary.object_count)),
    );
    row.addEventListener("click", () => openScene(summary.scene_id));
    table.append(row);
  }
  container.append(table);
}

export function renderBanner(container: HTMLElement, message: string, retry?: () => void): void {
  const banner = el("div", { class: "banner" }, message);
  if (retry) {
    const button = el("button", {}, "retry");
    button.addEventListener("click", retry);
    banner.append(" ", button);
  }
  container.replaceChildren(banner);
}

interface EditorView {
  editor: EditorState;
  refresh: () => void;
}

export function renderEditor(
  container: HTMLElement,
  scene: Scene,
  editor: EditorState,
  api: ServiceClient,
  onDone: () => void,
): EditorView {
  const feedback = el("p", { class: "feedback" });
  const relationPicker = el("select", { class: "relation-picker" });
  for (const relation of RELATIONS) {
    relationPicker.append(el("option", { value: relation }, relation));
  }

  const note = (message: string, bad = false) => {
    feedback.textContent = message;
    feedback.className = bad ? "feedback bad" : "feedback";
  };

  const pickedRelation = (): Relation => {
    const value = relationPicker.value;
    return isRelation(value) ? value : "support";
  };

  const tree = el("div", { class: "tree" });

  const renderTree = () => {
    const triples = editor.workingTriples;
    const children = new Map<string, Triple[]>();
    for (const t of triples) {
      const bucket = children.get(t.parent) ?? [];
      bucket.push(t);
      children.set(t.parent, bucket);
    }

    const nodeRow = (label: string, relation: Relation | null): HTMLElement => {
      const row = el("span", { class: "node-row", draggable: relation ? "true" : "false" });
      if (relation) {
        row.append(el("span", { class: `badge badge-${relation}` }, relation));
      }
      row.append(el("span", { class: "label" }, label));
      row.dataset.label = label;
      if (relation) {
        row.addEventListener("dragstart", (event) => {
          event.dataTransfer?.setData("text/plain", label);
        });
      }
      row.addEventListener("dragover", (event) => event.preventDefault());
      row.addEventListener("drop", (event) => {
        event.preventDefault();
        const dragged = event.dataTransfer?.getData("text/plain");
        if (!dragged || dragged === label) return;
        const outcome = editor.moveSubtree(dragged, label, pickedRelation());
        note(
          outcome.ok
            ? `queued: move "${dragged}" under "${label}"`
            : `rejected: ${outcome.reason}`,
          !outcome.ok,
        );
        if (outcome.ok) renderTree();
      });
      row.addEventListener("click", (event) => {
        event.stopPropagation();
        editor.selection = { kind: "node", label };
        tree.querySelectorAll(".selected").forEach((n) => n.classList.remove("selected"));
        row.classList.add("selected");
      });
      return row;
    };

    const subtree = (label: string, relation: Relation | null): HTMLElement => {
      const mine = children.get(label) ?? [];
      if (!mine.length) {
        return el("div", { class: "leaf" }, nodeRow(label, relation));
      }
      const details = el("details", { open: "" }, el("summary", {}, nodeRow(label, relation)));
      for (const t of mine) {
        details.append(subtree(t.child, t.relation));
      }
      return details;
    };

    tree.replaceChildren(...["ceiling", "wall", "floor"].map((root) => subtree(root, null)));
  };

  const actionButton = (label: string, handler: () => void) => {
    const button = el("button", {}, label);
    button.addEventListener("click", handler);
    return button;
  };

  const selectedLabel = (): string | null =>
    editor.selection?.kind === "node" ? editor.selection.label : null;

  const toolbar = el(
    "div",
    { class: "toolbar" },
    el("span", {}, "relation:"),
    relationPicker,
    actionButton("add child", () => {
      const parent = selectedLabel();
      if (!parent) return note("select a parent node first", true);
      const child = window.prompt(`new child of "${parent}"`);
      if (!child) return;
      const outcome = editor.addRelation(parent, pickedRelation(), child);
      note(outcome.ok ? `queued: add "${child}"` : `rejected: ${outcome.reason}`, !outcome.ok);
      if (outcome.ok) renderTree();
    }),
    actionButton("rename", () => {
      const target = selectedLabel();
      if (!target) return note("select a node first", true);
      const next = window.prompt(`rename "${target}" to`);
      if (!next) return;
      const outcome = editor.rename(target, next);
      note(outcome.ok ? `queued: rename to "${next}"` : `rejected: ${outcome.reason}`, !outcome.ok);
      if (outcome.ok) renderTree();
    }),
    actionButton("set relation", () => {
      const target = selectedLabel();
      if (!target) return note("select a node first", true);
      const parent = editor.workingTriples.find((t) => t.child === target)?.parent;
      if (!parent) return note("roots have no parent edge", true);
      const outcome = editor.setRelation(parent, target, pickedRelation());
      note(outcome.ok ? "queued: relation change" : `rejected: ${outcome.reason}`, !outcome.ok);
      if (outcome.ok) renderTree();
    }),
    actionButton("remove", () => {
      const target = selectedLabel();
      if (!target) return note("select a node first", true);
      const parent = editor.workingTriples.find((t) => t.child === target)?.parent;
      if (!parent) return note("cannot remove a root", true);
      const outcome = editor.removeRelation(parent, target);
      note(outcome.ok ? `queued: remove "${target}"` : `rejected: ${outcome.reason}`, !outcome.ok);
      if (outcome.ok) renderTree();
    }),
    actionButton("undo", () => {
      editor.undo();
      note("last op removed");
      renderTree();
    }),
    actionButton("submit + approve", () => void submit(false)),
    actionButton("accept as-is", () => void submit(true)),
  );

  const submit = async (acceptAsIs: boolean) => {
    try {
      const outcome = await editor.submitAndApprove(api, acceptAsIs);
      switch (outcome.status) {
        case "approved":
          note("approved");
          onDone();
          return;
        case "stale_rebased":
          note(
            `another session updated this scene (now at ${outcome.latest}); ` +
              `${outcome.droppedOps.length} op(s) no longer apply - please re-review`,
            true,
          );
          renderTree();
          return;
        case "invalid":
          note(`service rejected the correction: ${outcome.reason}`, true);
          return;
        case "nothing_to_submit":
          note('no queued edits; use "accept as-is" to approve unchanged', true);
          return;
      }
    } catch (err) {
      note(err instanceof ServiceError ? err.message : String(err), true);
    }
  };

  const imagePane = el("div", { class: "image-pane" });
  if (scene.image && scene.image.startsWith("sha256:")) {
    const img = el("img", { src: api.blobUrl(scene.image), alt: scene.scene_id });
    img.addEventListener("error", () => {
      imagePane.replaceChildren(el("p", { class: "empty" }, "no image available"));
    });
    imagePane.append(img);
  } else {
    imagePane.append(el("p", { class: "empty" }, "no image for this scene"));
  }
  // Optional bounding-box overlay from a locally chosen perception result.
  const overlayInput = el("input", { type: "file", accept: ".json" });
  overlayInput.addEventListener("change", async () => {
    const file = overlayInput.files?.[0];
    if (!file) return;
    try {
      const doc = JSON.parse(await file.text()) as {
        objects?: Array<{ label: string; bbox: number[] }>;
      };
      const list = el("ul", { class: "bbox-list" });
      for (const obj of doc.objects ?? []) {
        list.append(el("li", {}, `${obj.label}: [${obj.bbox.join(", ")}]`));
      }
      imagePane.append(list);
      note("perception boxes loaded");
    } catch (err) {
      note(`could not read perception result: ${String(err)}`, true);
    }
  });
  imagePane.append(el("label", {}, "overlay perception result: ", overlayInput));

  const header = el(
    "div",
    { class: "editor-header" },
    el("h2", {}, `${scene.scene_id} (${editor.baseRevisionId})`),
    el("p", { class: "hint" }, "drag a node onto its new parent; the relation picker sets the edge type"),
  );

  container.replaceChildren(header, toolbar, feedback, tree, imagePane);
  renderTree();
  return { editor, refresh: renderTree };
}
