import { ServiceClient, ServiceError } from "./api.js";
import { EditorState } from "./editor.js";
import { renderBanner, renderEditor, renderQueue } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8000";
const token = params.get("token") ?? undefined;

const api = new ServiceClient(serviceUrl, token);
const queuePane = document.getElementById("queue")!;
const editorPane = document.getElementById("editor")!;
const statusPane = document.getElementById("status")!;

async function showQueue(): Promise<void> {
  editorPane.replaceChildren();
  try {
    const scenes = await api.listScenes();
    statusPane.replaceChildren();
    renderQueue(queuePane, scenes, (sceneId) => void openScene(sceneId));
  } catch (err) {
    // keep the last rendered queue; just surface the failure
    renderBanner(
      statusPane,
      err instanceof ServiceError ? err.message : String(err),
      () => void showQueue(),
    );
  }
}

async function openScene(sceneId: string): Promise<void> {
  try {
    const scene = await api.getScene(sceneId);
    const editor = new EditorState(scene);
    renderEditor(editorPane, scene, editor, api, () => void showQueue());
  } catch (err) {
    renderBanner(statusPane, `could not open ${sceneId}: ${String(err)}`, () =>
      void openScene(sceneId),
    );
  }
}

document.getElementById("refresh")!.addEventListener("click", () => void showQueue());
void showQueue();
