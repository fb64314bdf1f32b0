import { ApiClient } from "./api.js";
import { AsYouTypeController } from "./translator.js";
import { describeModel, formatSize, pollUntilInstalled } from "./manager.js";
import { deriveViewState, nextSelection } from "./viewstate.js";
import type { Manifest } from "./types.js";

const api = new ApiClient(window.location.origin);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const inputBox = el<HTMLTextAreaElement>("input-box");
const outputBox = el<HTMLDivElement>("output-box");
const panes = el<HTMLDivElement>("panes");
const modelSelect = el<HTMLSelectElement>("model-select");
const translateButton = el<HTMLButtonElement>("translate-button");
const asYouTypeToggle = el<HTMLInputElement>("as-you-type");
const layoutToggle = el<HTMLInputElement>("side-by-side");
const fontSize = el<HTMLInputElement>("font-size");
const threadsInput = el<HTMLInputElement>("threads");
const batchInput = el<HTMLInputElement>("max-batch-tokens");
const banner = el<HTMLDivElement>("banner");
const firstRun = el<HTMLDivElement>("first-run");
const workspace = el<HTMLDivElement>("workspace");
const managerList = el<HTMLUListElement>("installed-list");
const catalogList = el<HTMLUListElement>("catalog-list");
const catalogButton = el<HTMLButtonElement>("open-catalog");
const importPath = el<HTMLInputElement>("import-path");
const importButton = el<HTMLButtonElement>("import-button");
const managerDialog = el<HTMLDialogElement>("manager-dialog");

const controller = new AsYouTypeController(api, {
  render: (text) => {
    outputBox.textContent = text;
  },
  showBanner: (message) => {
    banner.textContent = message;
    banner.hidden = false;
  },
  clearBanner: () => {
    banner.hidden = true;
  },
});

let installed: Manifest[] = [];

function selectedModel(): string | null {
  return modelSelect.value || null;
}

function applyModelSelection(): void {
  controller.model = selectedModel();
  const state = deriveViewState(installed, controller.model);
  inputBox.disabled = state.inputDisabled;
  translateButton.disabled = state.inputDisabled;
  inputBox.placeholder = state.placeholder;
  firstRun.hidden = !state.firstRun;
  workspace.hidden = !state.workspaceVisible;
}

async function refreshModels(keepSelection = true): Promise<void> {
  const previous = keepSelection ? selectedModel() : null;
  installed = await api.models();
  modelSelect.innerHTML = "";
  for (const m of installed) {
    const option = document.createElement("option");
    option.value = m.id;
    option.textContent = describeModel(m);
    modelSelect.appendChild(option);
  }
  const selection = nextSelection(installed, previous);
  if (selection !== null) {
    modelSelect.value = selection;
  }
  applyModelSelection();
  renderManagerList();
}

function renderManagerList(): void {
  managerList.innerHTML = "";
  for (const m of installed) {
    const item = document.createElement("li");
    const label = document.createElement("span");
    label.textContent = describeModel(m);
    const remove = document.createElement("button");
    remove.textContent = "Delete";
    remove.addEventListener("click", () => {
      void api.deleteModel(m.id).then(() => refreshModels());
    });
    item.append(label, remove);
    managerList.appendChild(item);
  }
}

async function openCatalog(): Promise<void> {
  catalogList.innerHTML = "<li>Loading catalog…</li>";
  try {
    const entries = await api.catalog();
    catalogList.innerHTML = "";
    if (entries.length === 0) {
      catalogList.innerHTML = "<li>The catalog is empty.</li>";
    }
    for (const entry of entries) {
      const item = document.createElement("li");
      const label = document.createElement("span");
      label.textContent = `${entry.name} (${entry.src_lang} → ${entry.trg_lang}, ${formatSize(entry.size_bytes)})`;
      const install = document.createElement("button");
      const already = installed.some((m) => m.id === entry.id);
      install.textContent = already ? "Installed" : "Download";
      install.disabled = already;
      install.addEventListener("click", async () => {
        install.disabled = true;
        install.textContent = "Installing…";
        try {
          const download = api.download(entry.id);
          await Promise.all([download, pollUntilInstalled(api, entry.id)]);
          install.textContent = "Installed";
          await refreshModels();
        } catch (err) {
          install.textContent = "Failed";
          banner.textContent = (err as Error).message;
          banner.hidden = false;
        }
      });
      item.append(label, install);
      catalogList.appendChild(item);
    }
  } catch (err) {
    catalogList.innerHTML = "";
    const item = document.createElement("li");
    item.textContent = `Could not load catalog: ${(err as Error).message}`;
    catalogList.appendChild(item);
  }
}

// --- wiring -----------------------------------------------------------------

inputBox.addEventListener("input", () => controller.onEdit(inputBox.value));
translateButton.addEventListener("click", () => void controller.translateNow(inputBox.value));
modelSelect.addEventListener("change", () => {
  applyModelSelection();
  controller.onEdit(inputBox.value);
});

asYouTypeToggle.addEventListener("change", () => {
  controller.setEnabled(asYouTypeToggle.checked);
  translateButton.hidden = asYouTypeToggle.checked;
  void api.putSettings({ as_you_type_enabled: asYouTypeToggle.checked });
});

layoutToggle.addEventListener("change", () => {
  panes.classList.toggle("side-by-side", layoutToggle.checked);
});

fontSize.addEventListener("input", () => {
  panes.style.fontSize = `${fontSize.value}px`;
});

threadsInput.addEventListener("change", () => {
  const threads = Number(threadsInput.value);
  if (!Number.isInteger(threads) || threads < 1) {
    threadsInput.reportValidity();
    return;
  }
  void api.putSettings({ threads });
});

batchInput.addEventListener("change", () => {
  const tokens = Number(batchInput.value);
  if (!Number.isInteger(tokens) || tokens < 1) {
    batchInput.reportValidity();
    return;
  }
  void api.putSettings({ max_batch_tokens: tokens });
});

catalogButton.addEventListener("click", () => {
  managerDialog.showModal();
  void openCatalog();
});
el<HTMLButtonElement>("open-manager").addEventListener("click", () => {
  managerDialog.showModal();
});
el<HTMLButtonElement>("close-manager").addEventListener("click", () => managerDialog.close());

importButton.addEventListener("click", async () => {
  const path = importPath.value.trim();
  if (!path) return;
  try {
    await api.importArchive(path);
    importPath.value = "";
    await refreshModels();
  } catch (err) {
    banner.textContent = (err as Error).message;
    banner.hidden = false;
  }
});

async function start(): Promise<void> {
  try {
    const settings = await api.getSettings();
    threadsInput.value = String(settings.threads);
    batchInput.value = String(settings.max_batch_tokens);
    asYouTypeToggle.checked = settings.as_you_type_enabled;
    controller.setEnabled(settings.as_you_type_enabled);
    translateButton.hidden = settings.as_you_type_enabled;
    await refreshModels(false);
  } catch (err) {
    banner.textContent = `service unreachable: ${(err as Error).message}`;
    banner.hidden = false;
  }
}

void start();
