// DOM layer: builds the cropper/labeler page and binds it to the store.
// Pure rendering from store state so a page refresh reproduces the view.

import { ApiClient, GridModel, LABELS, LabelName } from "./api.js";
import { LabelingStore, argmax, normalizeConfidences } from "./model.js";

const KNOBS: (keyof GridModel)[] = [
  "rows", "cols", "x_offset", "y_offset", "cell_width", "cell_height",
  "x_pitch", "y_pitch", "x_skew", "y_skew",
];

const LABEL_TITLES: Record<LabelName, string> = {
  granular: "Granular",
  edge_ring: "Edge Ring",
  edge_bulge: "Edge Bulge",
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document, tag: K, attrs: Record<string, string> = {}, text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export interface App {
  store: LabelingStore;
  root: HTMLElement;
  render: () => void;
}

export function initApp(doc: Document, api: ApiClient, mount?: HTMLElement): App {
  const store = new LabelingStore(api);
  const root = mount ?? (doc.getElementById("app") as HTMLElement);
  root.innerHTML = "";

  // session creation bar
  const createBar = el(doc, "div", { id: "create-bar", class: "bar" });
  const fileInput = el(doc, "input", { id: "file", type: "file", accept: "image/png" });
  const rowsInput = el(doc, "input", { id: "rows", type: "number", value: "4", min: "1" });
  const colsInput = el(doc, "input", { id: "cols", type: "number", value: "5", min: "1" });
  const nameInput = el(doc, "input", { id: "name", type: "text", value: "mosaic" });
  const createBtn = el(doc, "button", { id: "create-btn" }, "Load mosaic");
  createBar.append("mosaic:", fileInput, "rows:", rowsInput, "cols:", colsInput,
                   "name:", nameInput, createBtn);

  const banner = el(doc, "div", { id: "error-banner", class: "banner hidden" });
  const retryBtn = el(doc, "button", { id: "retry-btn" }, "retry");
  const bannerText = el(doc, "span", { id: "error-text" });
  banner.append(bannerText, retryBtn);

  // mosaic panel with the live grid overlay
  const mosaicPanel = el(doc, "div", { id: "mosaic-panel" });
  const mosaicImg = el(doc, "img", { id: "mosaic-img", alt: "mosaic" });
  const overlay = el(doc, "div", { id: "overlay" });
  mosaicPanel.append(mosaicImg, overlay);

  // grid knobs
  const knobPanel = el(doc, "div", { id: "knob-panel" });
  knobPanel.append(el(doc, "h3", {}, "Grid"));
  const knobInputs = new Map<keyof GridModel, HTMLInputElement>();
  for (const field of KNOBS) {
    const row = el(doc, "label", { class: "knob" }, `${field} `);
    const input = el(doc, "input", { id: `knob-${field}`, type: "number" });
    row.append(input);
    knobPanel.append(row);
    knobInputs.set(field, input);
    input.addEventListener("input", () => {
      const value = parseInt(input.value, 10);
      if (!Number.isNaN(value)) store.knobChanged(field, value);
    });
  }
  const gridNote = el(doc, "div", { id: "grid-note" });
  knobPanel.append(gridNote);

  // crop walker: slider + preview + labels
  const cropPanel = el(doc, "div", { id: "crop-panel" });
  cropPanel.append(el(doc, "h3", {}, "Crops"));
  const slider = el(doc, "input", { id: "crop-slider", type: "range", min: "0", value: "0" });
  const cropPos = el(doc, "span", { id: "crop-pos" });
  const previewImg = el(doc, "img", { id: "preview-img", width: "108", height: "108",
                                      alt: "crop preview" });
  const cropState = el(doc, "div", { id: "crop-label-state" });
  const labelBtns: HTMLButtonElement[] = LABELS.map((name) => {
    const btn = el(doc, "button", { class: "label-btn", "data-label": name },
                   LABEL_TITLES[name]);
    btn.addEventListener("click", () => {
      void store.labelHard(name);
    });
    return btn;
  });

  // soft-label sliders with auto-normalization
  const softToggle = el(doc, "input", { id: "soft-toggle", type: "checkbox" });
  const softPanel = el(doc, "div", { id: "soft-panel", class: "hidden" });
  const softSliders: HTMLInputElement[] = LABELS.map((name, i) => {
    const wrap = el(doc, "label", { class: "soft-row" }, `${LABEL_TITLES[name]} `);
    const input = el(doc, "input", { id: `soft-${i}`, type: "range", min: "0",
                                     max: "100", value: "33" });
    wrap.append(input);
    softPanel.append(wrap);
    return input;
  });
  const softDisplay = el(doc, "div", { id: "soft-display" });
  const softSubmit = el(doc, "button", { id: "soft-submit" }, "Assign confidences");
  softPanel.append(softDisplay, softSubmit);

  const softValues = () => softSliders.map((s) => parseFloat(s.value));
  const renderSoftDisplay = () => {
    const norm = normalizeConfidences(softValues());
    const hard = LABEL_TITLES[LABELS[argmax(norm)]];
    softDisplay.textContent =
      `normalized: ${norm.map((v) => v.toFixed(3)).join(" / ")} -> ${hard}`;
  };
  for (const s of softSliders) s.addEventListener("input", renderSoftDisplay);
  softToggle.addEventListener("change", () => {
    softPanel.classList.toggle("hidden", !softToggle.checked);
    renderSoftDisplay();
  });
  softSubmit.addEventListener("click", () => {
    void store.labelSoft(softValues());
  });

  const progress = el(doc, "div", { id: "progress" });
  cropPanel.append(slider, cropPos, previewImg, cropState, ...labelBtns,
                   el(doc, "label", { class: "soft-toggle-row" }, "soft labels "),
                   softPanel, progress);
  cropPanel.querySelector(".soft-toggle-row")!.append(softToggle);

  // export
  const exportPanel = el(doc, "div", { id: "export-panel" });
  exportPanel.append(el(doc, "h3", {}, "Export"));
  const exportDir = el(doc, "input", { id: "export-dir", type: "text",
                                       placeholder: "output directory" });
  const exportPartial = el(doc, "input", { id: "export-partial", type: "checkbox" });
  const exportBtn = el(doc, "button", { id: "export-btn" }, "Export dataset");
  const exportStatus = el(doc, "div", { id: "export-status" });
  const partialRow = el(doc, "label", {}, "partial export ");
  partialRow.append(exportPartial);
  exportPanel.append(exportDir, partialRow, exportBtn, exportStatus);

  root.append(createBar, banner, mosaicPanel, knobPanel, cropPanel, exportPanel);

  createBtn.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    const reader = new (doc.defaultView as any).FileReader();
    reader.addEventListener("load", () => {
      const dataUrl = String(reader.result);
      const base64 = dataUrl.slice(dataUrl.indexOf(",") + 1);
      void store.create(base64, parseInt(rowsInput.value, 10),
                        parseInt(colsInput.value, 10), nameInput.value || "mosaic")
        .then(() => {
          if (store.detail && doc.defaultView) {
            doc.defaultView.location.hash = store.detail.id;
          }
        });
    });
    reader.readAsDataURL(file);
  });

  slider.addEventListener("input", () => {
    store.select(parseInt(slider.value, 10));
  });
  exportBtn.addEventListener("click", () => {
    void store.exportDataset(exportDir.value, exportPartial.checked);
  });
  retryBtn.addEventListener("click", () => {
    void store.retry();
  });

  function renderOverlay(): void {
    overlay.innerHTML = "";
    const detail = store.detail;
    const grid = store.grid;
    if (!detail || !grid) return;
    for (const crop of store.crops) {
      const x0 = grid.x_offset + crop.col * grid.x_pitch + crop.row * grid.x_skew;
      const y0 = grid.y_offset + crop.row * grid.y_pitch + crop.col * grid.y_skew;
      const cell = el(doc, "div", {
        class: "cell" + (crop.index === store.selected ? " selected" : ""),
        "data-index": String(crop.index),
      });
      cell.style.left = `${x0}px`;
      cell.style.top = `${y0}px`;
      cell.style.width = `${grid.cell_width}px`;
      cell.style.height = `${grid.cell_height}px`;
      if (crop.label) {
        cell.append(el(doc, "span", { class: "badge" },
                       LABEL_TITLES[crop.label][0]));
      }
      cell.addEventListener("click", () => store.select(crop.index));
      overlay.append(cell);
    }
  }

  function render(): void {
    const detail = store.detail;
    banner.classList.toggle("hidden", !store.offline && !store.error);
    bannerText.textContent = store.error ?? "";
    const mutationsDisabled = store.offline || !detail;
    for (const control of [...labelBtns, softSubmit, exportBtn,
                           ...knobInputs.values()]) {
      (control as HTMLButtonElement | HTMLInputElement).disabled = mutationsDisabled;
    }
    if (!detail) {
      render_empty();
      return;
    }
    mosaicImg.setAttribute("src", api.imageUrl(detail.id));
    mosaicImg.style.width = `${detail.width}px`;
    mosaicImg.style.height = `${detail.height}px`;
    const grid = store.grid!;
    for (const [field, input] of knobInputs) {
      if (doc.activeElement !== input) {
        input.value = String(grid[field]);
      }
    }
    gridNote.textContent = grid.low_confidence
      ? "low confidence: grid fell back to a uniform partition" : "";
    slider.setAttribute("max", String(detail.crop_count - 1));
    slider.value = String(store.selected);
    cropPos.textContent = ` ${store.selected + 1} / ${detail.crop_count}`;
    const crop = store.selectedCrop;
    if (crop) {
      previewImg.setAttribute("src", api.previewUrl(detail.id, crop.row, crop.col));
      const soft = crop.soft_label
        ? ` [${crop.soft_label.map((v) => v.toFixed(2)).join("/")}]` : "";
      cropState.textContent = crop.label
        ? `cell (${crop.row},${crop.col}): ${LABEL_TITLES[crop.label]}${soft}`
        : `cell (${crop.row},${crop.col}): unlabeled`;
      for (const btn of labelBtns) {
        btn.classList.toggle("active", btn.dataset.label === crop.label);
      }
    }
    progress.textContent = `labeled ${detail.labeled_count} / ${detail.crop_count}`;
    // export stays disabled until every crop is labeled, unless partial is on
    exportBtn.disabled = mutationsDisabled ||
      (!store.allLabeled && !exportPartial.checked);
    exportStatus.textContent = store.exportStatus ?? "";
    renderOverlay();
  }

  function render_empty(): void {
    mosaicImg.removeAttribute("src");
    overlay.innerHTML = "";
    progress.textContent = "no session";
    cropPos.textContent = "";
    cropState.textContent = "";
    exportStatus.textContent = store.exportStatus ?? "";
  }

  exportPartial.addEventListener("change", render);
  store.onChange(render);
  render();
  return { store, root, render };
}

// browser boot: reopen the session named in the URL hash (refresh-safe)
declare const window: (Window & typeof globalThis) | undefined;
if (typeof window !== "undefined" && window.document?.getElementById("app")) {
  const api = new ApiClient("");
  const app = initApp(window.document, api);
  const sid = window.location.hash.replace(/^#/, "");
  if (sid) void app.store.open(sid);
}
