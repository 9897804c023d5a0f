// UI state: everything the panels render, reconstructible from one GET.

import {
  ApiClient,
  ApiError,
  CropInfo,
  GridModel,
  LabelName,
  SessionDetail,
} from "./api.js";

export function argmax(values: readonly number[]): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// slider confidences are re-normalized to sum 1 before submission
export function normalizeConfidences(values: readonly number[]): [number, number, number] {
  const clipped = values.slice(0, 3).map((v) => (Number.isFinite(v) && v > 0 ? v : 0));
  const sum = clipped[0] + clipped[1] + clipped[2];
  if (sum <= 0) return [1 / 3, 1 / 3, 1 / 3];
  return [clipped[0] / sum, clipped[1] / sum, clipped[2] / sum];
}

/** Collapses a burst of calls into one trailing invocation. */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private fn: (() => void) | null = null;

  constructor(private delayMs: number) {}

  schedule(fn: () => void): void {
    this.fn = fn;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.fire(), this.delayMs);
  }

  flush(): void {
    if (this.timer !== null) this.fire();
  }

  get pending(): boolean {
    return this.timer !== null;
  }

  private fire(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    const fn = this.fn;
    this.fn = null;
    if (fn) fn();
  }
}

export type StoreListener = () => void;

export class LabelingStore {
  detail: SessionDetail | null = null;
  /** Local grid edits shown in the overlay before the debounced PUT lands. */
  pendingGrid: GridModel | null = null;
  selected = 0;
  offline = false;
  error: string | null = null;
  exportStatus: string | null = null;
  gridPutCount = 0;

  private debouncer: Debouncer;
  private listeners: StoreListener[] = [];

  constructor(public api: ApiClient, debounceMs = 250) {
    this.debouncer = new Debouncer(debounceMs);
  }

  onChange(listener: StoreListener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const l of this.listeners) l();
  }

  private async guard<T>(op: () => Promise<T>): Promise<T | null> {
    try {
      const result = await op();
      this.offline = false;
      this.error = null;
      return result;
    } catch (err) {
      if (err instanceof ApiError) {
        this.error = err.message; // server rejected; surface inline
      } else {
        this.offline = true; // network failure: disable mutations
        this.error = "service unreachable";
      }
      return null;
    } finally {
      this.emit();
    }
  }

  get grid(): GridModel | null {
    return this.pendingGrid ?? this.detail?.grid ?? null;
  }

  get crops(): CropInfo[] {
    return this.detail?.crops ?? [];
  }

  get selectedCrop(): CropInfo | null {
    return this.crops[this.selected] ?? null;
  }

  get labeledCount(): number {
    return this.detail?.labeled_count ?? 0;
  }

  get allLabeled(): boolean {
    return this.detail !== null && this.labeledCount === this.detail.crop_count;
  }

  /** Reconstruct every panel from server state; the refresh path. */
  async open(sessionId: string): Promise<void> {
    await this.guard(async () => {
      this.detail = await this.api.getSession(sessionId);
      this.pendingGrid = null;
      this.selected = Math.min(this.selected, this.detail.crop_count - 1);
    });
  }

  async create(pngBase64: string, rows: number, cols: number, name: string): Promise<void> {
    await this.guard(async () => {
      const summary = await this.api.createSession(pngBase64, rows, cols, name);
      this.detail = await this.api.getSession(summary.id);
      this.pendingGrid = null;
      this.selected = 0;
    });
  }

  /** One knob edit; a burst of edits debounces to a single grid PUT. */
  knobChanged(field: keyof GridModel, value: number): void {
    if (!this.detail || this.offline) return;
    const base = this.pendingGrid ?? this.detail.grid;
    this.pendingGrid = { ...base, [field]: value };
    this.emit(); // overlay tracks the pending grid immediately
    this.debouncer.schedule(() => {
      void this.pushGrid();
    });
  }

  async pushGrid(): Promise<void> {
    if (!this.detail || !this.pendingGrid) return;
    const grid = this.pendingGrid;
    await this.guard(async () => {
      this.gridPutCount += 1;
      this.detail = await this.api.putGrid(this.detail!.id, grid);
      if (this.pendingGrid === grid) this.pendingGrid = null;
    });
  }

  flushGrid(): void {
    this.debouncer.flush();
  }

  select(index: number): void {
    if (!this.detail) return;
    this.selected = Math.max(0, Math.min(index, this.detail.crop_count - 1));
    this.emit();
  }

  async labelHard(name: LabelName): Promise<void> {
    if (!this.detail || this.offline) return;
    const index = this.selected;
    await this.guard(async () => {
      await this.api.postLabel(this.detail!.id, index, { label: name });
      this.detail = await this.api.getSession(this.detail!.id);
    });
  }

  /** Normalizes raw slider values, submits, server derives the hard label. */
  async labelSoft(raw: readonly number[]): Promise<void> {
    if (!this.detail || this.offline) return;
    const soft = normalizeConfidences(raw);
    const index = this.selected;
    await this.guard(async () => {
      await this.api.postLabel(this.detail!.id, index, { soft_label: soft });
      this.detail = await this.api.getSession(this.detail!.id);
    });
  }

  async exportDataset(outDir: string, partial: boolean): Promise<void> {
    if (!this.detail || this.offline) return;
    this.exportStatus = "exporting...";
    this.emit();
    const result = await this.guard(() =>
      this.api.exportSession(this.detail!.id, outDir, partial));
    this.exportStatus = result
      ? `exported ${result.exported} crops to ${result.manifest_path}`
      : `export failed: ${this.error}`;
    this.emit();
  }

  async retry(): Promise<void> {
    if (this.detail) await this.open(this.detail.id);
  }
}
