// Typed client for the labeling service. Every method maps to exactly one
// documented endpoint.

export const LABELS = ["granular", "edge_ring", "edge_bulge"] as const;
export type LabelName = (typeof LABELS)[number];

export interface GridModel {
  rows: number;
  cols: number;
  x_offset: number;
  y_offset: number;
  cell_width: number;
  cell_height: number;
  x_pitch: number;
  y_pitch: number;
  x_skew: number;
  y_skew: number;
  low_confidence: boolean;
}

export interface CropInfo {
  index: number;
  row: number;
  col: number;
  box: [number, number, number, number];
  label: LabelName | null;
  soft_label: [number, number, number] | null;
}

export interface SessionDetail {
  id: string;
  name: string;
  width: number;
  height: number;
  theta: number;
  grid: GridModel;
  crop_count: number;
  labeled_count: number;
  crops: CropInfo[];
}

export interface ExportResult {
  manifest_path: string;
  exported: number;
  skipped_unlabeled: number;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    if (!res.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch {
        // non-JSON error body; keep the raw text
      }
      throw new ApiError(res.status, String(detail));
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  createSession(pngBase64: string, rows: number, cols: number,
                name = "mosaic", theta = 12): Promise<SessionDetail> {
    return this.request("POST", "/sessions", {
      png_base64: pngBase64, rows, cols, name, theta,
    });
  }

  getSession(id: string): Promise<SessionDetail> {
    return this.request("GET", `/sessions/${id}`);
  }

  putGrid(id: string, grid: GridModel): Promise<SessionDetail> {
    return this.request("PUT", `/sessions/${id}/grid`, grid);
  }

  postLabel(id: string, index: number,
            payload: { label?: LabelName; soft_label?: [number, number, number] }):
      Promise<CropInfo> {
    return this.request("POST", `/sessions/${id}/crops/${index}/label`, payload);
  }

  exportSession(id: string, outDir: string, partial: boolean): Promise<ExportResult> {
    const suffix = partial ? "?partial=true" : "";
    return this.request("POST", `/sessions/${id}/export${suffix}`, { out_dir: outDir });
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/image`;
  }

  previewUrl(id: string, row: number, col: number): string {
    return `${this.baseUrl}/sessions/${id}/preview?cell=${row},${col}`;
  }
}
