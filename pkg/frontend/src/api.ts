// Typed client for the annotation service. Every call goes through
// fetch; errors carry the HTTP status and the server's detail string.

export interface VideoMeta {
  id: string;
  fps: number;
  width: number;
  height: number;
  n_frames: number | null;
  has_telemetry: boolean;
  has_gaze: boolean;
  has_frames: boolean;
}

export interface VideoList {
  dataset_id: string;
  read_only: boolean;
  videos: VideoMeta[];
}

export interface Span {
  start_frame: number;
  end_frame: number;
  category: string;
}

export interface ContextEvent {
  crossing_frame: number;
  intersection_type: string;
  priority: string | null;
  yield_onset_frame: number | null;
}

export interface AnnotationDoc {
  video_id: string;
  revision: number;
  n_frames: number;
  longitudinal: Span[];
  lateral: Span[];
  context_events: ContextEvent[];
}

export interface Suggestions {
  video_id: string;
  longitudinal: Span[];
  context: ContextEvent[];
  notes: string[];
}

export interface TelemetrySample {
  frame: number;
  t_sec: number;
  speed_kmh: number;
  lat: number;
  lon: number;
  heading_deg: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

/** Save rejected because the document was based on an outdated revision. */
export class RevisionConflictError extends ApiError {
  constructor(readonly currentRevision: number) {
    super(409, `stale revision; server is at ${currentRevision}`);
    this.name = "RevisionConflictError";
  }
}

function detailText(body: unknown): string {
  if (body && typeof body === "object" && "detail" in body) {
    const d = (body as { detail: unknown }).detail;
    return typeof d === "string" ? d : JSON.stringify(d);
  }
  return JSON.stringify(body);
}

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly token?: string,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(body !== undefined),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (resp.status === 409) {
      const payload = (await resp.json()) as {
        detail?: { current_revision?: number };
      };
      const rev = payload.detail?.current_revision;
      throw new RevisionConflictError(typeof rev === "number" ? rev : -1);
    }
    if (!resp.ok) {
      let text: string;
      try {
        text = detailText(await resp.json());
      } catch {
        text = resp.statusText;
      }
      throw new ApiError(resp.status, text);
    }
    return (await resp.json()) as T;
  }

  listVideos(): Promise<VideoList> {
    return this.request("GET", "/api/videos");
  }

  videoMeta(videoId: string): Promise<VideoMeta> {
    return this.request("GET", `/api/videos/${encodeURIComponent(videoId)}`);
  }

  /** URL for one frame image; used directly as an <img> src. */
  frameUrl(videoId: string, frame: number): string {
    return `${this.baseUrl}/api/videos/${encodeURIComponent(videoId)}/frames/${frame}`;
  }

  getAnnotations(videoId: string): Promise<AnnotationDoc> {
    return this.request("GET", `/api/videos/${encodeURIComponent(videoId)}/annotations`);
  }

  /**
   * Full-document save. Resolves to the new revision; throws
   * RevisionConflictError when the document's revision is stale.
   */
  async putAnnotations(doc: AnnotationDoc): Promise<number> {
    const out = await this.request<{ revision: number }>(
      "PUT",
      `/api/videos/${encodeURIComponent(doc.video_id)}/annotations`,
      doc,
    );
    return out.revision;
  }

  getSuggestions(videoId: string): Promise<Suggestions> {
    return this.request("GET", `/api/videos/${encodeURIComponent(videoId)}/suggestions`);
  }

  getTelemetry(videoId: string): Promise<{ video_id: string; samples: TelemetrySample[] }> {
    return this.request("GET", `/api/videos/${encodeURIComponent(videoId)}/telemetry`);
  }
}
