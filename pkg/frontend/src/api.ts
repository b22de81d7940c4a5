export interface TrackResult {
  track_id: string;
  title: string;
  artist_name: string;
  score: number;
}

export interface TurnResponse {
  turn_index: number;
  results: TrackResult[];
}

export type Retriever = "bm25" | "dense";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null;
}

function parseTrackResult(value: unknown): TrackResult {
  if (
    !isRecord(value) ||
    typeof value.track_id !== "string" ||
    typeof value.title !== "string" ||
    typeof value.artist_name !== "string" ||
    typeof value.score !== "number"
  ) {
    throw new ApiError(0, "malformed track result in response");
  }
  return {
    track_id: value.track_id,
    title: value.title,
    artist_name: value.artist_name,
    score: value.score,
  };
}

function parseTurnResponse(value: unknown): TurnResponse {
  if (
    !isRecord(value) ||
    typeof value.turn_index !== "number" ||
    !Array.isArray(value.results)
  ) {
    throw new ApiError(0, "malformed turn response");
  }
  return {
    turn_index: value.turn_index,
    results: value.results.map(parseTrackResult),
  };
}

/** Thin typed client over the retrieval service; no state beyond base URL. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post(path: string, body: unknown): Promise<unknown> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload: unknown = await resp.json().catch(() => ({}));
    if (resp.status >= 400) {
      const message =
        isRecord(payload) && typeof payload.error === "string"
          ? payload.error
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, message);
    }
    return payload;
  }

  async createSession(retriever: Retriever): Promise<string> {
    const payload = await this.post("/api/sessions", { retriever });
    if (!isRecord(payload) || typeof payload.session_id !== "string" || !payload.session_id) {
      throw new ApiError(0, "malformed session response");
    }
    return payload.session_id;
  }

  async postTurn(sessionId: string, text: string, k: number): Promise<TurnResponse> {
    const payload = await this.post(`/api/sessions/${sessionId}/turns`, { text, k });
    return parseTurnResponse(payload);
  }

  async postFeedback(sessionId: string, trackId: string, liked: boolean): Promise<void> {
    const payload = await this.post(`/api/sessions/${sessionId}/feedback`, {
      track_id: trackId,
      liked,
    });
    if (!isRecord(payload) || payload.ok !== true) {
      throw new ApiError(0, "malformed feedback response");
    }
  }
}
