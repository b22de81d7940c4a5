import { ApiClient, ApiError, Retriever, TrackResult } from "./api.js";

export interface TranscriptEntry {
  readonly userText: string;
  readonly results: readonly TrackResult[];
}

export type FeedbackState = "liked" | "disliked";

export class TurnInFlightError extends Error {
  constructor() {
    super("a turn request is already in flight");
    this.name = "TurnInFlightError";
  }
}

/**
 * Client-side session state: an append-only transcript, at most one in-flight
 * turn request, and per-track feedback indicators. All server mutation goes
 * through the injected ApiClient.
 */
export class UiSession {
  private sessionId: string | null = null;
  private readonly entries: TranscriptEntry[] = [];
  private readonly feedbackStates = new Map<string, FeedbackState>();
  private inFlight = false;

  constructor(
    private readonly api: ApiClient,
    private retriever: Retriever = "bm25",
    private readonly resultsPerTurn: number = 10,
  ) {}

  get transcript(): readonly TranscriptEntry[] {
    return this.entries;
  }

  get pending(): boolean {
    return this.inFlight;
  }

  get currentSessionId(): string | null {
    return this.sessionId;
  }

  feedbackFor(trackId: string): FeedbackState | undefined {
    return this.feedbackStates.get(trackId);
  }

  /** Changing the retriever starts a fresh server session on the next turn. */
  setRetriever(retriever: Retriever): void {
    if (retriever !== this.retriever) {
      this.retriever = retriever;
      this.sessionId = null;
    }
  }

  /**
   * Send one chat turn. The server session is created lazily on the first
   * message; if the server has expired the session (404), a new session is
   * created and the turn retried once. On failure the transcript is unchanged.
   */
  async sendTurn(text: string): Promise<TranscriptEntry> {
    const trimmed = text.trim();
    if (trimmed === "") {
      throw new Error("message must be nonempty");
    }
    if (this.inFlight) {
      throw new TurnInFlightError();
    }
    this.inFlight = true;
    try {
      if (this.sessionId === null) {
        this.sessionId = await this.api.createSession(this.retriever);
      }
      let response;
      try {
        response = await this.api.postTurn(this.sessionId, trimmed, this.resultsPerTurn);
      } catch (err) {
        if (!(err instanceof ApiError) || err.status !== 404) {
          throw err;
        }
        this.sessionId = await this.api.createSession(this.retriever);
        response = await this.api.postTurn(this.sessionId, trimmed, this.resultsPerTurn);
      }
      const entry: TranscriptEntry = { userText: trimmed, results: response.results };
      this.entries.push(entry);
      return entry;
    } finally {
      this.inFlight = false;
    }
  }

  /**
   * Toggle like/dislike for a track shown in the latest results. The indicator
   * flips optimistically and reverts if the request fails. Feedback may
   * overlap turn requests.
   */
  async markFeedback(trackId: string, liked: boolean): Promise<void> {
    const latest = this.entries[this.entries.length - 1];
    if (!latest || !latest.results.some((r) => r.track_id === trackId)) {
      throw new Error(`track ${trackId} is not in the current results`);
    }
    if (this.sessionId === null) {
      throw new Error("no active session");
    }
    const previous = this.feedbackStates.get(trackId);
    this.feedbackStates.set(trackId, liked ? "liked" : "disliked");
    try {
      await this.api.postFeedback(this.sessionId, trackId, liked);
    } catch (err) {
      if (previous === undefined) {
        this.feedbackStates.delete(trackId);
      } else {
        this.feedbackStates.set(trackId, previous);
      }
      throw err;
    }
  }
}
