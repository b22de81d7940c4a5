import { ApiClient, Retriever } from "./api.js";
import { renderErrorBanner, renderTranscript } from "./render.js";
import { TurnInFlightError, UiSession } from "./session.js";

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

export function wireUp(doc: Document = document): void {
  const transcriptEl = requireElement<HTMLDivElement>("transcript");
  const bannerEl = requireElement<HTMLDivElement>("banner");
  const inputEl = requireElement<HTMLInputElement>("message");
  const sendEl = requireElement<HTMLButtonElement>("send");
  const retrieverEl = requireElement<HTMLSelectElement>("retriever");

  let session = new UiSession(new ApiClient(), retrieverEl.value as Retriever);

  const redraw = (): void => {
    transcriptEl.innerHTML = renderTranscript(session.transcript, (tid) =>
      session.feedbackFor(tid),
    );
    sendEl.disabled = session.pending || inputEl.value.trim() === "";
  };

  const showError = (message: string): void => {
    bannerEl.innerHTML = renderErrorBanner(message);
  };

  const clearError = (): void => {
    bannerEl.innerHTML = "";
  };

  inputEl.addEventListener("input", redraw);

  retrieverEl.addEventListener("change", () => {
    // A retriever switch means new server-side history: start a new session
    // but keep the rendered transcript for reference.
    session.setRetriever(retrieverEl.value as Retriever);
  });

  const submit = async (): Promise<void> => {
    const text = inputEl.value;
    if (text.trim() === "" || session.pending) {
      return;
    }
    clearError();
    redraw();
    try {
      await session.sendTurn(text);
      inputEl.value = "";
    } catch (err) {
      if (!(err instanceof TurnInFlightError)) {
        showError(err instanceof Error ? err.message : String(err));
      }
    } finally {
      redraw();
    }
  };

  sendEl.addEventListener("click", () => void submit());
  inputEl.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      void submit();
    }
  });

  transcriptEl.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement | null;
    const button = target?.closest("button[data-track-id]") as HTMLButtonElement | null;
    if (!button) {
      return;
    }
    const trackId = button.dataset.trackId ?? "";
    const liked = button.dataset.liked === "true";
    void session
      .markFeedback(trackId, liked)
      .catch((err: unknown) =>
        showError(err instanceof Error ? err.message : String(err)),
      )
      .finally(redraw);
  });

  redraw();
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  wireUp();
}
