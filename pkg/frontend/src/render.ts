import { TrackResult } from "./api.js";
import { FeedbackState, TranscriptEntry } from "./session.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Score bar width in percent, scaled against the best score in the list. */
export function scoreBarWidth(score: number, maxScore: number): number {
  if (maxScore <= 0 || score <= 0) {
    return 0;
  }
  return Math.round((100 * score) / maxScore);
}

export function renderResult(
  result: TrackResult,
  maxScore: number,
  feedback: FeedbackState | undefined,
): string {
  const indicator =
    feedback === "liked" ? "&#9829;" : feedback === "disliked" ? "&#10007;" : "&#9825;";
  const width = scoreBarWidth(result.score, maxScore);
  return (
    `<li class="result" data-track-id="${escapeHtml(result.track_id)}">` +
    `<span class="title">${escapeHtml(result.title)}</span>` +
    `<span class="artist">${escapeHtml(result.artist_name)}</span>` +
    `<span class="score-bar"><span class="fill" style="width:${width}%"></span></span>` +
    `<span class="score">${result.score.toFixed(3)}</span>` +
    `<button class="like" data-track-id="${escapeHtml(result.track_id)}" data-liked="true">` +
    `${indicator}</button>` +
    `<button class="dislike" data-track-id="${escapeHtml(result.track_id)}" data-liked="false">` +
    `&#128078;</button>` +
    `</li>`
  );
}

export function renderEntry(
  entry: TranscriptEntry,
  feedbackFor: (trackId: string) => FeedbackState | undefined,
): string {
  const maxScore = entry.results.reduce((acc, r) => Math.max(acc, r.score), 0);
  const items = entry.results.map((r) => renderResult(r, maxScore, feedbackFor(r.track_id)));
  const list =
    items.length > 0
      ? `<ol class="results">${items.join("")}</ol>`
      : `<p class="empty">No matching tracks.</p>`;
  return (
    `<div class="turn">` +
    `<p class="user-text">${escapeHtml(entry.userText)}</p>` +
    list +
    `</div>`
  );
}

/** Pure view of the whole transcript; the DOM layer just assigns innerHTML. */
export function renderTranscript(
  entries: readonly TranscriptEntry[],
  feedbackFor: (trackId: string) => FeedbackState | undefined,
): string {
  return entries.map((entry) => renderEntry(entry, feedbackFor)).join("");
}

export function renderErrorBanner(message: string): string {
  return `<div class="banner error">${escapeHtml(message)}</div>`;
}
