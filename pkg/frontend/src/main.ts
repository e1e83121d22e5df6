import { OracleClient } from "./api.js";
import {
  Card,
  CardMap,
  classCaption,
  labelForKey,
  reconcile,
  visibleCards,
} from "./cards.js";
import { sparklinePoints, statusSummary } from "./dashboard.js";
import type { RunStatus } from "./types.js";

const POLL_INTERVAL_MS = 2000;
const MAX_BACKOFF_MS = 30000;

const params = new URLSearchParams(window.location.search);
const runId = params.get("run") ?? "run";
const client = new OracleClient(runId);

let cards: CardMap = new Map();
let activeId: string | null = null;
let nClasses = 10;
let answeredHere = 0;
let backoffMs = POLL_INTERVAL_MS;

const boardEl = document.getElementById("board")!;
const statusEl = document.getElementById("status-line")!;
const bannerEl = document.getElementById("banner")!;
const sparkEl = document.getElementById("sparkline")!;
const counterEl = document.getElementById("answered-counter")!;

function setBanner(text: string, cls: string): void {
  bannerEl.textContent = text;
  bannerEl.className = cls;
  bannerEl.hidden = text === "";
}

function renderPayload(card: Card): HTMLElement {
  const payload = card.request.payload;
  if (payload.kind === "image") {
    const img = document.createElement("img");
    img.className = "sample-image";
    img.src = `data:image/png;base64,${payload.png_base64}`;
    img.alt = `sample ${card.request.sample_id}`;
    return img;
  }
  const canvas = document.createElement("canvas");
  canvas.className = "sample-point";
  canvas.width = 140;
  canvas.height = 140;
  const ctx = canvas.getContext("2d")!;
  ctx.strokeStyle = "#666";
  ctx.beginPath(); // axes over [-2, 2] x [-2, 2]
  ctx.moveTo(0, 70);
  ctx.lineTo(140, 70);
  ctx.moveTo(70, 0);
  ctx.lineTo(70, 140);
  ctx.stroke();
  const px = 70 + (payload.x / 2) * 68;
  const py = 70 - (payload.y / 2) * 68;
  ctx.fillStyle = "#222";
  ctx.beginPath();
  ctx.arc(px, py, 5, 0, 2 * Math.PI);
  ctx.fill();
  return canvas;
}

function renderCards(): void {
  const visible = visibleCards(cards);
  if (activeId === null || !visible.some((c) => c.request.request_id === activeId)) {
    activeId = visible.length ? visible[0].request.request_id : null;
  }
  boardEl.replaceChildren();
  if (visible.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-board";
    empty.textContent = "waiting for queries from the training loop...";
    boardEl.appendChild(empty);
    return;
  }
  for (const card of visible) {
    boardEl.appendChild(renderCard(card));
  }
}

function renderCard(card: Card): HTMLElement {
  const el = document.createElement("div");
  const rid = card.request.request_id;
  el.className = "card" + (rid === activeId ? " active" : "");
  el.dataset.requestId = rid;
  el.addEventListener("click", () => {
    activeId = rid;
    renderCards();
  });

  el.appendChild(renderPayload(card));

  const meta = document.createElement("div");
  meta.className = "card-meta";
  meta.textContent =
    `entropy ${card.request.entropy.toFixed(3)}` +
    ` | model suggests ${classCaption(card.request.suggestion, nClasses)}` +
    ` | iter ${card.request.issued_iteration}`;
  el.appendChild(meta);

  if (card.rejection) {
    const warning = document.createElement("div");
    warning.className = "card-rejection";
    warning.textContent = `rejected: ${card.rejection}`;
    el.appendChild(warning);
  }

  const buttons = document.createElement("div");
  buttons.className = "card-buttons";
  for (let label = 1; label <= nClasses; label++) {
    const btn = document.createElement("button");
    btn.textContent = classCaption(label, nClasses);
    btn.addEventListener("click", (ev) => {
      ev.stopPropagation();
      void submit(rid, label);
    });
    buttons.appendChild(btn);
  }
  el.appendChild(buttons);
  return el;
}

async function submit(requestId: string, label: number): Promise<void> {
  const card = cards.get(requestId);
  if (!card || card.inFlight) {
    return;
  }
  card.inFlight = true; // optimistic removal
  card.rejection = null;
  renderCards();
  const result = await client.submitLabel(requestId, label);
  const still = cards.get(requestId);
  if (result.ok) {
    cards.delete(requestId);
    answeredHere += 1;
    counterEl.textContent = `${answeredHere} answered in this session`;
  } else if (still) {
    still.inFlight = false; // restore, flagged instead of silently dropped
    still.rejection = result.reason;
  }
  renderCards();
}

function onKey(ev: KeyboardEvent): void {
  if (ev.target instanceof HTMLInputElement) {
    return;
  }
  const label = labelForKey(ev.key, nClasses);
  if (label !== null && activeId !== null) {
    void submit(activeId, label);
  }
}

function applyStatus(status: RunStatus): void {
  statusEl.textContent = statusSummary(status);
  sparkEl.setAttribute("points", sparklinePoints(status.history, 220, 40));
  if (status.state === "done") {
    setBanner("run complete -- no further queries will arrive", "banner-done");
  }
}

async function poll(): Promise<void> {
  try {
    const [pending, status] = await Promise.all([
      client.fetchPending(),
      client.fetchStatus(),
    ]);
    cards = reconcile(cards, pending);
    if (pending.length > 0) {
      // the label space follows the sample kind: 2 arc classes or 10 digits
      nClasses = pending[0].payload.kind === "point" ? 2 : 10;
    }
    if (status.state !== "done") {
      setBanner("", "");
    }
    applyStatus(status);
    renderCards();
    backoffMs = POLL_INTERVAL_MS;
  } catch {
    setBanner("connection lost -- showing stale data, retrying...", "banner-stale");
    backoffMs = Math.min(backoffMs * 2, MAX_BACKOFF_MS);
  } finally {
    window.setTimeout(() => void poll(), backoffMs);
  }
}

document.title = `labeling: ${runId}`;
document.getElementById("run-name")!.textContent = runId;
window.addEventListener("keydown", onKey);
void poll();
