import type { PendingRequest } from "./types.js";

/** One card per outstanding request, plus transient client-side state. */
export interface Card {
  request: PendingRequest;
  /** submitted, waiting for the server verdict (hidden from the board) */
  inFlight: boolean;
  /** last rejection reason, shown on the card instead of dropping it */
  rejection: string | null;
}

export type CardMap = Map<string, Card>;

/** Entropy descending; ties by request id for a stable board. */
export function sortCards(cards: Card[]): Card[] {
  return [...cards].sort((a, b) => {
    const d = b.request.entropy - a.request.entropy;
    return d !== 0 ? d : a.request.request_id.localeCompare(b.request.request_id);
  });
}

/**
 * Reconcile the board with a fresh poll: new requests appear, answered or
 * expired ones disappear, in-flight and rejection flags survive for cards
 * that are still pending.
 */
export function reconcile(current: CardMap, pending: PendingRequest[]): CardMap {
  const next: CardMap = new Map();
  for (const request of pending) {
    const existing = current.get(request.request_id);
    next.set(request.request_id, {
      request,
      inFlight: existing?.inFlight ?? false,
      rejection: existing?.rejection ?? null,
    });
  }
  return next;
}

export function visibleCards(cards: CardMap): Card[] {
  return sortCards([...cards.values()].filter((c) => !c.inFlight));
}

/** Class labels are 1-based; digit keys map to MNIST digits, r/b to the arcs. */
export function labelForKey(key: string, nClasses: number): number | null {
  if (nClasses === 2 && (key === "r" || key === "b")) {
    return key === "r" ? 1 : 2;
  }
  if (/^[0-9]$/.test(key)) {
    const label = Number(key) + 1; // digit d is class d+1
    return label <= nClasses ? label : null;
  }
  return null;
}

/** Human-facing name of a class for the current problem. */
export function classCaption(label: number, nClasses: number): string {
  if (nClasses === 2) {
    return label === 1 ? "red (r)" : "blue (b)";
  }
  return `${label - 1}`;
}
