import { describe, expect, it } from "vitest";

import {
  Card,
  CardMap,
  classCaption,
  labelForKey,
  reconcile,
  sortCards,
  visibleCards,
} from "../src/cards.js";
import type { PendingRequest } from "../src/types.js";

function pending(id: string, entropy: number, sampleId = 0): PendingRequest {
  return {
    request_id: id,
    sample_id: sampleId,
    payload: { kind: "point", x: 0, y: 0 },
    entropy,
    suggestion: 1,
    issued_iteration: 1,
    age_s: 0,
  };
}

function card(id: string, entropy: number): Card {
  return { request: pending(id, entropy), inFlight: false, rejection: null };
}

describe("sortCards", () => {
  it("orders by entropy descending", () => {
    const sorted = sortCards([card("a", 0.2), card("b", 0.9), card("c", 0.5)]);
    expect(sorted.map((c) => c.request.request_id)).toEqual(["b", "c", "a"]);
  });

  it("breaks ties by request id for a stable board", () => {
    const sorted = sortCards([card("z", 0.5), card("a", 0.5)]);
    expect(sorted.map((c) => c.request.request_id)).toEqual(["a", "z"]);
  });
});

describe("reconcile", () => {
  it("adds new requests and drops answered or expired ones", () => {
    let board: CardMap = new Map();
    board = reconcile(board, [pending("a", 0.3), pending("b", 0.6)]);
    expect([...board.keys()].sort()).toEqual(["a", "b"]);
    board = reconcile(board, [pending("b", 0.6), pending("c", 0.1)]);
    expect([...board.keys()].sort()).toEqual(["b", "c"]);
  });

  it("keeps client-side flags for cards that are still pending", () => {
    let board: CardMap = new Map();
    board = reconcile(board, [pending("a", 0.3)]);
    board.get("a")!.rejection = "expired";
    board.get("a")!.inFlight = true;
    board = reconcile(board, [pending("a", 0.35)]);
    expect(board.get("a")!.rejection).toBe("expired");
    expect(board.get("a")!.inFlight).toBe(true);
    expect(board.get("a")!.request.entropy).toBe(0.35);
  });
});

describe("visibleCards", () => {
  it("hides optimistically removed cards", () => {
    const board: CardMap = new Map();
    board.set("a", card("a", 0.9));
    board.set("b", { ...card("b", 0.5), inFlight: true });
    expect(visibleCards(board).map((c) => c.request.request_id)).toEqual(["a"]);
  });
});

describe("labelForKey", () => {
  it("maps digits to 1-based classes for ten-class problems", () => {
    expect(labelForKey("0", 10)).toBe(1);
    expect(labelForKey("7", 10)).toBe(8);
    expect(labelForKey("9", 10)).toBe(10);
  });

  it("maps r and b for the two-class problem", () => {
    expect(labelForKey("r", 2)).toBe(1);
    expect(labelForKey("b", 2)).toBe(2);
  });

  it("blocks labels outside the class set", () => {
    expect(labelForKey("5", 2)).toBe(null);
    expect(labelForKey("x", 10)).toBe(null);
    expect(labelForKey("Enter", 10)).toBe(null);
  });
});

describe("classCaption", () => {
  it("shows digits for the image problem and colors for the arcs", () => {
    expect(classCaption(1, 10)).toBe("0");
    expect(classCaption(10, 10)).toBe("9");
    expect(classCaption(1, 2)).toBe("red (r)");
    expect(classCaption(2, 2)).toBe("blue (b)");
  });
});
