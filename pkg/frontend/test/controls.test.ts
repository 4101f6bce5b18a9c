// @vitest-environment jsdom
//
// Drag controls: relative deltas, plunger modifier, and the >= 60 Hz
// position stream while the pointer is engaged. The cursor is optimistic:
// it moves with no server in the loop at all.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DEFAULT_CONTROLS, InsertionControls } from "../src/controls.js";

function pointerEvent(type: string, clientY: number, shiftKey = false): Event {
  const ev = new MouseEvent(type, { clientY, shiftKey, bubbles: true });
  return ev;
}

function setup() {
  const pad = document.createElement("div");
  document.body.replaceChildren(pad);
  const state = { depth: 0, plunger: 0, sends: 0 };
  const controls = new InsertionControls(pad, DEFAULT_CONTROLS, {
    getDepth: () => state.depth,
    setDepth: (mm) => {
      state.depth = mm;
    },
    getPlunger: () => state.plunger,
    setPlunger: (mm) => {
      state.plunger = mm;
    },
    sendPositions: () => {
      state.sends += 1;
    },
  });
  return { pad, state, controls };
}

describe("insertion controls", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("maps vertical drag deltas to depth, retraction included", () => {
    const { pad, state } = setup();
    pad.dispatchEvent(pointerEvent("pointerdown", 100));
    pad.dispatchEvent(pointerEvent("pointermove", 180)); // 80 px down
    expect(state.depth).toBeCloseTo(80 * DEFAULT_CONTROLS.mmPerPixel);
    pad.dispatchEvent(pointerEvent("pointermove", 140)); // retract 40 px
    expect(state.depth).toBeCloseTo(40 * DEFAULT_CONTROLS.mmPerPixel);
    pad.dispatchEvent(pointerEvent("pointerup", 140));
  });

  it("drives the plunger while the modifier is held", () => {
    const { pad, state } = setup();
    pad.dispatchEvent(pointerEvent("pointerdown", 100, true));
    pad.dispatchEvent(pointerEvent("pointermove", 150, true));
    expect(state.plunger).toBeCloseTo(50 * DEFAULT_CONTROLS.plungerMmPerPixel);
    expect(state.depth).toBe(0);
    // plunger never goes below rest
    pad.dispatchEvent(pointerEvent("pointermove", 0, true));
    expect(state.plunger).toBe(0);
    pad.dispatchEvent(pointerEvent("pointerup", 0, true));
  });

  it("streams positions at 60 Hz or better while dragging", () => {
    const { pad, state } = setup();
    pad.dispatchEvent(pointerEvent("pointerdown", 100));
    vi.advanceTimersByTime(1000);
    expect(state.sends).toBeGreaterThanOrEqual(60);
    pad.dispatchEvent(pointerEvent("pointerup", 100));
    const after = state.sends;
    vi.advanceTimersByTime(1000);
    expect(state.sends).toBe(after); // stream stops with the pointer
  });

  it("moves the local cursor without any server round trip", () => {
    const { pad, state } = setup();
    // sendPositions is a no-op counter here: nothing ever answers
    pad.dispatchEvent(pointerEvent("pointerdown", 0));
    pad.dispatchEvent(pointerEvent("pointermove", 400));
    expect(state.depth).toBeGreaterThan(0);
    pad.dispatchEvent(pointerEvent("pointerup", 400));
  });
});
