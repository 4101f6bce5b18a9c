// Insertion controls: relative vertical drag drives the needle, a
// modifier-held drag or the slider drives the plunger.
//
// Depth control is relative (drag deltas with clutching), so absolute
// screen position never encodes absolute needle depth. While the pointer
// is engaged, the current positions stream to the server on a fixed timer
// comfortably above 60 Hz; the local cursor is optimistic and never waits
// for the server.

export interface ControlConfig {
  mmPerPixel: number; // needle drag scale
  plungerMmPerPixel: number;
  sendHz: number;
}

export const DEFAULT_CONTROLS: ControlConfig = {
  mmPerPixel: 0.25,
  plungerMmPerPixel: 0.1,
  sendHz: 120,
};

export interface ControlCallbacks {
  getDepth(): number;
  setDepth(mm: number): void;
  getPlunger(): number;
  setPlunger(mm: number): void;
  sendPositions(): void; // pushes the current optimistic positions
}

export class InsertionControls {
  private pointerId: number | null = null;
  private lastY = 0;
  private plungerMode = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly pad: HTMLElement,
    private readonly config: ControlConfig,
    private readonly callbacks: ControlCallbacks,
  ) {
    pad.addEventListener("pointerdown", (ev) => this.onDown(ev));
    pad.addEventListener("pointermove", (ev) => this.onMove(ev));
    pad.addEventListener("pointerup", (ev) => this.onUp(ev));
    pad.addEventListener("pointercancel", (ev) => this.onUp(ev));
  }

  get dragging(): boolean {
    return this.pointerId !== null;
  }

  private onDown(ev: PointerEvent): void {
    this.pad.setPointerCapture?.(ev.pointerId);
    this.pointerId = ev.pointerId;
    this.lastY = ev.clientY;
    this.plungerMode = ev.shiftKey;
    this.startStreaming();
  }

  private onMove(ev: PointerEvent): void {
    if (this.pointerId !== ev.pointerId) {
      return;
    }
    const dy = ev.clientY - this.lastY;
    this.lastY = ev.clientY;
    if (this.plungerMode || ev.shiftKey) {
      // plunger cannot go below its rest position
      const next = Math.max(0, this.callbacks.getPlunger() + dy * this.config.plungerMmPerPixel);
      this.callbacks.setPlunger(next);
    } else {
      // retraction allowed: no monotonicity clamp on the needle
      this.callbacks.setDepth(this.callbacks.getDepth() + dy * this.config.mmPerPixel);
    }
  }

  private onUp(ev: PointerEvent): void {
    if (this.pointerId !== ev.pointerId) {
      return;
    }
    this.pointerId = null;
    this.stopStreaming();
    this.callbacks.sendPositions(); // final resting position
  }

  private startStreaming(): void {
    if (this.timer !== null) {
      return;
    }
    const period = Math.max(1, Math.floor(1000 / this.config.sendHz));
    this.timer = setInterval(() => this.callbacks.sendPositions(), period);
  }

  private stopStreaming(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  detach(): void {
    this.stopStreaming();
    this.pointerId = null;
  }
}
