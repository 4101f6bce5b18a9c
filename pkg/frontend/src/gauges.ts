// Canvas force gauges: a dial per device plus a trailing sparkline.
// These are the only live feedback during trials - force, never position.

import type { GaugeSample } from "./state.js";

const DIAL_MAX_N = 8;

export function drawDial(
  canvas: HTMLCanvasElement,
  value: number,
  label: string,
  accent: string,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const w = canvas.width;
  const h = canvas.height;
  const cx = w / 2;
  const cy = h * 0.78;
  const radius = Math.min(w, h) * 0.58;
  ctx.clearRect(0, 0, w, h);

  ctx.lineWidth = 10;
  ctx.strokeStyle = "#2d3642";
  ctx.beginPath();
  ctx.arc(cx, cy, radius, Math.PI, 2 * Math.PI);
  ctx.stroke();

  const frac = Math.max(0, Math.min(value / DIAL_MAX_N, 1));
  ctx.strokeStyle = accent;
  ctx.beginPath();
  ctx.arc(cx, cy, radius, Math.PI, Math.PI * (1 + frac));
  ctx.stroke();

  const angle = Math.PI * (1 + frac);
  ctx.strokeStyle = "#e8edf2";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + radius * 0.82 * Math.cos(angle), cy + radius * 0.82 * Math.sin(angle));
  ctx.stroke();

  ctx.fillStyle = "#e8edf2";
  ctx.font = "600 20px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(`${value.toFixed(2)} N`, cx, cy - radius * 0.25);
  ctx.font = "13px system-ui, sans-serif";
  ctx.fillStyle = "#93a1b0";
  ctx.fillText(label, cx, cy + 18);
}

export function drawSparkline(canvas: HTMLCanvasElement, history: GaugeSample[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (history.length < 2) {
    return;
  }
  const t0 = history[0].tS;
  const t1 = history[history.length - 1].tS;
  const span = Math.max(t1 - t0, 1e-6);
  const trace = (pick: (s: GaugeSample) => number, color: string) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    history.forEach((s, i) => {
      const x = ((s.tS - t0) / span) * w;
      const y = h - Math.min(pick(s) / DIAL_MAX_N, 1) * (h - 4) - 2;
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
  };
  trace((s) => s.fTouhy, "#e0a23f");
  trace((s) => s.fLor, "#4fa3e0");
}
