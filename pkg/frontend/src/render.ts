/** Canvas trail + numeric readouts. Pure view over UiState. */

import { UiState, isStale } from "./state.js";

export interface Readouts {
  connection: HTMLElement;
  speed: HTMLElement;
  omega: HTMLElement;
  battery: HTMLElement;
  duties: HTMLElement;
  watchdog: HTMLElement;
  pose: HTMLElement;
  panel: HTMLElement;
}

const VIEW_METERS = 6; // world width shown by the canvas

export function drawScene(canvas: HTMLCanvasElement, state: UiState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, width, height);

  const scale = width / VIEW_METERS;
  const toPx = (x: number, y: number): [number, number] => [
    width / 2 + x * scale,
    height / 2 - y * scale,
  ];

  // metric grid
  ctx.strokeStyle = "#1d2632";
  ctx.lineWidth = 1;
  for (let m = -VIEW_METERS; m <= VIEW_METERS; m += 1) {
    const [gx] = toPx(m, 0);
    ctx.beginPath();
    ctx.moveTo(gx, 0);
    ctx.lineTo(gx, height);
    ctx.stroke();
    const [, gy] = toPx(0, m);
    ctx.beginPath();
    ctx.moveTo(0, gy);
    ctx.lineTo(width, gy);
    ctx.stroke();
  }

  if (state.trail.length > 1) {
    ctx.strokeStyle = "#3fa7ff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    const [sx, sy] = toPx(state.trail[0][0], state.trail[0][1]);
    ctx.moveTo(sx, sy);
    for (const [x, y] of state.trail) {
      const [px, py] = toPx(x, y);
      ctx.lineTo(px, py);
    }
    ctx.stroke();
  }

  if (state.odom) {
    const { x, y, theta } = state.odom;
    const [cx, cy] = toPx(x, y);
    const len = 0.25 * scale;
    ctx.fillStyle = state.status?.watchdogTripped ? "#ffb13f" : "#7fff9e";
    ctx.beginPath();
    ctx.moveTo(cx + len * Math.cos(-theta), cy + len * Math.sin(-theta));
    ctx.lineTo(
      cx + 0.5 * len * Math.cos(-theta + 2.5),
      cy + 0.5 * len * Math.sin(-theta + 2.5),
    );
    ctx.lineTo(
      cx + 0.5 * len * Math.cos(-theta - 2.5),
      cy + 0.5 * len * Math.sin(-theta - 2.5),
    );
    ctx.closePath();
    ctx.fill();
  }
}

export function updateReadouts(
  readouts: Readouts,
  state: UiState,
  nowMs: number,
  duties: string,
): void {
  const stale = isStale(state, nowMs);
  readouts.panel.classList.toggle("stale", stale);
  readouts.connection.textContent = state.connected
    ? state.status?.online
      ? `online (${state.robotId})`
      : `robot offline (${state.robotId})`
    : "disconnected";
  readouts.speed.textContent = state.odom ? `${state.odom.linear.toFixed(3)} m/s` : "-";
  readouts.omega.textContent = state.odom ? `${state.odom.angular.toFixed(3)} rad/s` : "-";
  readouts.battery.textContent = state.status
    ? `${state.status.batteryPct.toFixed(1)} %`
    : "-";
  readouts.duties.textContent = duties;
  readouts.pose.textContent = state.odom
    ? `(${state.odom.x.toFixed(2)}, ${state.odom.y.toFixed(2)}) ${state.odom.theta.toFixed(2)} rad`
    : "-";
  const tripped = state.status?.watchdogTripped === true;
  readouts.watchdog.textContent = tripped ? "WATCHDOG TRIPPED" : "armed";
  readouts.watchdog.classList.toggle("tripped", tripped);
}
