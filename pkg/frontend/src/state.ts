/**
 * Dashboard state. Everything rendered derives from received MQTT
 * messages; the UI runs no kinematics of its own.
 */

import { OdomSample, StatusSample } from "./messages.js";

export const TRAIL_CAP = 2000;
export const STALE_AFTER_MS = 2000;

export interface SpeedLimits {
  vLimit: number; // m/s
  wLimit: number; // rad/s
}

export interface UiState {
  connected: boolean;
  robotId: string;
  odom: OdomSample | null;
  status: StatusSample | null;
  trail: Array<[number, number]>;
  lastTelemetryMs: number; // wall clock of last odom/status
}

export function initialState(robotId: string): UiState {
  return {
    connected: false,
    robotId,
    odom: null,
    status: null,
    trail: [],
    lastTelemetryMs: 0,
  };
}

export function applyOdom(state: UiState, sample: OdomSample, nowMs: number): void {
  state.odom = sample;
  state.lastTelemetryMs = nowMs;
  const last = state.trail[state.trail.length - 1];
  if (!last || last[0] !== sample.x || last[1] !== sample.y) {
    state.trail.push([sample.x, sample.y]);
    if (state.trail.length > TRAIL_CAP) {
      state.trail.splice(0, state.trail.length - TRAIL_CAP);
    }
  }
}

export function applyStatus(state: UiState, sample: StatusSample, nowMs: number): void {
  state.status = sample;
  state.lastTelemetryMs = nowMs;
}

export function isStale(state: UiState, nowMs: number): boolean {
  if (state.lastTelemetryMs === 0) return true;
  return nowMs - state.lastTelemetryMs > STALE_AFTER_MS;
}
