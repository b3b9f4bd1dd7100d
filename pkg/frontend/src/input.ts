/**
 * Input handling: keyboard/joystick vector -> Twist commands at 10 Hz.
 *
 * While any input is active the command streams at COMMAND_RATE_HZ (the
 * firmware watchdog needs the refresh); one zero Twist goes out on
 * release, then silence lets the watchdog hold the robot stopped.
 */

import { Twist } from "./messages.js";
import { SpeedLimits } from "./state.js";

export const COMMAND_RATE_HZ = 10;

export interface InputVector {
  forward: number; // [-1, 1], +1 = ahead
  lateral: number; // [-1, 1], +1 = right
}

function clampUnit(value: number): number {
  return Math.max(-1, Math.min(1, value));
}

export function inputToTwist(input: InputVector, limits: SpeedLimits): Twist {
  return {
    // "+ 0" folds negative zero so a neutral twist serializes as plain 0
    linearX: clampUnit(input.forward) * limits.vLimit + 0,
    // +lateral (right) turns clockwise: negative angular z
    angularZ: -clampUnit(input.lateral) * limits.wLimit + 0,
  };
}

const KEY_VECTORS: Record<string, InputVector> = {
  w: { forward: 1, lateral: 0 },
  s: { forward: -1, lateral: 0 },
  a: { forward: 0, lateral: -1 },
  d: { forward: 0, lateral: 1 },
  arrowup: { forward: 1, lateral: 0 },
  arrowdown: { forward: -1, lateral: 0 },
  arrowleft: { forward: 0, lateral: -1 },
  arrowright: { forward: 0, lateral: 1 },
};

export function keysToVector(held: ReadonlySet<string>): InputVector {
  let forward = 0;
  let lateral = 0;
  for (const key of held) {
    const vec = KEY_VECTORS[key];
    if (vec) {
      forward += vec.forward;
      lateral += vec.lateral;
    }
  }
  return { forward: clampUnit(forward), lateral: clampUnit(lateral) };
}

export function isDriveKey(key: string): boolean {
  return key.toLowerCase() in KEY_VECTORS;
}

export type CommandSink = (twist: Twist) => void;

/**
 * Publishes the current input at a fixed rate while active and exactly
 * one zero Twist when the input returns to neutral.
 */
export class CommandScheduler {
  private timer: ReturnType<typeof setInterval> | undefined;
  private vector: InputVector = { forward: 0, lateral: 0 };
  limits: SpeedLimits;

  constructor(
    private sink: CommandSink,
    limits: SpeedLimits,
    private rateHz: number = COMMAND_RATE_HZ,
  ) {
    this.limits = limits;
  }

  get active(): boolean {
    return this.timer !== undefined;
  }

  setVector(vector: InputVector): void {
    const unchanged =
      vector.forward === this.vector.forward && vector.lateral === this.vector.lateral;
    const neutral = vector.forward === 0 && vector.lateral === 0;
    this.vector = vector;
    if (neutral) {
      if (this.timer !== undefined) {
        clearInterval(this.timer);
        this.timer = undefined;
        this.sink({ linearX: 0, angularZ: 0 }); // single stop command
      }
      return;
    }
    if (unchanged && this.timer !== undefined) {
      return; // key auto-repeat: the interval already streams at rate
    }
    this.sink(inputToTwist(this.vector, this.limits));
    if (this.timer === undefined) {
      this.timer = setInterval(() => {
        this.sink(inputToTwist(this.vector, this.limits));
      }, 1000 / this.rateHz);
    }
  }

  stop(): void {
    this.setVector({ forward: 0, lateral: 0 });
  }
}
