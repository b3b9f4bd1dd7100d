/** JSON wire messages shared with the robot (see docs/wire-protocol.md). */

export interface Twist {
  linearX: number;
  angularZ: number;
}

export interface OdomSample {
  stamp: number;
  x: number;
  y: number;
  theta: number;
  linear: number;
  angular: number;
}

export interface StatusSample {
  online: boolean;
  batteryPct: number;
  watchdogTripped: boolean;
  uptimeS: number;
  payloadKg: number;
}

const textDecoder = new TextDecoder();
const textEncoder = new TextEncoder();

export function topicFor(robotId: string, channel: "cmd_vel" | "odom" | "status"): string {
  if (!robotId || /[/+#]/.test(robotId)) {
    throw new Error(`invalid robot id ${robotId}`);
  }
  return `openscout/${robotId}/${channel}`;
}

export function serializeTwist(t: Twist): Uint8Array {
  const doc = {
    linear: { x: t.linearX, y: 0, z: 0 },
    angular: { x: 0, y: 0, z: t.angularZ },
  };
  return textEncoder.encode(JSON.stringify(doc));
}

function asNumber(value: unknown, fallback: number): number {
  return typeof value === "number" && Number.isFinite(value) ? value : fallback;
}

export function parseOdom(payload: Uint8Array): OdomSample | null {
  let doc: any;
  try {
    doc = JSON.parse(textDecoder.decode(payload));
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) return null;
  const pose = doc.pose ?? {};
  const twist = doc.twist ?? {};
  return {
    stamp: asNumber(doc.header?.stamp, 0),
    x: asNumber(pose.x, 0),
    y: asNumber(pose.y, 0),
    theta: asNumber(pose.theta, 0),
    linear: asNumber(twist.linear, 0),
    angular: asNumber(twist.angular, 0),
  };
}

export function parseStatus(payload: Uint8Array): StatusSample | null {
  let doc: any;
  try {
    doc = JSON.parse(textDecoder.decode(payload));
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || typeof doc.online !== "boolean") {
    return null;
  }
  return {
    online: doc.online,
    batteryPct: asNumber(doc.battery_pct, 0),
    watchdogTripped: doc.watchdog_tripped === true,
    uptimeS: asNumber(doc.uptime_s, 0),
    payloadKg: asNumber(doc.payload_kg, 0),
  };
}
