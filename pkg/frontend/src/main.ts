/**
 * Dashboard wiring: query params -> MQTT session -> input loop -> render.
 *
 * ?url=ws://host:9001/mqtt&robot=alpha overrides the defaults. The UI
 * renders only what arrives over MQTT; a wheel-speed readout is derived
 * from the received twist with the calibration track width for display.
 */

import { MqttWsClient } from "./mqtt.js";
import { parseOdom, parseStatus, serializeTwist, topicFor, Twist } from "./messages.js";
import { CommandScheduler, isDriveKey, keysToVector } from "./input.js";
import { applyOdom, applyStatus, initialState, SpeedLimits, UiState } from "./state.js";
import { drawScene, Readouts, updateReadouts } from "./render.js";

const TRACK_WIDTH_EFFECTIVE = 2.0 * 0.5 / 0.35;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function defaults(): { url: string; robotId: string } {
  const params = new URLSearchParams(window.location.search);
  const host = window.location.hostname || "127.0.0.1";
  return {
    url: params.get("url") ?? `ws://${host}:9001/mqtt`,
    robotId: params.get("robot") ?? "alpha",
  };
}

function main(): void {
  const { url, robotId } = defaults();
  const state: UiState = initialState(robotId);
  const canvas = el("scene") as HTMLCanvasElement;
  const banner = el("banner");
  const readouts: Readouts = {
    connection: el("connection"),
    speed: el("speed"),
    omega: el("omega"),
    battery: el("battery"),
    duties: el("wheels"),
    watchdog: el("watchdog"),
    pose: el("pose"),
    panel: el("readouts"),
  };
  (el("url-input") as HTMLInputElement).value = url;
  (el("robot-input") as HTMLInputElement).value = robotId;

  const limits: SpeedLimits = { vLimit: 0.5, wLimit: 0.35 };
  const vSlider = el("v-limit") as HTMLInputElement;
  const wSlider = el("w-limit") as HTMLInputElement;
  const syncLimits = () => {
    limits.vLimit = Number(vSlider.value);
    limits.wLimit = Number(wSlider.value);
    el("v-limit-label").textContent = `${limits.vLimit.toFixed(2)} m/s`;
    el("w-limit-label").textContent = `${limits.wLimit.toFixed(2)} rad/s`;
  };
  vSlider.addEventListener("input", syncLimits);
  wSlider.addEventListener("input", syncLimits);
  syncLimits();

  let client: MqttWsClient | null = null;
  const scheduler = new CommandScheduler((twist: Twist) => {
    if (client?.connected) {
      client.publish(topicFor(state.robotId, "cmd_vel"), serializeTwist(twist));
    }
  }, limits);

  function connect(targetUrl: string, robot: string): void {
    client?.disconnect();
    state.robotId = robot;
    state.odom = null;
    state.status = null;
    state.trail = [];
    state.connected = false;
    banner.classList.add("hidden");
    client = new MqttWsClient({
      url: targetUrl,
      clientId: `dash-${Math.random().toString(36).slice(2, 10)}`,
      keepaliveS: 30,
      connectTimeoutMs: 5000,
      onConnect: () => {
        state.connected = true;
        client!.subscribe(topicFor(robot, "odom"), topicFor(robot, "status"));
      },
      onMessage: (packet) => {
        const now = performance.now();
        if (packet.topic === topicFor(state.robotId, "odom")) {
          const sample = parseOdom(packet.payload);
          if (sample) applyOdom(state, sample, now);
        } else if (packet.topic === topicFor(state.robotId, "status")) {
          const sample = parseStatus(packet.payload);
          if (sample) applyStatus(state, sample, now);
        }
      },
      onClose: (reason) => {
        state.connected = false;
        banner.textContent = `Connection failed: ${reason}`;
        banner.classList.remove("hidden");
      },
    });
  }

  el("connect-btn").addEventListener("click", () => {
    connect(
      (el("url-input") as HTMLInputElement).value,
      (el("robot-input") as HTMLInputElement).value,
    );
  });

  // keyboard teleop
  const held = new Set<string>();
  window.addEventListener("keydown", (event) => {
    if (!isDriveKey(event.key)) return;
    event.preventDefault();
    held.add(event.key.toLowerCase());
    scheduler.setVector(keysToVector(held));
  });
  window.addEventListener("keyup", (event) => {
    if (!isDriveKey(event.key)) return;
    held.delete(event.key.toLowerCase());
    scheduler.setVector(keysToVector(held));
  });
  window.addEventListener("blur", () => {
    held.clear();
    scheduler.stop();
  });

  // on-screen joystick: pointer position inside the pad -> vector
  const pad = el("joystick");
  const knob = el("knob");
  let pointerActive = false;
  const updateJoystick = (event: PointerEvent) => {
    const rect = pad.getBoundingClientRect();
    const half = rect.width / 2;
    let dx = (event.clientX - rect.left - half) / half;
    let dy = (event.clientY - rect.top - half) / half;
    const mag = Math.hypot(dx, dy);
    if (mag > 1) {
      dx /= mag;
      dy /= mag;
    }
    knob.style.transform = `translate(${dx * half * 0.6}px, ${dy * half * 0.6}px)`;
    scheduler.setVector({ forward: -dy, lateral: dx });
  };
  pad.addEventListener("pointerdown", (event) => {
    pointerActive = true;
    pad.setPointerCapture(event.pointerId);
    updateJoystick(event);
  });
  pad.addEventListener("pointermove", (event) => {
    if (pointerActive) updateJoystick(event);
  });
  const releaseJoystick = () => {
    if (!pointerActive) return;
    pointerActive = false;
    knob.style.transform = "translate(0px, 0px)";
    scheduler.stop();
  };
  pad.addEventListener("pointerup", releaseJoystick);
  pad.addEventListener("pointercancel", releaseJoystick);

  function frame(): void {
    const now = performance.now();
    let wheels = "-";
    if (state.odom) {
      const left = state.odom.linear - 0.5 * state.odom.angular * TRACK_WIDTH_EFFECTIVE;
      const right = state.odom.linear + 0.5 * state.odom.angular * TRACK_WIDTH_EFFECTIVE;
      wheels = `${left.toFixed(2)} / ${right.toFixed(2)} m/s`;
    }
    drawScene(canvas, state);
    updateReadouts(readouts, state, now, wheels);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);

  connect(url, robotId);
}

main();
