/**
 * Minimal MQTT v3.1.1 client codec for the dashboard.
 *
 * Only the packets the dashboard needs: CONNECT/CONNACK, QoS-0 PUBLISH,
 * SUBSCRIBE/SUBACK, PINGREQ/PINGRESP, DISCONNECT. Byte layout follows the
 * public standard; the companion broker validates against golden vectors
 * of the same frames.
 */

const PROTOCOL_LEVEL = 4;

export const enum PacketKind {
  ConnAck = "connack",
  Publish = "publish",
  SubAck = "suback",
  UnsubAck = "unsuback",
  PingResp = "pingresp",
}

export interface ConnAckPacket {
  kind: PacketKind.ConnAck;
  returnCode: number;
  sessionPresent: boolean;
}

export interface PublishPacket {
  kind: PacketKind.Publish;
  topic: string;
  payload: Uint8Array;
  retain: boolean;
}

export interface SubAckPacket {
  kind: PacketKind.SubAck;
  packetId: number;
  codes: number[];
}

export interface UnsubAckPacket {
  kind: PacketKind.UnsubAck;
  packetId: number;
}

export interface PingRespPacket {
  kind: PacketKind.PingResp;
}

export type Packet =
  | ConnAckPacket
  | PublishPacket
  | SubAckPacket
  | UnsubAckPacket
  | PingRespPacket;

export interface Will {
  topic: string;
  payload: Uint8Array;
  retain: boolean;
}

const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder("utf-8", { fatal: true });

export function encodeRemainingLength(n: number): number[] {
  if (n < 0 || n > 268_435_455) {
    throw new Error(`remaining length ${n} out of range`);
  }
  const out: number[] = [];
  do {
    let digit = n % 128;
    n = Math.floor(n / 128);
    if (n > 0) digit |= 0x80;
    out.push(digit);
  } while (n > 0);
  return out;
}

export function decodeRemainingLength(
  data: Uint8Array,
  offset: number,
): { value: number; consumed: number } | null {
  let value = 0;
  let multiplier = 1;
  for (let i = 0; i < 4; i++) {
    if (offset + i >= data.length) return null;
    const byte = data[offset + i];
    value += (byte & 0x7f) * multiplier;
    if ((byte & 0x80) === 0) return { value, consumed: i + 1 };
    multiplier *= 128;
  }
  throw new Error("malformed remaining length");
}

function encodeString(s: string): number[] {
  const bytes = textEncoder.encode(s);
  if (bytes.length > 0xffff) throw new Error("string too long");
  return [bytes.length >> 8, bytes.length & 0xff, ...bytes];
}

function frame(typeAndFlags: number, body: number[]): Uint8Array {
  return Uint8Array.from([typeAndFlags, ...encodeRemainingLength(body.length), ...body]);
}

export function encodeConnect(
  clientId: string,
  keepalive: number,
  will?: Will,
): Uint8Array {
  let flags = 0x02; // clean session
  const body: number[] = [...encodeString("MQTT"), PROTOCOL_LEVEL];
  if (will) {
    flags |= 0x04;
    if (will.retain) flags |= 0x20;
  }
  body.push(flags, keepalive >> 8, keepalive & 0xff);
  body.push(...encodeString(clientId));
  if (will) {
    body.push(...encodeString(will.topic));
    body.push(will.payload.length >> 8, will.payload.length & 0xff, ...will.payload);
  }
  return frame(0x10, body);
}

export function encodePublish(
  topic: string,
  payload: Uint8Array,
  retain = false,
): Uint8Array {
  if (!topic || topic.includes("+") || topic.includes("#")) {
    throw new Error(`invalid publish topic ${topic}`);
  }
  return frame(0x30 | (retain ? 1 : 0), [...encodeString(topic), ...payload]);
}

export function encodeSubscribe(packetId: number, filters: string[]): Uint8Array {
  const body: number[] = [packetId >> 8, packetId & 0xff];
  for (const filter of filters) {
    body.push(...encodeString(filter), 0); // requested QoS 0
  }
  return frame(0x82, body);
}

export function encodePingReq(): Uint8Array {
  return Uint8Array.from([0xc0, 0x00]);
}

export function encodeDisconnect(): Uint8Array {
  return Uint8Array.from([0xe0, 0x00]);
}

function decodeBody(type: number, flags: number, body: Uint8Array): Packet {
  switch (type) {
    case 2: {
      if (body.length !== 2) throw new Error("bad CONNACK length");
      return {
        kind: PacketKind.ConnAck,
        sessionPresent: (body[0] & 1) === 1,
        returnCode: body[1],
      };
    }
    case 3: {
      const qos = (flags >> 1) & 3;
      if (qos === 3) throw new Error("publish qos 3");
      const topicLen = (body[0] << 8) | body[1];
      const topic = textDecoder.decode(body.subarray(2, 2 + topicLen));
      let position = 2 + topicLen;
      if (qos > 0) position += 2; // packet id (broker never sends qos > 0)
      return {
        kind: PacketKind.Publish,
        topic,
        payload: body.slice(position),
        retain: (flags & 1) === 1,
      };
    }
    case 9: {
      return {
        kind: PacketKind.SubAck,
        packetId: (body[0] << 8) | body[1],
        codes: Array.from(body.subarray(2)),
      };
    }
    case 11: {
      return { kind: PacketKind.UnsubAck, packetId: (body[0] << 8) | body[1] };
    }
    case 13:
      return { kind: PacketKind.PingResp };
    default:
      throw new Error(`unexpected packet type ${type}`);
  }
}

/** Incremental decoder; WebSocket frames need not align with packets. */
export class StreamDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): Packet[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;
    const packets: Packet[] = [];
    for (;;) {
      if (this.buffer.length < 2) return packets;
      const varint = decodeRemainingLength(this.buffer, 1);
      if (varint === null) return packets;
      const total = 1 + varint.consumed + varint.value;
      if (this.buffer.length < total) return packets;
      const head = this.buffer[0];
      const body = this.buffer.subarray(1 + varint.consumed, total);
      packets.push(decodeBody(head >> 4, head & 0x0f, body));
      this.buffer = this.buffer.slice(total);
    }
  }
}

export interface MqttClientOptions {
  url: string;
  clientId: string;
  keepaliveS?: number;
  will?: Will;
  connectTimeoutMs?: number;
  onConnect?: () => void;
  onMessage?: (packet: PublishPacket) => void;
  onClose?: (reason: string) => void;
}

/**
 * MQTT over a browser WebSocket (binary frames, subprotocol "mqtt").
 * QoS-0 only; subscriptions are fire-and-forget after the SUBACK.
 */
export class MqttWsClient {
  private socket: WebSocket;
  private decoder = new StreamDecoder();
  private pingTimer: ReturnType<typeof setInterval> | undefined;
  private connectTimer: ReturnType<typeof setTimeout> | undefined;
  private packetId = 1;
  private opts: MqttClientOptions;
  connected = false;

  constructor(opts: MqttClientOptions, socketFactory?: (url: string) => WebSocket) {
    this.opts = opts;
    this.socket = socketFactory
      ? socketFactory(opts.url)
      : new WebSocket(opts.url, "mqtt");
    this.socket.binaryType = "arraybuffer";
    const timeoutMs = opts.connectTimeoutMs ?? 5000;
    this.connectTimer = setTimeout(() => {
      if (!this.connected) this.fail("connect timeout");
    }, timeoutMs);
    this.socket.onopen = () => {
      this.socket.send(
        encodeConnect(opts.clientId, opts.keepaliveS ?? 30, opts.will),
      );
    };
    this.socket.onmessage = (event: MessageEvent) => {
      this.handleBytes(new Uint8Array(event.data as ArrayBuffer));
    };
    this.socket.onerror = () => this.fail("websocket error");
    this.socket.onclose = () => this.fail("connection closed");
  }

  private handleBytes(chunk: Uint8Array): void {
    let packets: Packet[];
    try {
      packets = this.decoder.feed(chunk);
    } catch (err) {
      this.fail(`protocol error: ${err}`);
      return;
    }
    for (const packet of packets) {
      if (packet.kind === PacketKind.ConnAck) {
        if (packet.returnCode !== 0) {
          this.fail(`broker refused connection (code ${packet.returnCode})`);
          return;
        }
        this.connected = true;
        if (this.connectTimer !== undefined) clearTimeout(this.connectTimer);
        const keepalive = this.opts.keepaliveS ?? 30;
        if (keepalive > 0) {
          this.pingTimer = setInterval(
            () => this.sendRaw(encodePingReq()),
            (keepalive * 1000) / 2,
          );
        }
        this.opts.onConnect?.();
      } else if (packet.kind === PacketKind.Publish) {
        this.opts.onMessage?.(packet);
      }
      // SUBACK/PINGRESP need no action at QoS 0
    }
  }

  private sendRaw(data: Uint8Array): void {
    if (this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(data);
    }
  }

  subscribe(...filters: string[]): void {
    const id = this.packetId;
    this.packetId = (this.packetId % 0xffff) + 1;
    this.sendRaw(encodeSubscribe(id, filters));
  }

  publish(topic: string, payload: Uint8Array, retain = false): void {
    this.sendRaw(encodePublish(topic, payload, retain));
  }

  disconnect(): void {
    this.teardown();
    this.sendRaw(encodeDisconnect());
    this.socket.close();
  }

  private fail(reason: string): void {
    const wasOpen = this.connected;
    this.teardown();
    this.connected = false;
    try {
      this.socket.close();
    } catch {
      /* already closed */
    }
    if (wasOpen || reason !== "connection closed") {
      this.opts.onClose?.(reason);
    }
  }

  private teardown(): void {
    if (this.pingTimer !== undefined) clearInterval(this.pingTimer);
    if (this.connectTimer !== undefined) clearTimeout(this.connectTimer);
    this.pingTimer = undefined;
    this.connectTimer = undefined;
  }
}
