/**
 * Wire protocol for the render service.
 *
 * Client -> server: JSON text frames with a `type` discriminator.
 * Server -> client: a JSON `frame` meta message followed by one binary
 * frame (8-byte little-endian frame id, then PNG bytes; in compare mode
 * two PNGs separated by a 4-byte little-endian length prefix of the
 * first), or JSON `error` messages.
 */

export type ClipMode = "none" | "hard" | "rara";

export interface InitMessage {
  type: "init";
  scene: string;
  width: number;
  height: number;
}

export interface SetCameraMessage {
  type: "set_camera";
  eye: [number, number, number];
  target: [number, number, number];
  up?: [number, number, number];
  fov?: number;
}

export interface SetPlaneMessage {
  type: "set_plane";
  normal: [number, number, number];
  offset: number;
}

export interface SetModeMessage {
  type: "set_mode";
  mode: ClipMode;
}

export interface SetCompareMessage {
  type: "set_compare";
  on: boolean;
}

export interface SweepMessage {
  type: "sweep";
  frames: number;
}

export type ClientMessage =
  | InitMessage
  | SetCameraMessage
  | SetPlaneMessage
  | SetModeMessage
  | SetCompareMessage
  | SweepMessage;

export interface FrameMeta {
  type: "frame";
  id: number;
  render_ms: number;
  mode: string;
  payloads: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = FrameMeta | ErrorMessage;

export function init(scene: string, width = 512, height = 512): InitMessage {
  return { type: "init", scene, width, height };
}

export function setCamera(
  eye: [number, number, number],
  target: [number, number, number],
  up: [number, number, number] = [0, 1, 0],
  fov = 60,
): SetCameraMessage {
  return { type: "set_camera", eye, target, up, fov };
}

export function setPlane(
  normal: [number, number, number],
  offset: number,
): SetPlaneMessage {
  return { type: "set_plane", normal, offset };
}

export function setMode(mode: ClipMode): SetModeMessage {
  return { type: "set_mode", mode };
}

export function setCompare(on: boolean): SetCompareMessage {
  return { type: "set_compare", on };
}

export function sweep(frames = 30): SweepMessage {
  return { type: "sweep", frames };
}

export function parseServerMessage(text: string): ServerMessage {
  const msg = JSON.parse(text) as Partial<ServerMessage>;
  if (msg.type !== "frame" && msg.type !== "error") {
    throw new Error(`unexpected server message type: ${String(msg.type)}`);
  }
  return msg as ServerMessage;
}

export interface BinaryFrame {
  id: number;
  pngs: Uint8Array[];
}

/**
 * Decode a binary frame. `payloads` comes from the preceding frame meta
 * message (1 for single renders, 2 for compare mode: hard then rara).
 */
export function parseBinaryFrame(buf: ArrayBuffer, payloads = 1): BinaryFrame {
  if (buf.byteLength < 8) {
    throw new Error(`binary frame too short: ${buf.byteLength} bytes`);
  }
  const view = new DataView(buf);
  const id = Number(view.getBigUint64(0, true));
  if (payloads <= 1) {
    return { id, pngs: [new Uint8Array(buf, 8)] };
  }
  if (buf.byteLength < 12) {
    throw new Error("compare frame missing length prefix");
  }
  const first = view.getUint32(8, true);
  if (12 + first > buf.byteLength) {
    throw new Error(
      `compare frame length prefix ${first} exceeds payload of ${buf.byteLength - 12} bytes`,
    );
  }
  return {
    id,
    pngs: [new Uint8Array(buf, 12, first), new Uint8Array(buf, 12 + first)],
  };
}

/**
 * Monotonic frame gate: the displayed frame id never decreases; frames
 * older than the newest one seen are discarded.
 */
export class FrameGate {
  latest = 0;

  accept(id: number): boolean {
    if (id <= this.latest) {
      return false;
    }
    this.latest = id;
    return true;
  }
}
