/** WebSocket session wrapper: pairs frame meta with its binary payload
 * and discards stale frames so the displayed id never decreases. */

import {
  BinaryFrame,
  ClientMessage,
  FrameGate,
  FrameMeta,
  parseBinaryFrame,
  parseServerMessage,
} from "./protocol.js";

export interface ClientHandlers {
  onFrame(meta: FrameMeta, frame: BinaryFrame): void;
  onError(message: string): void;
  onClose(): void;
}

export class ViewerClient {
  private ws: WebSocket;
  private gate = new FrameGate();
  private pendingMeta: FrameMeta | null = null;

  constructor(url: string, private handlers: ClientHandlers, initMsg: ClientMessage) {
    this.ws = new WebSocket(url);
    this.ws.binaryType = "arraybuffer";
    this.ws.onopen = () => this.send(initMsg);
    this.ws.onmessage = (ev) => this.handleMessage(ev);
    this.ws.onerror = () => handlers.onError("connection error");
    this.ws.onclose = () => handlers.onClose();
  }

  send(msg: ClientMessage): void {
    this.ws.send(JSON.stringify(msg));
  }

  close(): void {
    this.ws.onclose = null;
    this.ws.close();
  }

  private handleMessage(ev: MessageEvent): void {
    if (typeof ev.data === "string") {
      const msg = parseServerMessage(ev.data);
      if (msg.type === "error") {
        this.handlers.onError(msg.message);
      } else {
        this.pendingMeta = msg;
      }
      return;
    }
    const meta = this.pendingMeta;
    const frame = parseBinaryFrame(ev.data as ArrayBuffer, meta?.payloads ?? 1);
    if (meta !== null && this.gate.accept(frame.id)) {
      this.handlers.onFrame(meta, frame);
    }
  }
}
