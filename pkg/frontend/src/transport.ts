// Transport abstraction: the session logic only needs send/close plus
// three callbacks, so tests can drive it with a fake and node tests can
// use the raw TCP framing while the browser uses WebSocket.

export interface Transport {
  send(text: string): void;
  close(): void;
  onOpen: (() => void) | null;
  onMessage: ((text: string) => void) | null;
  onClose: (() => void) | null;
}

export type TransportFactory = (url: string) => Transport;

export class WebSocketTransport implements Transport {
  onOpen: (() => void) | null = null;
  onMessage: ((text: string) => void) | null = null;
  onClose: (() => void) | null = null;
  private ws: WebSocket;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.onOpen?.();
    this.ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.onMessage?.(ev.data);
    };
    this.ws.onclose = () => this.onClose?.();
    this.ws.onerror = () => {
      /* onclose follows and drives the reconnect */
    };
  }

  send(text: string): void {
    if (this.ws.readyState === WebSocket.OPEN) this.ws.send(text);
  }

  close(): void {
    this.ws.close();
  }
}

/** ws:// endpoint derived from the page (or an explicit) http address. */
export function wsUrl(base: string): string {
  return base.replace(/^http/, "ws").replace(/\/$/, "") + "/ws";
}

/** Exponential backoff helper: 1 s doubling to an 8 s ceiling. */
export function nextBackoff(previousMs: number | null): number {
  if (previousMs === null) return 1000;
  return Math.min(previousMs * 2, 8000);
}
