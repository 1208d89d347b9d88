// Server-sent event consumer with reconnect/backoff. The transport is
// injected so the policy is testable without a browser.

export interface StreamHandle {
  close(): void;
}

export type Connector = (
  url: string,
  onMessage: (data: string) => void,
  onError: () => void,
) => StreamHandle;

export interface BackoffPolicy {
  initialMs: number;
  maxMs: number;
  factor: number;
}

export const DEFAULT_BACKOFF: BackoffPolicy = { initialMs: 500, maxMs: 10_000, factor: 2 };

export function nextBackoff(current: number, policy: BackoffPolicy = DEFAULT_BACKOFF): number {
  return Math.min(policy.maxMs, Math.max(policy.initialMs, current * policy.factor));
}

export class EventStream {
  private handle: StreamHandle | null = null;
  private backoffMs = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    private url: string,
    private connector: Connector,
    private onMessage: (data: string) => void,
    private policy: BackoffPolicy = DEFAULT_BACKOFF,
  ) {}

  start(): void {
    this.closed = false;
    this.connect();
  }

  private connect(): void {
    if (this.closed) return;
    this.handle = this.connector(
      this.url,
      (data) => {
        this.backoffMs = 0; // healthy again
        this.onMessage(data);
      },
      () => this.scheduleReconnect(),
    );
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    this.handle?.close();
    this.handle = null;
    this.backoffMs = nextBackoff(this.backoffMs, this.policy);
    this.timer = setTimeout(() => this.connect(), this.backoffMs);
  }

  currentBackoffMs(): number {
    return this.backoffMs;
  }

  close(): void {
    this.closed = true;
    if (this.timer) clearTimeout(this.timer);
    this.handle?.close();
    this.handle = null;
  }
}
