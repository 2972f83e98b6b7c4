// Protocol engine, transport-agnostic: feed it inbound lines, it writes
// outbound lines. Requests are served strictly in arrival order (one
// promise chain); an optional reorder window emits each full window of
// results in reverse, for exercising a harness's id matching.

import { errorResult, nowNs, type InferMessage, type ResultMessage } from './protocol.js';
import { helloFor, makeRng, serviceTimeMs, type SyntheticModelSpec } from './spec.js';

export interface EngineOptions {
  spec: SyntheticModelSpec;
  reorderWindow: number; // 1 = in order
  writeLine: (line: string) => void;
  onShutdown: () => void;
}

// sleep coarsely, then spin to the target: setTimeout alone is too coarse
// for millisecond service times and overshoots by multiple ms under load.
// The final stretch spins synchronously; requests are served sequentially,
// so blocking the loop for <= 5 ms only lets inbound lines buffer.
async function preciseDelay(ms: number): Promise<void> {
  if (ms <= 0) return;
  const target = performance.now() + ms;
  const coarse = ms - 5;
  if (coarse > 0) {
    await new Promise((resolve) => setTimeout(resolve, coarse));
  }
  while (performance.now() < target) {
    // busy wait
  }
}

export class RunnerEngine {
  private readonly spec: SyntheticModelSpec;
  private readonly reorderWindow: number;
  private readonly writeLine: (line: string) => void;
  private readonly onShutdown: () => void;
  private readonly rng: () => number;
  private buffered: ResultMessage[] = [];
  private queue: Promise<void> = Promise.resolve();
  private stopping = false;

  constructor(options: EngineOptions) {
    this.spec = options.spec;
    this.reorderWindow = Math.max(1, options.reorderWindow);
    this.writeLine = options.writeLine;
    this.onShutdown = options.onShutdown;
    this.rng = makeRng(options.spec.seed);
  }

  start(): void {
    this.writeLine(JSON.stringify(helloFor(this.spec)));
  }

  /** Enqueue one inbound line; processing stays strictly FIFO. */
  feed(line: string): void {
    if (this.stopping || !line.trim()) return;
    this.queue = this.queue.then(() => this.handle(line));
  }

  /** EOF on the transport: finish the backlog, then shut down cleanly. */
  end(): void {
    this.queue = this.queue.then(() => this.shutdown());
  }

  private emit(result: ResultMessage): void {
    this.buffered.push(result);
    if (this.buffered.length >= this.reorderWindow) {
      this.flush();
    }
  }

  private flush(): void {
    for (const result of this.buffered.reverse()) {
      this.writeLine(JSON.stringify(result));
    }
    this.buffered = [];
  }

  private shutdown(): void {
    if (this.stopping) return;
    this.stopping = true;
    this.flush();
    this.onShutdown();
  }

  private async handle(line: string): Promise<void> {
    if (this.stopping) return;
    let message: Record<string, unknown>;
    try {
      message = JSON.parse(line) as Record<string, unknown>;
    } catch {
      this.emit(errorResult(-1, `parse error: ${line.slice(0, 60)}`));
      return;
    }
    switch (message.type) {
      case 'hello_ack':
        return;
      case 'shutdown':
        this.shutdown();
        return;
      case 'infer':
        await this.serveInfer(message as unknown as InferMessage);
        return;
      default:
        this.emit(errorResult(-1, `unknown message type: ${String(message.type)}`));
    }
  }

  private async serveInfer(request: InferMessage): Promise<void> {
    const id = typeof request.id === 'number' ? request.id : -1;
    const batch = typeof request.batch_size === 'number' ? request.batch_size : NaN;
    if (!Number.isFinite(batch) || batch < 1) {
      this.emit(errorResult(id, `invalid batch_size: ${String(request.batch_size)}`));
      return;
    }
    const startNs = nowNs();
    await preciseDelay(serviceTimeMs(this.spec, batch, this.rng));
    const items = this.spec.item_kind === 'token' ? this.spec.tokens_per_request : batch;
    this.emit({
      type: 'result',
      id,
      status: 'ok',
      items_processed: items,
      runner_start_ns: startNs,
      runner_end_ns: nowNs(),
    });
  }
}
