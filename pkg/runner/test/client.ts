// Minimal protocol client for tests: spawn the built runner (stdio or TCP)
// and exchange NDJSON lines with it.

import { spawn, type ChildProcess } from 'node:child_process';
import { connect, type Socket } from 'node:net';
import { createInterface, type Interface } from 'node:readline';
import { fileURLToPath } from 'node:url';
import { dirname, join } from 'node:path';

const HERE = dirname(fileURLToPath(import.meta.url));
export const CLI_JS = join(HERE, '..', 'dist', 'cli.js');

type Message = Record<string, unknown>;

class LineWaiter {
  private queue: Message[] = [];
  private waiters: Array<(msg: Message) => void> = [];

  push(line: string): void {
    if (!line.trim()) return;
    const message = JSON.parse(line) as Message;
    const waiter = this.waiters.shift();
    if (waiter) waiter(message);
    else this.queue.push(message);
  }

  next(timeoutMs = 5000): Promise<Message> {
    const queued = this.queue.shift();
    if (queued) return Promise.resolve(queued);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('timed out waiting for a line')), timeoutMs);
      this.waiters.push((msg) => {
        clearTimeout(timer);
        resolve(msg);
      });
    });
  }
}

export class StdioClient {
  readonly child: ChildProcess;
  private readonly lines: LineWaiter = new LineWaiter();
  private readonly reader: Interface;

  constructor(args: string[] = []) {
    this.child = spawn(process.execPath, [CLI_JS, ...args], {
      stdio: ['pipe', 'pipe', 'inherit'],
    });
    this.reader = createInterface({ input: this.child.stdout! });
    this.reader.on('line', (line) => this.lines.push(line));
  }

  send(message: Message): void {
    this.child.stdin!.write(JSON.stringify(message) + '\n');
  }

  sendRaw(line: string): void {
    this.child.stdin!.write(line + '\n');
  }

  next(timeoutMs?: number): Promise<Message> {
    return this.lines.next(timeoutMs);
  }

  async infer(id: number, batchSize: number): Promise<Message> {
    this.send({ type: 'infer', id, batch_size: batchSize });
    return this.next();
  }

  exitCode(timeoutMs = 5000): Promise<number | null> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('runner did not exit')), timeoutMs);
      this.child.once('exit', (code) => {
        clearTimeout(timer);
        resolve(code);
      });
    });
  }

  kill(): void {
    if (this.child.exitCode === null) this.child.kill();
  }
}

export class TcpClient {
  readonly child: ChildProcess;
  private socket!: Socket;
  private readonly lines: LineWaiter = new LineWaiter();

  constructor(readonly port: number, args: string[] = []) {
    this.child = spawn(process.execPath, [CLI_JS, '--transport', `tcp:${port}`, ...args], {
      stdio: ['ignore', 'inherit', 'pipe'],
    });
  }

  async connect(): Promise<void> {
    const deadline = Date.now() + 5000;
    for (;;) {
      try {
        await new Promise<void>((resolve, reject) => {
          const socket = connect({ host: '127.0.0.1', port: this.port }, () => {
            this.socket = socket;
            resolve();
          });
          socket.once('error', reject);
        });
        break;
      } catch (error) {
        if (Date.now() > deadline) throw error;
        await new Promise((resolve) => setTimeout(resolve, 50));
      }
    }
    const reader = createInterface({ input: this.socket });
    reader.on('line', (line) => this.lines.push(line));
  }

  send(message: Message): void {
    this.socket.write(JSON.stringify(message) + '\n');
  }

  next(timeoutMs?: number): Promise<Message> {
    return this.lines.next(timeoutMs);
  }

  exitCode(timeoutMs = 5000): Promise<number | null> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('runner did not exit')), timeoutMs);
      this.child.once('exit', (code) => {
        clearTimeout(timer);
        resolve(code);
      });
    });
  }

  kill(): void {
    this.socket?.destroy();
    if (this.child.exitCode === null) this.child.kill();
  }
}

export function freePort(): number {
  // race-tolerant: tests retry on connect, and the OS rarely reuses
  // ephemeral ports this quickly
  return 20000 + Math.floor(Math.random() * 20000);
}
