// Transports: stdio pipes for child-process runs, or a TCP listener that
// serves exactly one session and exits with it.

import { createInterface } from 'node:readline';
import { createServer } from 'node:net';
import { RunnerEngine } from './engine.js';
import type { SyntheticModelSpec } from './spec.js';

export function runStdio(spec: SyntheticModelSpec, reorderWindow: number): void {
  const engine = new RunnerEngine({
    spec,
    reorderWindow,
    writeLine: (line) => process.stdout.write(line + '\n'),
    onShutdown: () => process.exit(0),
  });
  engine.start();
  const lines = createInterface({ input: process.stdin });
  lines.on('line', (line) => engine.feed(line));
  lines.on('close', () => engine.end());
}

export function runTcp(spec: SyntheticModelSpec, port: number, reorderWindow: number): void {
  const server = createServer((socket) => {
    socket.setNoDelay(true);
    const engine = new RunnerEngine({
      spec,
      reorderWindow,
      writeLine: (line) => socket.write(line + '\n'),
      onShutdown: () => {
        socket.end();
        server.close(() => process.exit(0));
      },
    });
    engine.start();
    const lines = createInterface({ input: socket });
    lines.on('line', (line) => engine.feed(line));
    lines.on('close', () => engine.end());
  });
  server.maxConnections = 1;
  server.listen(port, '127.0.0.1', () => {
    // parseable readiness line for launch scripts; stdout stays protocol-free
    process.stderr.write(`listening on 127.0.0.1:${port}\n`);
  });
}
