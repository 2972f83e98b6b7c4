#!/usr/bin/env node
// Reference runner CLI.
//
//   node dist/cli.js [--spec <file-or-inline-json>] [--transport stdio|tcp:<port>]
//                    [--reorder-window <n>]
//
// The spec sets the synthetic service time (base_delay_ms +
// per_item_delay_ms * batch, optional jitter) and the handshake fields.

import { loadSpec } from './spec.js';
import { runStdio, runTcp } from './transports.js';

interface CliArgs {
  spec?: string;
  transport: string;
  reorderWindow: number;
}

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { transport: 'stdio', reorderWindow: 1 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      const value = argv[++i];
      if (value === undefined) throw new Error(`missing value for ${flag}`);
      return value;
    };
    switch (flag) {
      case '--spec':
        args.spec = next();
        break;
      case '--transport':
        args.transport = next();
        break;
      case '--reorder-window':
        args.reorderWindow = Number.parseInt(next(), 10);
        if (!Number.isFinite(args.reorderWindow) || args.reorderWindow < 1) {
          throw new Error('--reorder-window must be a positive integer');
        }
        break;
      default:
        throw new Error(`unknown flag: ${flag}`);
    }
  }
  return args;
}

function main(): void {
  let args: CliArgs;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (error) {
    process.stderr.write(`reference-runner: ${(error as Error).message}\n`);
    process.exit(2);
  }
  const spec = loadSpec(args.spec);
  if (args.transport === 'stdio') {
    runStdio(spec, args.reorderWindow);
    return;
  }
  const tcpMatch = /^tcp:(\d+)$/.exec(args.transport);
  if (tcpMatch) {
    runTcp(spec, Number.parseInt(tcpMatch[1], 10), args.reorderWindow);
    return;
  }
  process.stderr.write(`reference-runner: unknown transport ${args.transport}\n`);
  process.exit(2);
}

main();
