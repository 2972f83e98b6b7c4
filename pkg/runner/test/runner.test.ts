import { afterEach, describe, expect, it } from 'vitest';
import { StdioClient, TcpClient, freePort } from './client.js';

let active: Array<{ kill: () => void }> = [];

function track<T extends { kill: () => void }>(client: T): T {
  active.push(client);
  return client;
}

afterEach(() => {
  for (const client of active) client.kill();
  active = [];
});

describe('handshake', () => {
  it('sends a valid v1 hello first', async () => {
    const client = track(new StdioClient());
    const hello = await client.next();
    expect(hello.type).toBe('hello');
    expect(hello.protocol_version).toBe(1);
    expect(hello.model_name).toBe('synthetic-model');
    const device = hello.device as Record<string, unknown>;
    expect(device.interconnect).toBe('none');
    expect(device.memory_type).toBe('other');
    expect(device).toHaveProperty('power_management');
  });

  it('reflects the spec in the hello', async () => {
    const spec = JSON.stringify({
      model_name: 'opt-125m',
      platform: 'smoothrunner',
      precision: 'INT8',
      item_kind: 'token',
      accuracy: { metric_name: 'perplexity', value: 27.65 },
    });
    const client = track(new StdioClient(['--spec', spec]));
    const hello = await client.next();
    expect(hello.model_name).toBe('opt-125m');
    expect(hello.precision).toBe('INT8');
    expect(hello.item_kind).toBe('token');
    expect((hello.accuracy as Record<string, unknown>).value).toBe(27.65);
  });
});

describe('inference', () => {
  it('answers ok with items_processed = batch and runner timestamps', async () => {
    const client = track(new StdioClient());
    await client.next(); // hello
    const result = await client.infer(7, 100);
    expect(result).toMatchObject({ type: 'result', id: 7, status: 'ok', items_processed: 100 });
    expect(result.runner_end_ns as number).toBeGreaterThanOrEqual(result.runner_start_ns as number);
  });

  it('sleeps close to the closed form c + m*B', async () => {
    const spec = JSON.stringify({ base_delay_ms: 1, per_item_delay_ms: 0.1 });
    const client = track(new StdioClient(['--spec', spec]));
    await client.next();
    // warm the JIT and timers before measuring
    for (let i = 0; i < 5; i++) await client.infer(100 + i, 1);

    for (const [batch, expected] of [
      [1, 1.1],
      [10, 2.0],
      [100, 11.0],
    ] as Array<[number, number]>) {
      const samples: number[] = [];
      for (let i = 0; i < 8; i++) {
        const result = await client.infer(batch * 1000 + i, batch);
        samples.push(((result.runner_end_ns as number) - (result.runner_start_ns as number)) / 1e6);
      }
      samples.sort((a, b) => a - b);
      // scheduler noise is strictly additive, so the floor isolates the
      // deterministic service time; tolerance 1 ms + 5% of nominal
      expect(Math.abs(samples[0] - expected)).toBeLessThan(1 + 0.05 * expected);
      // gross sanity on typical behaviour too
      expect(samples[Math.floor(samples.length / 2)]).toBeLessThan(expected + 5);
    }
  });

  it('reports the configured token count for item_kind=token', async () => {
    const spec = JSON.stringify({ item_kind: 'token', tokens_per_request: 48 });
    const client = track(new StdioClient(['--spec', spec]));
    await client.next();
    const result = await client.infer(1, 4);
    expect(result.items_processed).toBe(48);
  });

  it('rejects a bad batch size with an error result, not a crash', async () => {
    const client = track(new StdioClient());
    await client.next();
    client.send({ type: 'infer', id: 5, batch_size: 0 });
    const error = await client.next();
    expect(error).toMatchObject({ type: 'result', id: 5, status: 'error' });
    const ok = await client.infer(6, 2);
    expect(ok.status).toBe('ok');
  });
});

describe('robustness', () => {
  it('answers a malformed line with an error result and keeps serving', async () => {
    const client = track(new StdioClient());
    await client.next();
    client.sendRaw('{"type":');
    const error = await client.next();
    expect(error).toMatchObject({ type: 'result', id: -1, status: 'error' });
    expect(String(error.message)).toContain('parse error');
    const ok = await client.infer(9, 3);
    expect(ok).toMatchObject({ status: 'ok', items_processed: 3 });
  });

  it('exits 0 on shutdown', async () => {
    const client = track(new StdioClient());
    await client.next();
    client.send({ type: 'shutdown' });
    expect(await client.exitCode()).toBe(0);
  });
});

describe('reorder window', () => {
  it('emits each window of results in reverse order with correct ids', async () => {
    const client = track(new StdioClient(['--reorder-window', '2']));
    await client.next();
    client.send({ type: 'infer', id: 1, batch_size: 1 });
    client.send({ type: 'infer', id: 2, batch_size: 2 });
    const first = await client.next();
    const second = await client.next();
    expect(first.id).toBe(2);
    expect(first.items_processed).toBe(2);
    expect(second.id).toBe(1);
    expect(second.items_processed).toBe(1);
  });
});

describe('tcp transport', () => {
  it('serves one session and exits with it', async () => {
    const client = track(new TcpClient(freePort(), ['--spec', '{"model_name":"tcp-model"}']));
    await client.connect();
    const hello = await client.next();
    expect(hello.model_name).toBe('tcp-model');
    client.send({ type: 'infer', id: 3, batch_size: 6 });
    const result = await client.next();
    expect(result).toMatchObject({ id: 3, status: 'ok', items_processed: 6 });
    client.send({ type: 'shutdown' });
    expect(await client.exitCode()).toBe(0);
  });
});
