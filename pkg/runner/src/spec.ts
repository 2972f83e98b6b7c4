// Synthetic model spec: service time for a batch of B items is
// base_delay_ms + per_item_delay_ms * B, plus optional seeded uniform
// jitter. The remaining fields populate the handshake verbatim.

import { readFileSync } from 'node:fs';
import type { DeviceAnnotations, HelloMessage } from './protocol.js';
import { PROTOCOL_VERSION } from './protocol.js';

export interface SyntheticModelSpec {
  base_delay_ms: number;
  per_item_delay_ms: number;
  jitter_ms: number; // 0 disables; otherwise uniform in [-jitter, +jitter]
  seed: number;
  model_name: string;
  platform: string;
  precision: 'FP32' | 'FP16' | 'INT8';
  item_kind: 'sample' | 'token' | 'request';
  tokens_per_request: number;
  device: DeviceAnnotations;
  accuracy?: { metric_name: string; value: number };
}

const DEFAULTS: SyntheticModelSpec = {
  base_delay_ms: 0,
  per_item_delay_ms: 0,
  jitter_ms: 0,
  seed: 1,
  model_name: 'synthetic-model',
  platform: 'reference-runner',
  precision: 'FP16',
  item_kind: 'sample',
  tokens_per_request: 32,
  device: {
    device_name: 'synthetic',
    interconnect: 'none',
    memory_type: 'other',
    power_management: '',
  },
};

export function loadSpec(arg: string | undefined): SyntheticModelSpec {
  if (!arg) return { ...DEFAULTS };
  const text = arg.trim().startsWith('{') ? arg : readFileSync(arg, 'utf-8');
  const parsed = JSON.parse(text) as Partial<SyntheticModelSpec>;
  const spec = { ...DEFAULTS, ...parsed, device: { ...DEFAULTS.device, ...(parsed.device ?? {}) } };
  if (spec.base_delay_ms < 0 || spec.per_item_delay_ms < 0 || spec.jitter_ms < 0) {
    throw new Error('delays and jitter must be non-negative');
  }
  return spec;
}

// mulberry32: tiny deterministic PRNG so jittered runs are reproducible
export function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function serviceTimeMs(spec: SyntheticModelSpec, batchSize: number, rng: () => number): number {
  let ms = spec.base_delay_ms + spec.per_item_delay_ms * batchSize;
  if (spec.jitter_ms > 0) {
    ms += (rng() * 2 - 1) * spec.jitter_ms;
  }
  return Math.max(0, ms);
}

export function helloFor(spec: SyntheticModelSpec): HelloMessage {
  const hello: HelloMessage = {
    type: 'hello',
    protocol_version: PROTOCOL_VERSION,
    model_name: spec.model_name,
    platform: spec.platform,
    precision: spec.precision,
    item_kind: spec.item_kind,
    device: spec.device,
  };
  if (spec.accuracy) hello.accuracy = spec.accuracy;
  return hello;
}
