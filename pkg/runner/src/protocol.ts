// Wire types for the v1 NDJSON benchmark protocol. One JSON object per
// line; the runner sends hello first, answers infer with result, and exits
// 0 on shutdown. Unparseable lines get an error result with id -1.

export const PROTOCOL_VERSION = 1;

export interface DeviceAnnotations {
  device_name: string;
  interconnect: 'NVLink' | 'PCIe' | 'other' | 'none';
  memory_type: 'HBM' | 'GDDR' | 'DDR' | 'other';
  power_management: string;
}

export interface HelloMessage {
  type: 'hello';
  protocol_version: number;
  model_name: string;
  platform: string;
  precision: 'FP32' | 'FP16' | 'INT8';
  item_kind: 'sample' | 'token' | 'request';
  device: DeviceAnnotations;
  accuracy?: { metric_name: string; value: number };
}

export interface InferMessage {
  type: 'infer';
  id: number;
  batch_size: number;
  sequence_length?: number;
  payload_ref?: string;
}

export interface OkResult {
  type: 'result';
  id: number;
  status: 'ok';
  items_processed: number;
  runner_start_ns: number;
  runner_end_ns: number;
}

export interface ErrorResult {
  type: 'result';
  id: number;
  status: 'error';
  message: string;
}

export type ResultMessage = OkResult | ErrorResult;

export function errorResult(id: number, message: string): ErrorResult {
  return { type: 'result', id, status: 'error', message };
}

export function nowNs(): number {
  return Number(process.hrtime.bigint());
}
