/**
 * Wire message types and validation for the lanedrive bridge protocol
 * (newline-delimited JSON, protocol version 1).
 *
 * Only the Node standard library is used, so this file doubles as an
 * executable description of the protocol.
 */

export type Shape3 = [number, number, number];

export interface HelloMsg {
  type: 'hello';
  protocol_version: number;
  action_count: number;
  obs_shape: Shape3;
}

export interface ObsMsg {
  type: 'obs';
  frame_b64: string;
  shape: Shape3;
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export interface ErrorMsg {
  type: 'error';
  code: string;
  message: string;
}

export type ServerMsg = HelloMsg | ObsMsg | ErrorMsg;

export type Validation =
  | { ok: true; msg: ServerMsg }
  | { ok: false; reason: string };

export function encodeReset(seed?: number): string {
  return seed === undefined
    ? '{"type":"reset"}\n'
    : JSON.stringify({ type: 'reset', seed }) + '\n';
}

export function encodeStep(action: number): string {
  return JSON.stringify({ type: 'step', action }) + '\n';
}

export function encodeClose(): string {
  return '{"type":"close"}\n';
}

function isInt(v: unknown): v is number {
  return typeof v === 'number' && Number.isInteger(v);
}

function isShape3(v: unknown): v is Shape3 {
  return Array.isArray(v) && v.length === 3 && v.every((d) => isInt(d) && d > 0);
}

export function shapeBytes(shape: Shape3): number {
  return shape[0] * shape[1] * shape[2];
}

/** Parse and validate one server line against the protocol schema. */
export function validateServerLine(line: string): Validation {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch (e) {
    return { ok: false, reason: `not valid JSON: ${(e as Error).message}` };
  }
  if (typeof parsed !== 'object' || parsed === null || Array.isArray(parsed)) {
    return { ok: false, reason: 'message is not a JSON object' };
  }
  const d = parsed as Record<string, unknown>;
  switch (d.type) {
    case 'hello': {
      if (!isInt(d.protocol_version) || d.protocol_version < 1) {
        return { ok: false, reason: 'hello: bad protocol_version' };
      }
      if (!isInt(d.action_count) || d.action_count < 1) {
        return { ok: false, reason: 'hello: bad action_count' };
      }
      if (!isShape3(d.obs_shape)) {
        return { ok: false, reason: 'hello: bad obs_shape' };
      }
      return {
        ok: true,
        msg: {
          type: 'hello',
          protocol_version: d.protocol_version,
          action_count: d.action_count,
          obs_shape: d.obs_shape as Shape3,
        },
      };
    }
    case 'obs': {
      if (typeof d.frame_b64 !== 'string') {
        return { ok: false, reason: 'obs: frame_b64 must be a string' };
      }
      if (!isShape3(d.shape)) {
        return { ok: false, reason: 'obs: bad shape' };
      }
      if (typeof d.reward !== 'number' || !Number.isFinite(d.reward)) {
        return { ok: false, reason: 'obs: reward must be a finite number' };
      }
      if (typeof d.done !== 'boolean') {
        return { ok: false, reason: 'obs: done must be a boolean' };
      }
      if (typeof d.info !== 'object' || d.info === null || Array.isArray(d.info)) {
        return { ok: false, reason: 'obs: info must be an object' };
      }
      if (!/^[A-Za-z0-9+/]*={0,2}$/.test(d.frame_b64)) {
        return { ok: false, reason: 'obs: frame_b64 is not base64' };
      }
      const decoded = Buffer.from(d.frame_b64, 'base64');
      const expected = shapeBytes(d.shape as Shape3);
      if (decoded.length !== expected) {
        return {
          ok: false,
          reason: `obs: frame has ${decoded.length} bytes, shape implies ${expected}`,
        };
      }
      return {
        ok: true,
        msg: {
          type: 'obs',
          frame_b64: d.frame_b64,
          shape: d.shape as Shape3,
          reward: d.reward,
          done: d.done,
          info: d.info as Record<string, unknown>,
        },
      };
    }
    case 'error': {
      if (typeof d.code !== 'string' || typeof d.message !== 'string') {
        return { ok: false, reason: 'error: code and message must be strings' };
      }
      return { ok: true, msg: { type: 'error', code: d.code, message: d.message } };
    }
    default:
      return { ok: false, reason: `unknown server message type ${String(d.type)}` };
  }
}
