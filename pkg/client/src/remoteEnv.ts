/**
 * RemoteEnv: drive a lanedrive bridge server over TCP with the gym verbs.
 *
 * One request is in flight at a time; the server answers every request with
 * exactly one line. Protocol errors reported by the server surface as
 * RemoteError with the server's code.
 */

import * as net from 'node:net';

import {
  HelloMsg,
  ObsMsg,
  ServerMsg,
  encodeClose,
  encodeReset,
  encodeStep,
  shapeBytes,
  validateServerLine,
} from './messages.js';

export class RemoteError extends Error {
  constructor(
    public readonly code: string,
    message: string,
  ) {
    super(`${code}: ${message}`);
  }
}

export interface Observation {
  data: Uint8Array;
  shape: [number, number, number];
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

interface Waiter {
  resolve: (line: string) => void;
  reject: (err: Error) => void;
}

export class RemoteEnv {
  readonly hello: HelloMsg;
  private readonly socket: net.Socket;
  private buffer = '';
  private waiter: Waiter | null = null;
  private closed = false;

  private constructor(socket: net.Socket, hello: HelloMsg) {
    this.socket = socket;
    this.hello = hello;
    socket.on('data', (chunk) => this.onData(chunk));
    socket.on('error', (err) => this.failWaiter(err));
    socket.on('close', () => this.failWaiter(new Error('connection closed')));
  }

  /** Connect and consume the server's hello line. */
  static connect(host: string, port: number, timeoutMs = 10_000): Promise<RemoteEnv> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error(`no hello within ${timeoutMs} ms`));
      }, timeoutMs);
      let buf = '';
      const onData = (chunk: Buffer) => {
        buf += chunk.toString('utf-8');
        const nl = buf.indexOf('\n');
        if (nl < 0) return;
        clearTimeout(timer);
        socket.off('data', onData);
        const v = validateServerLine(buf.slice(0, nl));
        if (!v.ok || v.msg.type !== 'hello') {
          socket.destroy();
          reject(new Error(v.ok ? 'first message was not hello' : v.reason));
          return;
        }
        const env = new RemoteEnv(socket, v.msg);
        env.buffer = buf.slice(nl + 1);
        resolve(env);
      };
      socket.on('data', onData);
      socket.once('error', (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
  }

  private onData(chunk: Buffer): void {
    this.buffer += chunk.toString('utf-8');
    const nl = this.buffer.indexOf('\n');
    if (nl < 0 || this.waiter === null) return;
    const line = this.buffer.slice(0, nl);
    this.buffer = this.buffer.slice(nl + 1);
    const w = this.waiter;
    this.waiter = null;
    w.resolve(line);
  }

  private failWaiter(err: Error): void {
    if (this.waiter !== null) {
      const w = this.waiter;
      this.waiter = null;
      w.reject(err);
    }
  }

  private request(payload: string, timeoutMs = 30_000): Promise<ServerMsg> {
    if (this.waiter !== null) {
      return Promise.reject(new Error('a request is already in flight'));
    }
    if (this.closed) {
      return Promise.reject(new Error('connection is closed'));
    }
    return new Promise<string>((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`no response within ${timeoutMs} ms`)),
        timeoutMs,
      );
      this.waiter = {
        resolve: (line) => {
          clearTimeout(timer);
          resolve(line);
        },
        reject: (err) => {
          clearTimeout(timer);
          reject(err);
        },
      };
      this.socket.write(payload);
      // A full line may already be buffered.
      this.onData(Buffer.alloc(0));
    }).then((line) => {
      const v = validateServerLine(line);
      if (!v.ok) throw new Error(`invalid server message: ${v.reason}`);
      return v.msg;
    });
  }

  private toObservation(msg: ObsMsg): Observation {
    const data = Buffer.from(msg.frame_b64, 'base64');
    if (data.length !== shapeBytes(msg.shape)) {
      throw new Error('observation byte count does not match shape');
    }
    return {
      data: new Uint8Array(data),
      shape: msg.shape,
      reward: msg.reward,
      done: msg.done,
      info: msg.info,
    };
  }

  private expectObs(msg: ServerMsg): Observation {
    if (msg.type === 'error') throw new RemoteError(msg.code, msg.message);
    if (msg.type !== 'obs') throw new Error(`expected obs, got ${msg.type}`);
    return this.toObservation(msg);
  }

  async reset(seed?: number): Promise<Observation> {
    return this.expectObs(await this.request(encodeReset(seed)));
  }

  async step(action: number): Promise<Observation> {
    return this.expectObs(await this.request(encodeStep(action)));
  }

  /** Send a raw line and return the server's reply (conformance probes). */
  async rawExchange(line: string): Promise<ServerMsg> {
    return this.request(line.endsWith('\n') ? line : line + '\n');
  }

  async close(): Promise<void> {
    this.closed = true;
    await new Promise<void>((resolve) => {
      this.socket.end(encodeClose(), () => resolve());
    });
    this.socket.destroy();
  }
}
