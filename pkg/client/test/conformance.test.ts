import { ChildProcess, spawn } from 'node:child_process';
import * as net from 'node:net';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { conformanceRun, formatReport } from '../src/conformance.js';
import { RemoteEnv } from '../src/remoteEnv.js';

const repoRoot = path.resolve(path.dirname(fileURLToPath(import.meta.url)), '..', '..');

/** Start `lanedrive serve` on an ephemeral port and wait for its address. */
function startServer(extraArgs: string[] = []): Promise<{ proc: ChildProcess; port: number }> {
  return new Promise((resolve, reject) => {
    const proc = spawn(
      'python3',
      ['-m', 'lanedrive.cli', 'serve', '--bind', '127.0.0.1:0', ...extraArgs],
      { cwd: repoRoot, stdio: ['ignore', 'pipe', 'pipe'] },
    );
    let out = '';
    const timer = setTimeout(() => {
      proc.kill();
      reject(new Error(`server did not announce itself; output so far: ${out}`));
    }, 30_000);
    proc.stdout!.on('data', (chunk: Buffer) => {
      out += chunk.toString();
      const m = out.match(/listening on [\d.]+:(\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve({ proc, port: Number(m[1]) });
      }
    });
    proc.stderr!.on('data', (chunk: Buffer) => {
      out += chunk.toString();
    });
    proc.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}): ${out}`));
    });
  });
}

describe('conformance against the real server', () => {
  let proc: ChildProcess;
  let port: number;

  beforeAll(async () => {
    ({ proc, port } = await startServer());
  }, 40_000);

  afterAll(() => {
    proc.kill('SIGINT');
  });

  it('passes the full suite with three random episodes', async () => {
    const report = await conformanceRun('127.0.0.1', port);
    if (!report.pass) console.error(formatReport(report));
    expect(report.pass).toBe(true);
    const episodes = report.checks.find((c) => c.name.includes('random episodes'));
    expect(episodes?.ok).toBe(true);
  }, 120_000);

  it('drives the env directly through RemoteEnv', async () => {
    const env = await RemoteEnv.connect('127.0.0.1', port);
    expect(env.hello.obs_shape).toEqual([80, 80, 4]);
    const first = await env.reset(5);
    expect(first.data.length).toBe(80 * 80 * 4);
    const next = await env.step(2);
    expect(next.reward).toBeGreaterThanOrEqual(-2);
    expect(next.reward).toBeLessThanOrEqual(2);
    await env.close();
  }, 60_000);
});

describe('conformance against broken servers', () => {
  it('fails when the server never sends hello', async () => {
    const silent = net.createServer(() => {
      /* accept and say nothing */
    });
    await new Promise<void>((r) => silent.listen(0, '127.0.0.1', () => r()));
    const port = (silent.address() as net.AddressInfo).port;
    const report = await conformanceRun('127.0.0.1', port).catch(() => null);
    silent.close();
    expect(report === null || !report.pass).toBe(true);
  }, 30_000);

  it('fails when observations disagree with their shape', async () => {
    const bogus = net.createServer((sock) => {
      sock.write(
        '{"type":"hello","protocol_version":1,"action_count":5,"obs_shape":[2,2,1]}\n',
      );
      sock.on('data', () => {
        // Shape says 4 bytes, payload has 3.
        sock.write(
          '{"type":"obs","frame_b64":"AAAA","shape":[2,2,1],"reward":0,"done":false,"info":{}}\n',
        );
      });
    });
    await new Promise<void>((r) => bogus.listen(0, '127.0.0.1', () => r()));
    const port = (bogus.address() as net.AddressInfo).port;
    const report = await conformanceRun('127.0.0.1', port);
    bogus.close();
    expect(report.pass).toBe(false);
  }, 30_000);
});
