/**
 * Protocol conformance suite: validates the hello handshake, the schema of
 * every message, lifecycle error behavior, and completes three
 * random-policy episodes. Purely client-side; never needs server internals.
 */

import { RemoteEnv, RemoteError } from './remoteEnv.js';

export interface Check {
  name: string;
  ok: boolean;
  detail: string;
}

export interface ConformanceReport {
  pass: boolean;
  checks: Check[];
  transcript: string[];
}

/** Deterministic xorshift32 so conformance runs are reproducible. */
function makeRng(seed: number): () => number {
  let s = seed >>> 0 || 1;
  return () => {
    s ^= s << 13;
    s ^= s >>> 17;
    s ^= s << 5;
    s >>>= 0;
    return s / 0x100000000;
  };
}

export async function conformanceRun(
  host: string,
  port: number,
  opts: { episodes?: number; maxStepsPerEpisode?: number } = {},
): Promise<ConformanceReport> {
  const episodes = opts.episodes ?? 3;
  const maxSteps = opts.maxStepsPerEpisode ?? 2000;
  const checks: Check[] = [];
  const transcript: string[] = [];
  const note = (dir: '>' | '<', text: string) => {
    transcript.push(`${dir} ${text.length > 120 ? text.slice(0, 117) + '...' : text}`);
  };
  const check = (name: string, ok: boolean, detail = '') => {
    checks.push({ name, ok, detail });
    note('<', `[${ok ? 'ok' : 'FAIL'}] ${name}${detail ? `: ${detail}` : ''}`);
  };

  let env: RemoteEnv;
  try {
    env = await RemoteEnv.connect(host, port);
  } catch (e) {
    check('hello handshake', false, (e as Error).message);
    return { pass: false, checks, transcript };
  }
  const hello = env.hello;
  check(
    'hello handshake',
    hello.protocol_version === 1 && hello.action_count >= 1,
    `protocol_version=${hello.protocol_version} action_count=${hello.action_count} ` +
      `obs_shape=[${hello.obs_shape.join(',')}]`,
  );

  try {
    // Lifecycle: step before any reset must earn bad_state, not kill the
    // session or the env.
    note('>', '{"type":"step","action":0} (before reset)');
    try {
      await env.step(0);
      check('step before reset rejected', false, 'server accepted the step');
    } catch (e) {
      const ok = e instanceof RemoteError && e.code === 'bad_state';
      check('step before reset rejected', ok, (e as Error).message);
    }

    // Malformed JSON earns bad_json and the session survives.
    note('>', 'this is not json');
    const bad = await env.rawExchange('this is not json');
    check(
      'malformed line reported',
      bad.type === 'error' && bad.code === 'bad_json',
      bad.type === 'error' ? bad.code : bad.type,
    );

    // Unknown type earns bad_type.
    note('>', '{"type":"warp"}');
    const warp = await env.rawExchange('{"type":"warp"}');
    check(
      'unknown type reported',
      warp.type === 'error' && warp.code === 'bad_type',
      warp.type === 'error' ? warp.code : warp.type,
    );

    // Seeded reset starts an episode; shape must echo hello.
    note('>', '{"type":"reset","seed":1}');
    const first = await env.reset(1);
    check(
      'reset returns initial observation',
      !first.done &&
        first.reward === 0 &&
        first.shape.every((d, i) => d === hello.obs_shape[i]),
      `shape=[${first.shape.join(',')}] bytes=${first.data.length}`,
    );

    // Determinism through the wire: the same seed reproduces the first
    // observation byte for byte.
    const again = await env.reset(1);
    check(
      'seeded reset reproducible',
      Buffer.from(again.data).equals(Buffer.from(first.data)),
      `${first.data.length} bytes compared`,
    );

    // Out-of-range action earns bad_field and does not end the episode.
    note('>', `{"type":"step","action":${hello.action_count + 5}}`);
    try {
      await env.step(hello.action_count + 5);
      check('out-of-range action rejected', false, 'server accepted the action');
    } catch (e) {
      const ok = e instanceof RemoteError && e.code === 'bad_field';
      check('out-of-range action rejected', ok, (e as Error).message);
    }
    const afterError = await env.step(0);
    check('session usable after field error', afterError.data.length > 0);

    // Three random-policy episodes; every observation must stay
    // schema-consistent (validateServerLine enforces byte counts).
    const rng = makeRng(0xc0ffee);
    let completed = 0;
    let totalSteps = 0;
    const t0 = performance.now();
    for (let ep = 0; ep < episodes; ep++) {
      let obs = await env.reset(100 + ep);
      let steps = 0;
      while (!obs.done && steps < maxSteps) {
        const action = Math.floor(rng() * hello.action_count);
        obs = await env.step(action);
        steps++;
        totalSteps++;
      }
      if (obs.done) {
        completed++;
        note('<', `episode ${ep} finished after ${steps} steps`);
      }
    }
    const msPerStep = (performance.now() - t0) / Math.max(totalSteps, 1);
    check(
      `${episodes} random episodes complete`,
      completed === episodes,
      `${completed}/${episodes} episodes, ${totalSteps} steps, ` +
        `${msPerStep.toFixed(1)} ms/step round trip`,
    );

    // Stepping after a finished episode must earn bad_state.
    try {
      await env.step(0);
      check('step after done rejected', false, 'server accepted the step');
    } catch (e) {
      const ok = e instanceof RemoteError && e.code === 'bad_state';
      check('step after done rejected', ok, (e as Error).message);
    }
  } catch (e) {
    check('protocol exchange', false, (e as Error).message);
  } finally {
    await env.close();
  }

  return { pass: checks.every((c) => c.ok), checks, transcript };
}

export function formatReport(report: ConformanceReport): string {
  const lines = report.checks.map(
    (c) => `${c.ok ? 'PASS' : 'FAIL'}  ${c.name}${c.detail ? `  (${c.detail})` : ''}`,
  );
  lines.push(report.pass ? 'CONFORMANCE: PASS' : 'CONFORMANCE: FAIL');
  if (!report.pass) {
    lines.push('--- transcript ---', ...report.transcript);
  }
  return lines.join('\n');
}
