/**
 * End-to-end parity against the real service and CLI.
 *
 * Spawns `hospuni serve` on the committed fixtures, drives three scripted
 * assessments through the same client and renderers the console uses (a
 * terminal step 1, a terminal step 2, and a full step 3 run), then checks
 * that the committed verdict and trail equal `hospuni assess` on the very
 * dossier the console assembled, and that the what-if panel shows the
 * GET /whatif bytes untouched.
 */

import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtemp, rm, writeFile } from 'node:fs/promises';
import net from 'node:net';
import { tmpdir } from 'node:os';
import path from 'node:path';
import { fileURLToPath } from 'node:url';
import { promisify } from 'node:util';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import type { Assessment, Classification, Dossier, StepOutcome } from '../src/types';
import { renderDecided, renderQueue, renderTrail, renderWhatif, escapeHtml } from '../src/views';

const execFileP = promisify(execFile);
const FIXTURES = fileURLToPath(new URL('./fixtures', import.meta.url));
const WINDOW = '2015:2016';
const POLICY_FLAGS = ['--theta-loc', '0.5', '--theta-auth', '0.5', '--n-min', '2'];

let workDir: string;
let proc: ChildProcess;
let base: string;
let client: ApiClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    server.listen(0, '127.0.0.1', () => {
      const address = server.address();
      if (address === null || typeof address === 'string') {
        reject(new Error('no port assigned'));
        return;
      }
      server.close(() => resolve(address.port));
    });
    server.on('error', reject);
  });
}

async function waitReady(url: string): Promise<void> {
  for (let attempt = 0; attempt < 150; attempt++) {
    try {
      const response = await fetch(`${url}/v1/queue`);
      if (response.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service at ${url} never became ready`);
}

/** The committed dossier, fed to the CLI exactly as the console built it. */
async function cliAssess(dossier: Dossier, name: string): Promise<{ verdict: string; trail: StepOutcome[] }> {
  const file = path.join(workDir, `${name}.json`);
  await writeFile(file, JSON.stringify({ format: 'dossier', version: '1.0', ...dossier }) + '\n');
  const { stdout } = await execFileP('hospuni', [
    'assess',
    '--dossier',
    file,
    ...POLICY_FLAGS,
    '--decided-at',
    '2026-01-01T00:00:00+00:00',
  ]);
  const parsed = JSON.parse(stdout) as Classification;
  return { verdict: parsed.verdict, trail: parsed.trail };
}

function committed(assessment: Assessment): Classification {
  expect(assessment.classification).not.toBeNull();
  return assessment.classification as Classification;
}

async function expectCliParity(assessment: Assessment, name: string): Promise<Classification> {
  const classification = committed(assessment);
  const cli = await cliAssess(classification.dossier, name);
  expect(classification.verdict).toBe(cli.verdict);
  expect(classification.trail).toEqual(cli.trail);
  // the decided screen shows the committed trail verbatim
  const html = renderDecided(classification, new Map());
  for (const outcome of cli.trail) {
    expect(html).toContain(escapeHtml(outcome.rationale));
  }
  return classification;
}

beforeAll(async () => {
  workDir = await mkdtemp(path.join(tmpdir(), 'curator-parity-'));
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    'hospuni',
    [
      'serve',
      '--registry', path.join(FIXTURES, 'registry.jsonl'),
      '--corpus', path.join(FIXTURES, 'pubs.jsonl'),
      '--window', WINDOW,
      '--scheme', 'fractional',
      '--threshold', '1',
      ...POLICY_FLAGS,
      '--log', path.join(workDir, 'assessments.jsonl'),
      '--host', '127.0.0.1',
      '--port', String(port),
    ],
    { stdio: ['ignore', 'ignore', 'pipe'] },
  );
  proc.stderr?.on('data', () => {});
  await waitReady(base);
  client = new ApiClient(base);
  await client.openSession('parity');
}, 60_000);

afterAll(async () => {
  proc?.kill('SIGTERM');
  if (workDir) await rm(workDir, { recursive: true, force: true });
});

describe('console parity with the service and CLI', () => {
  it('serves the queue in order and the console preserves it', async () => {
    const { entries } = await client.queue();
    expect(entries.map((e) => e.hospital)).toEqual(['UHZ', 'HB', 'HC']);
    expect(entries.map((e) => e.standalone_output)).toEqual(['3.00', '1.00', '1.00']);
    expect(entries.every((e) => e.status === 'pending')).toBe(true);
    const html = renderQueue(entries, null);
    const order = [...html.matchAll(/data-hospital="([^"]+)"/g)].map((m) => m[1]);
    expect(order).toEqual(['UHZ', 'HB', 'HC']);
  });

  it('the what-if panel shows the GET /whatif bytes untouched', async () => {
    const { data, raw } = await client.whatif('UZ', 'UHZ');

    // same request, same bytes
    const again = await (await fetch(`${base}/v1/whatif/UZ/UHZ`)).text();
    expect(raw).toBe(again);

    // the figures the panel will show are literal substrings of the wire bytes
    for (const branch of [data.component, data.associate]) {
      for (const [key, value] of Object.entries(branch)) {
        expect(raw).toContain(`"${key}":"${value}"`);
      }
    }

    const html = renderWhatif(data, false);
    const shown = [...html.matchAll(/data-figure="[^"]+">([^<]*)</g)].map((m) => m[1]);
    expect(shown).toEqual([
      data.component.separate,
      data.component.marginal,
      data.component.combined,
      data.component.pct_share,
      data.associate.separate,
      data.associate.marginal,
      data.associate.combined,
      data.associate.pct_share,
    ]);

    // frozen against `hospuni delta` on the same fixtures
    expect(data.component).toEqual({
      separate: '2.00',
      marginal: '2.50',
      combined: '4.50',
      pct_share: '55.56',
    });
    expect(data.associate).toEqual({
      separate: '2.00',
      marginal: '0.00',
      combined: '2.00',
      pct_share: '0.00',
    });
  });

  it('terminal step 1: decisive ownership commits component in one step', async () => {
    let state = await client.assessment('HB', 'UZ');
    expect(state.version).toBe(0);
    state = await client.putEvidence('HB', 'UZ', {
      version: state.version,
      field: 'ownership',
      value: 'university',
      source: { citation: 'cantonal register, entry 114', retrieved_at: '2026-01-05T09:00:00+00:00' },
    });
    state = await client.classify('HB', 'UZ', state.version);

    const classification = await expectCliParity(state, 'terminal-step1');
    expect(classification.verdict).toBe('component');
    expect(classification.trail).toHaveLength(1);
    expect(classification.trail[0]?.step).toBe(1);
  }, 20_000);

  it('terminal step 2: core curriculum commits component at step two', async () => {
    let state = await client.assessment('HC', 'UZ');
    state = await client.putEvidence('HC', 'UZ', {
      version: state.version,
      field: 'ownership',
      value: 'government_health_authority',
      source: { citation: 'health authority charter', retrieved_at: '2026-01-05T09:00:00+00:00' },
    });
    state = await client.putEvidence('HC', 'UZ', {
      version: state.version,
      field: 'mandate',
      value: 'core_curriculum',
      source: { citation: 'medical faculty curriculum handbook', retrieved_at: '2026-01-05T09:00:00+00:00' },
    });
    state = await client.classify('HC', 'UZ', state.version);

    const classification = await expectCliParity(state, 'terminal-step2');
    expect(classification.verdict).toBe('component');
    expect(classification.trail).toHaveLength(2);
    expect(classification.trail.map((o) => o.step)).toEqual([1, 2]);
  }, 20_000);

  it('full step 3: sampled verdicts and co-location commit through the engine', async () => {
    let state = await client.assessment('UHZ', 'UZ');
    state = await client.putEvidence('UHZ', 'UZ', {
      version: state.version,
      field: 'ownership',
      value: 'private',
      source: { citation: 'foundation deed', retrieved_at: '2026-01-05T09:00:00+00:00' },
    });
    state = await client.putEvidence('UHZ', 'UZ', {
      version: state.version,
      field: 'mandate',
      value: 'none_documented',
      source: { citation: 'statutes, no teaching clause', retrieved_at: '2026-01-05T09:00:00+00:00' },
    });

    // the service rejects out-of-range evidence inline (nothing saved)
    const badShare = await client
      .putEvidence('UHZ', 'UZ', {
        version: state.version,
        field: 'colocation_share',
        value: 4.2,
        source: { citation: 'typo', retrieved_at: '2026-01-05T09:00:00+00:00' },
      })
      .catch((e) => e);
    expect(badShare.status).toBe(422);
    expect(badShare.code).toBe('invalid-evidence');

    state = await client.putEvidence('UHZ', 'UZ', {
      version: state.version,
      field: 'colocation_share',
      value: 0.8,
      source: { citation: 'address audit of 2015-2016 output', retrieved_at: '2026-01-05T09:00:00+00:00' },
    });

    // a stale tab loses with a conflict, which the console turns into a reload prompt
    const stale = await client
      .putEvidence('UHZ', 'UZ', {
        version: 0,
        field: 'ownership',
        value: 'private',
        source: { citation: 'foundation deed', retrieved_at: '2026-01-05T09:00:00+00:00' },
      })
      .catch((e) => e);
    expect(stale.status).toBe(409);
    expect(stale.code).toBe('version-conflict');

    const sampled = await client.drawSample('UHZ', 'UZ', { version: state.version, n: 5, seed: 11 });
    expect(sampled.publications.map((p) => p.id)).toEqual(['p3', 'p6']);
    expect(sampled.publications[0]?.addresses).toEqual([
      'University Hospital Zurich, Raemistrasse 100, Zurich',
    ]);
    state = await client.recordVerdicts('UHZ', 'UZ', {
      version: sampled.version,
      verdicts: [
        ['p3', true],
        ['p6', false],
      ],
    });
    expect(state.dossier.author_overlap).toEqual({ fraction: 0.5, sample_size: 2 });

    state = await client.classify('UHZ', 'UZ', state.version);
    const classification = await expectCliParity(state, 'full-step3');
    expect(classification.verdict).toBe('component');
    expect(classification.trail).toHaveLength(3);
    expect(classification.trail.map((o) => o.step)).toEqual([1, 2, 3]);
  }, 20_000);

  it('decided verdicts fold into the what-if baseline, still byte-exact', async () => {
    const { data, raw } = await client.whatif('UZ', 'UHZ');
    const again = await (await fetch(`${base}/v1/whatif/UZ/UHZ`)).text();
    expect(raw).toBe(again);
    for (const branch of [data.component, data.associate]) {
      for (const [key, value] of Object.entries(branch)) {
        expect(raw).toContain(`"${key}":"${value}"`);
      }
    }
    const html = renderWhatif(data, false);
    const shown = [...html.matchAll(/data-figure="[^"]+">([^<]*)</g)].map((m) => m[1]);
    expect(shown).toEqual([
      data.component.separate,
      data.component.marginal,
      data.component.combined,
      data.component.pct_share,
      data.associate.separate,
      data.associate.marginal,
      data.associate.combined,
      data.associate.pct_share,
    ]);

    // HB and HC are components now: one wholly-attributed publication each
    // lands in both baselines, so separate rises 2.00 -> 4.00 while the
    // hospital's own marginal contribution is untouched.
    expect(data.component).toEqual({
      separate: '4.00',
      marginal: '2.50',
      combined: '6.50',
      pct_share: '38.46',
    });
    expect(data.associate).toEqual({
      separate: '4.00',
      marginal: '0.00',
      combined: '4.00',
      pct_share: '0.00',
    });
  });

  it('the queue reflects the decided verdicts afterwards', async () => {
    const { entries } = await client.queue();
    expect(entries.map((e) => [e.hospital, e.status])).toEqual([
      ['UHZ', 'decided'],
      ['HB', 'decided'],
      ['HC', 'decided'],
    ]);
    const html = renderQueue(entries, 'UHZ');
    expect([...html.matchAll(/badge-decided/g)]).toHaveLength(3);
  });
});
