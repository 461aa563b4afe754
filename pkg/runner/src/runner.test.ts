/**
 * Process-level tests for the sandbox runner: every case spawns the built
 * dist/runner.js exactly as the orchestrator would (snippet path + timeout
 * seconds as positional arguments) and reads the JSON report from the final
 * stdout line.
 */

import { spawn } from 'child_process';
import { mkdtempSync, rmSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import path from 'path';
import { afterAll, describe, expect, test } from 'vitest';

import type { RunnerReport } from './runner';

const RUNNER = path.resolve(__dirname, '..', 'dist', 'runner.js');

interface Invocation {
  exitCode: number;
  stdout: string;
  stderr: string;
  elapsedMs: number;
}

function invoke(
  args: string[],
  env: NodeJS.ProcessEnv = {}
): Promise<Invocation> {
  return new Promise((resolve, reject) => {
    const started = Date.now();
    const child = spawn(process.execPath, [RUNNER, ...args], {
      stdio: ['ignore', 'pipe', 'pipe'],
      env: { ...process.env, ...env },
    });
    const out: Buffer[] = [];
    const err: Buffer[] = [];
    child.stdout.on('data', (chunk: Buffer) => out.push(chunk));
    child.stderr.on('data', (chunk: Buffer) => err.push(chunk));
    child.on('error', reject);
    child.on('close', (code) => {
      resolve({
        exitCode: code ?? -1,
        stdout: Buffer.concat(out).toString('utf8'),
        stderr: Buffer.concat(err).toString('utf8'),
        elapsedMs: Date.now() - started,
      });
    });
  });
}

const scratch = mkdtempSync(path.join(tmpdir(), 'sandbox-runner-test-'));
afterAll(() => rmSync(scratch, { recursive: true, force: true }));

let snippetCounter = 0;
function writeSnippet(source: string): string {
  const file = path.join(scratch, `snippet-${snippetCounter++}.py`);
  writeFileSync(file, source, 'utf8');
  return file;
}

function reportFrom(invocation: Invocation): RunnerReport {
  const lines = invocation.stdout
    .split('\n')
    .filter((line) => line.length > 0);
  expect(lines.length, 'runner stdout should carry a report line').toBeGreaterThan(0);
  return JSON.parse(lines[lines.length - 1]!) as RunnerReport;
}

async function run(source: string, timeoutS = 10): Promise<{
  report: RunnerReport;
  invocation: Invocation;
}> {
  const invocation = await invoke([writeSnippet(source), String(timeoutS)]);
  return { report: reportFrom(invocation), invocation };
}

describe('report contract', () => {
  test('print(1+1) reports ok with stdout 2', async () => {
    const { report, invocation } = await run('print(1+1)\n');
    expect(invocation.exitCode).toBe(0);
    expect(report.ok).toBe(true);
    expect(report.stdout).toBe('2\n');
    expect(report.stderr).toBe('');
    expect(Number.isInteger(report.duration_ms)).toBe(true);
    expect(report.duration_ms).toBeGreaterThanOrEqual(0);
    expect(report.duration_ms).toBeLessThanOrEqual(invocation.elapsedMs);
  });

  test('uncaught exception reports ok=false with the traceback in stderr', async () => {
    const { report, invocation } = await run('raise RuntimeError("boom")\n');
    expect(invocation.exitCode).toBe(0); // a failing snippet is not a harness fault
    expect(report.ok).toBe(false);
    expect(report.stderr).toContain('Traceback (most recent call last)');
    expect(report.stderr).toContain('RuntimeError: boom');
  });

  test('undefined name reports a NameError naming the identifier', async () => {
    const { report } = await run('print(undefined_identifier)\n');
    expect(report.ok).toBe(false);
    expect(report.stderr).toContain('NameError');
    expect(report.stderr).toContain('undefined_identifier');
  });

  test('report is the final stdout line even for multi-line snippet output', async () => {
    const { report } = await run('for i in range(5):\n    print(i)\n');
    expect(report.ok).toBe(true);
    expect(report.stdout).toBe('0\n1\n2\n3\n4\n');
  });

  test('snippet stdout and stderr stay separated', async () => {
    const { report } = await run(
      'import sys\nprint("to-out")\nprint("to-err", file=sys.stderr)\n'
    );
    expect(report.ok).toBe(true);
    expect(report.stdout).toBe('to-out\n');
    expect(report.stdout).not.toContain('to-err');
    expect(report.stderr).toBe('to-err\n');
    expect(report.stderr).not.toContain('to-out');
  });

  test('non-ascii snippet output survives the report round trip', async () => {
    const { report } = await run('print("héllo \\u4e09")\n');
    expect(report.ok).toBe(true);
    expect(report.stdout).toBe('héllo 三\n');
  });
});

describe('timeout backstop', () => {
  test(
    'an infinite loop under a 5 s timeout is killed within 6 s wall time',
    async () => {
      const { report, invocation } = await run('while True:\n    pass\n', 5);
      expect(invocation.elapsedMs).toBeLessThan(6000);
      expect(invocation.exitCode).toBe(0); // report still emitted
      expect(report.ok).toBe(false);
      expect(report.stderr).toContain('snippet timed out after 5 s');
    },
    10_000
  );
});

describe('fresh namespace', () => {
  test('a name defined in one run is undefined in the next', async () => {
    const first = await run('leaked = 42\nprint(leaked)\n');
    expect(first.report.ok).toBe(true);
    expect(first.report.stdout).toBe('42\n');

    const second = await run('print(leaked)\n');
    expect(second.report.ok).toBe(false);
    expect(second.report.stderr).toContain('NameError');
    expect(second.report.stderr).toContain('leaked');
  });
});

describe('harness faults exit nonzero with no report line', () => {
  test('missing arguments', async () => {
    const invocation = await invoke([]);
    expect(invocation.exitCode).not.toBe(0);
    expect(invocation.stdout).toBe('');
    expect(invocation.stderr).toContain('usage');
  });

  test('unreadable snippet path', async () => {
    const invocation = await invoke([
      path.join(scratch, 'does-not-exist.py'),
      '5',
    ]);
    expect(invocation.exitCode).not.toBe(0);
    expect(invocation.stdout).toBe('');
    expect(invocation.stderr).toContain('cannot read snippet');
  });

  test.each(['0', '-1', 'soon'])('invalid timeout %j', async (timeout) => {
    const invocation = await invoke([writeSnippet('print(1)\n'), timeout]);
    expect(invocation.exitCode).not.toBe(0);
    expect(invocation.stdout).toBe('');
    expect(invocation.stderr).toContain('timeout');
  });

  test('missing interpreter', async () => {
    const invocation = await invoke([writeSnippet('print(1)\n'), '5'], {
      RUNNER_PYTHON: '/nonexistent/python3',
    });
    expect(invocation.exitCode).not.toBe(0);
    expect(invocation.stdout).toBe('');
    expect(invocation.stderr).toContain('runner fault');
  });
});
