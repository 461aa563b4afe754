/**
 * Sandbox runner: executes one Python snippet in a child process and reports
 * the outcome as a single JSON line on the final line of stdout.
 *
 * Invocation: node runner.js <snippet-path> <timeout-seconds>
 *
 * The runner exits 0 whenever a report was emitted — even for snippets that
 * crashed — and nonzero only on harness faults (bad arguments, unreadable
 * snippet, missing interpreter), in which case no report line appears at all.
 * Wall-timeout enforcement belongs to the orchestrator, which kills this
 * process tree at the deadline; the timeout argument here only arms a late
 * backstop (deadline + 0.75 s) so a hung interpreter cannot outlive an
 * orchestrator that died before enforcing its own kill.
 *
 * Only Node built-ins are used, keeping the sandbox image minimal.
 */

import { spawn } from 'child_process';
import { accessSync, constants } from 'fs';

/** Extra slack before the backstop kill, so the orchestrator kills first. */
const BACKSTOP_GRACE_S = 0.75;

/** Snippet interpreter; overridable so tests can fake a missing one. */
const INTERPRETER = process.env.RUNNER_PYTHON ?? 'python3';

export interface RunnerReport {
  ok: boolean;
  stdout: string;
  stderr: string;
  duration_ms: number;
}

/**
 * Runs the snippet in a fresh interpreter process, capturing stdout and
 * stderr separately. An uncaught exception leaves the interpreter's traceback
 * in stderr and a nonzero exit status, which maps to ok=false. Rejects only
 * when the interpreter itself could not be spawned (a harness fault).
 */
export function runSnippet(
  snippetPath: string,
  timeoutS: number
): Promise<RunnerReport> {
  return new Promise((resolve, reject) => {
    const started = Date.now();
    const child = spawn(INTERPRETER, [snippetPath], {
      stdio: ['ignore', 'pipe', 'pipe'],
    });

    const stdoutChunks: Buffer[] = [];
    const stderrChunks: Buffer[] = [];
    let timedOut = false;

    const backstop = setTimeout(() => {
      timedOut = true;
      child.kill('SIGKILL');
    }, (timeoutS + BACKSTOP_GRACE_S) * 1000);

    child.stdout.on('data', (chunk: Buffer) => stdoutChunks.push(chunk));
    child.stderr.on('data', (chunk: Buffer) => stderrChunks.push(chunk));

    child.on('error', (err) => {
      clearTimeout(backstop);
      reject(err);
    });

    child.on('close', (code) => {
      clearTimeout(backstop);
      let stderrText = Buffer.concat(stderrChunks).toString('utf8');
      if (timedOut) {
        if (stderrText.length > 0 && !stderrText.endsWith('\n')) {
          stderrText += '\n';
        }
        stderrText += `snippet timed out after ${timeoutS} s\n`;
      }
      resolve({
        ok: code === 0 && !timedOut,
        stdout: Buffer.concat(stdoutChunks).toString('utf8'),
        stderr: stderrText,
        duration_ms: Math.max(0, Math.round(Date.now() - started)),
      });
    });
  });
}

function usageFault(message: string): never {
  process.stderr.write(`${message}\n`);
  process.exit(2);
}

async function main(): Promise<void> {
  const snippetPath = process.argv[2];
  const timeoutArg = process.argv[3];
  if (!snippetPath || !timeoutArg) {
    usageFault('usage: runner <snippet-path> <timeout-seconds>');
  }
  const timeoutS = Number(timeoutArg);
  if (!Number.isFinite(timeoutS) || timeoutS <= 0) {
    usageFault(`timeout must be a positive number of seconds, got: ${timeoutArg}`);
  }
  try {
    accessSync(snippetPath, constants.R_OK);
  } catch {
    usageFault(`cannot read snippet: ${snippetPath}`);
  }

  const report = await runSnippet(snippetPath, timeoutS);
  process.stdout.write(`${JSON.stringify(report)}\n`);
}

if (require.main === module) {
  main().catch((err) => {
    const message = err instanceof Error ? err.message : String(err);
    process.stderr.write(`runner fault: ${message}\n`);
    process.exitCode = 1;
  });
}
