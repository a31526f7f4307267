/** Spawning and scratch-directory plumbing around the evcam CLI. */

import { spawn } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

/** Binary to invoke; override with EVCAM_BIN when it is not on PATH. */
export function evcamBinary(): string {
  return process.env.EVCAM_BIN ?? 'evcam';
}

export interface CliResult {
  code: number;
  stdout: string;
  stderr: string;
}

export function runCli(args: string[], okCodes: number[] = [0]): Promise<CliResult> {
  return new Promise((resolve, reject) => {
    const child = spawn(evcamBinary(), args, { stdio: ['ignore', 'pipe', 'pipe'] });
    let stdout = '';
    let stderr = '';
    child.stdout.on('data', (d) => (stdout += d));
    child.stderr.on('data', (d) => (stderr += d));
    child.on('error', (err) =>
      reject(new Error(`failed to launch ${evcamBinary()}: ${err.message}`)),
    );
    child.on('close', (code) => {
      if (code === null || !okCodes.includes(code)) {
        reject(
          new Error(
            `evcam ${args.join(' ')} exited with code ${code}: ${stderr.trim()}`,
          ),
        );
      } else {
        resolve({ code: code, stdout, stderr });
      }
    });
  });
}

export async function withScratchDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = mkdtempSync(join(tmpdir(), 'evcam-'));
  try {
    return await fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
