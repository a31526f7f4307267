import { execFileSync } from 'node:child_process';

/** Small deterministic PRNG so tests are reproducible across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomPixels(rng: () => number, count: number): Uint8Array {
  const out = new Uint8Array(count);
  for (let i = 0; i < count; i++) out[i] = Math.floor(rng() * 256);
  return out;
}

/** Run the real CLI synchronously; throws on unexpected exit codes. */
export function evcam(args: string[], okCodes: number[] = [0]): void {
  const bin = process.env.EVCAM_BIN ?? 'evcam';
  try {
    execFileSync(bin, args, { stdio: ['ignore', 'pipe', 'pipe'] });
  } catch (err: any) {
    if (typeof err.status === 'number' && okCodes.includes(err.status)) return;
    throw new Error(`evcam ${args.join(' ')} failed: ${err.stderr ?? err.message}`);
  }
}
