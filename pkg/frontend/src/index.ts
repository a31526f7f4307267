/** Node bindings for the evcam pipeline.
 *
 * Thin bridge over the CLI's public surfaces: images go in as PNG bytes,
 * results come back by parsing the EVTF container, output PNGs and the
 * JSON-lines manifest. Results are identical to invoking the CLI by hand
 * with the same inputs and seeds. Inputs are never mutated, and compute
 * happens in a subprocess so the Node event loop stays free.
 */

import { readFileSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import { runCli, withScratchDir } from './cli.js';
import { parseEvtf } from './evtf.js';
import { encodePng, decodePng } from './png.js';
import type {
  ArrayView,
  DatasetJobSpec,
  EventFrameArrays,
  ImageInput,
  ManifestEntry,
  SynthesizeOptions,
} from './types.js';

export { parseEvtf, totalEvents } from './evtf.js';
export { encodePng, decodePng } from './png.js';
export type {
  AlphaSpec,
  ArrayView,
  DatasetJobSpec,
  EventFrameArrays,
  ImageInput,
  ManifestEntry,
  SynthesizeOptions,
} from './types.js';

/** round-half-to-even, matching the quantization used by the PNG writer
 *  on the Python side */
function rint(x: number): number {
  const lo = Math.floor(x);
  const frac = x - lo;
  if (frac > 0.5) return lo + 1;
  if (frac < 0.5) return lo;
  return lo % 2 === 0 ? lo : lo + 1;
}

function quantize(image: ImageInput): Uint8Array {
  const { width, height, channels, data } = image;
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new TypeError(`image dimensions must be positive integers, got ${width}x${height}`);
  }
  if (channels !== 1 && channels !== 3) {
    throw new TypeError(`image must have 1 or 3 channels, got ${channels}`);
  }
  const expected = width * height * channels;
  if (data.length !== expected) {
    throw new TypeError(`image data has ${data.length} samples, expected ${expected}`);
  }
  if (data instanceof Uint8Array) {
    return data;
  }
  if (!(data instanceof Float32Array)) {
    throw new TypeError('image data must be a Float32Array or Uint8Array');
  }
  const pixels = new Uint8Array(expected);
  for (let i = 0; i < expected; i++) {
    const v = data[i];
    if (!(v >= 0 && v <= 1)) {
      throw new RangeError(`float sample ${v} at index ${i} is outside [0, 1]`);
    }
    pixels[i] = rint(v * 255);
  }
  return pixels;
}

function writeInputPng(image: ImageInput, path: string): void {
  const pixels = quantize(image);
  writeFileSync(path, encodePng({
    width: image.width,
    height: image.height,
    channels: image.channels,
    pixels,
  }));
}

/** Synthesize an ON/OFF event frame from one image.
 *
 * Float inputs are quantized to 8 bits exactly as the CLI's PNG writer
 * would, so results are bit-identical to running `evcam events` on the
 * corresponding PNG with the same flags.
 */
export async function synthesizeEvents(
  image: ImageInput,
  options: SynthesizeOptions = {},
): Promise<EventFrameArrays> {
  return withScratchDir(async (dir) => {
    const input = join(dir, 'in.png');
    const output = join(dir, 'out.evtf');
    writeInputPng(image, input);
    const args = ['events', input, output,
      '--threshold', String(options.threshold ?? 0.1),
      '--dt', String(options.dt ?? 1.0),
      '--cap', String(options.cap ?? 1),
      '--flow', options.flowMode ?? 'random',
      '--seed', String(options.seed ?? 0),
      '--emit', 'evtf'];
    if (options.theta !== undefined) args.push('--theta', String(options.theta));
    await runCli(args);
    return parseEvtf(readFileSync(output));
  });
}

/** Apply the exposure transform (HSV value channel scaled by alpha).
 *
 * Returns a [0, 1] Float32Array image, /255-normalized from the CLI's
 * 8-bit output, shaped like the input and reusable as an ImageInput.
 */
export async function applyExposure(
  image: ImageInput,
  alpha: number,
): Promise<ImageInput & ArrayView<Float32Array>> {
  if (!(alpha > 0)) {
    throw new RangeError(`exposure alpha must be > 0, got ${alpha}`);
  }
  return withScratchDir(async (dir) => {
    const input = join(dir, 'in.png');
    const output = join(dir, 'out.png');
    writeInputPng(image, input);
    await runCli(['expose', input, output, '--alpha', String(alpha)]);
    const decoded = decodePng(readFileSync(output));
    const data = new Float32Array(decoded.pixels.length);
    for (let i = 0; i < data.length; i++) {
      data[i] = Math.fround(decoded.pixels[i] / 255);
    }
    return {
      width: decoded.width,
      height: decoded.height,
      channels: decoded.channels,
      shape: [decoded.height, decoded.width, decoded.channels],
      dtype: 'f32',
      data,
    };
  });
}

function alphaToken(alpha: number | [number, number]): string {
  if (typeof alpha === 'number') return String(alpha);
  return `${alpha[0]}:${alpha[1]}`;
}

function parseManifestLine(line: string): ManifestEntry {
  // seeds are u64: lift them out as strings before JSON.parse rounds them
  const patched = line.replace(/"seed":\s*(\d+)/, '"seed": "$1"');
  const entry = JSON.parse(patched);
  entry.seed = BigInt(entry.seed);
  return entry as ManifestEntry;
}

/** Run a dataset job; resolves to the parsed manifest entries.
 *
 * Partial failures (exit code 2) resolve normally with the failed entries
 * marked; fatal and usage errors reject with the CLI's message.
 */
export async function runJob(spec: DatasetJobSpec): Promise<ManifestEntry[]> {
  if (!spec.alphas?.length) {
    throw new TypeError('job needs at least one alpha');
  }
  const args = ['dataset',
    '--input', spec.inputRoot,
    '--output', spec.outputRoot,
    '--layout', spec.layout ?? 'flat',
    '--alphas', spec.alphas.map(alphaToken).join(','),
    '--seed', String(spec.globalSeed ?? 0),
    '--workers', String(spec.workers ?? 1),
    '--threshold', String(spec.threshold ?? 0.1),
    '--dt', String(spec.dt ?? 1.0),
    '--cap', String(spec.cap ?? 1),
    '--flow', spec.flowMode ?? 'random'];
  if (spec.theta !== undefined) args.push('--theta', String(spec.theta));
  if (spec.size !== undefined) {
    args.push('--size', spec.size === null ? 'none' : `${spec.size[0]}x${spec.size[1]}`);
  }
  await runCli(args, [0, 2]);
  const manifest = readFileSync(join(spec.outputRoot, 'manifest.jsonl'), 'utf-8');
  return manifest
    .split('\n')
    .filter((line) => line.trim().length > 0)
    .map(parseManifestLine);
}
