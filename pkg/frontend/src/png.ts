/** Minimal 8-bit PNG codec (grayscale and truecolor, non-interlaced).
 *
 * Enough to feed images to the CLI and read its outputs back without a
 * native image dependency: the encoder emits unfiltered scanlines, the
 * decoder handles all five standard scanline filters.
 */

import { deflateSync, inflateSync } from 'node:zlib';

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Buffer[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) {
      c = CRC_TABLE[(c ^ part[i]) & 0xff] ^ (c >>> 8);
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const header = Buffer.alloc(4);
  header.writeUInt32BE(data.length, 0);
  const typeBuf = Buffer.from(type, 'latin1');
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(typeBuf, data), 0);
  return Buffer.concat([header, typeBuf, data, crc]);
}

export interface RawImage {
  width: number;
  height: number;
  channels: 1 | 3;
  /** row-major interleaved samples, length = width * height * channels */
  pixels: Uint8Array;
}

export function encodePng(img: RawImage): Buffer {
  const { width, height, channels, pixels } = img;
  if (pixels.length !== width * height * channels) {
    throw new TypeError(
      `pixel buffer has ${pixels.length} samples, expected ${width * height * channels}`,
    );
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = channels === 1 ? 0 : 2; // grayscale / truecolor
  const stride = width * channels;
  const filtered = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    filtered[y * (stride + 1)] = 0; // filter: None
    filtered.set(pixels.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  return Buffer.concat([
    SIGNATURE,
    chunk('IHDR', ihdr),
    chunk('IDAT', deflateSync(filtered)),
    chunk('IEND', Buffer.alloc(0)),
  ]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(blob: Buffer): RawImage {
  if (!blob.subarray(0, 8).equals(SIGNATURE)) {
    throw new TypeError('not a PNG: bad signature');
  }
  let width = 0;
  let height = 0;
  let channels: 1 | 3 = 3;
  const idat: Buffer[] = [];
  let off = 8;
  while (off < blob.length) {
    const length = blob.readUInt32BE(off);
    const type = blob.toString('latin1', off + 4, off + 8);
    const data = blob.subarray(off + 8, off + 8 + length);
    if (type === 'IHDR') {
      width = data.readUInt32BE(0);
      height = data.readUInt32BE(4);
      const bitDepth = data[8];
      const colorType = data[9];
      if (bitDepth !== 8 || (colorType !== 0 && colorType !== 2) || data[12] !== 0) {
        throw new TypeError(
          `unsupported PNG: bit depth ${bitDepth}, color type ${colorType}, interlace ${data[12]}`,
        );
      }
      channels = colorType === 0 ? 1 : 3;
    } else if (type === 'IDAT') {
      idat.push(data);
    } else if (type === 'IEND') {
      break;
    }
    off += 12 + length;
  }
  if (width === 0 || height === 0 || idat.length === 0) {
    throw new TypeError('truncated PNG: missing IHDR or IDAT');
  }
  const raw = inflateSync(Buffer.concat(idat));
  const stride = width * channels;
  const bpp = channels;
  const pixels = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = pixels.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? pixels.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const a = x >= bpp ? out[x - bpp] : 0;
      const b = prev ? prev[x] : 0;
      const c = prev && x >= bpp ? prev[x - bpp] : 0;
      let value: number;
      switch (filter) {
        case 0: value = row[x]; break;
        case 1: value = row[x] + a; break;
        case 2: value = row[x] + b; break;
        case 3: value = row[x] + ((a + b) >> 1); break;
        case 4: value = row[x] + paeth(a, b, c); break;
        default: throw new TypeError(`unsupported PNG filter type ${filter}`);
      }
      out[x] = value & 0xff;
    }
  }
  return { width, height, channels, pixels };
}
