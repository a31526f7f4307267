/** Parser for the EVTF event-frame container.
 *
 * Layout (little-endian): magic "EVTF", version u8, dtype u8 (0 = u8,
 * 1 = u16), channels u16 = 2, height u32, width u32, then channel-major
 * row-major count planes, ON first.
 */

import { endianness } from 'node:os';

import type { ArrayView, EventFrameArrays } from './types.js';

const MAGIC = 'EVTF';
const HEADER_BYTES = 16;

function planeView(
  blob: Buffer,
  byteOffset: number,
  elements: number,
  wide: boolean,
): ArrayView<Uint8Array | Uint16Array> {
  if (!wide) {
    // u8 planes can always alias the file buffer
    return {
      shape: [],
      dtype: 'u8',
      data: new Uint8Array(blob.buffer, blob.byteOffset + byteOffset, elements),
    };
  }
  const absolute = blob.byteOffset + byteOffset;
  if (endianness() === 'LE' && absolute % 2 === 0) {
    // zero-copy view; file data is little-endian like the platform
    return {
      shape: [],
      dtype: 'u16',
      data: new Uint16Array(blob.buffer, absolute, elements),
    };
  }
  // misaligned or big-endian host: one explicit copy
  const copy = new Uint16Array(elements);
  for (let i = 0; i < elements; i++) {
    copy[i] = blob.readUInt16LE(byteOffset + 2 * i);
  }
  return { shape: [], dtype: 'u16', data: copy };
}

export function parseEvtf(blob: Buffer): EventFrameArrays {
  if (blob.length < HEADER_BYTES || blob.toString('latin1', 0, 4) !== MAGIC) {
    throw new TypeError(`not an EVTF container: bad magic`);
  }
  const version = blob[4];
  const dtypeCode = blob[5];
  const channels = blob.readUInt16LE(6);
  const height = blob.readUInt32LE(8);
  const width = blob.readUInt32LE(12);
  if (version !== 1) throw new TypeError(`unsupported EVTF version ${version}`);
  if (channels !== 2) throw new TypeError(`expected 2 channels, got ${channels}`);
  if (dtypeCode !== 0 && dtypeCode !== 1) {
    throw new TypeError(`unknown EVTF dtype code ${dtypeCode}`);
  }
  const wide = dtypeCode === 1;
  const itemSize = wide ? 2 : 1;
  const plane = width * height;
  const expected = HEADER_BYTES + 2 * plane * itemSize;
  if (blob.length !== expected) {
    throw new TypeError(`EVTF payload is ${blob.length} bytes, expected ${expected}`);
  }
  const on = planeView(blob, HEADER_BYTES, plane, wide);
  const off = planeView(blob, HEADER_BYTES + plane * itemSize, plane, wide);
  on.shape = [height, width];
  off.shape = [height, width];
  return { width, height, on, off };
}

export function totalEvents(frame: EventFrameArrays): number {
  let total = 0;
  for (const plane of [frame.on.data, frame.off.data]) {
    for (let i = 0; i < plane.length; i++) total += plane[i];
  }
  return total;
}
