/** Typed view over a dense array: shape, element kind and the buffer. */
export interface ArrayView<T extends Float32Array | Uint8Array | Uint16Array> {
  shape: number[];
  dtype: 'f32' | 'u8' | 'u16';
  data: T;
}

/** Dense raster handed across the boundary: row-major, interleaved channels.
 *  Float32 samples must lie in [0, 1]; Uint8 samples are /255-normalized. */
export interface ImageInput {
  width: number;
  height: number;
  channels: 1 | 3;
  data: Float32Array | Uint8Array;
}

export interface SynthesizeOptions {
  threshold?: number;
  dt?: number;
  cap?: number;
  flowMode?: 'random' | 'fixed';
  theta?: number;
  seed?: number;
}

export interface EventFrameArrays {
  width: number;
  height: number;
  on: ArrayView<Uint8Array | Uint16Array>;
  off: ArrayView<Uint8Array | Uint16Array>;
}

export type AlphaSpec = number | [number, number];

/** Mirrors the CLI dataset job flags. */
export interface DatasetJobSpec {
  inputRoot: string;
  outputRoot: string;
  alphas: AlphaSpec[];
  layout?: 'voc' | 'coco' | 'flat';
  globalSeed?: number;
  workers?: number;
  /** [width, height], or null to keep original sizes */
  size?: [number, number] | null;
  threshold?: number;
  dt?: number;
  cap?: number;
  flowMode?: 'random' | 'fixed';
  theta?: number;
}

export interface ManifestEntry {
  src: string;
  alpha: number;
  /** 64-bit task seed; bigint because it overflows the double mantissa */
  seed: bigint;
  threshold_c: number;
  flow_mode: string;
  out_exposed: string | null;
  out_event: string | null;
  checksum: string | null;
  status: 'ok' | 'failed';
  error?: string;
}
