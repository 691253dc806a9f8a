/**
 * Byte-exact writers (and readers, for contract tests) of the pipeline's
 * little-endian dataset formats:
 *
 * features: magic `CIMF` | u32 version=1 | u64 n | u64 d | u32 view count
 * (1 or 2) | per view n*d float32 row-major | n u64 ids.
 * labels: magic `CIML` | u64 n | per item u32 count + count u32 label ids
 * in ascending order.
 */

export interface FeatureFile {
  n: number;
  d: number;
  views: Float32Array[]; // 1 or 2 matrices, row-major
  ids: BigUint64Array;
}

export interface LabelFile {
  labels: number[][]; // ascending label ids per item
}

const FEATURE_MAGIC = "CIMF";
const LABEL_MAGIC = "CIML";
const HEADER_SIZE = 4 + 4 + 8 + 8 + 4;

export function encodeFeatures(views: Float32Array[], n: number, d: number,
                               ids?: BigUint64Array): Buffer {
  if (views.length < 1 || views.length > 2) {
    throw new Error(`need 1 or 2 views, got ${views.length}`);
  }
  for (const view of views) {
    if (view.length !== n * d) {
      throw new Error(`view has ${view.length} floats, expected ${n * d}`);
    }
  }
  const itemIds = ids ?? BigUint64Array.from(
    { length: n }, (_, i) => BigInt(i));
  const buf = Buffer.alloc(HEADER_SIZE + views.length * n * d * 4 + n * 8);
  buf.write(FEATURE_MAGIC, 0, "ascii");
  let pos = 4;
  pos = buf.writeUInt32LE(1, pos);
  pos = buf.writeBigUInt64LE(BigInt(n), pos);
  pos = buf.writeBigUInt64LE(BigInt(d), pos);
  pos = buf.writeUInt32LE(views.length, pos);
  for (const view of views) {
    for (let i = 0; i < view.length; i++) pos = buf.writeFloatLE(view[i], pos);
  }
  for (let i = 0; i < n; i++) pos = buf.writeBigUInt64LE(itemIds[i], pos);
  return buf;
}

export function decodeFeatures(buf: Buffer): FeatureFile {
  if (buf.length < HEADER_SIZE ||
      buf.subarray(0, 4).toString("ascii") !== FEATURE_MAGIC) {
    throw new Error("not a feature file");
  }
  let pos = 4;
  const version = buf.readUInt32LE(pos); pos += 4;
  if (version !== 1) throw new Error(`unsupported version ${version}`);
  const n = Number(buf.readBigUInt64LE(pos)); pos += 8;
  const d = Number(buf.readBigUInt64LE(pos)); pos += 8;
  const viewCount = buf.readUInt32LE(pos); pos += 4;
  if (viewCount !== 1 && viewCount !== 2) {
    throw new Error(`bad view count ${viewCount}`);
  }
  const views: Float32Array[] = [];
  for (let v = 0; v < viewCount; v++) {
    const view = new Float32Array(n * d);
    for (let i = 0; i < view.length; i++) {
      view[i] = buf.readFloatLE(pos);
      pos += 4;
    }
    views.push(view);
  }
  const ids = new BigUint64Array(n);
  for (let i = 0; i < n; i++) {
    ids[i] = buf.readBigUInt64LE(pos);
    pos += 8;
  }
  if (pos !== buf.length) throw new Error("trailing bytes");
  return { n, d, views, ids };
}

export function encodeLabels(labels: number[][]): Buffer {
  let size = 4 + 8;
  for (const set of labels) {
    if (set.length === 0) throw new Error("empty label set");
    size += 4 + set.length * 4;
  }
  const buf = Buffer.alloc(size);
  buf.write(LABEL_MAGIC, 0, "ascii");
  let pos = 4;
  pos = buf.writeBigUInt64LE(BigInt(labels.length), pos);
  for (const set of labels) {
    pos = buf.writeUInt32LE(set.length, pos);
    for (const id of [...set].sort((a, b) => a - b)) {
      pos = buf.writeUInt32LE(id, pos);
    }
  }
  return buf;
}

export function decodeLabels(buf: Buffer): LabelFile {
  if (buf.length < 12 || buf.subarray(0, 4).toString("ascii") !== LABEL_MAGIC) {
    throw new Error("not a label file");
  }
  let pos = 4;
  const n = Number(buf.readBigUInt64LE(pos)); pos += 8;
  const labels: number[][] = [];
  for (let i = 0; i < n; i++) {
    const count = buf.readUInt32LE(pos); pos += 4;
    if (count === 0) throw new Error(`empty label set at item ${i}`);
    const set: number[] = [];
    for (let k = 0; k < count; k++) {
      set.push(buf.readUInt32LE(pos));
      pos += 4;
    }
    labels.push(set);
  }
  if (pos !== buf.length) throw new Error("trailing bytes");
  return { labels };
}
