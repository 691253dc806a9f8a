/**
 * Minimal image support: binary PPM (P6) and PGM (P5) decoding, PPM encoding
 * for test corpora, and bilinear resampling. Pixels live in [0, 1] RGB.
 */

export interface Image {
  width: number;
  height: number;
  /** RGB interleaved, length = width * height * 3. */
  data: Float32Array;
}

export class UnreadableImageError extends Error {}

function parseHeader(buf: Buffer): { magic: string; fields: number[]; offset: number } {
  const magic = buf.subarray(0, 2).toString("ascii");
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    if (pos >= buf.length) throw new UnreadableImageError("truncated header");
    const ch = String.fromCharCode(buf[pos]);
    if (ch === "#") {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      pos++;
    } else if (/\s/.test(ch)) {
      pos++;
    } else {
      let start = pos;
      while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
      const value = parseInt(buf.subarray(start, pos).toString("ascii"), 10);
      if (!Number.isFinite(value)) throw new UnreadableImageError("bad header field");
      fields.push(value);
    }
  }
  return { magic, fields, offset: pos + 1 }; // single whitespace after maxval
}

/** Decode binary PPM/PGM; grayscale is replicated into three channels. */
export function decodePnm(buf: Buffer): Image {
  if (buf.length < 2) throw new UnreadableImageError("empty file");
  const { magic, fields, offset } = parseHeader(buf);
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1) throw new UnreadableImageError("bad dimensions");
  if (maxval <= 0 || maxval > 255) {
    throw new UnreadableImageError(`unsupported maxval ${maxval}`);
  }
  const channels = magic === "P6" ? 3 : magic === "P5" ? 1 : 0;
  if (channels === 0) throw new UnreadableImageError(`unsupported magic ${magic}`);
  const need = width * height * channels;
  if (buf.length < offset + need) throw new UnreadableImageError("truncated pixels");
  const data = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    for (let c = 0; c < 3; c++) {
      const src = channels === 3 ? offset + i * 3 + c : offset + i;
      data[i * 3 + c] = buf[src] / maxval;
    }
  }
  return { width, height, data };
}

/** Encode as binary PPM (P6), clamping to [0, 1]. */
export function encodePpm(img: Image): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  const pixels = Buffer.alloc(img.width * img.height * 3);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = Math.round(Math.min(Math.max(img.data[i], 0), 1) * 255);
  }
  return Buffer.concat([header, pixels]);
}

function sampleBilinear(img: Image, x: number, y: number, c: number): number {
  const x0 = Math.max(Math.min(Math.floor(x), img.width - 1), 0);
  const y0 = Math.max(Math.min(Math.floor(y), img.height - 1), 0);
  const x1 = Math.min(x0 + 1, img.width - 1);
  const y1 = Math.min(y0 + 1, img.height - 1);
  const fx = Math.min(Math.max(x - x0, 0), 1);
  const fy = Math.min(Math.max(y - y0, 0), 1);
  const at = (xx: number, yy: number) => img.data[(yy * img.width + xx) * 3 + c];
  const top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
  const bottom = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
  return top * (1 - fy) + bottom * fy;
}

export function resizeBilinear(img: Image, width: number, height: number): Image {
  const data = new Float32Array(width * height * 3);
  const sx = img.width / width;
  const sy = img.height / height;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const srcX = (x + 0.5) * sx - 0.5;
      const srcY = (y + 0.5) * sy - 0.5;
      for (let c = 0; c < 3; c++) {
        data[(y * width + x) * 3 + c] = sampleBilinear(img, srcX, srcY, c);
      }
    }
  }
  return { width, height, data };
}

/** Crop a window (clamped to bounds) and resize it to size x size. */
export function cropResize(img: Image, x0: number, y0: number,
                           w: number, h: number, size: number): Image {
  const cx0 = Math.max(Math.min(Math.round(x0), img.width - 1), 0);
  const cy0 = Math.max(Math.min(Math.round(y0), img.height - 1), 0);
  const cw = Math.max(Math.min(Math.round(w), img.width - cx0), 1);
  const ch = Math.max(Math.min(Math.round(h), img.height - cy0), 1);
  const data = new Float32Array(cw * ch * 3);
  for (let y = 0; y < ch; y++) {
    for (let x = 0; x < cw; x++) {
      for (let c = 0; c < 3; c++) {
        data[(y * cw + x) * 3 + c] =
          img.data[((cy0 + y) * img.width + (cx0 + x)) * 3 + c];
      }
    }
  }
  return resizeBilinear({ width: cw, height: ch, data }, size, size);
}
