/**
 * Stochastic image augmentation producing one transformed view per call.
 * Applied in order: random crop + resize, rotation, cutout, color
 * distortion, Gaussian blur. Each draw comes from the caller's RNG, so a
 * fixed seed reproduces the exact augmentation sequence.
 */

import { Image, cropResize, resizeBilinear } from "./image.js";
import { Rng } from "./rng.js";

export type AugmentationName =
  | "crop_resize"
  | "rotation"
  | "cutout"
  | "color_distortion"
  | "gaussian_blur";

export const ALL_AUGMENTATIONS: AugmentationName[] = [
  "crop_resize",
  "rotation",
  "cutout",
  "color_distortion",
  "gaussian_blur",
];

function randomCropResize(img: Image, size: number, rng: Rng): Image {
  const areaScale = rng.uniform(0.6, 1.0);
  const aspect = rng.uniform(0.75, 4 / 3);
  const area = img.width * img.height * areaScale;
  let w = Math.sqrt(area * aspect);
  let h = Math.sqrt(area / aspect);
  w = Math.min(w, img.width);
  h = Math.min(h, img.height);
  const x0 = rng.uniform(0, img.width - w);
  const y0 = rng.uniform(0, img.height - h);
  return cropResize(img, x0, y0, w, h, size);
}

function rotate(img: Image, degrees: number): Image {
  const rad = (degrees * Math.PI) / 180;
  const cos = Math.cos(rad);
  const sin = Math.sin(rad);
  const cx = (img.width - 1) / 2;
  const cy = (img.height - 1) / 2;
  const data = new Float32Array(img.data.length);
  for (let y = 0; y < img.height; y++) {
    for (let x = 0; x < img.width; x++) {
      // inverse mapping with edge clamping
      const dx = x - cx;
      const dy = y - cy;
      const sx = Math.min(Math.max(cos * dx + sin * dy + cx, 0), img.width - 1);
      const sy = Math.min(Math.max(-sin * dx + cos * dy + cy, 0), img.height - 1);
      const x0 = Math.floor(sx);
      const y0 = Math.floor(sy);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const y1 = Math.min(y0 + 1, img.height - 1);
      const fx = sx - x0;
      const fy = sy - y0;
      for (let c = 0; c < 3; c++) {
        const at = (xx: number, yy: number) => img.data[(yy * img.width + xx) * 3 + c];
        const top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
        const bot = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
        data[(y * img.width + x) * 3 + c] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return { width: img.width, height: img.height, data };
}

function cutout(img: Image, rng: Rng): Image {
  const side = Math.round(rng.uniform(0.1, 0.3) * img.width);
  const x0 = rng.int(Math.max(img.width - side, 1));
  const y0 = rng.int(Math.max(img.height - side, 1));
  const data = img.data.slice();
  for (let y = y0; y < Math.min(y0 + side, img.height); y++) {
    for (let x = x0; x < Math.min(x0 + side, img.width); x++) {
      for (let c = 0; c < 3; c++) data[(y * img.width + x) * 3 + c] = 0;
    }
  }
  return { width: img.width, height: img.height, data };
}

function colorDistort(img: Image, rng: Rng): Image {
  const brightness = rng.uniform(0.7, 1.3);
  const contrast = rng.uniform(0.7, 1.3);
  const saturation = rng.uniform(0.6, 1.4);
  const data = new Float32Array(img.data.length);
  let mean = 0;
  for (let i = 0; i < img.data.length; i++) mean += img.data[i];
  mean /= img.data.length;
  for (let i = 0; i < img.data.length; i += 3) {
    const r = img.data[i];
    const g = img.data[i + 1];
    const b = img.data[i + 2];
    const luma = 0.299 * r + 0.587 * g + 0.114 * b;
    for (let c = 0; c < 3; c++) {
      let v = img.data[i + c];
      v = luma + (v - luma) * saturation;
      v = mean + (v - mean) * contrast;
      v *= brightness;
      data[i + c] = Math.min(Math.max(v, 0), 1);
    }
  }
  return { width: img.width, height: img.height, data };
}

function gaussianBlur(img: Image, sigma: number): Image {
  const radius = Math.max(Math.ceil(2 * sigma), 1);
  const kernel = new Float32Array(2 * radius + 1);
  let total = 0;
  for (let i = -radius; i <= radius; i++) {
    const w = Math.exp(-(i * i) / (2 * sigma * sigma));
    kernel[i + radius] = w;
    total += w;
  }
  for (let i = 0; i < kernel.length; i++) kernel[i] /= total;

  const pass = (src: Float32Array, horizontal: boolean) => {
    const out = new Float32Array(src.length);
    for (let y = 0; y < img.height; y++) {
      for (let x = 0; x < img.width; x++) {
        for (let c = 0; c < 3; c++) {
          let acc = 0;
          for (let k = -radius; k <= radius; k++) {
            const xx = horizontal
              ? Math.min(Math.max(x + k, 0), img.width - 1) : x;
            const yy = horizontal
              ? y : Math.min(Math.max(y + k, 0), img.height - 1);
            acc += kernel[k + radius] * src[(yy * img.width + xx) * 3 + c];
          }
          out[(y * img.width + x) * 3 + c] = acc;
        }
      }
    }
    return out;
  };
  return {
    width: img.width,
    height: img.height,
    data: pass(pass(img.data, true), false),
  };
}

/**
 * One augmented view: every enabled augmentation draws its gate and
 * parameters from the RNG (in a fixed order) so the stream stays aligned.
 */
export function augmentImage(img: Image, size: number,
                             augmentations: AugmentationName[],
                             rng: Rng): Image {
  const enabled = new Set(augmentations);
  let out = enabled.has("crop_resize")
    ? randomCropResize(img, size, rng)
    : resizeBilinear(img, size, size);
  if (enabled.has("rotation") && rng.next() < 0.5) {
    out = rotate(out, rng.uniform(-15, 15));
  }
  if (enabled.has("cutout") && rng.next() < 0.5) {
    out = cutout(out, rng);
  }
  if (enabled.has("color_distortion") && rng.next() < 0.8) {
    out = colorDistort(out, rng);
  }
  if (enabled.has("gaussian_blur") && rng.next() < 0.5) {
    out = gaussianBlur(out, rng.uniform(0.1, 1.5));
  }
  return out;
}
