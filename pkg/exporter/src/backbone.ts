/**
 * A small convolutional backbone standing in for a pretrained feature
 * extractor: stride-2 3x3 conv + ReLU stages, global average pooling, and a
 * final fully-connected layer whose (linear) output is the feature tap.
 *
 * Weights load from a local binary file (little-endian): magic `CIMB` |
 * u32 version=1 | u32 image size | u32 conv stage count | per stage u32
 * in/out channels | u32 feature dim | float32 parameters (per stage conv
 * kernel [out][in][3][3] then bias, then FC weights [in][out] then bias).
 *
 * `makeBackbone` generates a seeded random-weight backbone for environments
 * without downloadable pretrained weights; random convolutional features
 * preserve enough geometry for desk-scale pipelines.
 */

import * as fs from "node:fs";

import { Image } from "./image.js";
import { Rng } from "./rng.js";

export class BackboneUnavailableError extends Error {}

export interface ConvStage {
  inChannels: number;
  outChannels: number;
  /** [out][in][3][3] flattened. */
  weights: Float32Array;
  bias: Float32Array;
}

export interface Backbone {
  imageSize: number;
  stages: ConvStage[];
  featureDim: number;
  /** [lastChannels][featureDim] flattened. */
  fcWeights: Float32Array;
  fcBias: Float32Array;
}

const MAGIC = "CIMB";

export function makeBackbone(seed: number, imageSize = 224,
                             channels: number[] = [8, 16, 32, 64],
                             featureDim = 128): Backbone {
  const rng = new Rng(seed);
  const stages: ConvStage[] = [];
  let inCh = 3;
  for (const outCh of channels) {
    const weights = new Float32Array(outCh * inCh * 9);
    const std = Math.sqrt(2 / (inCh * 9));
    for (let i = 0; i < weights.length; i++) weights[i] = std * rng.normal();
    stages.push({ inChannels: inCh, outChannels: outCh, weights,
                  bias: new Float32Array(outCh) });
    inCh = outCh;
  }
  const fcWeights = new Float32Array(inCh * featureDim);
  const fcStd = Math.sqrt(2 / inCh);
  for (let i = 0; i < fcWeights.length; i++) fcWeights[i] = fcStd * rng.normal();
  return { imageSize, stages, featureDim, fcWeights,
           fcBias: new Float32Array(featureDim) };
}

export function saveBackbone(path: string, backbone: Backbone): void {
  const floats: Float32Array[] = [];
  for (const s of backbone.stages) floats.push(s.weights, s.bias);
  floats.push(backbone.fcWeights, backbone.fcBias);
  const floatCount = floats.reduce((acc, f) => acc + f.length, 0);
  const headerSize = 4 + 4 + 4 + 4 + backbone.stages.length * 8 + 4;
  const buf = Buffer.alloc(headerSize + floatCount * 4);
  buf.write(MAGIC, 0, "ascii");
  let pos = 4;
  pos = buf.writeUInt32LE(1, pos);
  pos = buf.writeUInt32LE(backbone.imageSize, pos);
  pos = buf.writeUInt32LE(backbone.stages.length, pos);
  for (const s of backbone.stages) {
    pos = buf.writeUInt32LE(s.inChannels, pos);
    pos = buf.writeUInt32LE(s.outChannels, pos);
  }
  pos = buf.writeUInt32LE(backbone.featureDim, pos);
  for (const f of floats) {
    for (let i = 0; i < f.length; i++) pos = buf.writeFloatLE(f[i], pos);
  }
  fs.writeFileSync(path, buf);
}

export function loadBackbone(path: string): Backbone {
  if (!fs.existsSync(path)) {
    throw new BackboneUnavailableError(`no backbone weights at ${path}`);
  }
  const buf = fs.readFileSync(path);
  if (buf.length < 16 || buf.subarray(0, 4).toString("ascii") !== MAGIC) {
    throw new BackboneUnavailableError(`${path} is not a backbone weights file`);
  }
  let pos = 4;
  const version = buf.readUInt32LE(pos); pos += 4;
  if (version !== 1) {
    throw new BackboneUnavailableError(`unsupported backbone version ${version}`);
  }
  const imageSize = buf.readUInt32LE(pos); pos += 4;
  const stageCount = buf.readUInt32LE(pos); pos += 4;
  const dims: Array<[number, number]> = [];
  for (let i = 0; i < stageCount; i++) {
    const inCh = buf.readUInt32LE(pos); pos += 4;
    const outCh = buf.readUInt32LE(pos); pos += 4;
    dims.push([inCh, outCh]);
  }
  const featureDim = buf.readUInt32LE(pos); pos += 4;
  const readFloats = (count: number) => {
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) { out[i] = buf.readFloatLE(pos); pos += 4; }
    return out;
  };
  const stages: ConvStage[] = [];
  for (const [inCh, outCh] of dims) {
    stages.push({
      inChannels: inCh,
      outChannels: outCh,
      weights: readFloats(outCh * inCh * 9),
      bias: readFloats(outCh),
    });
  }
  const lastCh = dims.length ? dims[dims.length - 1][1] : 3;
  const fcWeights = readFloats(lastCh * featureDim);
  const fcBias = readFloats(featureDim);
  if (pos !== buf.length) {
    throw new BackboneUnavailableError(`${path} has trailing bytes`);
  }
  return { imageSize, stages, featureDim, fcWeights, fcBias };
}

interface FeatureMap {
  width: number;
  height: number;
  channels: number;
  data: Float32Array; // [y][x][c]
}

function convStride2(map: FeatureMap, stage: ConvStage): FeatureMap {
  const outW = Math.floor((map.width + 1) / 2);
  const outH = Math.floor((map.height + 1) / 2);
  const out = new Float32Array(outW * outH * stage.outChannels);
  const { weights, bias, inChannels, outChannels } = stage;
  for (let oy = 0; oy < outH; oy++) {
    for (let ox = 0; ox < outW; ox++) {
      const cy = oy * 2;
      const cx = ox * 2;
      for (let oc = 0; oc < outChannels; oc++) {
        let acc = bias[oc];
        for (let ky = -1; ky <= 1; ky++) {
          const sy = cy + ky;
          if (sy < 0 || sy >= map.height) continue;
          for (let kx = -1; kx <= 1; kx++) {
            const sx = cx + kx;
            if (sx < 0 || sx >= map.width) continue;
            const src = (sy * map.width + sx) * inChannels;
            const wbase = (oc * inChannels * 9) + (ky + 1) * 3 + (kx + 1);
            for (let ic = 0; ic < inChannels; ic++) {
              acc += weights[wbase + ic * 9] * map.data[src + ic];
            }
          }
        }
        out[(oy * outW + ox) * outChannels + oc] = Math.max(acc, 0); // ReLU
      }
    }
  }
  return { width: outW, height: outH, channels: outChannels, data: out };
}

/** Feature vector for one already-sized image (the penultimate FC output). */
export function extractFeatures(backbone: Backbone, img: Image): Float32Array {
  let map: FeatureMap = {
    width: img.width, height: img.height, channels: 3, data: img.data,
  };
  for (const stage of backbone.stages) {
    map = convStride2(map, stage);
  }
  const pooled = new Float32Array(map.channels);
  const pixels = map.width * map.height;
  for (let i = 0; i < pixels; i++) {
    for (let c = 0; c < map.channels; c++) {
      pooled[c] += map.data[i * map.channels + c];
    }
  }
  for (let c = 0; c < map.channels; c++) pooled[c] /= pixels;
  const features = new Float32Array(backbone.featureDim);
  for (let o = 0; o < backbone.featureDim; o++) {
    let acc = backbone.fcBias[o];
    for (let c = 0; c < map.channels; c++) {
      acc += backbone.fcWeights[c * backbone.featureDim + o] * pooled[c];
    }
    features[o] = acc;
  }
  return features;
}
