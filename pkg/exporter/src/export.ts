/**
 * The export pass: walk an image directory in sorted order, draw two
 * independent augmentations per image, push each through the backbone, and
 * write the two-view feature file (plus a label file when the directory
 * uses one-folder-per-class layout).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ALL_AUGMENTATIONS, AugmentationName, augmentImage } from "./augment.js";
import { Backbone, extractFeatures, loadBackbone } from "./backbone.js";
import { encodeFeatures, encodeLabels } from "./cimf.js";
import { Image, UnreadableImageError, decodePnm } from "./image.js";
import { Rng } from "./rng.js";

export class DegenerateFeatureError extends Error {}

export interface ExportConfig {
  imageDir: string;
  backbonePath: string;
  outDir: string;
  seed: number;
  imageSize?: number; // defaults to the backbone's native size (224)
  augmentations?: AugmentationName[];
}

export interface ExportResult {
  featuresPath: string;
  labelsPath: string | null;
  manifestPath: string;
  count: number;
  featureDim: number;
  skipped: string[];
}

const IMAGE_EXTENSIONS = new Set([".ppm", ".pgm", ".pnm"]);
const MAX_REDRAWS = 16;

interface Item {
  relPath: string;
  absPath: string;
  classDir: string | null;
}

function scanImages(root: string): Item[] {
  const items: Item[] = [];
  const walk = (dir: string, rel: string, classDir: string | null) => {
    for (const entry of fs.readdirSync(dir, { withFileTypes: true }).sort(
      (a, b) => (a.name < b.name ? -1 : a.name > b.name ? 1 : 0))) {
      const abs = path.join(dir, entry.name);
      const relChild = rel ? `${rel}/${entry.name}` : entry.name;
      if (entry.isDirectory()) {
        walk(abs, relChild, classDir ?? relChild);
      } else if (IMAGE_EXTENSIONS.has(path.extname(entry.name).toLowerCase())) {
        items.push({ relPath: relChild, absPath: abs, classDir });
      }
    }
  };
  walk(root, "", null);
  return items;
}

function isAllZero(features: Float32Array): boolean {
  for (const v of features) if (v !== 0) return false;
  return true;
}

function featuresForView(img: Image, backbone: Backbone, size: number,
                         augmentations: AugmentationName[], rng: Rng,
                         label: string): Float32Array {
  for (let attempt = 0; attempt <= MAX_REDRAWS; attempt++) {
    const view = augmentImage(img, size, augmentations, rng);
    const features = extractFeatures(backbone, view);
    if (!isAllZero(features)) return features;
  }
  throw new DegenerateFeatureError(
    `${label}: features stayed all-zero after ${MAX_REDRAWS} augmentation redraws`);
}

export function exportFeatures(cfg: ExportConfig): ExportResult {
  const backbone = loadBackbone(cfg.backbonePath);
  const size = cfg.imageSize ?? backbone.imageSize;
  const augmentations = cfg.augmentations ?? ALL_AUGMENTATIONS;
  const items = scanImages(cfg.imageDir);
  if (items.length === 0) {
    throw new Error(`no readable image files under ${cfg.imageDir}`);
  }
  const rng = new Rng(cfg.seed);

  const rows1: Float32Array[] = [];
  const rows2: Float32Array[] = [];
  const kept: Item[] = [];
  const skipped: string[] = [];
  for (const item of items) {
    let img: Image;
    try {
      img = decodePnm(fs.readFileSync(item.absPath));
    } catch (err) {
      if (err instanceof UnreadableImageError) {
        console.warn(`warning: skipping unreadable image ${item.relPath}: `
                     + err.message);
        skipped.push(item.relPath);
        continue;
      }
      throw err;
    }
    rows1.push(featuresForView(img, backbone, size, augmentations, rng,
                               item.relPath));
    rows2.push(featuresForView(img, backbone, size, augmentations, rng,
                               item.relPath));
    kept.push(item);
  }
  if (kept.length < 2) {
    throw new Error(`need at least 2 readable images, got ${kept.length}`);
  }

  const n = kept.length;
  const d = backbone.featureDim;
  const flat = (rows: Float32Array[]) => {
    const out = new Float32Array(n * d);
    rows.forEach((row, i) => out.set(row, i * d));
    return out;
  };
  fs.mkdirSync(cfg.outDir, { recursive: true });
  const featuresPath = path.join(cfg.outDir, "features.cimf");
  fs.writeFileSync(featuresPath, encodeFeatures([flat(rows1), flat(rows2)], n, d));

  let labelsPath: string | null = null;
  const classDirs = [...new Set(kept.map((it) => it.classDir))];
  if (!classDirs.includes(null)) {
    const classIds = new Map(
      [...classDirs].sort().map((name, idx) => [name, idx]));
    const labels = kept.map((it) => [classIds.get(it.classDir)!]);
    labelsPath = path.join(cfg.outDir, "labels.ciml");
    fs.writeFileSync(labelsPath, encodeLabels(labels));
  }

  const manifestPath = path.join(cfg.outDir, "manifest.json");
  const manifest = {
    command: "export",
    config: {
      imageDir: cfg.imageDir,
      backbonePath: cfg.backbonePath,
      seed: cfg.seed,
      imageSize: size,
      augmentations,
    },
    items: kept.map((it) => it.relPath),
    skipped,
    outputs: ["features.cimf", ...(labelsPath ? ["labels.ciml"] : []),
              "manifest.json"],
  };
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { featuresPath, labelsPath, manifestPath, count: n,
           featureDim: d, skipped };
}
