#!/usr/bin/env node
/**
 * Exporter CLI.
 *
 *   cimon-export make-backbone --out weights.cimb [--seed 0]
 *       [--image-size 224] [--feature-dim 128]
 *   cimon-export export --images DIR --backbone weights.cimb --out DIR
 *       [--seed 0] [--image-size N] [--skip-augmentation NAME]...
 */

import { ALL_AUGMENTATIONS, AugmentationName } from "./augment.js";
import { makeBackbone, saveBackbone } from "./backbone.js";
import { exportFeatures } from "./export.js";

function parseFlags(argv: string[]): Map<string, string[]> {
  const flags = new Map<string, string[]>();
  for (let i = 0; i < argv.length; i++) {
    if (!argv[i].startsWith("--")) throw new Error(`unexpected argument ${argv[i]}`);
    const key = argv[i].slice(2);
    const value = i + 1 < argv.length && !argv[i + 1].startsWith("--")
      ? argv[++i] : "";
    flags.set(key, [...(flags.get(key) ?? []), value]);
  }
  return flags;
}

function single(flags: Map<string, string[]>, key: string,
                fallback?: string): string {
  const values = flags.get(key);
  if (!values) {
    if (fallback !== undefined) return fallback;
    throw new Error(`missing required flag --${key}`);
  }
  return values[values.length - 1];
}

function main(): number {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "make-backbone") {
      const flags = parseFlags(rest);
      const out = single(flags, "out");
      const backbone = makeBackbone(
        parseInt(single(flags, "seed", "0"), 10),
        parseInt(single(flags, "image-size", "224"), 10),
        [8, 16, 32, 64],
        parseInt(single(flags, "feature-dim", "128"), 10),
      );
      saveBackbone(out, backbone);
      console.log(`wrote ${out} (feature dim ${backbone.featureDim})`);
      return 0;
    }
    if (command === "export") {
      const flags = parseFlags(rest);
      const skip = new Set(flags.get("skip-augmentation") ?? []);
      const augmentations = ALL_AUGMENTATIONS.filter(
        (name) => !skip.has(name)) as AugmentationName[];
      const sizeFlag = flags.get("image-size");
      const result = exportFeatures({
        imageDir: single(flags, "images"),
        backbonePath: single(flags, "backbone"),
        outDir: single(flags, "out"),
        seed: parseInt(single(flags, "seed", "0"), 10),
        imageSize: sizeFlag ? parseInt(sizeFlag[0], 10) : undefined,
        augmentations,
      });
      console.log(`exported ${result.count} items at dim ${result.featureDim}`
                  + (result.labelsPath ? " with labels" : "")
                  + (result.skipped.length
                     ? `, skipped ${result.skipped.length}` : ""));
      return 0;
    }
    console.error("usage: cimon-export <make-backbone|export> [flags]");
    return 2;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exit(main());
