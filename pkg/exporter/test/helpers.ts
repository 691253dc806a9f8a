import * as fs from "node:fs";
import * as path from "node:path";

import { encodePpm } from "../src/image.js";
import { Rng } from "../src/rng.js";

/** Deterministic two-class PPM corpus: gradients vs blobs, 5 images each. */
export function makeCorpus(root: string, perClass = 5, side = 64): void {
  const rng = new Rng(1234);
  for (const [classIdx, className] of ["gradients", "blobs"].entries()) {
    const dir = path.join(root, className);
    fs.mkdirSync(dir, { recursive: true });
    for (let i = 0; i < perClass; i++) {
      const data = new Float32Array(side * side * 3);
      for (let y = 0; y < side; y++) {
        for (let x = 0; x < side; x++) {
          const base = (y * side + x) * 3;
          if (classIdx === 0) {
            data[base] = x / side;
            data[base + 1] = y / side;
            data[base + 2] = 0.2 + 0.1 * i;
          } else {
            const cx = side / 2 + 10 * Math.sin(i);
            const cy = side / 2 + 10 * Math.cos(i);
            const r2 = (x - cx) ** 2 + (y - cy) ** 2;
            const glow = Math.exp(-r2 / 200);
            data[base] = 0.1;
            data[base + 1] = 0.3 + 0.6 * glow;
            data[base + 2] = 0.8 * glow;
          }
          for (let c = 0; c < 3; c++) {
            data[base + c] = Math.min(
              Math.max(data[base + c] + 0.05 * (rng.next() - 0.5), 0), 1);
          }
        }
      }
      fs.writeFileSync(path.join(dir, `img_${i}.ppm`),
                       encodePpm({ width: side, height: side, data }));
    }
  }
}
