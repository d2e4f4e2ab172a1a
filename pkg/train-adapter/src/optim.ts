/** Adam over the model's flat parameter arrays. */

import type { Grads, TinyLm } from "./model.js";

export interface AdamConfig {
  lr: number;
  beta1: number;
  beta2: number;
  eps: number;
}

export const DEFAULT_ADAM: Omit<AdamConfig, "lr"> = { beta1: 0.9, beta2: 0.999, eps: 1e-8 };

type Slot = keyof Grads;
const SLOTS: Slot[] = ["emb", "w1", "b1", "w2", "b2"];

export class Adam {
  private readonly cfg: AdamConfig;
  private m: Grads;
  private v: Grads;
  private t = 0;

  constructor(model: TinyLm, cfg: AdamConfig) {
    this.cfg = cfg;
    this.m = model.zeroGrads();
    this.v = model.zeroGrads();
  }

  step(model: TinyLm, grads: Grads): void {
    this.t += 1;
    const { lr, beta1, beta2, eps } = this.cfg;
    const bc1 = 1 - Math.pow(beta1, this.t);
    const bc2 = 1 - Math.pow(beta2, this.t);
    for (const slot of SLOTS) {
      const p = model[slot];
      const g = grads[slot];
      const m = this.m[slot];
      const v = this.v[slot];
      for (let i = 0; i < p.length; i++) {
        m[i] = beta1 * m[i] + (1 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
        p[i] -= (lr * (m[i] / bc1)) / (Math.sqrt(v[i] / bc2) + eps);
      }
    }
  }
}
