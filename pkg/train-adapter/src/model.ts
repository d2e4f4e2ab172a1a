/**
 * A tiny windowed neural language model with hand-written backprop.
 *
 * Each position embeds the previous `contextSize` tokens, concatenates the
 * embeddings, applies one tanh layer, and projects to byte-vocabulary
 * logits. Small enough (~30k parameters) that the two-stage toy run
 * finishes in seconds on a laptop CPU, yet a genuine causal LM: response
 * token log-probabilities condition on the prompt through the window.
 */

import { BOS, VOCAB_SIZE } from "./tokenizer.js";
import { mulberry32, uniform } from "./rng.js";

export interface ModelConfig {
  contextSize: number;
  embedDim: number;
  hiddenDim: number;
  vocabSize: number;
}

export const DEFAULT_MODEL_CONFIG: ModelConfig = {
  contextSize: 6,
  embedDim: 12,
  hiddenDim: 32,
  vocabSize: VOCAB_SIZE,
};

export interface Grads {
  emb: Float64Array;
  w1: Float64Array;
  b1: Float64Array;
  w2: Float64Array;
  b2: Float64Array;
}

export class TinyLm {
  readonly cfg: ModelConfig;
  emb: Float64Array; // vocab x embed
  w1: Float64Array; // (context*embed) x hidden
  b1: Float64Array; // hidden
  w2: Float64Array; // hidden x vocab
  b2: Float64Array; // vocab

  constructor(cfg: ModelConfig, params?: Partial<Grads>) {
    this.cfg = cfg;
    const { contextSize: k, embedDim: d, hiddenDim: h, vocabSize: v } = cfg;
    this.emb = params?.emb ?? new Float64Array(v * d);
    this.w1 = params?.w1 ?? new Float64Array(k * d * h);
    this.b1 = params?.b1 ?? new Float64Array(h);
    this.w2 = params?.w2 ?? new Float64Array(h * v);
    this.b2 = params?.b2 ?? new Float64Array(v);
  }

  static init(cfg: ModelConfig = DEFAULT_MODEL_CONFIG, seed = 1234): TinyLm {
    const model = new TinyLm(cfg);
    const rng = mulberry32(seed);
    const embScale = 0.1;
    const w1Scale = 1.0 / Math.sqrt(cfg.contextSize * cfg.embedDim);
    const w2Scale = 1.0 / Math.sqrt(cfg.hiddenDim);
    for (let i = 0; i < model.emb.length; i++) model.emb[i] = uniform(rng, embScale);
    for (let i = 0; i < model.w1.length; i++) model.w1[i] = uniform(rng, w1Scale);
    for (let i = 0; i < model.w2.length; i++) model.w2[i] = uniform(rng, w2Scale);
    return model;
  }

  parameterCount(): number {
    return this.emb.length + this.w1.length + this.b1.length + this.w2.length + this.b2.length;
  }

  clone(): TinyLm {
    return new TinyLm(this.cfg, {
      emb: this.emb.slice(),
      w1: this.w1.slice(),
      b1: this.b1.slice(),
      w2: this.w2.slice(),
      b2: this.b2.slice(),
    });
  }

  zeroGrads(): Grads {
    return {
      emb: new Float64Array(this.emb.length),
      w1: new Float64Array(this.w1.length),
      b1: new Float64Array(this.b1.length),
      w2: new Float64Array(this.w2.length),
      b2: new Float64Array(this.b2.length),
    };
  }

  serialize(): string {
    return JSON.stringify({
      format: "train-adapter-checkpoint-v1",
      config: this.cfg,
      emb: Array.from(this.emb),
      w1: Array.from(this.w1),
      b1: Array.from(this.b1),
      w2: Array.from(this.w2),
      b2: Array.from(this.b2),
    });
  }

  static deserialize(text: string): TinyLm {
    const data = JSON.parse(text);
    if (data.format !== "train-adapter-checkpoint-v1") {
      throw new Error(`unknown checkpoint format: ${data.format}`);
    }
    return new TinyLm(data.config as ModelConfig, {
      emb: Float64Array.from(data.emb),
      w1: Float64Array.from(data.w1),
      b1: Float64Array.from(data.b1),
      w2: Float64Array.from(data.w2),
      b2: Float64Array.from(data.b2),
    });
  }

  /** Context window (token ids) ending just before position i of `full`. */
  private window(full: number[], i: number): number[] {
    const k = this.cfg.contextSize;
    const ctx: number[] = new Array(k);
    for (let j = 0; j < k; j++) {
      const idx = i - k + j;
      ctx[j] = idx >= 0 ? full[idx] : BOS;
    }
    return ctx;
  }

  private logitsFor(ctx: number[], hOut: Float64Array): Float64Array {
    const { contextSize: k, embedDim: d, hiddenDim: h, vocabSize: v } = this.cfg;
    const x = new Float64Array(k * d);
    for (let j = 0; j < k; j++) {
      const base = ctx[j] * d;
      for (let e = 0; e < d; e++) x[j * d + e] = this.emb[base + e];
    }
    for (let hh = 0; hh < h; hh++) {
      let acc = this.b1[hh];
      const row = hh; // w1 is laid out [input][hidden]
      for (let xi = 0; xi < x.length; xi++) acc += this.w1[xi * h + row] * x[xi];
      hOut[hh] = Math.tanh(acc);
    }
    const logits = new Float64Array(v);
    logits.set(this.b2);
    for (let hh = 0; hh < h; hh++) {
      const a = hOut[hh];
      if (a === 0) continue;
      const base = hh * v;
      for (let vv = 0; vv < v; vv++) logits[vv] += this.w2[base + vv] * a;
    }
    return logits;
  }

  /**
   * Log-probabilities of each response token given prompt + earlier
   * response tokens. Prompt positions carry no loss (response-only).
   */
  responseLogprobs(prompt: number[], response: number[]): number[] {
    const full = prompt.concat(response);
    const h = new Float64Array(this.cfg.hiddenDim);
    const out: number[] = new Array(response.length);
    for (let r = 0; r < response.length; r++) {
      const i = prompt.length + r;
      const logits = this.logitsFor(this.window(full, i), h);
      out[r] = logProb(logits, full[i]);
    }
    return out;
  }

  /**
   * Forward + backward over the response region. `scale[r]` is dLoss/dlp
   * for response token r (a bare number broadcasts); gradients accumulate
   * into `grads`. Returns the per-token log-probs from the same pass.
   */
  accumulate(
    prompt: number[],
    response: number[],
    scale: number | number[],
    grads: Grads,
  ): number[] {
    const { contextSize: k, embedDim: d, hiddenDim: h, vocabSize: v } = this.cfg;
    const full = prompt.concat(response);
    const lps: number[] = new Array(response.length);
    const x = new Float64Array(k * d);
    const hAct = new Float64Array(h);

    for (let r = 0; r < response.length; r++) {
      const i = prompt.length + r;
      const ctx = this.window(full, i);
      const target = full[i];
      const g = typeof scale === "number" ? scale : scale[r];

      // Forward.
      for (let j = 0; j < k; j++) {
        const base = ctx[j] * d;
        for (let e = 0; e < d; e++) x[j * d + e] = this.emb[base + e];
      }
      for (let hh = 0; hh < h; hh++) {
        let acc = this.b1[hh];
        for (let xi = 0; xi < k * d; xi++) acc += this.w1[xi * h + hh] * x[xi];
        hAct[hh] = Math.tanh(acc);
      }
      const logits = new Float64Array(v);
      logits.set(this.b2);
      for (let hh = 0; hh < h; hh++) {
        const a = hAct[hh];
        const base = hh * v;
        for (let j = 0; j < v; j++) logits[j] += this.w2[base + j] * a;
      }

      // Stable log-softmax; with g = dLoss/dlp and dlp/dlogit_j being
      // (1[j == target] - p_j), the logit gradient is g * (1[j==y] - p_j).
      let max = -Infinity;
      for (let j = 0; j < v; j++) if (logits[j] > max) max = logits[j];
      let sum = 0;
      for (let j = 0; j < v; j++) sum += Math.exp(logits[j] - max);
      const logZ = max + Math.log(sum);
      lps[r] = logits[target] - logZ;
      if (g === 0) continue;

      const dLogits = new Float64Array(v);
      for (let j = 0; j < v; j++) dLogits[j] = -g * Math.exp(logits[j] - logZ);
      dLogits[target] += g;

      // Output layer, then through tanh.
      const dH = new Float64Array(h);
      for (let hh = 0; hh < h; hh++) {
        const a = hAct[hh];
        const base = hh * v;
        let acc = 0;
        for (let j = 0; j < v; j++) {
          const dj = dLogits[j];
          grads.w2[base + j] += dj * a;
          acc += this.w2[base + j] * dj;
        }
        dH[hh] = acc * (1 - a * a);
        grads.b1[hh] += dH[hh];
      }
      for (let j = 0; j < v; j++) grads.b2[j] += dLogits[j];

      // Hidden layer back to the concatenated embeddings.
      const dX = new Float64Array(k * d);
      for (let xi = 0; xi < k * d; xi++) {
        const rowBase = xi * h;
        const xv = x[xi];
        let acc = 0;
        for (let hh = 0; hh < h; hh++) {
          const dh = dH[hh];
          grads.w1[rowBase + hh] += dh * xv;
          acc += this.w1[rowBase + hh] * dh;
        }
        dX[xi] = acc;
      }
      for (let j = 0; j < k; j++) {
        const base = ctx[j] * d;
        for (let e = 0; e < d; e++) grads.emb[base + e] += dX[j * d + e];
      }
    }
    return lps;
  }
}

function logProb(logits: Float64Array, target: number): number {
  let max = -Infinity;
  for (let j = 0; j < logits.length; j++) if (logits[j] > max) max = logits[j];
  let sum = 0;
  for (let j = 0; j < logits.length; j++) sum += Math.exp(logits[j] - max);
  return logits[target] - (max + Math.log(sum));
}

export function sumOf(values: number[]): number {
  let total = 0;
  for (const v of values) total += v;
  return total;
}
