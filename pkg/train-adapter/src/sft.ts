/**
 * Stage 1: supervised fine-tuning on the emitted transcript targets.
 *
 * The per-step loss is the summed negative log-likelihood over response
 * tokens only (prompt tokens are masked out by construction: they carry no
 * loss and no gradient). Each step's per-token log-probs are logged so the
 * reference CLI can recompute every loss independently.
 */

import { readFileSync } from "node:fs";

import { readSftDataset, type SftRow } from "./data.js";
import { withDefaults, type AdapterConfig } from "./config.js";
import { DEFAULT_MODEL_CONFIG, TinyLm, sumOf } from "./model.js";
import { Adam, DEFAULT_ADAM } from "./optim.js";
import { EOS, encode } from "./tokenizer.js";

export interface SftLogRow {
  stage: "sft";
  step: number;
  id: string;
  lp: number[];
  loss: number;
}

export interface SftResult {
  model: TinyLm;
  losses: SftLogRow[];
}

export function tokenizeExample(row: SftRow, appendEos: boolean): { prompt: number[]; response: number[] } {
  const response = encode(row.target);
  if (appendEos) response.push(EOS);
  return { prompt: encode(row.prompt), response };
}

export function initialModel(cfg: AdapterConfig): TinyLm {
  if (cfg.model === "tiny") {
    return TinyLm.init(DEFAULT_MODEL_CONFIG, cfg.seed);
  }
  return TinyLm.deserialize(readFileSync(cfg.model, "utf-8"));
}

/** Mean per-sequence NLL over the dataset (no parameter updates). */
export function datasetNll(model: TinyLm, rows: SftRow[], appendEos: boolean): number {
  let total = 0;
  for (const row of rows) {
    const { prompt, response } = tokenizeExample(row, appendEos);
    total += -sumOf(model.responseLogprobs(prompt, response));
  }
  return total / rows.length;
}

export function trainSft(partial: Partial<AdapterConfig>): SftResult {
  const cfg = withDefaults(partial);
  const rows = readSftDataset(cfg.sftPath);
  if (rows.length === 0) {
    throw new Error(`${cfg.sftPath}: SFT dataset is empty`);
  }
  const model = initialModel(cfg);
  const adam = new Adam(model, { lr: cfg.sftLr, ...DEFAULT_ADAM });
  const losses: SftLogRow[] = [];

  let step = 0;
  for (let epoch = 0; epoch < cfg.sftEpochs; epoch++) {
    for (const row of rows) {
      const { prompt, response } = tokenizeExample(row, cfg.appendEos);
      const grads = model.zeroGrads();
      // dLoss/dlp_t = -1 for every response token.
      const lp = model.accumulate(prompt, response, -1, grads);
      const loss = -sumOf(lp);
      if (!Number.isFinite(loss)) {
        throw new Error(`non-finite SFT loss at step ${step} (${row.id})`);
      }
      adam.step(model, grads);
      step += 1;
      losses.push({ stage: "sft", step, id: row.id, lp, loss });
    }
  }
  return { model, losses };
}
