/**
 * Stage 2: preference alignment against a frozen reference.
 *
 * Both the trainable policy and the frozen reference start as copies of
 * the stage-1 checkpoint, so the very first batch sits at margin zero and
 * its loss must equal ln 2. Every step logs the four sequence log-prob
 * sums together with the loss, making each logged value independently
 * recomputable by the reference CLI.
 */

import { readPairDataset, type PairRow } from "./data.js";
import { withDefaults, type AdapterConfig } from "./config.js";
import { TinyLm, sumOf } from "./model.js";
import { Adam, DEFAULT_ADAM } from "./optim.js";
import { EOS, encode } from "./tokenizer.js";

export interface DpoLogRow {
  stage: "dpo";
  step: number;
  id: string;
  lp_policy_w: number;
  lp_policy_l: number;
  lp_ref_w: number;
  lp_ref_l: number;
  beta: number;
  margin: number;
  loss: number;
}

export interface DpoResult {
  policy: TinyLm;
  reference: TinyLm;
  losses: DpoLogRow[];
}

function sigmoid(x: number): number {
  return x >= 0 ? 1 / (1 + Math.exp(-x)) : Math.exp(x) / (1 + Math.exp(x));
}

function softplus(x: number): number {
  return Math.max(x, 0) + Math.log1p(Math.exp(-Math.abs(x)));
}

function tokenizePair(row: PairRow, appendEos: boolean) {
  const winner = encode(row.winner);
  const loser = encode(row.loser);
  if (appendEos) {
    winner.push(EOS);
    loser.push(EOS);
  }
  return { prompt: encode(row.prompt), winner, loser };
}

export function trainDpo(partial: Partial<AdapterConfig>, sftModel: TinyLm): DpoResult {
  const cfg = withDefaults(partial);
  const pairs = readPairDataset(cfg.dpoPath);
  if (pairs.length === 0) {
    throw new Error(`${cfg.dpoPath}: preference dataset is empty`);
  }
  const policy = sftModel.clone();
  const reference = sftModel.clone(); // frozen: never touched by the optimizer
  const adam = new Adam(policy, { lr: cfg.dpoLr, ...DEFAULT_ADAM });
  const losses: DpoLogRow[] = [];

  for (let step = 1; step <= cfg.dpoSteps; step++) {
    const row = pairs[(step - 1) % pairs.length];
    const { prompt, winner, loser } = tokenizePair(row, cfg.appendEos);

    const lpRefW = sumOf(reference.responseLogprobs(prompt, winner));
    const lpRefL = sumOf(reference.responseLogprobs(prompt, loser));

    // First pass to get the margin, then gradient pass with the DPO scale:
    // dLoss/dlp_policy_w = -beta * sigmoid(-margin), mirrored for the loser.
    const lpPolicyW = sumOf(policy.responseLogprobs(prompt, winner));
    const lpPolicyL = sumOf(policy.responseLogprobs(prompt, loser));
    const margin = cfg.beta * (lpPolicyW - lpPolicyL - (lpRefW - lpRefL));
    const loss = softplus(-margin);
    if (!Number.isFinite(loss)) {
      throw new Error(`non-finite DPO loss at step ${step} (${row.id})`);
    }

    const s = sigmoid(-margin);
    const grads = policy.zeroGrads();
    policy.accumulate(prompt, winner, -cfg.beta * s, grads);
    policy.accumulate(prompt, loser, cfg.beta * s, grads);
    adam.step(policy, grads);

    losses.push({
      stage: "dpo",
      step,
      id: row.id,
      lp_policy_w: lpPolicyW,
      lp_policy_l: lpPolicyL,
      lp_ref_w: lpRefW,
      lp_ref_l: lpRefL,
      beta: cfg.beta,
      margin,
      loss,
    });
  }
  return { policy, reference, losses };
}
