#!/usr/bin/env node
/**
 * Two-stage toy fine-tuning over the pipeline's JSONL exports.
 *
 *   train-adapter train-sft --sft fixtures/sft.jsonl --out-dir out
 *   train-adapter train-dpo --dpo fixtures/dpo.jsonl --init out/sft-checkpoint.json --out-dir out
 *   train-adapter run --sft ... --dpo ... --out-dir out     (both stages)
 *
 * Each command writes its checkpoint plus a losses.jsonl whose rows the
 * reference CLI can recompute: `tirforge loss --in out/losses.jsonl --tol 1e-4`.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { withDefaults, type AdapterConfig } from "./config.js";
import { datasetNll, initialModel, trainSft, type SftLogRow } from "./sft.js";
import { trainDpo, type DpoLogRow } from "./dpo.js";
import { TinyLm } from "./model.js";
import { readSftDataset } from "./data.js";

function writeLosses(path: string, rows: Array<SftLogRow | DpoLogRow>): void {
  writeFileSync(path, rows.map((r) => JSON.stringify(r)).join("\n") + "\n", "utf-8");
}

function parse(argv: string[]) {
  return parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      sft: { type: "string" },
      dpo: { type: "string" },
      init: { type: "string" },
      "out-dir": { type: "string", default: "out" },
      model: { type: "string" },
      beta: { type: "string" },
      "sft-lr": { type: "string" },
      "dpo-lr": { type: "string" },
      "sft-epochs": { type: "string" },
      "dpo-steps": { type: "string" },
      seed: { type: "string" },
    },
  });
}

function configFrom(values: Record<string, string | undefined>): Partial<AdapterConfig> {
  const cfg: Partial<AdapterConfig> = {};
  if (values.sft) cfg.sftPath = values.sft;
  if (values.dpo) cfg.dpoPath = values.dpo;
  if (values.model) cfg.model = values.model;
  if (values.beta) cfg.beta = Number(values.beta);
  if (values["sft-lr"]) cfg.sftLr = Number(values["sft-lr"]);
  if (values["dpo-lr"]) cfg.dpoLr = Number(values["dpo-lr"]);
  if (values["sft-epochs"]) cfg.sftEpochs = Number(values["sft-epochs"]);
  if (values["dpo-steps"]) cfg.dpoSteps = Number(values["dpo-steps"]);
  if (values.seed) cfg.seed = Number(values.seed);
  return cfg;
}

function runSft(partial: Partial<AdapterConfig>, outDir: string) {
  const cfg = withDefaults(partial);
  const rows = readSftDataset(cfg.sftPath);
  const before = datasetNll(initialModel(cfg), rows, cfg.appendEos);
  const { model, losses } = trainSft(cfg);
  const after = datasetNll(model, rows, cfg.appendEos);
  const checkpoint = join(outDir, "sft-checkpoint.json");
  writeFileSync(checkpoint, model.serialize(), "utf-8");
  console.log(
    `sft: ${losses.length} steps, dataset NLL ${before.toFixed(2)} -> ${after.toFixed(2)}, ` +
      `checkpoint ${checkpoint}`,
  );
  return { checkpoint, losses };
}

function runDpo(partial: Partial<AdapterConfig>, initPath: string, outDir: string) {
  const sftModel = TinyLm.deserialize(readFileSync(initPath, "utf-8"));
  const { policy, losses } = trainDpo(partial, sftModel);
  const checkpoint = join(outDir, "dpo-checkpoint.json");
  writeFileSync(checkpoint, policy.serialize(), "utf-8");
  console.log(
    `dpo: ${losses.length} steps, first loss ${losses[0].loss.toFixed(4)}, ` +
      `last margin ${losses[losses.length - 1].margin.toFixed(4)}, checkpoint ${checkpoint}`,
  );
  return { checkpoint, losses };
}

export function main(argv: string[]): number {
  const { values, positionals } = parse(argv);
  const command = positionals[0];
  const outDir = values["out-dir"] as string;
  const cfg = configFrom(values as Record<string, string | undefined>);

  try {
    if (command === "train-sft") {
      mkdirSync(outDir, { recursive: true });
      const { losses } = runSft(cfg, outDir);
      writeLosses(join(outDir, "losses.jsonl"), losses);
      return 0;
    }
    if (command === "train-dpo") {
      if (!values.init) {
        console.error("train-dpo requires --init <sft-checkpoint.json>");
        return 2;
      }
      mkdirSync(outDir, { recursive: true });
      const { losses } = runDpo(cfg, values.init as string, outDir);
      writeLosses(join(outDir, "losses.jsonl"), losses);
      return 0;
    }
    if (command === "run") {
      mkdirSync(outDir, { recursive: true });
      const sft = runSft(cfg, outDir);
      const dpo = runDpo(cfg, sft.checkpoint, outDir);
      writeLosses(join(outDir, "losses.jsonl"), [...sft.losses, ...dpo.losses]);
      return 0;
    }
  } catch (err) {
    console.error(`train-adapter: ${(err as Error).message}`);
    return 1;
  }
  console.error("usage: train-adapter <train-sft|train-dpo|run> [options]");
  return 2;
}

if (process.argv[1] && /cli\.(js|ts)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
