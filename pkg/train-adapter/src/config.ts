/**
 * Adapter settings. None of the numeric defaults come from any published
 * recipe; they are toy-run choices sized so both stages finish in seconds
 * on a CPU. `model` is "tiny" for the built-in randomly initialized model
 * (the sandbox has no model hub access) or a path to a checkpoint file.
 */

export interface AdapterConfig {
  model: string;
  beta: number;
  sftLr: number;
  dpoLr: number;
  sftEpochs: number;
  dpoSteps: number;
  sftPath: string;
  dpoPath: string;
  seed: number;
  appendEos: boolean;
}

export const DEFAULT_CONFIG: AdapterConfig = {
  model: "tiny",
  beta: 0.1,
  sftLr: 5e-3,
  dpoLr: 1e-3,
  sftEpochs: 1,
  dpoSteps: 30,
  sftPath: "fixtures/sft.jsonl",
  dpoPath: "fixtures/dpo.jsonl",
  seed: 1234,
  appendEos: true,
};

export function withDefaults(partial: Partial<AdapterConfig>): AdapterConfig {
  const cfg = { ...DEFAULT_CONFIG, ...partial };
  if (!(cfg.beta >= 0) || !Number.isFinite(cfg.beta)) {
    throw new Error(`beta must be a non-negative finite number, got ${cfg.beta}`);
  }
  return cfg;
}
