/**
 * End-to-end cross-validation: every loss this adapter logs must be
 * reproducible by the pipeline's reference CLI from the logged log-prob
 * records alone (`tirforge loss --tol 1e-4`).
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { main } from "../src/cli.js";

let outDir: string;

function referenceCli(args: string[]) {
  return spawnSync("tirforge", args, { encoding: "utf-8" });
}

beforeAll(() => {
  outDir = mkdtempSync(join(tmpdir(), "ta-run-"));
  const code = main([
    "run",
    "--sft", "fixtures/sft.jsonl",
    "--dpo", "fixtures/dpo.jsonl",
    "--out-dir", outDir,
    "--dpo-steps", "30",
  ]);
  expect(code).toBe(0);
});

describe("losses.jsonl vs the reference CLI", () => {
  it("reference CLI is reachable", () => {
    const probe = referenceCli(["--version"]);
    expect(probe.status).toBe(0);
  });

  it("all logged batch losses match the reference within 1e-4", () => {
    const check = referenceCli(["loss", "--in", join(outDir, "losses.jsonl"), "--tol", "1e-4"]);
    expect(check.stderr).not.toMatch(/differs|exceed/);
    expect(check.status).toBe(0);
    // One recomputed loss per logged row: 40 SFT steps + 30 DPO steps.
    expect(check.stdout.trim().split("\n")).toHaveLength(70);
  });

  it("a tampered loss is caught (negative control)", () => {
    const rows = readFileSync(join(outDir, "losses.jsonl"), "utf-8")
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line));
    rows[rows.length - 1].loss += 0.01;
    const tampered = join(outDir, "tampered.jsonl");
    writeFileSync(tampered, rows.map((r) => JSON.stringify(r)).join("\n") + "\n");
    const check = referenceCli(["loss", "--in", tampered, "--tol", "1e-4"]);
    expect(check.status).toBe(1);
    expect(check.stderr).toMatch(/differs/);
  });

  it("wrote both stage checkpoints", () => {
    const sft = JSON.parse(readFileSync(join(outDir, "sft-checkpoint.json"), "utf-8"));
    const dpo = JSON.parse(readFileSync(join(outDir, "dpo-checkpoint.json"), "utf-8"));
    expect(sft.format).toBe("train-adapter-checkpoint-v1");
    expect(dpo.format).toBe("train-adapter-checkpoint-v1");
  });
});

describe("cli argument handling", () => {
  it("train-dpo without --init is a usage error", () => {
    expect(main(["train-dpo", "--dpo", "fixtures/dpo.jsonl"])).toBe(2);
  });

  it("unknown command is a usage error", () => {
    expect(main(["frobnicate"])).toBe(2);
  });

  it("missing dataset file is a data error", () => {
    expect(main(["train-sft", "--sft", "no-such-file.jsonl", "--out-dir", outDir])).toBe(1);
  });
});
