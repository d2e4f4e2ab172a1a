/**
 * Readers for the pipeline's emitted JSONL rows. Field names are the wire
 * contract; a malformed row aborts with its line number so bad exports
 * surface immediately instead of corrupting a run.
 */

import { readFileSync } from "node:fs";

export interface SftRow {
  id: string;
  prompt: string;
  target: string;
  pattern: string;
}

export interface PairRow {
  id: string;
  prompt: string;
  winner: string;
  loser: string;
  winner_pattern: string;
}

function rows(path: string): Array<{ line: number; value: unknown }> {
  const text = readFileSync(path, "utf-8");
  const out: Array<{ line: number; value: unknown }> = [];
  text.split("\n").forEach((raw, idx) => {
    const line = raw.trim();
    if (!line) return;
    try {
      out.push({ line: idx + 1, value: JSON.parse(line) });
    } catch (err) {
      throw new Error(`${path}:${idx + 1}: invalid JSON (${(err as Error).message})`);
    }
  });
  return out;
}

function requireString(row: Record<string, unknown>, key: string, path: string, line: number): string {
  const value = row[key];
  if (typeof value !== "string" || value.length === 0) {
    throw new Error(`${path}:${line}: missing or empty field "${key}"`);
  }
  return value;
}

export function readSftDataset(path: string): SftRow[] {
  return rows(path).map(({ line, value }) => {
    const row = value as Record<string, unknown>;
    return {
      id: requireString(row, "id", path, line),
      prompt: requireString(row, "prompt", path, line),
      target: requireString(row, "target", path, line),
      pattern: requireString(row, "pattern", path, line),
    };
  });
}

export function readPairDataset(path: string): PairRow[] {
  return rows(path).map(({ line, value }) => {
    const row = value as Record<string, unknown>;
    return {
      id: requireString(row, "id", path, line),
      prompt: requireString(row, "prompt", path, line),
      winner: requireString(row, "winner", path, line),
      loser: requireString(row, "loser", path, line),
      winner_pattern: requireString(row, "winner_pattern", path, line),
    };
  });
}
