import { readFileSync } from "node:fs";
import { join } from "node:path";
import { DashboardStore } from "../src/store";
import type { SnapshotJson, StreamMessage } from "../src/types";

const FIXTURES = join(__dirname, "fixtures");

export function loadSnapshot(name: string): SnapshotJson {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8"));
}

export function loadMid(): { snapshot: SnapshotJson; transcript_index: number } {
  return JSON.parse(readFileSync(join(FIXTURES, "snapshot_mid.json"), "utf-8"));
}

export function loadTranscript(): StreamMessage[] {
  return readFileSync(join(FIXTURES, "transcript.jsonl"), "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line) as StreamMessage);
}

export function replayedStore(): DashboardStore {
  const store = DashboardStore.fromSnapshot(loadSnapshot("snapshot_start.json"));
  for (const message of loadTranscript()) store.apply(message);
  return store;
}
