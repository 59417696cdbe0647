// Full loop against the real ranking service spawned from the Python package.
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RankApi } from "../src/api.js";

// 1x1 gray PNG
const PNG_B64 =
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNsaGj4DwAFhAJ/" +
  "wlseKgAAAABJRU5ErkJggg==";

let proc: ChildProcess;
let base = "";

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "rank-data-"));
  proc = spawn("python3", ["-m", "s3dc.cli", "serve-rank", "--port", "0",
                           "--data", dataDir]);
  base = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("service did not start")), 15000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      const match = /listening on (http:\/\/[\d.]+:\d+)/.exec(chunk.toString());
      if (match) {
        clearTimeout(timer);
        resolve(match[1]!);
      }
    });
    proc.stderr!.on("data", () => {});
    proc.on("exit", (code) => reject(new Error(`service exited early: ${code}`)));
  });
}, 20000);

afterAll(() => {
  proc?.kill();
});

async function createSession(labels: string[]): Promise<string> {
  const resp = await fetch(`${base}/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      object_label: "cube",
      candidates: labels.map((label) => ({ label, image_b64: PNG_B64 })),
    }),
  });
  expect(resp.status).toBe(201);
  return ((await resp.json()) as { session_id: string }).session_id;
}

function meanRanks(labels: string[], rankings: number[][]): Record<string, number> {
  const totals = new Array<number>(labels.length).fill(0);
  for (const ranking of rankings) {
    ranking.forEach((method, position) => {
      totals[method] += position;
    });
  }
  return Object.fromEntries(
    labels.map((label, i) => [label, totals[i]! / rankings.length]),
  );
}

describe("against the live service", () => {
  it("fetches a 7-candidate session with hidden labels", async () => {
    const labels = Array.from({ length: 7 }, (_, i) => `method-${i}`);
    const sid = await createSession(labels);
    const api = new RankApi(base);
    const payload = await api.fetchSession(sid, "p1");
    expect(payload.candidates).toHaveLength(7);
    expect(JSON.stringify(payload)).not.toContain("method-");

    const image = await fetch(api.imageUrl(payload.candidates[0]!));
    expect(image.status).toBe(200);
    expect(image.headers.get("content-type")).toBe("image/png");
  }, 15000);

  it("runs the full ranking loop: submit, conflict, exact mean ranks", async () => {
    const labels = Array.from({ length: 7 }, (_, i) => `method-${i}`);
    const sid = await createSession(labels);
    const api = new RankApi(base);

    // participant 1 submits the shuffled on-screen order via anon ids
    const view = await api.fetchSession(sid, "p1");
    const order = view.candidates.map((c) => c.id);
    const first = await api.submitRanking(sid, "p1", order);
    expect(first.status).toBe("accepted");
    expect(first.submissions).toBe(1);

    // double submission is rejected as a conflict
    const again = await api.submitRanking(sid, "p1", order);
    expect(again.status).toBe("conflict");

    // two more participants submit known canonical permutations
    const submitted: number[][] = [order.map((id) => Number(id.slice(1)))];
    const extra: number[][] = [
      [0, 1, 2, 3, 4, 5, 6],
      [6, 5, 4, 3, 2, 1, 0],
    ];
    for (const [i, ranking] of extra.entries()) {
      const outcome = await api.submitRanking(
        sid, `p${i + 2}`, ranking.map((x) => `c${x}`),
      );
      expect(outcome.status).toBe("accepted");
      submitted.push(ranking);
    }

    // incomplete permutation is rejected outright
    await expect(api.submitRanking(sid, "p9", ["c0", "c1"])).rejects.toThrow("422");

    const results = await api.results(sid);
    expect(results.submissions).toBe(3);
    expect(results.mean_ranks).toEqual(meanRanks(labels, submitted));
  }, 15000);
});
