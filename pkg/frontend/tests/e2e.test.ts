// End-to-end: a scripted browser session against the real rating service.
// Spawns `plan rate-serve`, completes three assignments through the DOM, and
// checks the aggregate reflects exactly what was submitted (de-shuffled via
// the shuffle bits the service persisted).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { connect } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RaterApi } from "../src/api.js";
import { RaterApp } from "../src/app.js";

const ASPECT_KEYS = [
  "textual_informativeness",
  "visual_informativeness",
  "temporal_coherence",
  "plan_accuracy",
];

let PORT = 8740 + (process.pid % 200);
let BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let dataDir: string;

function portOpen(port: number): Promise<boolean> {
  return new Promise((resolve) => {
    const socket = connect({ host: "127.0.0.1", port }, () => {
      socket.end();
      resolve(true);
    });
    socket.on("error", () => resolve(false));
  });
}

async function pickFreePort(): Promise<number> {
  // a stale service from an interrupted run may still hold a port; take the
  // first closed one so we always talk to the server we spawned
  for (let candidate = PORT; candidate < PORT + 50; candidate += 1) {
    if (!(await portOpen(candidate))) {
      return candidate;
    }
  }
  throw new Error("no free port found for the rating service");
}

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    if (await portOpen(PORT)) {
      const res = await fetch(`${BASE}/healthz`);
      if (res.ok) return;
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("rating service did not come up");
}

function item(id: string) {
  return {
    id,
    goal_title: `How to finish ${id}`,
    ours: {
      method: "tip_procedure",
      steps: [
        { text: `${id} ours step one`, image_url: "/plans/assets/a.png" },
        { text: `${id} ours step two`, image_url: null },
      ],
    },
    other: {
      method: "baseline_no_bridge",
      steps: [
        { text: `${id} other step one`, image_url: "/plans/assets/b.png" },
        { text: `${id} other step two`, image_url: null },
      ],
    },
  };
}

// per-item, per-aspect choices this session will submit
const CHOICE_PLAN: Record<string, Record<string, string>> = {
  "item-0": Object.fromEntries(ASPECT_KEYS.map((k) => [k, "tie"])),
  "item-1": Object.fromEntries(ASPECT_KEYS.map((k) => [k, "seq1_better"])),
  "item-2": {
    textual_informativeness: "seq1_better",
    visual_informativeness: "seq2_better",
    temporal_coherence: "tie",
    plan_accuracy: "seq2_better",
  },
};

async function waitFor(check: () => boolean, timeoutMs = 10000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("timed out waiting for a UI update");
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}

beforeAll(async () => {
  PORT = await pickFreePort();
  BASE = `http://127.0.0.1:${PORT}`;
  dataDir = mkdtempSync(join(tmpdir(), "rater-e2e-"));
  service = spawn(
    "python3",
    ["-m", "planweave.cli", "rate-serve", "--data-dir", dataDir, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForService();
});

afterAll(() => {
  service?.kill();
});

describe("rater UI end to end", () => {
  it("completes three assignments and the aggregate matches the submissions", async () => {
    const created = await fetch(`${BASE}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        items: [item("item-0"), item("item-1"), item("item-2")],
        raters_per_item: 1,
        shuffle_seed: 1234,
      }),
    });
    expect(created.ok).toBe(true);
    const session = (await created.json()) as { session_id: string; quota: number };
    expect(session.quota).toBe(3);

    const root = document.createElement("main");
    document.body.append(root);
    const app = new RaterApp(new RaterApi(BASE, session.session_id), "rater-e2e", root);
    await app.start();

    for (let round = 0; round < 3; round += 1) {
      // no method labels or shuffle state anywhere in the DOM
      const markup = root.innerHTML.toLowerCase();
      for (const forbidden of ["tip_procedure", "baseline_no_bridge", "shuffle"]) {
        expect(markup).not.toContain(forbidden);
      }

      const title = root.querySelector('[data-testid="goal-title"]')?.textContent ?? "";
      const match = title.match(/item-\d/);
      expect(match).not.toBeNull();
      const itemId = match![0];
      const choices = CHOICE_PLAN[itemId];

      const submit = root.querySelector<HTMLButtonElement>('[data-testid="submit"]');
      expect(submit?.disabled).toBe(true);

      // answer three aspects: still blocked
      for (const key of ASPECT_KEYS.slice(0, 3)) {
        root
          .querySelector<HTMLInputElement>(
            `[data-testid="aspect-${key}"] input[value="${choices[key]}"]`,
          )
          ?.click();
      }
      expect(submit?.disabled).toBe(true);

      const lastKey = ASPECT_KEYS[3];
      root
        .querySelector<HTMLInputElement>(
          `[data-testid="aspect-${lastKey}"] input[value="${choices[lastKey]}"]`,
        )
        ?.click();
      expect(submit?.disabled).toBe(false);

      // submit through the real button and wait for the page to advance
      submit?.click();
      await waitFor(() => {
        const done = root.querySelector('[data-testid="done"]') !== null;
        const heading =
          root.querySelector('[data-testid="goal-title"]')?.textContent ?? "";
        return done || !heading.includes(itemId);
      });
    }

    expect(root.querySelector('[data-testid="done"]')).not.toBeNull();
    expect(app.completed).toBe(3);

    // recover the shuffle bits the service persisted and compute the
    // expected de-shuffled aggregate for exactly the submitted choices
    const log = readFileSync(join(dataDir, "log.jsonl"), "utf-8");
    const sessionEvent = log
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line))
      .find(
        (event) =>
          event.type === "session" && event.session_id === session.session_id,
      );
    expect(sessionEvent).toBeDefined();
    const bits: Record<string, boolean> = {};
    for (const entry of sessionEvent.items) {
      bits[entry.id] = entry.shuffle_bit;
    }

    const expected: Record<string, { win: number; tie: number; lose: number }> = {};
    for (const key of ASPECT_KEYS) {
      expected[key] = { win: 0, tie: 0, lose: 0 };
    }
    for (const [itemId, choices] of Object.entries(CHOICE_PLAN)) {
      const oursIsSeq1 = !bits[itemId];
      for (const key of ASPECT_KEYS) {
        const choice = choices[key];
        if (choice === "tie") {
          expected[key].tie += 1;
        } else if ((choice === "seq1_better") === oursIsSeq1) {
          expected[key].win += 1;
        } else {
          expected[key].lose += 1;
        }
      }
    }

    const aggregate = (await (
      await fetch(`${BASE}/sessions/${session.session_id}/aggregate`)
    ).json()) as {
      total_ratings: number;
      pairs: {
        ours: string;
        baseline: string;
        aspects: Record<string, { win: number; tie: number; lose: number; ratings: number }>;
      }[];
    };
    expect(aggregate.total_ratings).toBe(3);
    expect(aggregate.pairs.length).toBe(1);
    expect(aggregate.pairs[0].ours).toBe("tip_procedure");
    expect(aggregate.pairs[0].baseline).toBe("baseline_no_bridge");
    for (const key of ASPECT_KEYS) {
      const cell = aggregate.pairs[0].aspects[key];
      expect(cell.ratings).toBe(3);
      expect(cell.win).toBeCloseTo((expected[key].win / 3) * 100, 6);
      expect(cell.tie).toBeCloseTo((expected[key].tie / 3) * 100, 6);
      expect(cell.lose).toBeCloseTo((expected[key].lose / 3) * 100, 6);
      expect(cell.win + cell.tie + cell.lose).toBeCloseTo(100, 6);
    }

    // exhausted session shows the completion screen on the next fetch
    const done = await fetch(
      `${BASE}/sessions/${session.session_id}/next?rater=rater-e2e`,
    );
    expect(((await done.json()) as { done: boolean }).done).toBe(true);

    root.remove();
  });
});
