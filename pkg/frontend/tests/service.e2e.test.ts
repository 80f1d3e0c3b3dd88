// End-to-end tests against a live annotation service. A fresh demo
// dataset is generated into a temp directory so writes never touch a
// shared copy.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import type { AnnotationDoc } from "../src/api.js";
import { AnnotationApi, RevisionConflictError } from "../src/api.js";
import { AnnotationDraft } from "../src/draft.js";
import { buildTimeline } from "../src/timeline.js";

const testDir = dirname(fileURLToPath(import.meta.url));

let datasetDir: string;
let server: ChildProcess | null = null;
let api: AnnotationApi;
let baseUrl: string;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
  });
}

async function waitForServer(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastErr: unknown = null;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(url);
      if (res.ok) return;
      lastErr = new Error(`status ${res.status}`);
    } catch (err) {
      lastErr = err;
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service did not come up at ${url}: ${String(lastErr)}`);
}

beforeAll(async () => {
  datasetDir = mkdtempSync(join(tmpdir(), "gazeaudit-ui-"));
  const demo = spawnSync("gazeaudit", ["demo", "--out", datasetDir], {
    encoding: "utf8",
    timeout: 120000,
  });
  if (demo.status !== 0) {
    throw new Error(`demo generation failed: ${demo.stderr}`);
  }
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    "gazeaudit",
    ["serve", "--manifest", join(datasetDir, "manifest.json"), "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForServer(`${baseUrl}/api/videos`, 45000);
  api = new AnnotationApi(baseUrl);
});

afterAll(() => {
  if (server) server.kill("SIGTERM");
  rmSync(datasetDir, { recursive: true, force: true });
});

describe("labeling round trip (criterion 11)", () => {
  it("saves a labeled 10-frame clip and reads back the committed golden", async () => {
    const meta = await api.videoMeta("v3");
    expect(meta.n_frames).toBe(10);

    const skeleton = await api.getAnnotations("v3");
    expect(skeleton.revision).toBe(0);

    const draft = new AnnotationDraft(skeleton);
    draft.labelLongitudinal(0, 9, "Maintain");
    draft.labelLateral(2, 4, "turn");
    draft.labelLateral(6, 8, "lane_change");
    draft.confirmContext({
      crossing_frame: 5,
      intersection_type: "unsignalized",
      priority: "yield",
      yield_onset_frame: 3,
    });
    const preSave = draft.snapshot();

    const revision = await draft.save(api);
    expect(revision).toBe(1);

    const fetched = await api.getAnnotations("v3");
    const golden = JSON.parse(
      readFileSync(join(testDir, "golden", "v3-annotations.json"), "utf8"),
    ) as AnnotationDoc;
    expect(fetched).toEqual(golden);

    // Reloading must render the identical timeline that was on screen
    // before the save.
    const before = buildTimeline(preSave, null, 0);
    const after = buildTimeline(fetched, null, 0);
    expect(after).toEqual(before);

    console.log("criterion 11 PASS  label, save, reload matches committed golden");
  });
});

describe("stale revision conflict (criterion 12)", () => {
  it("rejects the losing save and preserves its local draft", async () => {
    const base = await api.getAnnotations("v3");
    const a = new AnnotationDraft(base);
    const b = new AnnotationDraft(base);

    // reverse does not coalesce with the turn span from the previous
    // test, so the exact span survives into the saved document.
    a.labelLateral(0, 1, "reverse", "replace");
    const newRev = await a.save(api);
    expect(newRev).toBe(base.revision + 1);

    b.labelLateral(5, 5, "u_turn", "replace");
    const bBefore = b.snapshot();
    let conflict: RevisionConflictError | null = null;
    try {
      await b.save(api);
    } catch (err) {
      if (err instanceof RevisionConflictError) conflict = err;
      else throw err;
    }
    expect(conflict).not.toBeNull();
    expect(conflict!.currentRevision).toBe(newRev);

    // The losing draft is byte-for-byte what it was before the attempt.
    expect(b.snapshot()).toEqual(bBefore);
    expect(b.dirty).toBe(true);
    expect(b.revision).toBe(base.revision);

    // The server kept the winner's document.
    const current = await api.getAnnotations("v3");
    expect(current.revision).toBe(newRev);
    expect(current.lateral).toContainEqual({
      start_frame: 0,
      end_frame: 1,
      category: "reverse",
    });
    expect(current.lateral).not.toContainEqual({
      start_frame: 5,
      end_frame: 5,
      category: "u_turn",
    });

    console.log("criterion 12 PASS  stale save rejected, local draft preserved");
  });
});

describe("service surface used by the UI", () => {
  it("lists videos and serves frame images", async () => {
    const listing = await api.listVideos();
    expect(listing.read_only).toBe(false);
    expect(listing.videos.map((v) => v.id)).toContain("v3");

    const res = await fetch(api.frameUrl("v3", 0));
    expect(res.status).toBe(200);
    const bytes = new Uint8Array(await res.arrayBuffer());
    // PNG magic.
    expect(Array.from(bytes.slice(0, 4))).toEqual([0x89, 0x50, 0x4e, 0x47]);
  });

  it("degrades suggestions gracefully for a video without telemetry", async () => {
    const sug = await api.getSuggestions("v3");
    expect(sug.video_id).toBe("v3");
    expect(sug.longitudinal).toEqual([]);
  });
});
