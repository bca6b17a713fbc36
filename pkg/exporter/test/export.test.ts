import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { makeEncoder, StubEncoder } from "../src/encoders.js";
import { exportEmbeddings } from "../src/export.js";
import { readScene } from "../src/scene.js";

const TOY_SCENE = join(__dirname, "..", "..", "data", "toy", "scene.json");

describe("scene reading", () => {
  it("loads the bundled toy scene with checksum verification", () => {
    const scene = readScene(TOY_SCENE);
    expect(scene.objects.length).toBe(8);
    expect(scene.objects[0].points.length).toBe(216 * 6);
    expect(scene.objects.map((o) => o.index)).toEqual([0, 1, 2, 3, 4, 5, 6, 7]);
  });
});

describe("stub encoder", () => {
  it("is deterministic and unit-norm", () => {
    const scene = readScene(TOY_SCENE);
    const encoder = new StubEncoder(64);
    const input = { sceneId: scene.sceneId, modality: "point3d" as const, object: scene.objects[0] };
    const a = encoder.encode(input);
    const b = encoder.encode(input);
    expect(Buffer.from(a.buffer)).toEqual(Buffer.from(b.buffer));
    const norm = Math.sqrt(a.reduce((acc, v) => acc + v * v, 0));
    expect(Math.abs(norm - 1)).toBeLessThan(1e-6);
  });

  it("depends on object content and modality", () => {
    const scene = readScene(TOY_SCENE);
    const encoder = new StubEncoder(32);
    const point = encoder.encode({
      sceneId: scene.sceneId,
      modality: "point3d",
      object: scene.objects[0],
    });
    const visual = encoder.encode({
      sceneId: scene.sceneId,
      modality: "visual2d",
      object: scene.objects[0],
    });
    const other = encoder.encode({
      sceneId: scene.sceneId,
      modality: "point3d",
      object: scene.objects[1],
    });
    expect(Buffer.from(point.buffer)).not.toEqual(Buffer.from(visual.buffer));
    expect(Buffer.from(point.buffer)).not.toEqual(Buffer.from(other.buffer));
  });

  it("rejects unknown encoder specs", () => {
    expect(() => makeEncoder("uni3d-local", 16)).toThrow(/unknown encoder/);
  });
});

describe("export runs", () => {
  it("writes identical files on repeated runs and a matching manifest", () => {
    const dir = mkdtempSync(join(tmpdir(), "d3de-"));
    const out1 = join(dir, "run1.d3de");
    const out2 = join(dir, "run2.d3de");
    const manifestPath = join(dir, "export.json");
    const first = exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "point3d",
      encoder: new StubEncoder(48),
      outPath: out1,
      manifestOutPath: manifestPath,
    });
    exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "point3d",
      encoder: new StubEncoder(48),
      outPath: out2,
    });
    expect(readFileSync(out1).equals(readFileSync(out2))).toBe(true);
    expect(first.dim).toBe(48);
    expect(first.count).toBe(8);
    const manifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
    expect(manifest.dim).toBe(48);
    expect(manifest.encoder.name).toBe("stub");
    expect(manifest.scene_id).toBe("toy-room-001");
  });

  it("text modality consumes a descriptions file", () => {
    const dir = mkdtempSync(join(tmpdir(), "d3de-"));
    const descriptions = join(dir, "desc.jsonl");
    writeFileSync(
      descriptions,
      [
        JSON.stringify({ object_index: 0, text: "a table", status: "generated" }),
        JSON.stringify({ object_index: 1, text: "a chair", status: "generated" }),
      ].join("\n") + "\n",
    );
    const out = join(dir, "text.d3de");
    const withText = exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "text",
      encoder: new StubEncoder(16),
      outPath: out,
      descriptionsPath: descriptions,
    });
    expect(withText.count).toBe(8);
    const plain = join(dir, "plain.d3de");
    exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "text",
      encoder: new StubEncoder(16),
      outPath: plain,
    });
    // supplying descriptions changes the hashed content for covered objects
    expect(readFileSync(out).equals(readFileSync(plain))).toBe(false);
  });
});
