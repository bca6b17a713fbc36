/**
 * Cross-component contract: files written here must load in the Python
 * pipeline bitwise-equal, and files whose declared dimension disagrees with
 * the loader's expectation must be rejected over there too.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { StubEncoder } from "../src/encoders.js";
import { exportEmbeddings } from "../src/export.js";
import { readScene } from "../src/scene.js";

const TOY_SCENE = join(__dirname, "..", "..", "data", "toy", "scene.json");

const LOAD_AND_DUMP = `
import sys
from scenedesc.io_formats import read_embedding_file
header, vectors = read_embedding_file(sys.argv[1])
print(header.kind.name, header.dim, header.count)
for index in sorted(vectors):
    print(index, vectors[index].tobytes().hex())
`;

const LOAD_WITH_DIM = `
import sys
from scenedesc.errors import FormatError
from scenedesc.io_formats import read_embedding_file
try:
    read_embedding_file(sys.argv[1], expected_dim=int(sys.argv[2]))
except FormatError as exc:
    print("rejected:", exc)
    sys.exit(3)
print("accepted")
`;

function python(script: string, ...args: string[]): { stdout: string; code: number } {
  try {
    const stdout = execFileSync("python3", ["-c", script, ...args], { encoding: "utf-8" });
    return { stdout, code: 0 };
  } catch (error: any) {
    return { stdout: (error.stdout ?? "") + (error.stderr ?? ""), code: error.status ?? 1 };
  }
}

describe("interop with the Python pipeline", () => {
  it("exported files load bitwise-equal through the primary reader", () => {
    const dir = mkdtempSync(join(tmpdir(), "d3de-interop-"));
    const out = join(dir, "point3d.d3de");
    exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "point3d",
      encoder: new StubEncoder(32),
      outPath: out,
    });

    const { stdout, code } = python(LOAD_AND_DUMP, out);
    expect(code).toBe(0);
    const lines = stdout.trim().split("\n");
    expect(lines[0]).toBe("POINT3D 32 8");

    // re-derive the vectors locally and compare every byte
    const encoder = new StubEncoder(32);
    const manifest = JSON.parse(readFileSync(TOY_SCENE, "utf-8"));
    const parsed = readScene(TOY_SCENE);
    expect(manifest.objects.length).toBe(parsed.objects.length);
    for (const [line, object] of lines.slice(1).map((l, i) => [l, parsed.objects[i]] as const)) {
      const [index, hex] = line.split(" ");
      expect(Number(index)).toBe(object.index);
      const local = encoder.encode({ sceneId: parsed.sceneId, modality: "point3d", object });
      expect(Buffer.from(local.buffer).toString("hex")).toBe(hex);
    }
  });

  it("dim-mismatch files are rejected by the primary loader", () => {
    const dir = mkdtempSync(join(tmpdir(), "d3de-interop-"));
    const out = join(dir, "text.d3de");
    exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "text",
      encoder: new StubEncoder(16),
      outPath: out,
    });
    const ok = python(LOAD_WITH_DIM, out, "16");
    expect(ok.code).toBe(0);
    expect(ok.stdout.trim()).toBe("accepted");

    const mismatch = python(LOAD_WITH_DIM, out, "32");
    expect(mismatch.code).toBe(3);
    expect(mismatch.stdout).toMatch(/dimension is 16, expected 32/);
  });

  it("corrupt files are rejected by the primary loader", () => {
    const dir = mkdtempSync(join(tmpdir(), "d3de-interop-"));
    const out = join(dir, "bad.d3de");
    exportEmbeddings({
      scenePath: TOY_SCENE,
      modality: "visual2d",
      encoder: new StubEncoder(8),
      outPath: out,
    });
    const payload = readFileSync(out);
    writeFileSync(out, payload.subarray(0, payload.length - 4));
    const { stdout, code } = python(LOAD_AND_DUMP, out);
    expect(code).not.toBe(0);
    expect(stdout).toMatch(/truncated/);
  });
});
