import { createHash } from "crypto";
import { mkdtemp, readFile, writeFile } from "fs/promises";
import { tmpdir } from "os";
import path from "path";

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { SchemaError, parseCsv, requireColumns } from "../src/csv.js";
import {
  DENSITY_COLUMNS,
  DP_COLUMNS,
  KINDS,
  PROFILE_COLUMNS,
  SNAPSHOT_COLUMNS,
  TRACE_COLUMNS,
  render,
} from "../src/figures.js";
import { main, parseArgs } from "../src/main.js";

const REF = new URL("../reference/", import.meta.url).pathname;

/** kind -> reference input files, mirroring the documented CLI usage. */
const REFERENCE_INPUTS: Record<(typeof KINDS)[number], string[]> = {
  "policy-overlay": [
    path.join(REF, "dp", "dp_policy.csv"),
    path.join(REF, "profile", "smoothing-profile_1.csv"),
  ],
  density: [path.join(REF, "density", "gradient-density_1.csv")],
  "learning-curves": [path.join(REF, "hom", "learn-homotopy_3.csv")],
  comparison: [
    path.join(REF, "hom", "learn-homotopy_3.csv"),
    path.join(REF, "fix", "learn-fixed-tau_3.csv"),
  ],
  improvement: [path.join(REF, "hom", "policy_snapshots_3.csv")],
};

const HEADERS: Record<(typeof KINDS)[number], string[][]> = {
  "policy-overlay": [[...DP_COLUMNS], [...PROFILE_COLUMNS]],
  density: [[...DENSITY_COLUMNS]],
  "learning-curves": [[...TRACE_COLUMNS]],
  comparison: [[...TRACE_COLUMNS], [...TRACE_COLUMNS]],
  improvement: [[...SNAPSHOT_COLUMNS]],
};

async function sha256(file: string): Promise<string> {
  return createHash("sha256").update(await readFile(file)).digest("hex");
}

function expectSvg(text: string): void {
  expect(text.startsWith("<svg ")).toBe(true);
  expect(text.trimEnd().endsWith("</svg>")).toBe(true);
  // Paired frame: every opened group is closed.
  expect(text.split("<g>").length).toBe(text.split("</g>").length);
}

let tmp: string;
beforeEach(async () => {
  tmp = await mkdtemp(path.join(tmpdir(), "figs-"));
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation(() => {});
});
afterEach(() => {
  vi.restoreAllMocks();
});

describe("rendering the reference artifacts", () => {
  for (const kind of KINDS) {
    it(`renders ${kind} without error and leaves inputs byte-identical`, async () => {
      const inputs = REFERENCE_INPUTS[kind];
      const before = await Promise.all(inputs.map(sha256));
      const out = path.join(tmp, `${kind}.svg`);
      const code = await main(["--in", ...inputs, "--kind", kind, "--out", out]);
      expect(code).toBe(0);
      expectSvg(await readFile(out, "utf-8"));
      expect(await Promise.all(inputs.map(sha256))).toEqual(before);
    });
  }

  it("renders identical bytes on identical inputs", async () => {
    const inputs = REFERENCE_INPUTS["learning-curves"];
    const outs = [path.join(tmp, "a.svg"), path.join(tmp, "b.svg")];
    for (const out of outs) {
      expect(await main(["--in", ...inputs, "--kind", "learning-curves", "--out", out])).toBe(0);
    }
    expect(await readFile(outs[0]!, "utf-8")).toBe(await readFile(outs[1]!, "utf-8"));
  });

  it("scales density counts logarithmically", async () => {
    const inputs = REFERENCE_INPUTS["density"];
    const out = path.join(tmp, "density.svg");
    expect(await main(["--in", ...inputs, "--kind", "density", "--out", out])).toBe(0);
    const svg = await readFile(out, "utf-8");
    expect(svg).toContain("count (log scale)");
    // Power-of-ten tick labels on the count axis.
    expect(svg).toContain(">10<");
    expect(svg).toContain(">100<");
    expect(svg.split("<rect").length).toBeGreaterThan(10); // histogram bars drawn
  });

  it("draws one curve per snapshot step in the improvement figure", async () => {
    const inputs = REFERENCE_INPUTS["improvement"];
    const text = await readFile(inputs[0]!, "utf-8");
    const steps = new Set(
      text.trim().split("\n").slice(1).map((l) => l.split(",")[0])
    );
    const out = path.join(tmp, "impr.svg");
    expect(await main(["--in", ...inputs, "--kind", "improvement", "--out", out])).toBe(0);
    const svg = await readFile(out, "utf-8");
    expect(svg.split("<polyline").length - 1).toBe(steps.size);
  });
});

describe("degenerate and invalid inputs", () => {
  it("renders empty axes and exits 0 on header-only CSVs, for every kind", async () => {
    for (const kind of KINDS) {
      const inputs: string[] = [];
      for (const [i, header] of HEADERS[kind].entries()) {
        const p = path.join(tmp, `${kind}-${i}.csv`);
        await writeFile(p, header.join(",") + "\n");
        inputs.push(p);
      }
      const out = path.join(tmp, `${kind}-empty.svg`);
      const code = await main(["--in", ...inputs, "--kind", kind, "--out", out]);
      expect(code, `kind ${kind}`).toBe(0);
      expectSvg(await readFile(out, "utf-8"));
    }
  });

  it("exits nonzero naming the missing column on a schema mismatch", async () => {
    const p = path.join(tmp, "bad.csv");
    const cols = TRACE_COLUMNS.filter((c) => c !== "tau");
    await writeFile(p, cols.join(",") + "\n" + cols.map(() => "1").join(",") + "\n");
    const errors: string[] = [];
    vi.mocked(console.error).mockImplementation((msg: unknown) => {
      errors.push(String(msg));
    });
    const out = path.join(tmp, "bad.svg");
    const code = await main(["--in", p, "--kind", "learning-curves", "--out", out]);
    expect(code).not.toBe(0);
    expect(errors.join("\n")).toContain("tau");
  });

  it("rejects a file with no header at all", async () => {
    const p = path.join(tmp, "empty.csv");
    await writeFile(p, "");
    const code = await main(["--in", p, "--kind", "learning-curves", "--out", path.join(tmp, "x.svg")]);
    expect(code).not.toBe(0);
  });
});

describe("argument parsing", () => {
  it("accepts the documented form", () => {
    const args = parseArgs(["--in", "a.csv", "b.csv", "--kind", "comparison", "--out", "o.svg"]);
    expect(args).toEqual({ inputs: ["a.csv", "b.csv"], kind: "comparison", out: "o.svg" });
  });

  for (const argv of [
    ["--in", "a.csv", "--kind", "nope", "--out", "o.svg"],
    ["--in", "a.csv", "--kind", "comparison", "--out", "o.svg"], // arity: wants 2
    ["--in", "a.csv", "b.csv", "--kind", "density", "--out", "o.svg"], // arity: wants 1
    ["--in", "a.csv", "--kind", "density"], // no --out
    ["--kind", "density", "--out", "o.svg"], // no --in
    ["--in", "a.csv", "--kind", "density", "--out", "o.svg", "--bogus"],
  ]) {
    it(`rejects ${argv.join(" ")}`, async () => {
      expect(await main(argv)).toBe(2);
    });
  }
});

describe("csv parsing", () => {
  it("reads columns by name", () => {
    const t = parseCsv("a,b\n1,2\n3,4\n", "t.csv");
    expect(t.rows).toBe(2);
    expect([...t.data.get("b")!]).toEqual([2, 4]);
    expect(() => requireColumns(t, ["a", "b"])).not.toThrow();
  });

  it("names every missing column", () => {
    const t = parseCsv("a,b\n", "t.csv");
    try {
      requireColumns(t, ["a", "x", "y"]);
      expect.unreachable("requireColumns should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      expect((err as Error).message).toContain("x, y");
      expect((err as Error).message).toContain("t.csv");
    }
  });

  it("rejects ragged rows and non-numeric cells", () => {
    expect(() => parseCsv("a,b\n1\n", "t.csv")).toThrow(/row 2/);
    expect(() => parseCsv("a,b\n1,hello\n", "t.csv")).toThrow(/not a number/);
  });
});

describe("render as a library call", () => {
  it("raises SchemaError before drawing anything", () => {
    const t = parseCsv("s,V\n0,1\n", "dp.csv");
    expect(() => render("policy-overlay", [t])).toThrow(SchemaError);
    expect(() => render("policy-overlay", [t])).toThrow(/pi/);
  });
});
