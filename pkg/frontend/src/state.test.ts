import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { exportHtml, extractEmbeddedJson } from "./export";
import {
  LAYER_NAMES,
  canSubmit,
  initialState,
  requestUrl,
  submit,
  submitSucceeded,
  toggleLayer,
  traceVisibility,
} from "./state";

const HERE = dirname(fileURLToPath(import.meta.url));
const GOLDEN = readFileSync(join(HERE, "../../tests/golden/testville.json"), "utf-8");

const STATS_LINE =
  "we collect 16 records of elevations, 2 road segments, 1 power lines, and 2 buildings with height";

function goldenFetch(url: string): Promise<Response> {
  if (url.endsWith("/Testville")) {
    return Promise.resolve(
      new Response(GOLDEN, {
        status: 200,
        headers: { "Content-Type": "application/json", "X-Model-Stats": STATS_LINE },
      }),
    );
  }
  return Promise.resolve(
    new Response(JSON.stringify({ status: 404, stage: "geocode", message: "no polygon result" }), {
      status: 404,
      headers: { "Content-Type": "application/json" },
    }),
  );
}

function readyState() {
  let s = initialState("http://service.test");
  s = { ...s, apiKey: "KEY", place: "Testville" };
  return submit(s, goldenFetch as unknown as typeof fetch);
}

describe("submit", () => {
  it("requires both inputs", () => {
    const s = initialState();
    expect(canSubmit(s)).toBe(false);
    expect(canSubmit({ ...s, apiKey: "K" })).toBe(false);
    expect(canSubmit({ ...s, apiKey: "K", place: "  " })).toBe(false);
    expect(canSubmit({ ...s, apiKey: "K", place: "Testville" })).toBe(true);
  });

  it("builds the path-parameter request URL", () => {
    const s = { ...initialState("http://service.test/"), apiKey: "K", place: "A B" };
    expect(requestUrl(s)).toBe("http://service.test/K/A%20B");
  });

  it("reaches ready with all four layers visible", async () => {
    const s = await readyState();
    expect(s.status.kind).toBe("ready");
    expect(s.figure?.data.map((t) => t.name)).toEqual([...LAYER_NAMES]);
    expect(traceVisibility(s)).toEqual([true, true, true, true]);
    expect(s.statsLine).toBe(STATS_LINE);
  });

  it("keeps the response body byte-for-byte", async () => {
    const s = await readyState();
    expect(s.figureRaw).toBe(GOLDEN);
  });

  it("maps ApiError responses to error state with stage", async () => {
    let s = initialState("http://service.test");
    s = { ...s, apiKey: "KEY", place: "NoSuchPlaceZZZ" };
    const out = await submit(s, goldenFetch as unknown as typeof fetch);
    expect(out.status).toEqual({
      kind: "error",
      message: "no polygon result",
      stage: "geocode",
    });
    expect(out.figure).toBeNull();
  });

  it("turns network failures into an error state", async () => {
    const failing = () => Promise.reject(new Error("ECONNREFUSED"));
    let s = initialState("http://service.test");
    s = { ...s, apiKey: "KEY", place: "Testville" };
    const out = await submit(s, failing as unknown as typeof fetch);
    expect(out.status.kind).toBe("error");
  });

  it("rejects non-figure bodies", () => {
    const s = { ...initialState(), apiKey: "K", place: "P", status: { kind: "loading" as const } };
    expect(submitSucceeded(s, "not json", null).status.kind).toBe("error");
    expect(submitSucceeded(s, "{}", null).status.kind).toBe("error");
  });
});

describe("toggleLayer", () => {
  it("hides exactly one trace", async () => {
    const s = await readyState();
    const toggled = toggleLayer(s, "Power lines");
    expect(traceVisibility(toggled)).toEqual([true, true, true, false]);
    // other three unchanged
    expect(toggled.layerVisibility.Terrain).toBe(true);
    expect(toggled.layerVisibility.Roads).toBe(true);
    expect(toggled.layerVisibility.Buildings).toBe(true);
  });

  it("is an involution", async () => {
    const s = await readyState();
    const twice = toggleLayer(toggleLayer(s, "Roads"), "Roads");
    expect(twice.layerVisibility).toEqual(s.layerVisibility);
  });

  it("restores the initial render state after re-enabling all layers", async () => {
    const s = await readyState();
    let t = s;
    for (const name of LAYER_NAMES) t = toggleLayer(t, name);
    for (const name of LAYER_NAMES) t = toggleLayer(t, name);
    expect(traceVisibility(t)).toEqual(traceVisibility(s));
  });

  it("ignores unknown layers and non-ready states", async () => {
    const s = await readyState();
    expect(toggleLayer(s, "Rivers")).toBe(s);
    const idle = initialState();
    expect(toggleLayer(idle, "Terrain")).toBe(idle);
  });

  it("never mutates figure geometry", async () => {
    const s = await readyState();
    const before = JSON.stringify(s.figure);
    toggleLayer(s, "Terrain");
    expect(JSON.stringify(s.figure)).toBe(before);
    expect(s.figureRaw).toBe(GOLDEN);
  });
});

describe("exportHtml", () => {
  it("embeds the fetched JSON byte-for-byte", async () => {
    const s = await readyState();
    const page = exportHtml(s.figureRaw!, "Testville");
    expect(page.startsWith("<!doctype html>")).toBe(true);
    expect(page).toContain("cdn.plot.ly/plotly-2.29.1.min.js");
    expect(extractEmbeddedJson(page)).toBe(GOLDEN);
  });

  it("embedded JSON parses back to the four-trace figure", async () => {
    const s = await readyState();
    const embedded = extractEmbeddedJson(exportHtml(s.figureRaw!))!;
    const fig = JSON.parse(embedded);
    expect(fig.data).toHaveLength(4);
    expect(fig.layout.scene.aspectmode).toBe("data");
  });

  it("escapes the page title", () => {
    const page = exportHtml("{}", '<script>"x"</script>');
    expect(page).toContain("&lt;script&gt;&quot;x&quot;&lt;/script&gt;");
  });
});
