import assert from "node:assert/strict";
import { test } from "node:test";

import { hashString, layoutGraph, mulberry32 } from "../src/layout.js";

const NODES = ["a", "b", "c", "d"];
const EDGES: [string, string][] = [
  ["a", "b"],
  ["b", "c"],
  ["c", "d"],
  ["a", "d"],
];

test("prng is deterministic per seed", () => {
  const a = mulberry32(42);
  const b = mulberry32(42);
  for (let i = 0; i < 100; i++) assert.equal(a(), b());
});

test("layout is identical for identical inputs", () => {
  const p1 = layoutGraph(NODES, EDGES, 700, 500, 7);
  const p2 = layoutGraph(NODES, EDGES, 700, 500, 7);
  for (const id of NODES) {
    assert.deepEqual(p1.get(id), p2.get(id));
  }
});

test("different seeds move nodes", () => {
  const p1 = layoutGraph(NODES, EDGES, 700, 500, 7);
  const p2 = layoutGraph(NODES, EDGES, 700, 500, 8);
  const moved = NODES.some((id) => {
    const a = p1.get(id)!;
    const b = p2.get(id)!;
    return Math.abs(a.x - b.x) > 1e-9 || Math.abs(a.y - b.y) > 1e-9;
  });
  assert.ok(moved);
});

test("positions stay inside the frame", () => {
  const pos = layoutGraph(NODES, EDGES, 700, 500, 3);
  for (const { x, y } of pos.values()) {
    assert.ok(x >= 0 && x <= 700);
    assert.ok(y >= 0 && y <= 500);
  }
});

test("string hash is stable", () => {
  assert.equal(hashString("inc-001"), hashString("inc-001"));
  assert.notEqual(hashString("inc-001"), hashString("inc-002"));
});
