import assert from "node:assert/strict";
import { test } from "node:test";
import { RequestQueue } from "../src/queue.js";
const sleep = (ms) => new Promise((r) => setTimeout(r, ms));
test("tasks for one key run strictly in order", async () => {
    const q = new RequestQueue();
    const log = [];
    void q.enqueue("k", async () => {
        await sleep(30);
        log.push(1);
    });
    void q.enqueue("k", async () => {
        await sleep(5);
        log.push(2);
    });
    void q.enqueue("k", async () => {
        log.push(3);
    });
    await q.idle("k");
    assert.deepEqual(log, [1, 2, 3]);
});
test("a failing task does not block the chain", async () => {
    const q = new RequestQueue();
    const log = [];
    const failing = q.enqueue("k", async () => {
        throw new Error("boom");
    });
    await assert.rejects(failing);
    await q.enqueue("k", async () => {
        log.push("after");
    });
    assert.deepEqual(log, ["after"]);
});
test("keys are independent", async () => {
    const q = new RequestQueue();
    const log = [];
    void q.enqueue("slow", async () => {
        await sleep(40);
        log.push("slow");
    });
    await q.enqueue("fast", async () => {
        log.push("fast");
    });
    assert.deepEqual(log, ["fast"]);
    await q.idle("slow");
    assert.deepEqual(log, ["fast", "slow"]);
});
