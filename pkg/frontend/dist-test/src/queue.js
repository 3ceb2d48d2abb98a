/** Per-key serialized task queue: requests for one incident never interleave,
 * so the final display always equals the final service state. */
export class RequestQueue {
    constructor() {
        this.tails = new Map();
    }
    enqueue(key, task) {
        const tail = this.tails.get(key) ?? Promise.resolve();
        const next = tail.then(task, task);
        // keep the chain alive regardless of task outcome
        this.tails.set(key, next.catch(() => undefined));
        return next;
    }
    /** Resolves when every task enqueued so far for the key has settled. */
    async idle(key) {
        await (this.tails.get(key) ?? Promise.resolve());
    }
}
