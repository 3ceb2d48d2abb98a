import { ApiError } from "./api.js";
import { RequestQueue } from "./queue.js";
/** Single source of truth for the view. Scores are only ever replaced by
 * service responses; toggle controls update optimistically and roll back on
 * validation errors. `pending` marks the display as stale while a request
 * is in flight. */
export class IncidentStore {
    constructor(api) {
        this.api = api;
        this.incidents = [];
        this.current = null;
        this.scores = {};
        this.evidence = {};
        this.inactiveAlerts = [];
        this.history = [];
        this.pending = false;
        this.error = null;
        this.listError = null;
        this.listeners = [];
        this.queue = new RequestQueue();
    }
    subscribe(fn) {
        this.listeners.push(fn);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== fn);
        };
    }
    notify() {
        for (const fn of this.listeners)
            fn();
    }
    async loadList() {
        try {
            this.incidents = await this.api.listIncidents();
            this.listError = null;
        }
        catch (err) {
            this.listError = err instanceof Error ? err.message : String(err);
        }
        this.notify();
    }
    /** Fetch fresh (cache-bypassed) and reset the what-if history. */
    async open(id) {
        this.pending = true;
        this.error = null;
        this.notify();
        try {
            const doc = await this.api.getIncident(id);
            this.current = doc;
            this.scores = { ...doc.tactic_scores };
            this.evidence = { ...doc.evidence };
            this.inactiveAlerts = [...(doc.inactive_alerts ?? [])];
            this.history = [{ label: "baseline", scores: { ...doc.tactic_scores } }];
        }
        catch (err) {
            this.error = err instanceof Error ? err.message : String(err);
        }
        finally {
            this.pending = false;
            this.notify();
        }
    }
    toggleTactic(tactic, state) {
        return this.toggle({ tactic, state }, `${tactic} ${state}`);
    }
    toggleAlert(alert, state) {
        return this.toggle({ alert, state }, `alert ${alert} ${state}`);
    }
    toggle(body, label) {
        const inc = this.current;
        if (!inc)
            return Promise.resolve();
        // optimistic control state (never the scores), snapshotted for rollback
        const snapshot = {
            evidence: { ...this.evidence },
            inactiveAlerts: [...this.inactiveAlerts],
        };
        if ("tactic" in body) {
            if (body.state === "Clear")
                delete this.evidence[body.tactic];
            else
                this.evidence[body.tactic] = body.state;
        }
        else {
            if (body.state === "Inactive" && !this.inactiveAlerts.includes(body.alert)) {
                this.inactiveAlerts.push(body.alert);
            }
            if (body.state === "Clear") {
                this.inactiveAlerts = this.inactiveAlerts.filter((a) => a !== body.alert);
            }
        }
        this.pending = true;
        this.error = null;
        this.notify();
        return this.queue.enqueue(inc.id, async () => {
            try {
                const resp = await this.api.postEvidence(inc.id, body);
                this.scores = { ...resp.tactic_scores };
                this.evidence = { ...resp.evidence };
                this.inactiveAlerts = [...resp.inactive_alerts];
                this.history.push({ label, scores: { ...resp.tactic_scores } });
            }
            catch (err) {
                this.evidence = snapshot.evidence;
                this.inactiveAlerts = snapshot.inactiveAlerts;
                this.error =
                    err instanceof ApiError ? err.message : err instanceof Error ? err.message : String(err);
            }
            finally {
                this.pending = false;
                this.notify();
            }
        });
    }
    /** Settles once every toggle issued so far has been answered. */
    idle() {
        return this.current ? this.queue.idle(this.current.id) : Promise.resolve();
    }
}
