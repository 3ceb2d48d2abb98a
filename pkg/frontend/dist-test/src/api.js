export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
/** Thin typed client over the review service; every number the UI shows
 * originates from one of these responses. */
export class ApiClient {
    constructor(base) {
        this.base = base;
    }
    async request(path, init) {
        let resp;
        try {
            resp = await fetch(this.base + path, { cache: "no-store", ...init });
        }
        catch (err) {
            throw new ApiError(0, `service unreachable: ${String(err)}`);
        }
        let body = null;
        try {
            body = await resp.json();
        }
        catch {
            /* non-JSON error body */
        }
        if (!resp.ok) {
            const msg = body && typeof body === "object" && "error" in body
                ? String(body.error)
                : `HTTP ${resp.status}`;
            throw new ApiError(resp.status, msg);
        }
        return body;
    }
    health() {
        return this.request("/health");
    }
    listIncidents() {
        return this.request("/incidents");
    }
    /** Always bypasses caches so re-opening reflects evidence posted elsewhere. */
    getIncident(id) {
        return this.request(`/incidents/${encodeURIComponent(id)}?t=${Date.now()}`);
    }
    postEvidence(id, body) {
        return this.request(`/incidents/${encodeURIComponent(id)}/evidence`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
    }
}
