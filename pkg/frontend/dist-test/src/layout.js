/** Deterministic 32-bit PRNG so layouts are reproducible per incident. */
export function mulberry32(seed) {
    let a = seed >>> 0;
    return () => {
        a |= 0;
        a = (a + 0x6d2b79f5) | 0;
        let t = Math.imul(a ^ (a >>> 15), 1 | a);
        t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}
export function hashString(s) {
    let h = 2166136261;
    for (let i = 0; i < s.length; i++) {
        h ^= s.charCodeAt(i);
        h = Math.imul(h, 16777619);
    }
    return h >>> 0;
}
/** Small force simulation: spring edges, pairwise repulsion, centering.
 * Runs a fixed number of synchronous steps from seeded positions, so the
 * result depends only on (nodes, edges, size, seed). */
export function layoutGraph(nodeIds, edges, width, height, seed) {
    const n = nodeIds.length;
    const rand = mulberry32(seed);
    const index = new Map(nodeIds.map((id, i) => [id, i]));
    const px = new Float64Array(n);
    const py = new Float64Array(n);
    const cx = width / 2;
    const cy = height / 2;
    const radius = Math.min(width, height) * 0.35;
    for (let i = 0; i < n; i++) {
        const angle = (2 * Math.PI * i) / Math.max(n, 1) + rand() * 0.5;
        px[i] = cx + radius * Math.cos(angle) * (0.6 + 0.4 * rand());
        py[i] = cy + radius * Math.sin(angle) * (0.6 + 0.4 * rand());
    }
    const pairs = [];
    for (const [a, b] of edges) {
        const i = index.get(a);
        const j = index.get(b);
        if (i !== undefined && j !== undefined && i !== j)
            pairs.push([i, j]);
    }
    const springLength = radius * (n > 1 ? 1.6 / Math.sqrt(n) : 1);
    const steps = 300;
    for (let step = 0; step < steps; step++) {
        const cool = 1 - step / steps;
        const fx = new Float64Array(n);
        const fy = new Float64Array(n);
        for (let i = 0; i < n; i++) {
            for (let j = i + 1; j < n; j++) {
                let dx = px[i] - px[j];
                let dy = py[i] - py[j];
                const d2 = dx * dx + dy * dy + 0.01;
                const f = (springLength * springLength) / d2;
                const d = Math.sqrt(d2);
                dx /= d;
                dy /= d;
                fx[i] += dx * f * 8;
                fy[i] += dy * f * 8;
                fx[j] -= dx * f * 8;
                fy[j] -= dy * f * 8;
            }
        }
        for (const [i, j] of pairs) {
            let dx = px[j] - px[i];
            let dy = py[j] - py[i];
            const d = Math.sqrt(dx * dx + dy * dy) + 0.01;
            const f = (d - springLength) * 0.05;
            dx /= d;
            dy /= d;
            fx[i] += dx * f * d;
            fy[i] += dy * f * d;
            fx[j] -= dx * f * d;
            fy[j] -= dy * f * d;
        }
        for (let i = 0; i < n; i++) {
            fx[i] += (cx - px[i]) * 0.01;
            fy[i] += (cy - py[i]) * 0.01;
            px[i] += Math.max(-12, Math.min(12, fx[i])) * cool;
            py[i] += Math.max(-12, Math.min(12, fy[i])) * cool;
            const margin = 46;
            px[i] = Math.max(margin, Math.min(width - margin, px[i]));
            py[i] = Math.max(margin, Math.min(height - margin, py[i]));
        }
    }
    return new Map(nodeIds.map((id, i) => [id, { x: px[i], y: py[i] }]));
}
