import { sortTactics, tacticColor } from "./colors.js";
import { hashString, layoutGraph } from "./layout.js";
/** Score panel rows, canonical tactic order; numbers come straight from the
 * store (i.e. from the last service response). */
export function scorePanelModel(store) {
    const inc = store.current;
    if (!inc)
        return [];
    return sortTactics(inc.tactics).map((tactic) => ({
        tactic,
        score: tactic in store.scores ? store.scores[tactic] : null,
        evidence: store.evidence[tactic] ?? null,
        color: tacticColor(tactic),
    }));
}
export function historyModel(store) {
    const inc = store.current;
    if (!inc)
        return [];
    const tactics = sortTactics(inc.tactics);
    return store.history.map((h) => ({
        label: h.label,
        cells: tactics
            .filter((t) => t in h.scores)
            .map((t) => ({ tactic: t, score: h.scores[t] })),
    }));
}
export function nodeViewModel(store) {
    const inc = store.current;
    if (!inc)
        return [];
    return inc.nodes.map((n) => ({
        id: n.id,
        signature: n.signature,
        srcIps: n.src_ips.join(", "),
        dstIps: n.dst_ips.join(", "),
        score: n.score,
        tactics: sortTactics(n.tactics).map((t) => ({ name: t, color: tacticColor(t) })),
        inactive: store.inactiveAlerts.includes(n.id),
    }));
}
export function fmtScore(v) {
    return v === null ? "-" : v.toFixed(4);
}
// --- DOM rendering (everything below needs a document) ---
function el(tag, cls, text) {
    const node = document.createElement(tag);
    if (cls)
        node.className = cls;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
const SVG_NS = "http://www.w3.org/2000/svg";
function renderGraph(store, inc) {
    const width = 760;
    const height = 520;
    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    svg.setAttribute("class", "graph");
    const pos = layoutGraph(inc.nodes.map((n) => n.id), inc.edges.map((e) => [e.from, e.to]), width, height, hashString(inc.id));
    const defs = document.createElementNS(SVG_NS, "defs");
    defs.innerHTML =
        '<marker id="arrow" viewBox="0 0 10 10" refX="22" refY="5" ' +
            'markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
            '<path d="M 0 0 L 10 5 L 0 10 z" fill="#8a93a6"/></marker>';
    svg.appendChild(defs);
    for (const e of inc.edges) {
        const a = pos.get(e.from);
        const b = pos.get(e.to);
        if (!a || !b)
            continue;
        const line = document.createElementNS(SVG_NS, "line");
        line.setAttribute("x1", String(a.x));
        line.setAttribute("y1", String(a.y));
        line.setAttribute("x2", String(b.x));
        line.setAttribute("y2", String(b.y));
        line.setAttribute("class", "edge");
        line.setAttribute("stroke-width", String(1 + 2 * e.weight));
        line.setAttribute("marker-end", "url(#arrow)");
        svg.appendChild(line);
    }
    for (const view of nodeViewModel(store)) {
        const p = pos.get(view.id);
        if (!p)
            continue;
        const group = document.createElementNS(SVG_NS, "g");
        group.setAttribute("transform", `translate(${p.x},${p.y})`);
        group.setAttribute("class", view.inactive ? "node inactive" : "node");
        const circle = document.createElementNS(SVG_NS, "circle");
        circle.setAttribute("r", "17");
        circle.setAttribute("fill", view.tactics[0]?.color ?? "#777");
        group.appendChild(circle);
        const title = document.createElementNS(SVG_NS, "title");
        title.textContent =
            `${view.srcIps}\n${view.dstIps}\n${view.signature}\n` +
                `score ${view.score} | ${view.tactics.map((t) => t.name).join(", ")}`;
        group.appendChild(title);
        const label = document.createElementNS(SVG_NS, "text");
        label.setAttribute("y", "32");
        label.setAttribute("class", "node-label");
        label.textContent = view.id;
        group.appendChild(label);
        svg.appendChild(group);
    }
    return svg;
}
function evidenceButtons(current, onSet) {
    const wrap = el("span", "toggles");
    for (const state of ["Active", "Inactive"]) {
        const btn = el("button", current === state ? "toggle on" : "toggle", state);
        btn.onclick = () => onSet(current === state ? "Clear" : state);
        wrap.appendChild(btn);
    }
    return wrap;
}
export function renderApp(store, root) {
    root.textContent = "";
    const list = el("aside", "list");
    list.appendChild(el("h2", undefined, "Incidents"));
    if (store.listError) {
        const banner = el("div", "banner error");
        banner.appendChild(el("span", undefined, `service error: ${store.listError}`));
        const retry = el("button", "retry", "retry");
        retry.onclick = () => void store.loadList();
        banner.appendChild(retry);
        list.appendChild(banner);
    }
    for (const row of store.incidents) {
        const item = el("button", store.current?.id === row.id ? "incident open" : "incident");
        item.appendChild(el("span", "inc-id", row.id));
        item.appendChild(el("span", "inc-meta", `${row.node_count} alerts | ${row.tactic_count} tactics | top ${row.top_score.toFixed(3)}`));
        item.onclick = () => void store.open(row.id);
        list.appendChild(item);
    }
    root.appendChild(list);
    const mainCol = el("main", store.pending ? "detail stale" : "detail");
    const inc = store.current;
    if (!inc) {
        mainCol.appendChild(el("p", "hint", "Select an incident to review it."));
        root.appendChild(mainCol);
        return;
    }
    const head = el("header");
    head.appendChild(el("h2", undefined, inc.id));
    if (store.pending)
        head.appendChild(el("span", "stale-flag", "updating..."));
    if (store.error)
        head.appendChild(el("span", "banner error inline", store.error));
    mainCol.appendChild(head);
    mainCol.appendChild(renderGraph(store, inc));
    const panel = el("section", "scores");
    panel.appendChild(el("h3", undefined, "Tactic scores"));
    for (const row of scorePanelModel(store)) {
        const line = el("div", "score-row");
        const chip = el("span", "chip", row.tactic);
        chip.style.background = row.color;
        line.appendChild(chip);
        line.appendChild(el("span", "score-value", fmtScore(row.score)));
        line.appendChild(evidenceButtons(row.evidence, (state) => void store.toggleTactic(row.tactic, state)));
        panel.appendChild(line);
    }
    mainCol.appendChild(panel);
    const alerts = el("section", "alerts");
    alerts.appendChild(el("h3", undefined, "Alerts"));
    for (const view of nodeViewModel(store)) {
        const line = el("div", view.inactive ? "alert-row inactive" : "alert-row");
        line.appendChild(el("span", "alert-id", view.id));
        line.appendChild(el("span", "alert-sig", view.signature));
        line.appendChild(el("span", "alert-score", view.score.toFixed(2)));
        const btn = el("button", "toggle", view.inactive ? "Restore" : "Mark inactive");
        btn.onclick = () => void store.toggleAlert(view.id, view.inactive ? "Clear" : "Inactive");
        line.appendChild(btn);
        alerts.appendChild(line);
    }
    mainCol.appendChild(alerts);
    const history = el("section", "history");
    history.appendChild(el("h3", undefined, "What-if history"));
    for (const row of historyModel(store)) {
        const line = el("div", "history-row");
        line.appendChild(el("span", "history-label", row.label));
        for (const cell of row.cells) {
            const chip = el("span", "history-cell", `${cell.tactic} ${cell.score.toFixed(3)}`);
            chip.style.borderColor = tacticColor(cell.tactic);
            line.appendChild(chip);
        }
        history.appendChild(line);
    }
    mainCol.appendChild(history);
    root.appendChild(mainCol);
}
