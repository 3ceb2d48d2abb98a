import { ApiClient } from "./api.js";
import { renderApp } from "./render.js";
import { IncidentStore } from "./state.js";
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const store = new IncidentStore(new ApiClient(base));
const root = document.getElementById("app");
if (!root)
    throw new Error("missing #app mount point");
store.subscribe(() => renderApp(store, root));
void store.loadList();
