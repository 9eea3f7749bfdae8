/** Bootstrap: wire the store to the DOM and drive one session per tab. */

import { ApiClient } from "./api";
import { SessionStore } from "./store";
import { renderApp } from "./ui";

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? window.location.origin;
}

export function boot(root: HTMLElement): SessionStore {
  const store = new SessionStore(new ApiClient(apiBase()));
  store.subscribe(() => renderApp(root, store));

  const params = new URLSearchParams(window.location.search);
  const existing = params.get("session");
  if (existing) {
    void store.resume(existing);
  } else {
    void store.create({
      corpus_ref: params.get("corpus") ?? "default",
      strategy: params.get("strategy") ?? "breaking-ties",
      seed_size: Number(params.get("seed_size") ?? 10),
      batch_size: Number(params.get("batch_size") ?? 10),
      annotator: params.get("annotator") ?? "annotator",
    });
  }
  renderApp(root, store);
  return store;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app")!);
}
