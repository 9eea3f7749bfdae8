/** DOM rendering for the annotation view. Pure build-from-state functions;
 * main.ts re-renders on every store update. */

import { curvePoints, parseCurveCsv, toSvgPath } from "./curve";
import { explanationSegments, highlightCss } from "./highlight";
import { SessionStore } from "./store";
import type { DocPayload, ExplanationPayload, LabelValue } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderDocPanel(
  doc: DocPayload,
  explanation: ExplanationPayload | null,
): HTMLElement {
  const panel = el("div", "doc-panel");
  panel.appendChild(el("h2", "doc-id", doc.id));
  const body = el("div", "doc-text");
  if (explanation && explanation.doc_id === doc.id) {
    for (const segment of explanationSegments(doc.text, explanation)) {
      if (segment.kind === "plain") {
        body.appendChild(document.createTextNode(segment.text));
      } else {
        const mark = el("mark", `hl hl-${segment.hue}`, segment.text);
        mark.setAttribute("style", highlightCss(segment.hue!, segment.intensity!));
        mark.dataset.tokenIndex = String(segment.tokenIndex);
        mark.dataset.weight = segment.weight!.toFixed(6);
        mark.title = `${segment.text}: ${segment.weight!.toFixed(4)}`;
        body.appendChild(mark);
      }
    }
  } else {
    body.textContent = doc.text;
  }
  panel.appendChild(body);
  return panel;
}

export function renderProbabilityBar(probs: Record<string, number> | undefined): HTMLElement {
  const bar = el("div", "prob-bar");
  if (!probs) {
    bar.appendChild(el("span", "prob-none", "no model yet"));
    return bar;
  }
  for (const [label, value] of Object.entries(probs)) {
    const chunk = el("div", `prob prob-${label.toLowerCase()}`);
    chunk.style.width = `${(value * 100).toFixed(1)}%`;
    chunk.textContent = `${label} ${(value * 100).toFixed(0)}%`;
    chunk.dataset.prob = value.toFixed(4);
    bar.appendChild(chunk);
  }
  return bar;
}

export function renderLabelControls(store: SessionStore): HTMLElement {
  const wrap = el("div", "label-controls");
  const doc = store.currentDoc;
  const busy = store.state.phase === "submitting";
  const current = doc ? store.state.pending.get(doc.id) : undefined;

  const maybeWrap = el("label", "maybe-toggle");
  const maybeBox = document.createElement("input");
  maybeBox.type = "checkbox";
  maybeBox.id = "maybe-toggle";
  maybeBox.checked = current?.maybe_flag ?? false;
  maybeBox.disabled = busy;
  maybeWrap.appendChild(maybeBox);
  maybeWrap.appendChild(document.createTextNode(" Maybe"));

  const buttons: Array<[string, LabelValue]> = [
    ["ATD", "ATD"],
    ["Weak-ATD", "WeakATD"],
    ["Non-ATD", "NonATD"],
  ];
  for (const [caption, value] of buttons) {
    const button = el("button", `label-btn label-${value.toLowerCase()}`) as HTMLButtonElement;
    button.textContent = caption;
    button.disabled = busy || !doc;
    if (current?.label === value) button.classList.add("selected");
    button.addEventListener("click", () => {
      if (doc) store.setLabel(doc.id, value, value === "WeakATD" ? false : maybeBox.checked);
    });
    wrap.appendChild(button);
  }
  wrap.appendChild(maybeWrap);

  const submit = el("button", "submit-btn") as HTMLButtonElement;
  submit.textContent = store.labelsComplete ? "Submit batch" : "Submit partial";
  submit.disabled = busy || store.state.pending.size === 0;
  submit.addEventListener("click", () => void store.submit());
  wrap.appendChild(submit);
  return wrap;
}

export function renderProgress(store: SessionStore): HTMLElement {
  const snapshot = store.state.snapshot;
  const wrap = el("div", "progress");
  wrap.appendChild(el("span", "phase", `state: ${store.state.phase}`));
  if (snapshot) {
    wrap.appendChild(el("span", "iteration", `iteration ${store.state.iteration}`));
    wrap.appendChild(
      el("span", "counts", `${snapshot.labeled_count} labeled / ${snapshot.pool_count} pool`),
    );
  }
  const labeled = store.state.pending.size;
  const total = store.state.batch.length;
  if (total > 0) {
    wrap.appendChild(el("span", "batch-progress", `batch: ${labeled}/${total}`));
  }
  if (store.state.note) wrap.appendChild(el("span", "note", store.state.note));
  return wrap;
}

export function renderBatchList(store: SessionStore): HTMLElement {
  const list = el("ul", "batch-list");
  store.state.batch.forEach((doc, index) => {
    const item = el("li", "batch-item");
    if (index === store.state.currentIndex) item.classList.add("current");
    const pending = store.state.pending.get(doc.id);
    item.textContent = pending
      ? `${doc.id} ✓ ${pending.maybe_flag ? "Maybe | " : ""}${pending.label}`
      : doc.id;
    item.addEventListener("click", () => store.selectDoc(index));
    list.appendChild(item);
  });
  return list;
}

export function renderExplainToggle(store: SessionStore): HTMLElement {
  const wrap = el("div", "explain-toggle");
  for (const method of ["lime", "shap", "off"] as const) {
    const button = el("button", `explain-btn explain-${method}`) as HTMLButtonElement;
    button.textContent = method;
    if (store.state.explainMethod === method) button.classList.add("selected");
    button.addEventListener("click", () => void store.setExplainMethod(method));
    wrap.appendChild(button);
  }
  return wrap;
}

export function renderCurve(csv: string, width = 420, height = 160): SVGSVGElement {
  const rows = parseCurveCsv(csv);
  const points = curvePoints(rows, width - 20, height - 20);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "curve-chart");
  const group = document.createElementNS(SVG_NS, "g");
  group.setAttribute("transform", "translate(10,10)");
  const path = document.createElementNS(SVG_NS, "path");
  path.setAttribute("d", toSvgPath(points));
  path.setAttribute("fill", "none");
  path.setAttribute("stroke", "#2a6fdb");
  path.setAttribute("stroke-width", "2");
  group.appendChild(path);
  for (const point of points) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", point.x.toFixed(1));
    circle.setAttribute("cy", point.y.toFixed(1));
    circle.setAttribute("r", "3");
    circle.setAttribute("fill", "#2a6fdb");
    circle.setAttribute("data-labeled", String(point.row.labeled_count));
    circle.setAttribute("data-f1", String(point.row.f1));
    group.appendChild(circle);
  }
  svg.appendChild(group);
  return svg;
}

export function renderOfflineBanner(store: SessionStore): HTMLElement | null {
  if (store.state.phase !== "offline") return null;
  const banner = el("div", "offline-banner");
  banner.appendChild(
    el("span", undefined, "offline: labels are kept locally and will be resubmitted"),
  );
  const retryButton = el("button", "retry-btn", "retry") as HTMLButtonElement;
  retryButton.addEventListener("click", () => void store.retry());
  banner.appendChild(retryButton);
  return banner;
}

/** Full re-render of the app into `root`. */
export function renderApp(root: HTMLElement, store: SessionStore): void {
  root.textContent = "";
  const offline = renderOfflineBanner(store);
  if (offline) root.appendChild(offline);
  root.appendChild(renderProgress(store));
  const main = el("div", "layout");
  const left = el("div", "left-pane");
  left.appendChild(renderBatchList(store));
  left.appendChild(renderCurve(store.state.curveCsv));
  main.appendChild(left);
  const right = el("div", "right-pane");
  const doc = store.currentDoc;
  if (doc) {
    right.appendChild(renderDocPanel(doc, store.state.explanation));
    right.appendChild(renderProbabilityBar(doc.predicted_probs));
    right.appendChild(renderExplainToggle(store));
    right.appendChild(renderLabelControls(store));
  } else if (store.state.phase === "done") {
    right.appendChild(el("p", "done-note", "pool exhausted, session complete"));
  } else {
    right.appendChild(el("p", "loading-note", `waiting (${store.state.phase})`));
  }
  main.appendChild(right);
  root.appendChild(main);
}
