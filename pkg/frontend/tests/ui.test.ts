import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { SessionStore } from "../src/store";
import {
  renderCurve,
  renderDocPanel,
  renderLabelControls,
  renderOfflineBanner,
  renderProbabilityBar,
} from "../src/ui";
import type { DocPayload, ExplanationPayload } from "../src/types";

const DOC: DocPayload = {
  id: "D-1",
  summary: "Refactor dependency",
  description: "cyclic dependency",
  text: "Refactor dependency cyclic dependency",
  tokens: ["refactor", "depend", "cyclic", "depend"],
  spans: [
    [0, 8],
    [9, 19],
    [20, 26],
    [27, 37],
  ],
  predicted_probs: { ATD: 0.8, NonATD: 0.2 },
};

const EXPLANATION: ExplanationPayload = {
  doc_id: "D-1",
  method: "shap",
  predicted: { ATD: 0.8, NonATD: 0.2 },
  base_value: 0.3,
  weights: [
    { token: "depend", index: 1, weight: 0.4, occurrences: [1, 3] },
    { token: "cyclic", index: 2, weight: -0.1, occurrences: [2] },
  ],
  config_hash: "h",
  target: "ATD",
  model_version: 1,
  tokens: DOC.tokens,
  spans: DOC.spans,
};

function storeInPhase(phase: string, withDoc = true): SessionStore {
  const store = new SessionStore(new ApiClient("http://x", (() => {}) as never));
  store.state = {
    ...store.state,
    phase: phase as never,
    batch: withDoc ? [DOC] : [],
    currentIndex: 0,
  };
  return store;
}

describe("renderDocPanel", () => {
  it("renders every occurrence of a collapsed token", () => {
    const panel = renderDocPanel(DOC, EXPLANATION);
    const marks = [...panel.querySelectorAll("mark")];
    const indices = marks.map((m) => Number((m as HTMLElement).dataset.tokenIndex));
    expect(indices.sort((a, b) => a - b)).toEqual([1, 2, 3]);
    expect(marks.map((m) => m.textContent)).toContain("cyclic");
  });

  it("uses plain text without an explanation", () => {
    const panel = renderDocPanel(DOC, null);
    expect(panel.querySelectorAll("mark")).toHaveLength(0);
    expect(panel.textContent).toContain("Refactor dependency");
  });

  it("ignores explanations for another document", () => {
    const panel = renderDocPanel({ ...DOC, id: "D-2" }, EXPLANATION);
    expect(panel.querySelectorAll("mark")).toHaveLength(0);
  });
});

describe("renderLabelControls", () => {
  it("buttons enabled while labeling", () => {
    const controls = renderLabelControls(storeInPhase("labeling"));
    const buttons = [...controls.querySelectorAll("button.label-btn")] as HTMLButtonElement[];
    expect(buttons).toHaveLength(3);
    expect(buttons.every((b) => !b.disabled)).toBe(true);
  });

  it("buttons disabled while a submission is in flight", () => {
    const controls = renderLabelControls(storeInPhase("submitting"));
    const buttons = [...controls.querySelectorAll("button")] as HTMLButtonElement[];
    expect(buttons.length).toBeGreaterThan(0);
    expect(buttons.every((b) => b.disabled)).toBe(true);
  });

  it("clicking a label records it with the maybe modifier", () => {
    const store = storeInPhase("labeling");
    const controls = renderLabelControls(store);
    const maybe = controls.querySelector("#maybe-toggle") as HTMLInputElement;
    maybe.checked = true;
    const atd = controls.querySelector("button.label-atd") as HTMLButtonElement;
    atd.click();
    expect(store.state.pending.get("D-1")).toEqual({
      doc_id: "D-1",
      label: "ATD",
      maybe_flag: true,
    });
  });
});

describe("renderProbabilityBar", () => {
  it("one chunk per class, widths from probabilities", () => {
    const bar = renderProbabilityBar({ ATD: 0.8, NonATD: 0.2 });
    const chunks = [...bar.querySelectorAll(".prob")] as HTMLElement[];
    expect(chunks).toHaveLength(2);
    expect(parseFloat(chunks[0].style.width)).toBeCloseTo(80, 5);
    expect(chunks[0].dataset.prob).toBe("0.8000");
  });

  it("placeholder before the first model", () => {
    const bar = renderProbabilityBar(undefined);
    expect(bar.textContent).toContain("no model yet");
  });
});

describe("renderCurve", () => {
  it("plots exactly the CSV rows with metrics", () => {
    const csv = [
      "iteration,labeled_count,precision,recall,f1",
      "1,10,0.5,0.5,0.5",
      "2,20,0.6,0.6,0.6",
    ].join("\n");
    const svg = renderCurve(csv);
    expect(svg.querySelectorAll("circle")).toHaveLength(2);
    const labels = [...svg.querySelectorAll("circle")].map((c) =>
      c.getAttribute("data-labeled"),
    );
    expect(labels).toEqual(["10", "20"]);
  });
});

describe("renderOfflineBanner", () => {
  it("absent unless offline", () => {
    expect(renderOfflineBanner(storeInPhase("labeling"))).toBeNull();
  });

  it("present with a retry control when offline", () => {
    const banner = renderOfflineBanner(storeInPhase("offline"));
    expect(banner).not.toBeNull();
    expect(banner!.querySelector("button.retry-btn")).not.toBeNull();
  });
});
