// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import type { ApiClient } from "../api";
import { ReviewSession } from "../session";
import type { CodeEntry, Flag } from "../types";
import { ReviewView } from "./review";

function code(label: string, examples = 1): CodeEntry {
  return {
    label,
    normalized: label,
    definition: label === "alpha" ? "a definition" : null,
    examples: Array.from({ length: examples }, (_, i) => ({
      id: `2-${i}`,
      role: "Designer",
      content: `example content ${i}`,
    })),
    flags: { verb_nonconforming: false },
  };
}

class StubApi {
  annotations = new Map<string, Flag[]>();
  completed: string[] = [];

  async getCodebook(approach: string) {
    return {
      schema: "codebook/v1",
      approach,
      codes: [code("alpha", 2), code("beta", 0), code("gamma")],
    };
  }

  async getAnnotations() {
    return {
      rater: "alex",
      completed: this.completed,
      annotations: [...this.annotations].map(([label, flags]) => ({
        approach: "topic",
        label,
        flags,
        note: "",
      })),
    };
  }

  async putAnnotation(_r: string, _a: string, label: string, flags: Flag[]) {
    this.annotations.set(label, flags);
    return {};
  }

  async complete() {
    this.completed.push("topic");
    return {};
  }
}

async function mounted() {
  const stub = new StubApi();
  const session = new ReviewSession(stub as unknown as ApiClient, "alex", "topic");
  await session.refresh();
  const errors: unknown[] = [];
  const view = new ReviewView(session, (e) => errors.push(e));
  document.body.replaceChildren(view.root);
  view.mount();
  return { stub, session, view, errors };
}

function flagButton(root: HTMLElement, flag: Flag): HTMLButtonElement {
  const node = root.querySelector(`button[data-flag="${flag}"]`);
  if (!(node instanceof HTMLButtonElement)) throw new Error("missing flag button");
  return node;
}

function buttonByText(root: HTMLElement, text: string): HTMLButtonElement {
  const node = [...root.querySelectorAll("button")].find((b) =>
    b.textContent?.includes(text),
  );
  if (!node) throw new Error(`no button containing ${text}`);
  return node;
}

describe("ReviewView", () => {
  it("shows one code per screen with label, definition, and examples", async () => {
    const { view } = await mounted();
    expect(view.root.querySelector(".code-label")?.textContent).toBe("alpha");
    expect(view.root.querySelector(".code-definition")?.textContent).toBe("a definition");
    const examples = view.root.querySelectorAll(".example");
    expect(examples).toHaveLength(2);
    expect(examples[0].textContent).toBe("2-0: Designer: example content 0");
  });

  it("toggling a flag highlights it and saving persists it", async () => {
    const { stub, view } = await mounted();
    flagButton(view.root, "overly_broad").click();
    expect(flagButton(view.root, "overly_broad").classList.contains("on")).toBe(true);
    buttonByText(view.root, "Save & next").click();
    await Promise.resolve();
    expect(stub.annotations.get("alpha")).toEqual(["overly_broad"]);
  });

  it("progress bar counts annotated codes", async () => {
    const { view, session } = await mounted();
    expect(view.root.querySelector(".progress-text")?.textContent).toBe("0/3 annotated");
    await session.saveAndNext();
    view.render();
    expect(view.root.querySelector(".progress-text")?.textContent).toBe("1/3 annotated");
  });

  it("keyboard g/b toggle flags and arrows navigate", async () => {
    const { view, session } = await mounted();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "g" }));
    expect(session.currentFlags()).toEqual(["groundedness_issue"]);
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "ArrowRight" }));
    expect(session.cursor).toBe(1);
    expect(view.root.querySelector(".code-label")?.textContent).toBe("beta");
    expect(view.root.querySelector(".example-empty")).not.toBeNull();
  });

  it("completion disables the controls with an explanation", async () => {
    const { view, session } = await mounted();
    for (let i = 0; i < 3; i++) await session.saveAndNext();
    await session.markComplete();
    view.render();
    expect(flagButton(view.root, "overly_broad").disabled).toBe(true);
    expect(buttonByText(view.root, "Save & next").disabled).toBe(true);
    expect(view.root.querySelector(".locked")?.textContent).toMatch(/complete/);
  });

  it("complete button stays disabled until everything is annotated", async () => {
    const { view, session } = await mounted();
    expect(buttonByText(view.root, "Mark approach complete").disabled).toBe(true);
    for (let i = 0; i < 3; i++) await session.saveAndNext();
    view.render();
    expect(buttonByText(view.root, "Mark approach complete").disabled).toBe(false);
  });
});
