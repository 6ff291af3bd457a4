import { ApiClient, ApiError } from "./api";
import { button, clear, el } from "./dom";
import { ReviewSession } from "./session";
import { ReconcileView } from "./views/reconcile";
import { ReportView } from "./views/report";
import { ReviewView } from "./views/review";

interface Identity {
  rater: string;
  token: string;
}

const IDENTITY_KEY = "review-ui.identity";

function loadIdentity(): Identity | null {
  try {
    const raw = localStorage.getItem(IDENTITY_KEY);
    return raw ? (JSON.parse(raw) as Identity) : null;
  } catch {
    return null;
  }
}

/** Top-level app: sign-in, approach picker, and the three working views. */
class App {
  private readonly api = new ApiClient();
  private identity: Identity | null = loadIdentity();
  private approach: string | null = null;
  private view: ReviewView | null = null;
  private readonly errorBox = el("div.error-box");

  constructor(private readonly root: HTMLElement) {
    if (this.identity) this.api.setToken(this.identity.token);
  }

  start(): void {
    this.render();
  }

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
    this.errorBox.textContent = message;
    this.errorBox.classList.add("visible");
    setTimeout(() => this.errorBox.classList.remove("visible"), 6000);
  }

  private async signIn(name: string): Promise<void> {
    try {
      const body = await this.api.registerRater(name);
      this.identity = { rater: body.rater, token: body.token };
      this.api.setToken(body.token);
      localStorage.setItem(IDENTITY_KEY, JSON.stringify(this.identity));
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  private signOut(): void {
    this.identity = null;
    this.api.setToken(null);
    localStorage.removeItem(IDENTITY_KEY);
    this.approach = null;
    this.render();
  }

  private header(): HTMLElement {
    const head = el("header");
    head.append(el("h1", "Codebook review"));
    if (this.identity) {
      const nav = el("nav");
      nav.append(
        button("Codebooks", () => {
          this.approach = null;
          this.render();
        }),
        button("Report", () => void this.renderReport()),
        el("span.rater", this.identity.rater),
        button("Sign out", () => this.signOut()),
      );
      head.append(nav);
    }
    head.append(this.errorBox);
    return head;
  }

  private render(): void {
    this.view?.unmount();
    this.view = null;
    clear(this.root);
    this.root.append(this.header());
    if (!this.identity) {
      this.renderSignIn();
    } else if (!this.approach) {
      void this.renderPicker();
    } else {
      void this.renderReview(this.approach);
    }
  }

  private renderSignIn(): void {
    const box = el("section.signin");
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = "rater name";
    const go = button("Start reviewing", () => {
      if (input.value.trim()) void this.signIn(input.value.trim());
    }, "primary");
    input.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && input.value.trim()) void this.signIn(input.value.trim());
    });
    box.append(el("p", "Enter your rater name to begin."), input, go);
    this.root.append(box);
  }

  private async renderPicker(): Promise<void> {
    const box = el("section.picker", el("h2", "Choose a codebook"));
    try {
      const summaries = await this.api.listCodebooks();
      const mine = await this.api.getAnnotations(this.identity!.rater);
      const annotatedByApproach = new Map<string, number>();
      for (const a of mine.annotations) {
        annotatedByApproach.set(a.approach, (annotatedByApproach.get(a.approach) ?? 0) + 1);
      }
      for (const summary of summaries) {
        if (summary.approach === "human") continue; // reference column, not reviewed
        const done = mine.completed.includes(summary.approach);
        const annotated = annotatedByApproach.get(summary.approach) ?? 0;
        const row = el("div.pick-row");
        row.append(
          button(summary.approach, () => {
            this.approach = summary.approach;
            this.render();
          }, "pick"),
          el(
            "span.pick-status",
            `${summary.codes} codes — ${annotated}/${summary.codes} annotated${done ? " — completed" : ""}`,
          ),
          button("reconcile", () => void this.renderReconcile(summary.approach)),
        );
        box.append(row);
      }
    } catch (err) {
      this.showError(err);
    }
    this.root.append(box);
  }

  private async renderReview(approach: string): Promise<void> {
    const session = new ReviewSession(this.api, this.identity!.rater, approach);
    try {
      await session.refresh();
    } catch (err) {
      this.showError(err);
      return;
    }
    const view = new ReviewView(session, (err) => this.showError(err));
    this.view = view;
    this.root.append(view.root);
    view.mount();
  }

  private async renderReconcile(approach: string): Promise<void> {
    this.view?.unmount();
    this.view = null;
    clear(this.root);
    this.root.append(this.header());
    const view = new ReconcileView(
      this.api,
      approach,
      () => void this.renderReport(),
      (err) => this.showError(err),
    );
    this.root.append(view.root);
    await view.refresh();
  }

  private async renderReport(): Promise<void> {
    this.view?.unmount();
    this.view = null;
    clear(this.root);
    this.root.append(this.header());
    const view = new ReportView(this.api, (err) => this.showError(err));
    this.root.append(view.root);
    await view.refresh();
  }
}

const rootElement = document.getElementById("app");
if (rootElement) {
  new App(rootElement).start();
}
