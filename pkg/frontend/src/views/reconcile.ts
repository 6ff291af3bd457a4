import { ApiClient, ApiError } from "../api";
import { button, clear, el } from "../dom";
import { FLAG_LABELS, type Disagreement, type Flag } from "../types";

/**
 * Disagreement queue for one approach: each card shows both raters' flags
 * and notes side by side; the resolver picks the final flags and a note.
 * Resolved items leave the queue; a 409 (someone else resolved it first)
 * triggers a refetch. An empty queue unlocks the report.
 */
export class ReconcileView {
  readonly root = el("section.reconcile");
  private queue: Disagreement[] = [];
  private selection = new Set<Flag>();
  private note = "";

  constructor(
    private readonly api: ApiClient,
    private readonly approach: string,
    private readonly onEmpty: () => void,
    private readonly onError: (err: unknown) => void,
  ) {}

  async refresh(): Promise<void> {
    try {
      const body = await this.api.getDisagreements(this.approach);
      this.queue = body.disagreements.filter((d) => !d.resolved);
      this.selection = new Set();
      this.note = "";
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        this.queue = [];
        this.renderWaiting(err.message);
        return;
      }
      this.onError(err);
      return;
    }
    this.render();
    if (this.queue.length === 0) this.onEmpty();
  }

  private renderWaiting(message: string): void {
    clear(this.root);
    this.root.append(
      el("h2", "Reconciliation"),
      el("p.waiting", `Not ready: ${message}`),
    );
  }

  private async resolve(item: Disagreement): Promise<void> {
    try {
      await this.api.postReconciliation(
        this.approach,
        item.label,
        [...this.selection].sort(),
        this.note,
      );
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        // somebody resolved it concurrently: refetch and carry on
        await this.refresh();
        return;
      }
      this.onError(err);
      return;
    }
    await this.refresh();
  }

  render(): void {
    clear(this.root);
    this.root.append(
      el("h2", `Reconciliation — ${this.approach}`),
      el("p.queue-count", `${this.queue.length} disagreement(s) left`),
    );
    const item = this.queue[0];
    if (!item) {
      this.root.append(el("p.done", "Queue empty: the report is unlocked."));
      return;
    }
    const card = el("article.disagreement-card");
    card.append(el("h3.code-label", item.label));

    const sides = el("div.sides");
    for (const [rater, flags] of Object.entries(item.rater_flags)) {
      const side = el("div.side");
      side.append(el("h4", rater));
      side.append(
        el(
          "p.side-flags",
          flags.length ? flags.map((f) => FLAG_LABELS[f]).join(", ") : "no flags",
        ),
      );
      const note = item.notes[rater];
      if (note) side.append(el("p.side-note", note));
      sides.append(side);
    }
    card.append(sides);

    const picker = el("div.flag-toggles");
    (Object.keys(FLAG_LABELS) as Flag[]).forEach((flag) => {
      const toggle = button(
        FLAG_LABELS[flag],
        () => {
          if (this.selection.has(flag)) this.selection.delete(flag);
          else this.selection.add(flag);
          this.render();
        },
        this.selection.has(flag) ? "flag on" : "flag",
      );
      toggle.dataset.flag = flag;
      picker.append(toggle);
    });
    card.append(el("p", "Final flags:"), picker);

    const note = document.createElement("input");
    note.type = "text";
    note.placeholder = "resolution note";
    note.value = this.note;
    note.addEventListener("input", () => {
      this.note = note.value;
    });
    card.append(note);

    card.append(button("Resolve", () => void this.resolve(item), "primary"));
    this.root.append(card);
  }
}
