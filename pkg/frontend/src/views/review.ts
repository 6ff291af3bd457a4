import { button, clear, el } from "../dom";
import { reviewKeydownHandler } from "../keyboard";
import type { ReviewSession } from "../session";
import { FLAG_LABELS, type Flag } from "../types";

/**
 * One code per screen: label, definition when present, every example with
 * its message id and speaker, flag toggles, and a progress bar. "Save &
 * next" records the current flag set (an empty set means "reviewed, no
 * issues"); completing the approach locks further edits.
 */
export class ReviewView {
  readonly root = el("section.review");
  private keyHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly session: ReviewSession,
    private readonly onError: (err: unknown) => void,
    private readonly onChanged: () => void = () => {},
  ) {}

  mount(): void {
    this.keyHandler = reviewKeydownHandler({
      toggleGroundedness: () => this.toggle("groundedness_issue"),
      toggleBroad: () => this.toggle("overly_broad"),
      saveAndNext: () => void this.saveAndNext(),
      next: () => {
        this.session.move(1);
        this.render();
      },
      prev: () => {
        this.session.move(-1);
        this.render();
      },
    });
    document.addEventListener("keydown", this.keyHandler);
    this.render();
  }

  unmount(): void {
    if (this.keyHandler) document.removeEventListener("keydown", this.keyHandler);
    this.keyHandler = null;
  }

  private toggle(flag: Flag): void {
    this.session.toggleFlag(flag);
    this.render();
  }

  private async saveAndNext(): Promise<void> {
    try {
      await this.session.saveAndNext();
      this.onChanged();
    } catch (err) {
      this.onError(err);
    }
    this.render();
  }

  private async complete(): Promise<void> {
    try {
      await this.session.markComplete();
      this.onChanged();
    } catch (err) {
      this.onError(err);
    }
    this.render();
  }

  render(): void {
    clear(this.root);
    const session = this.session;
    const code = session.current;
    if (!code) {
      this.root.append(el("p", "This codebook is empty."));
      return;
    }

    const progress = el("div.progress");
    const bar = el("div.progress-bar");
    bar.style.width = session.total
      ? `${(100 * session.annotatedCount) / session.total}%`
      : "0";
    progress.append(bar);
    this.root.append(
      el(
        "div.progress-line",
        progress,
        el("span.progress-text", `${session.annotatedCount}/${session.total} annotated`),
      ),
    );

    const card = el("article.code-card");
    card.append(
      el("div.code-position", `Code ${session.cursor + 1} of ${session.total}`),
      el("h2.code-label", code.label),
    );
    if (code.definition) card.append(el("p.code-definition", code.definition));
    if (code.flags.verb_nonconforming) {
      card.append(el("p.badge", "not a verb phrase"));
    }
    const examples = el("ul.examples");
    if (code.examples.length === 0) {
      examples.append(el("li.example-empty", "no examples recorded for this code"));
    }
    for (const example of code.examples) {
      examples.append(
        el(
          "li.example",
          el("span.example-id", `${example.id}: ${example.role}: `),
          el("span.example-content", example.content),
        ),
      );
    }
    card.append(examples);

    const flags = session.currentFlags();
    const toggles = el("div.flag-toggles");
    (Object.keys(FLAG_LABELS) as Flag[]).forEach((flag) => {
      const toggle = button(
        FLAG_LABELS[flag],
        () => this.toggle(flag),
        flags.includes(flag) ? "flag on" : "flag",
      );
      toggle.dataset.flag = flag;
      toggle.disabled = session.completed;
      toggles.append(toggle);
    });
    card.append(toggles);

    const controls = el("div.controls");
    const prev = button("← Prev", () => {
      session.move(-1);
      this.render();
    });
    const next = button("Next →", () => {
      session.move(1);
      this.render();
    });
    const save = button("Save & next (Enter)", () => void this.saveAndNext(), "primary");
    save.disabled = session.completed;
    controls.append(prev, save, next);
    card.append(controls);

    if (session.completed) {
      card.append(
        el("p.locked", "You marked this approach complete; flags are frozen."),
      );
    } else {
      const complete = button(
        "Mark approach complete",
        () => void this.complete(),
        "complete",
      );
      complete.disabled = !session.canComplete;
      complete.title = session.canComplete
        ? "Freeze your annotations for this approach"
        : "Annotate every code first";
      card.append(complete);
    }
    this.root.append(card);
  }
}
