import { ApiClient } from "./api";
import type { CodeEntry, Flag } from "./types";

/**
 * One rater's pass over one approach's codebook. The session holds only
 * navigation state (cursor, local toggle of the current card); annotations
 * and completion live on the server, and refresh() rebuilds everything from
 * it, so reloading the page reproduces exactly the server's state.
 */
export class ReviewSession {
  codes: CodeEntry[] = [];
  cursor = 0;
  completed = false;
  /** server-side flags per normalized label (only annotated codes appear) */
  recorded = new Map<string, Flag[]>();
  /** unsaved toggles on the current card */
  private draft: Set<Flag> | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly rater: string,
    readonly approach: string,
  ) {}

  async refresh(): Promise<void> {
    const [codebook, mine] = await Promise.all([
      this.api.getCodebook(this.approach),
      this.api.getAnnotations(this.rater, this.approach),
    ]);
    this.codes = codebook.codes;
    this.recorded = new Map(mine.annotations.map((a) => [a.label, a.flags]));
    this.completed = mine.completed.includes(this.approach);
    this.draft = null;
    const firstPending = this.codes.findIndex((c) => !this.recorded.has(c.normalized));
    this.cursor = firstPending === -1 ? 0 : firstPending;
  }

  get current(): CodeEntry | undefined {
    return this.codes[this.cursor];
  }

  get total(): number {
    return this.codes.length;
  }

  get annotatedCount(): number {
    return this.codes.filter((c) => this.recorded.has(c.normalized)).length;
  }

  /** Flags shown on the current card: the unsaved draft, else the saved set. */
  currentFlags(): Flag[] {
    if (this.draft) return [...this.draft].sort();
    const code = this.current;
    if (!code) return [];
    return [...(this.recorded.get(code.normalized) ?? [])].sort();
  }

  toggleFlag(flag: Flag): void {
    if (this.completed) return;
    if (!this.draft) this.draft = new Set(this.currentFlags());
    if (this.draft.has(flag)) this.draft.delete(flag);
    else this.draft.add(flag);
  }

  /** Persist the current card's flags (possibly empty) and advance. */
  async saveAndNext(): Promise<void> {
    const code = this.current;
    if (!code || this.completed) return;
    const flags = this.currentFlags();
    await this.api.putAnnotation(this.rater, this.approach, code.normalized, flags);
    this.recorded.set(code.normalized, flags);
    this.draft = null;
    if (this.cursor < this.codes.length - 1) this.cursor += 1;
  }

  move(delta: number): void {
    const next = this.cursor + delta;
    if (next >= 0 && next < this.codes.length) {
      this.cursor = next;
      this.draft = null;
    }
  }

  get canComplete(): boolean {
    return !this.completed && this.annotatedCount === this.total && this.total > 0;
  }

  async markComplete(): Promise<void> {
    if (!this.canComplete) throw new Error("annotate every code before completing");
    await this.api.complete(this.rater, this.approach);
    this.completed = true;
    this.draft = null;
  }
}
