import { ApiClient } from "../api";
import { button, clear, el } from "../dom";
import type { ConceptGroup, Report } from "../types";

const METRIC_ROWS: [string, (r: Report["approaches"][string]) => string][] = [
  ["# of codes", (r) => String(r.codes)],
  ["# of groundedness issues", (r) => String(r.groundedness_issues)],
  ["# of overly broad", (r) => `${r.overly_broad} (${r.overly_broad_pct})`],
];

/** Comparison tables: per-approach counts, and the concept-group explorer. */
export class ReportView {
  readonly root = el("section.report");
  private report: Report | null = null;
  private concept: ConceptGroup | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onError: (err: unknown) => void,
  ) {}

  async refresh(keyword = ""): Promise<void> {
    try {
      this.report = await this.api.getReport();
      this.concept = keyword ? await this.api.getConceptGroup(keyword) : null;
    } catch (err) {
      this.onError(err);
      return;
    }
    this.render();
  }

  render(): void {
    clear(this.root);
    this.root.append(el("h2", "Evaluation report"));
    const report = this.report;
    if (!report) {
      this.root.append(el("p", "loading…"));
      return;
    }
    if (report.draft) {
      this.root.append(
        el("p.draft", "DRAFT — at least one approach is not finalized yet."),
      );
    }
    const approaches = Object.keys(report.approaches);
    const table = el("table.metrics") as HTMLTableElement;
    const head = table.createTHead().insertRow();
    head.append(el("th", ""));
    for (const a of approaches) head.append(el("th", a));
    const body = table.createTBody();
    for (const [title, cell] of METRIC_ROWS) {
      const row = body.insertRow();
      row.append(el("th", title));
      for (const a of approaches) row.append(el("td", cell(report.approaches[a])));
    }
    this.root.append(table);

    for (const a of approaches) {
      const flagged = report.approaches[a].flagged;
      const lists = el("div.flag-lists");
      for (const [flag, labels] of Object.entries(flagged)) {
        if (!labels.length) continue;
        lists.append(el("p.flag-list", `${a} / ${flag}: ${labels.join(", ")}`));
      }
      if (lists.childNodes.length) this.root.append(lists);
    }

    this.root.append(el("h3", "Concept explorer"));
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = "keyword, e.g. feedback";
    input.value = this.concept?.keyword ?? "";
    const go = button("Compare", () => void this.refresh(input.value.trim()), "primary");
    input.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") void this.refresh(input.value.trim());
    });
    this.root.append(el("div.concept-input", input, go));

    if (this.concept) {
      const sources = Object.keys(this.concept.members);
      const conceptTable = el("table.concepts") as HTMLTableElement;
      const conceptHead = conceptTable.createTHead().insertRow();
      for (const source of sources) {
        const counts = this.concept.members[source].length;
        conceptHead.append(el("th", `${source} (${counts})`));
      }
      const conceptBody = conceptTable.createTBody();
      const height = Math.max(...sources.map((s) => this.concept!.members[s].length), 0);
      for (let i = 0; i < height; i++) {
        const row = conceptBody.insertRow();
        for (const source of sources) {
          row.append(el("td", this.concept.members[source][i] ?? ""));
        }
      }
      this.root.append(conceptTable);
    }
  }
}
