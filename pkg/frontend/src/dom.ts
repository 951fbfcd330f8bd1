// DOM layer: renders the view model and wires keyboard + click handlers.

import { RenderModel, buildRenderModel, keyAction } from "./render.js";
import { SessionClient } from "./session.js";

const STATE_BADGES: Record<string, string> = {
  undecided: "",
  decided: "staged",
  submitting: "sending...",
  acknowledged: "saved",
  conflict: "conflict",
  failed: "failed",
};

export class QueueView {
  private cursor = 0;

  constructor(private root: HTMLElement, private client: SessionClient) {
    client.onChange(() => this.render());
    window.addEventListener("keydown", (event) => this.onKey(event));
  }

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName)) return;
    const action = keyAction(event.key);
    if (!action) return;
    event.preventDefault();
    const rows = this.client.rows;
    switch (action) {
      case "urgent":
      case "non_urgent":
        if (rows[this.cursor]) {
          this.client.decide(rows[this.cursor].message.id, action === "urgent" ? 1 : 0);
          this.cursor = Math.min(this.cursor + 1, rows.length - 1);
          this.render();
        }
        break;
      case "undo":
        if (rows[this.cursor]) {
          this.client.undo(rows[this.cursor].message.id);
          this.render();
        }
        break;
      case "next":
        this.cursor = Math.min(this.cursor + 1, rows.length - 1);
        this.render();
        break;
      case "prev":
        this.cursor = Math.max(this.cursor - 1, 0);
        this.render();
        break;
      case "submit":
        void this.client.submitAndAdvance().catch(() => this.render());
        break;
    }
  }

  render(): void {
    const model = buildRenderModel(this.client, this.cursor);
    if (this.cursor >= model.rows.length) this.cursor = Math.max(0, model.rows.length - 1);
    this.root.innerHTML = "";
    this.root.appendChild(this.header(model));
    if (model.banner) this.root.appendChild(this.banner(model.banner));
    if (model.phase === "complete") {
      this.root.appendChild(this.completion(model));
      return;
    }
    if (model.phase === "retraining") {
      const note = el("div", "retraining", "Retraining on your labels...");
      this.root.appendChild(note);
    }
    this.root.appendChild(this.table(model));
    this.root.appendChild(this.footer(model));
  }

  private header(model: RenderModel): HTMLElement {
    const header = el("div", "header");
    header.appendChild(
      el("div", "title",
         `Round ${model.round} - model v${model.modelVersion} - ` +
         `${model.labeledCount}/${model.targetTotal} labeled`),
    );
    const barOuter = el("div", "progress");
    const barInner = el("div", "progress-fill");
    barInner.style.width = `${Math.round(model.progressFraction * 100)}%`;
    barOuter.appendChild(barInner);
    header.appendChild(barOuter);
    return header;
  }

  private banner(text: string): HTMLElement {
    const banner = el("div", "banner", text + " ");
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", () => void this.client.refresh().catch(() => undefined));
    banner.appendChild(retry);
    return banner;
  }

  private completion(model: RenderModel): HTMLElement {
    const done = el("div", "complete");
    done.appendChild(el("p", "", `All ${model.targetTotal} messages labeled.`));
    const link = el("a", "export", "Download labeled set") as HTMLAnchorElement;
    if (model.exportUrl) link.href = model.exportUrl;
    link.setAttribute("download", "labeled.jsonl");
    done.appendChild(link);
    return done;
  }

  private table(model: RenderModel): HTMLElement {
    const list = el("ul", "queue");
    model.rows.forEach((row) => {
      const item = el("li", "row" + (row.cursor ? " cursor" : ""));
      const decide = el(
        "span",
        "decision " + (row.decision === null ? "" : row.decision === 1 ? "urgent" : "calm"),
        row.decision === null ? "?" : row.decision === 1 ? "URGENT" : "not urgent",
      );
      item.appendChild(decide);
      item.appendChild(el("span", "text", row.text));
      if (row.score !== null) {
        item.appendChild(el("span", "score", `p=${row.score.toFixed(2)}`));
      }
      const badge = STATE_BADGES[row.state];
      if (badge) item.appendChild(el("span", `badge ${row.state}`, badge));
      if (row.note) item.appendChild(el("span", "note", row.note));
      item.addEventListener("click", () => {
        this.cursor = model.rows.findIndex((r) => r.id === row.id);
        this.render();
      });
      list.appendChild(item);
    });
    return list;
  }

  private footer(model: RenderModel): HTMLElement {
    const footer = el("div", "footer");
    footer.appendChild(
      el("span", "hint", "u = urgent, n = not urgent, z = undo, enter = submit"),
    );
    const submit = el("button", "submit", "Submit labels") as HTMLButtonElement;
    submit.disabled = !model.canSubmit;
    submit.addEventListener("click", () => void this.client.submitAndAdvance().catch(() => this.render()));
    footer.appendChild(submit);
    return footer;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
