// Assignment loop: fetch an item, render the two anonymized sequences and the
// four aspect questions, collect answers, submit, advance. Network failures
// show a retry banner without discarding anything the rater selected.

import type { Assignment, AspectView, RaterApi, SequenceView } from "./api.js";

export class RaterApp {
  private selections: Record<string, string> = {};
  private current: Assignment | null = null;
  private lastFailure: "next" | "submit" | null = null;
  completed = 0;

  constructor(
    private readonly api: RaterApi,
    private readonly rater: string,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    await this.fetchNext();
  }

  private async fetchNext(): Promise<void> {
    this.renderLoading();
    let assignment: Assignment;
    try {
      assignment = await this.api.next(this.rater);
    } catch (err) {
      this.lastFailure = "next";
      this.renderError(`Could not reach the rating service. ${String(err)}`);
      return;
    }
    if (assignment.done) {
      this.renderDone();
      return;
    }
    this.current = assignment;
    this.selections = {};
    this.renderAssignment(assignment);
  }

  async retry(): Promise<void> {
    if (this.lastFailure === "submit") {
      this.clearBanner();
      await this.submit();
    } else {
      await this.fetchNext();
    }
  }

  allAnswered(): boolean {
    const aspects = this.current?.aspects ?? [];
    return aspects.length > 0 && aspects.every((a) => this.selections[a.key]);
  }

  async submit(): Promise<void> {
    if (!this.current || !this.allAnswered()) {
      return;
    }
    const button = this.submitButton();
    if (button) {
      button.disabled = true;
      button.textContent = "Submitting...";
    }
    let status: string;
    try {
      const result = await this.api.submit(
        this.current.item_id as string,
        this.rater,
        { ...this.selections },
      );
      status = result.status;
    } catch (err) {
      // keep the rendered form and every selection; just offer a retry
      this.lastFailure = "submit";
      this.showBanner(`Submission failed. ${String(err)}`);
      if (button) {
        button.disabled = false;
        button.textContent = "Submit ratings";
      }
      return;
    }
    if (status === "stored") {
      this.completed += 1;
    }
    // "duplicate" means this item was already rated: skip forward silently
    this.lastFailure = null;
    await this.fetchNext();
  }

  // ---- rendering ---------------------------------------------------------

  private submitButton(): HTMLButtonElement | null {
    return this.root.querySelector<HTMLButtonElement>('[data-testid="submit"]');
  }

  private renderLoading(): void {
    this.root.innerHTML =
      '<p class="status" data-testid="status">Loading next assignment...</p>';
  }

  private renderDone(): void {
    this.root.innerHTML =
      '<div class="done" data-testid="done"><h2>All done</h2>' +
      `<p>You completed ${this.completed} assignment(s). Thank you!</p></div>`;
  }

  private renderError(message: string): void {
    this.root.innerHTML =
      '<div class="banner" data-testid="error-banner"></div>' +
      '<button type="button" data-testid="retry">Retry</button>';
    const banner = this.root.querySelector('[data-testid="error-banner"]');
    if (banner) {
      banner.textContent = message;
    }
    this.root
      .querySelector<HTMLButtonElement>('[data-testid="retry"]')
      ?.addEventListener("click", () => void this.retry());
  }

  private showBanner(message: string): void {
    let banner = this.root.querySelector<HTMLElement>('[data-testid="error-banner"]');
    if (!banner) {
      banner = document.createElement("div");
      banner.className = "banner";
      banner.setAttribute("data-testid", "error-banner");
      const retry = document.createElement("button");
      retry.type = "button";
      retry.setAttribute("data-testid", "retry");
      retry.textContent = "Retry";
      retry.addEventListener("click", () => void this.retry());
      this.root.prepend(retry);
      this.root.prepend(banner);
    }
    banner.textContent = message;
  }

  private clearBanner(): void {
    this.root.querySelector('[data-testid="error-banner"]')?.remove();
    this.root.querySelector('[data-testid="retry"]')?.remove();
  }

  private renderAssignment(assignment: Assignment): void {
    this.root.innerHTML = "";
    const header = document.createElement("header");
    const title = document.createElement("h2");
    title.setAttribute("data-testid", "goal-title");
    title.textContent = `Task: ${assignment.goal_title ?? ""}`;
    const instruction = document.createElement("p");
    instruction.className = "instruction";
    instruction.setAttribute("data-testid", "instruction");
    instruction.textContent = assignment.instruction ?? "";
    header.append(title, instruction);
    this.root.append(header);

    const columns = document.createElement("div");
    columns.className = "sequences";
    for (const sequence of assignment.sequences ?? []) {
      columns.append(this.renderSequence(sequence));
    }
    this.root.append(columns);

    const form = document.createElement("form");
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
    for (const aspect of assignment.aspects ?? []) {
      form.append(this.renderAspect(aspect));
    }
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.setAttribute("data-testid", "submit");
    submit.textContent = "Submit ratings";
    submit.disabled = true;
    form.append(submit);
    this.root.append(form);
  }

  private renderSequence(sequence: SequenceView): HTMLElement {
    const column = document.createElement("section");
    column.className = "sequence";
    column.setAttribute("data-testid", "sequence");
    const heading = document.createElement("h3");
    heading.textContent = sequence.label;
    column.append(heading);
    const list = document.createElement("ol");
    for (const step of sequence.steps) {
      const row = document.createElement("li");
      row.className = "step";
      row.setAttribute("data-testid", "step");
      if (step.image_url) {
        const image = document.createElement("img");
        image.src = step.image_url;
        image.alt = "step illustration";
        row.append(image);
      }
      const text = document.createElement("p");
      text.textContent = step.text;
      row.append(text);
      list.append(row);
    }
    column.append(list);
    return column;
  }

  private renderAspect(aspect: AspectView): HTMLElement {
    const fieldset = document.createElement("fieldset");
    fieldset.setAttribute("data-testid", `aspect-${aspect.key}`);
    const legend = document.createElement("legend");
    legend.textContent = aspect.prompt;
    fieldset.append(legend);
    for (const option of aspect.options) {
      const label = document.createElement("label");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = aspect.key;
      radio.value = option.value;
      radio.addEventListener("change", () => {
        this.selections[aspect.key] = option.value;
        const button = this.submitButton();
        if (button) {
          button.disabled = !this.allAnswered();
        }
      });
      label.append(radio, document.createTextNode(` ${option.label}`));
      fieldset.append(label);
    }
    return fieldset;
  }
}
