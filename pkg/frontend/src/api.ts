// Typed client for the rating service REST API. The UI consumes exactly the
// endpoints the service documents: next assignment + rating submission.

export interface StepView {
  text: string;
  image_url: string | null;
}

export interface SequenceView {
  label: string;
  steps: StepView[];
}

export interface AspectOption {
  value: string;
  label: string;
}

export interface AspectView {
  key: string;
  prompt: string;
  options: AspectOption[];
}

export interface Assignment {
  done: boolean;
  item_id?: string;
  goal_title?: string;
  instruction?: string;
  sequences?: SequenceView[];
  aspects?: AspectView[];
}

export interface SubmitResult {
  status: string;
}

export class RaterApi {
  constructor(readonly baseUrl: string, readonly sessionId: string) {}

  private url(path: string): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(this.sessionId)}${path}`;
  }

  async next(rater: string): Promise<Assignment> {
    const res = await fetch(this.url(`/next?rater=${encodeURIComponent(rater)}`));
    if (!res.ok) {
      throw new Error(`assignment fetch failed (${res.status})`);
    }
    return (await res.json()) as Assignment;
  }

  async submit(
    itemId: string,
    rater: string,
    choices: Record<string, string>,
  ): Promise<SubmitResult> {
    const res = await fetch(this.url(`/ratings`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ item_id: itemId, rater, choices }),
    });
    if (!res.ok) {
      throw new Error(`rating submission failed (${res.status})`);
    }
    return (await res.json()) as SubmitResult;
  }
}
